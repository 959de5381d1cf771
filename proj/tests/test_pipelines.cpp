#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "gwsearch/datagen.hpp"
#include "gwsearch/dsl.hpp"
#include "gwsearch/pipelines.hpp"

using namespace gwsearch;

namespace {

datagen::StrainDataset make_dataset(double duration_s, std::uint64_t seed,
                                    std::vector<datagen::InjectionRecord> injections) {
  datagen::AnalyticPsd model;
  datagen::ChirpConfig chirp;
  auto noise = datagen::generate_noise(duration_s, 2048.0, model, seed, 0.0);
  return datagen::render_dataset(noise, std::move(injections), 500.0, seed, model, chirp);
}

bool same_catalog(const pipelines::DetectionCatalog& a, const pipelines::DetectionCatalog& b) {
  return a.times == b.times && a.stats == b.stats && a.vars == b.vars;
}

}  // namespace

TEST_CASE("zero strain yields an empty catalog from both pipelines", "[pipelines]") {
  dsp::SampledSeries z;
  z.dt = 1.0 / 2048.0;
  z.samples.assign(2048 * 30, 0.0);
  auto z2 = z;
  CHECK(pipelines::seed_pipeline(z, z2).size() == 0);
  CHECK(pipelines::elite_pipeline(z, z2).size() == 0);
}

TEST_CASE("seed pipeline on pure noise clusters near the metric median", "[pipelines]") {
  auto ds = make_dataset(60.0, 4, {});
  const auto cat = pipelines::seed_pipeline(ds.h1, ds.l1);
  REQUIRE(cat.size() > 0);
  const double med = dsp::median(cat.stats);
  for (double s : cat.stats) {
    CHECK(s <= 10.0 * med);
  }
  for (double v : cat.vars) CHECK(v == 10.0);
}

TEST_CASE("seed pipeline recovers a loud injected chirp within 10 s", "[pipelines]") {
  datagen::InjectionRecord inj;
  inj.t_coal = 31.0;
  inj.distance = 50.0;
  inj.chirp_mass = 25.0;
  auto ds = make_dataset(60.0, 5, {inj});
  REQUIRE(ds.injections[0].snr_opt > 25.0);
  const auto cat = pipelines::seed_pipeline(ds.h1, ds.l1);
  bool found = false;
  for (double t : cat.times) {
    if (std::fabs(t - inj.t_coal) <= 10.0) found = true;
  }
  CHECK(found);
}

TEST_CASE("elite pipeline detects a loud chirp above matched-length noise stats", "[pipelines]") {
  datagen::InjectionRecord inj;
  inj.t_coal = 150.0;
  inj.distance = 100.0;
  inj.chirp_mass = 25.0;
  auto fg = make_dataset(300.0, 6, {inj});
  auto bg = make_dataset(300.0, 6, {});
  REQUIRE(fg.injections[0].snr_opt > 100.0);

  const auto fg_cat = pipelines::elite_pipeline(fg.h1, fg.l1);
  const auto bg_cat = pipelines::elite_pipeline(bg.h1, bg.l1);
  double bg_max = 0.0;
  for (double s : bg_cat.stats) bg_max = std::max(bg_max, s);

  double best = -1.0;
  for (std::size_t i = 0; i < fg_cat.size(); ++i) {
    if (std::fabs(fg_cat.times[i] - inj.t_coal) <= fg_cat.vars[i]) {
      best = std::max(best, fg_cat.stats[i]);
    }
  }
  REQUIRE(best > 0.0);
  CHECK(best > bg_max);
}

TEST_CASE("pipelines are deterministic across executions", "[pipelines]") {
  datagen::InjectionRecord inj;
  inj.t_coal = 40.0;
  inj.distance = 120.0;
  inj.chirp_mass = 30.0;
  auto ds = make_dataset(80.0, 7, {inj});
  CHECK(same_catalog(pipelines::seed_pipeline(ds.h1, ds.l1),
                     pipelines::seed_pipeline(ds.h1, ds.l1)));
  CHECK(same_catalog(pipelines::elite_pipeline(ds.h1, ds.l1),
                     pipelines::elite_pipeline(ds.h1, ds.l1)));
}

TEST_CASE("common power-of-two scaling leaves seed peak times unchanged", "[pipelines]") {
  auto ds = make_dataset(60.0, 8, {});
  const auto base = pipelines::seed_pipeline(ds.h1, ds.l1);
  for (double scale : {2.0, 0.25}) {
    auto h = ds.h1;
    auto l = ds.l1;
    for (auto& v : h.samples) v *= scale;
    for (auto& v : l.samples) v *= scale;
    const auto scaled = pipelines::seed_pipeline(h, l);
    CHECK(scaled.times == base.times);
  }
}

TEST_CASE("disabling the curvature veto yields a superset of elite peak times", "[pipelines]") {
  datagen::InjectionRecord inj;
  inj.t_coal = 75.0;
  inj.distance = 150.0;
  inj.chirp_mass = 20.0;
  auto ds = make_dataset(150.0, 9, {inj});
  const auto d1 = pipelines::detrend_median(ds.h1, 101);
  const auto d2 = pipelines::detrend_median(ds.l1, 101);
  const auto w1 = pipelines::whiten_adaptive_stage(d1, pipelines::WhitenAdaptiveParams{});
  const auto w2 = pipelines::whiten_adaptive_stage(d2, pipelines::WhitenAdaptiveParams{});
  const auto metric = pipelines::metric_coherent(w1, w2, pipelines::MetricCoherentParams{});

  pipelines::TriggerMultiresParams with_veto;
  pipelines::TriggerMultiresParams no_veto;
  no_veto.curvature_veto = false;
  const auto vetoed = pipelines::trigger_multires(metric, with_veto);
  const auto open = pipelines::trigger_multires(metric, no_veto);
  REQUIRE(open.size() >= vetoed.size());
  const std::set<double> open_times(open.times.begin(), open.times.end());
  for (double t : vetoed.times) {
    CHECK(open_times.count(t) == 1);
  }
}

TEST_CASE("catalogs always satisfy the three-array invariant", "[pipelines]") {
  auto ds = make_dataset(60.0, 10, {});
  for (const auto& cat : {pipelines::seed_pipeline(ds.h1, ds.l1),
                          pipelines::elite_pipeline(ds.h1, ds.l1)}) {
    REQUIRE_NOTHROW(cat.validate());
    for (double t : cat.times) {
      CHECK(t >= ds.h1.t0);
      CHECK(t <= ds.h1.time_at(ds.h1.size() - 1) + 1.0);
    }
  }
}

TEST_CASE("segment shorter than the Welch window is an evaluation error", "[pipelines]") {
  dsp::SampledSeries s;
  s.dt = 1.0 / 2048.0;
  s.samples.assign(2048, 0.1);  // 1 s < 4096 samples
  auto s2 = s;
  CHECK_THROWS_AS(pipelines::seed_pipeline(s, s2), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// DSL
// ---------------------------------------------------------------------------

TEST_CASE("canonical DSL encodings reproduce the reference pipelines bit-exactly", "[pipelines]") {
  datagen::InjectionRecord inj;
  inj.t_coal = 60.0;
  inj.distance = 150.0;
  inj.chirp_mass = 22.0;
  auto ds = make_dataset(120.0, 11, {inj});
  const auto seed_prog = dsl::parse_dsl(dsl::seed_dsl_text());
  const auto elite_prog = dsl::parse_dsl(dsl::elite_dsl_text());
  CHECK(same_catalog(dsl::run_dsl(seed_prog, ds.h1, ds.l1),
                     pipelines::seed_pipeline(ds.h1, ds.l1)));
  CHECK(same_catalog(dsl::run_dsl(elite_prog, ds.h1, ds.l1),
                     pipelines::elite_pipeline(ds.h1, ds.l1)));
}

TEST_CASE("the explicit elite encoding with defaults matches elite_pipeline", "[pipelines]") {
  const std::string text =
      "detrend_median(kernel=101)\n"
      "whiten_adaptive(default)\n"
      "metric_coherent(default)\n"
      "trigger_multires(default)\n";
  auto ds = make_dataset(60.0, 12, {});
  const auto prog = dsl::parse_dsl(text);
  CHECK(same_catalog(dsl::run_dsl(prog, ds.h1, ds.l1), pipelines::elite_pipeline(ds.h1, ds.l1)));
}

TEST_CASE("DSL parse errors carry the violated constraint", "[pipelines]") {
  CHECK_THROWS_WITH(dsl::parse_dsl("detrend_median(kernel=100)\nwhiten_welch()\n"
                                   "metric_meanpower()\ntrigger_basic()\n"),
                    Catch::Matchers::ContainsSubstring("must be odd"));
  CHECK_THROWS_WITH(dsl::parse_dsl("whiten_welch()\nmetric_meanpower()\n"),
                    Catch::Matchers::ContainsSubstring("missing trigger stage"));
  CHECK_THROWS_WITH(dsl::parse_dsl("whiten_welch()\ntrigger_basic()\n"),
                    Catch::Matchers::ContainsSubstring("missing metric stage"));
  CHECK_THROWS_WITH(dsl::parse_dsl("whiten_welch(1)"),
                    Catch::Matchers::ContainsSubstring("expected key=value"));
  CHECK_THROWS_WITH(dsl::parse_dsl("bogus_stage()\n"),
                    Catch::Matchers::ContainsSubstring("unknown stage"));
  CHECK_THROWS_WITH(dsl::parse_dsl("whiten_welch(nperseg=256, noverlap=512)\n"
                                   "metric_meanpower()\ntrigger_basic()\n"),
                    Catch::Matchers::ContainsSubstring("noverlap must be < nperseg"));
}

TEST_CASE("DSL comments and whitespace are ignored", "[pipelines]") {
  const std::string text =
      "# candidate pipeline\n"
      "  detrend_none()   # no detrending\n"
      "whiten_welch( nperseg=4096 , noverlap=2048, smooth_kernel=32 )\n"
      "metric_meanpower(nperseg=256, noverlap=128)\n"
      "trigger_basic(height_factor=1, distance=2, prominence_factor=0.3, var_fixed=10)\n";
  const auto prog = dsl::parse_dsl(text);
  CHECK(prog.stages.size() == 4);
  CHECK(dsl::canonical_text(prog) == dsl::canonical_text(dsl::parse_dsl(dsl::seed_dsl_text())));
}

TEST_CASE("a lower prominence factor yields at least as many triggers", "[pipelines]") {
  auto ds = make_dataset(60.0, 13, {});
  auto with_factor = [&](double f) {
    const std::string text =
        "whiten_welch()\nmetric_meanpower()\n"
        "trigger_basic(height_factor=1, distance=2, prominence_factor=" +
        std::to_string(f) + ", var_fixed=10)\n";
    return dsl::run_dsl(dsl::parse_dsl(text), ds.h1, ds.l1).size();
  };
  const auto none = with_factor(0.0);
  const auto some = with_factor(0.3);
  CHECK(none > some);
}

TEST_CASE("run_dsl is pure", "[pipelines]") {
  auto ds = make_dataset(60.0, 14, {});
  const auto prog = dsl::parse_dsl(dsl::seed_dsl_text());
  CHECK(same_catalog(dsl::run_dsl(prog, ds.h1, ds.l1), dsl::run_dsl(prog, ds.h1, ds.l1)));
}
