#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "gwsearch/datagen.hpp"
#include "gwsearch/dsp.hpp"
#include "gwsearch/io.hpp"

using namespace gwsearch;

TEST_CASE("noise generation is bit-reproducible from the seed", "[datagen]") {
  datagen::AnalyticPsd model;
  const auto a = datagen::generate_noise(30.0, 2048.0, model, 99, 5.0);
  const auto b = datagen::generate_noise(30.0, 2048.0, model, 99, 5.0);
  CHECK(a.first.samples == b.first.samples);
  CHECK(a.second.samples == b.second.samples);
  CHECK(a.first.t0 == 5.0);
}

TEST_CASE("measured Welch PSD of generated noise matches the requested model", "[datagen]") {
  datagen::AnalyticPsd model;
  const auto noise = datagen::generate_noise(120.0, 2048.0, model, 7, 0.0);
  const auto est = dsp::welch_psd(noise.first, 4096, 2048);
  // band-averaged ratio in octave bands away from the edges
  for (double f_lo : {16.0, 64.0, 256.0}) {
    const double f_hi = 2.0 * f_lo;
    double measured = 0.0, expected = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < est.freqs.size(); ++k) {
      if (est.freqs[k] < f_lo || est.freqs[k] > f_hi) continue;
      measured += est.psd[k];
      expected += model(est.freqs[k]);
      ++count;
    }
    REQUIRE(count > 10);
    CHECK(measured / expected == Catch::Approx(1.0).epsilon(0.10));
  }
}

TEST_CASE("the two channels are uncorrelated", "[datagen]") {
  datagen::AnalyticPsd model;
  const auto noise = datagen::generate_noise(60.0, 2048.0, model, 3, 0.0);
  const auto& x = noise.first.samples;
  const auto& y = noise.second.samples;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  CHECK(std::fabs(sxy / std::sqrt(sxx * syy)) < 0.05);
}

TEST_CASE("injection distances follow the cube law", "[datagen]") {
  const auto injections = datagen::generate_injections(10000, 100.0, 1.0e6, 21);
  std::size_t below = 0;
  for (const auto& inj : injections) {
    if (inj.distance <= 50.0) ++below;
  }
  CHECK(static_cast<double>(below) / 10000.0 == Catch::Approx(0.125).margin(0.02));
}

TEST_CASE("injection edge cases", "[datagen]") {
  CHECK(datagen::generate_injections(0, 100.0, 600.0, 1).empty());
  CHECK_THROWS_AS(datagen::generate_injections(100, 100.0, 300.0, 1), std::invalid_argument);
}

TEST_CASE("injection separations hold constructively for any seed", "[datagen][property]") {
  datagen::InjectionConfig cfg;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto injections = datagen::generate_injections(6, 200.0, 300.0, seed, cfg, 10.0);
    REQUIRE(injections.size() == 6);
    for (std::size_t i = 1; i < injections.size(); ++i) {
      REQUIRE(injections[i].t_coal - injections[i - 1].t_coal >= cfg.min_separation_s);
    }
    CHECK(injections.front().t_coal >= 10.0 + cfg.edge_margin_s);
    CHECK(injections.back().t_coal <= 10.0 + 300.0 - cfg.edge_margin_s);
  }
}

TEST_CASE("waveform amplitude scales exactly as 1/distance for halving", "[datagen]") {
  datagen::ChirpConfig cfg;
  datagen::InjectionRecord near;
  near.t_coal = 20.0;
  near.distance = 50.0;
  near.chirp_mass = 25.0;
  auto far = near;
  far.distance = 100.0;

  std::vector<double> buf_near(2048 * 40, 0.0), buf_far(2048 * 40, 0.0);
  datagen::render_waveform_into(buf_near, 0.0, 1.0 / 2048.0, near, cfg);
  datagen::render_waveform_into(buf_far, 0.0, 1.0 / 2048.0, far, cfg);
  for (std::size_t i = 0; i < buf_near.size(); ++i) {
    REQUIRE(buf_near[i] == 2.0 * buf_far[i]);
  }
}

TEST_CASE("recorded optimal snr doubles when distance halves", "[datagen]") {
  datagen::AnalyticPsd model;
  datagen::ChirpConfig chirp;
  auto noise = datagen::generate_noise(60.0, 2048.0, model, 31, 0.0);
  datagen::InjectionRecord inj;
  inj.t_coal = 30.0;
  inj.distance = 200.0;
  inj.chirp_mass = 28.0;
  auto half = inj;
  half.distance = 100.0;
  const auto ds1 = datagen::render_dataset(noise, {inj}, 500.0, 31, model, chirp);
  const auto ds2 = datagen::render_dataset(noise, {half}, 500.0, 31, model, chirp);
  CHECK(ds2.injections[0].snr_opt ==
        Catch::Approx(2.0 * ds1.injections[0].snr_opt).epsilon(1e-6));
}

TEST_CASE("rendering zero injections returns the noise bit-exactly", "[datagen]") {
  datagen::AnalyticPsd model;
  auto noise = datagen::generate_noise(30.0, 2048.0, model, 17, 0.0);
  const auto ds = datagen::render_dataset(noise, {}, 500.0, 17, model);
  CHECK(ds.h1.samples == noise.first.samples);
  CHECK(ds.l1.samples == noise.second.samples);
}

TEST_CASE("sequential injection rendering composes bit-exactly", "[datagen]") {
  datagen::AnalyticPsd model;
  datagen::ChirpConfig chirp;
  auto noise = datagen::generate_noise(120.0, 2048.0, model, 23, 0.0);
  datagen::InjectionRecord a, b;
  a.t_coal = 40.0;
  a.distance = 150.0;
  a.chirp_mass = 20.0;
  b.t_coal = 90.0;
  b.distance = 250.0;
  b.chirp_mass = 35.0;

  const auto joint = datagen::render_dataset(noise, {a, b}, 500.0, 23, model, chirp);
  const auto first = datagen::render_dataset(noise, {a}, 500.0, 23, model, chirp);
  const auto then =
      datagen::render_dataset({first.h1, first.l1}, {b}, 500.0, 23, model, chirp);
  CHECK(joint.h1.samples == then.h1.samples);
  CHECK(joint.l1.samples == then.l1.samples);
}

TEST_CASE("transients are deterministic and single-channel", "[datagen]") {
  datagen::AnalyticPsd model;
  datagen::TransientConfig cfg;
  cfg.per_segment = 1;
  auto base = datagen::generate_noise(60.0, 2048.0, model, 41, 0.0);
  auto a = base;
  auto b = base;
  datagen::add_transients(a.first, a.second, cfg, model, 5);
  datagen::add_transients(b.first, b.second, cfg, model, 5);
  CHECK(a.first.samples == b.first.samples);
  CHECK(a.second.samples == b.second.samples);

  const bool h1_changed = a.first.samples != base.first.samples;
  const bool l1_changed = a.second.samples != base.second.samples;
  CHECK(h1_changed != l1_changed);  // exactly one channel carries the glitch
}

TEST_CASE("benchmark background and foreground share the noise realization", "[datagen]") {
  datagen::DatasetConfig cfg;
  cfg.train_segments = 1;
  cfg.test_segments = 1;
  cfg.segment_duration_s = 120.0;
  cfg.injections_per_segment = 1;
  const auto bench = datagen::build_benchmark(cfg);
  REQUIRE(bench.train_bg.size() == 1);
  REQUIRE(bench.train_fg.size() == 1);
  REQUIRE(bench.train_fg[0].injections.size() == 1);
  // Foreground differs from background exactly where the waveform lives.
  std::size_t diff = 0;
  for (std::size_t i = 0; i < bench.train_bg[0].h1.samples.size(); ++i) {
    if (bench.train_bg[0].h1.samples[i] != bench.train_fg[0].h1.samples[i]) ++diff;
  }
  CHECK(diff > 0);
  CHECK(diff < bench.train_bg[0].h1.samples.size() / 10);
  CHECK(bench.train_bg[0].h1.t0 == bench.train_fg[0].h1.t0);
}

TEST_CASE("dataset directories round-trip bit-exactly", "[datagen]") {
  namespace fs = std::filesystem;
  datagen::DatasetConfig cfg;
  cfg.train_segments = 1;
  cfg.test_segments = 1;
  cfg.segment_duration_s = 60.0;
  cfg.injections_per_segment = 1;
  cfg.injection.min_separation_s = 5.0;
  const auto bench = datagen::build_benchmark(cfg);
  const fs::path dir = fs::temp_directory_path() / "gwsearch_dataset_roundtrip";
  fs::remove_all(dir);
  io::save_benchmark(dir, bench);
  const auto loaded = io::load_benchmark(dir);
  CHECK(loaded.train_bg[0].h1.samples == bench.train_bg[0].h1.samples);
  CHECK(loaded.train_fg[0].l1.samples == bench.train_fg[0].l1.samples);
  REQUIRE(loaded.train_fg[0].injections.size() == bench.train_fg[0].injections.size());
  CHECK(loaded.train_fg[0].injections[0].t_coal == bench.train_fg[0].injections[0].t_coal);
  CHECK(loaded.train_fg[0].injections[0].snr_opt == bench.train_fg[0].injections[0].snr_opt);
  CHECK(loaded.config.d_max_mpc == cfg.d_max_mpc);
  fs::remove_all(dir);
}
