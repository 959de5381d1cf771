#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "gwsearch/datagen.hpp"
#include "gwsearch/dsl.hpp"
#include "gwsearch/failure.hpp"
#include "gwsearch/genclient.hpp"
#include "gwsearch/io.hpp"
#include "gwsearch/scoring.hpp"

namespace gwsearch::evaluator {

using genclient::FailureReport;

struct EvaluationLimits {
  double t_max_s = 60.0;  // wall budget per candidate evaluation
  int e_max = 3;          // tolerated per-segment error trials
};

struct CandidateEvaluation {
  scoring::EvalResult result;
  pipelines::DetectionCatalog background;
  pipelines::DetectionCatalog foreground;
};

using EvalOutcome = std::variant<CandidateEvaluation, FailureReport>;

namespace detail {

// Index-ordered parallel map; results land in their slot so the merge is
// deterministic for any worker count.
template <typename Fn>
inline void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  if (n == 0) return;
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

// Runs candidates against a benchmark partition: pooled background catalog for
// the FAR curve, pooled foreground catalog matched against all injections,
// and the AUC objective. Per-segment failures count as error trials; passing
// e_max fails the candidate, as does exceeding the wall budget. An empty
// catalog on the foreground segment holding the loudest injection is the
// "couldn't find signals" failure that feeds the rechat loop.
class BenchmarkEvaluator {
 public:
  BenchmarkEvaluator(const datagen::Benchmark& data, scoring::FarRange far_range = {},
                     EvaluationLimits limits = {}, std::size_t workers = 1)
      : data_(&data), far_range_(far_range), limits_(limits), workers_(workers) {}

  const datagen::Benchmark& data() const { return *data_; }
  const scoring::FarRange& far_range() const { return far_range_; }

  EvalOutcome evaluate_training(const dsl::PipelineDsl& program) const {
    return evaluate_on(program, data_->train_bg, data_->train_fg);
  }

  EvalOutcome evaluate_test(const dsl::PipelineDsl& program) const {
    return evaluate_on(program, data_->test_bg, data_->test_fg);
  }

  EvalOutcome evaluate_on(const dsl::PipelineDsl& program,
                          const std::vector<datagen::StrainDataset>& bg_segments,
                          const std::vector<datagen::StrainDataset>& fg_segments) const {
    const auto start = std::chrono::steady_clock::now();
    const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                      std::chrono::duration<double>(limits_.t_max_s));
    std::atomic<bool> timed_out{false};

    struct SegmentRun {
      std::optional<pipelines::DetectionCatalog> catalog;
      std::string error;
      bool attempted = false;
    };

    auto run_segments = [&](const std::vector<datagen::StrainDataset>& segments) {
      std::vector<SegmentRun> runs(segments.size());
      detail::parallel_for(segments.size(), workers_, [&](std::size_t i) {
        if (std::chrono::steady_clock::now() > deadline) {
          timed_out.store(true);
          return;
        }
        runs[i].attempted = true;
        try {
          runs[i].catalog = dsl::run_dsl(program, segments[i].h1, segments[i].l1);
        } catch (const std::exception& e) {
          runs[i].error = e.what();
        }
        if (std::chrono::steady_clock::now() > deadline) timed_out.store(true);
      });
      return runs;
    };

    int error_trials = 0;
    pipelines::DetectionCatalog background;
    double bg_duration = 0.0;
    {
      const auto runs = run_segments(bg_segments);
      if (timed_out.load())
        return FailureReport{FailureReport::Kind::Timeout,
                             "background pass exceeded the wall budget"};
      for (std::size_t i = 0; i < runs.size(); ++i) {
        if (runs[i].catalog) {
          background.append(*runs[i].catalog);
          bg_duration +=
              bg_segments[i].h1.dt * static_cast<double>(bg_segments[i].h1.size());
        } else {
          ++error_trials;
          if (error_trials > limits_.e_max)
            return FailureReport{FailureReport::Kind::Runtime,
                                 "error trials exceeded: " + runs[i].error};
        }
      }
    }

    pipelines::DetectionCatalog foreground;
    std::vector<datagen::InjectionRecord> truth;
    std::optional<std::size_t> loudest_segment;
    double loudest_snr = -1.0;
    for (std::size_t i = 0; i < fg_segments.size(); ++i) {
      for (const auto& inj : fg_segments[i].injections) {
        if (inj.snr_opt > loudest_snr) {
          loudest_snr = inj.snr_opt;
          loudest_segment = i;
        }
      }
    }
    {
      const auto runs = run_segments(fg_segments);
      if (timed_out.load())
        return FailureReport{FailureReport::Kind::Timeout,
                             "foreground pass exceeded the wall budget"};
      for (std::size_t i = 0; i < runs.size(); ++i) {
        if (runs[i].catalog) {
          foreground.append(*runs[i].catalog);
          truth.insert(truth.end(), fg_segments[i].injections.begin(),
                       fg_segments[i].injections.end());
          if (loudest_segment && *loudest_segment == i && runs[i].catalog->size() == 0) {
            return FailureReport{FailureReport::Kind::NoTrigger,
                                 "empty catalog on the segment holding the loudest injection"};
          }
        } else {
          ++error_trials;
          if (error_trials > limits_.e_max)
            return FailureReport{FailureReport::Kind::Runtime,
                                 "error trials exceeded: " + runs[i].error};
          if (loudest_segment && *loudest_segment == i) {
            return FailureReport{FailureReport::Kind::Runtime,
                                 "failed on the segment holding the loudest injection: " +
                                     runs[i].error};
          }
          // Unprocessed injections still count against the sensitivity.
          truth.insert(truth.end(), fg_segments[i].injections.begin(),
                       fg_segments[i].injections.end());
        }
      }
    }

    if (bg_duration <= 0.0)
      return FailureReport{FailureReport::Kind::Runtime, "no background segment succeeded"};

    CandidateEvaluation eval;
    eval.result = scoring::auc_fitness(background, foreground, truth, bg_duration,
                                       data_->config.d_max_mpc, far_range_);
    eval.result.error_trials = error_trials;
    eval.result.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    eval.background = std::move(background);
    eval.foreground = std::move(foreground);
    return eval;
  }

 private:
  const datagen::Benchmark* data_;
  scoring::FarRange far_range_;
  EvaluationLimits limits_;
  std::size_t workers_;
};

// ---------------------------------------------------------------------------
// External-executor escape hatch
// ---------------------------------------------------------------------------

// Runs opaque candidate code through the configured subprocess for every
// segment: strain goes in as raw-f64 + sidecar files, the catalog comes back
// as time,stat,var CSV, and scoring proceeds exactly as for built-in
// candidates. Nonzero exit counts as an error trial; the wall budget applies
// per subprocess call.
inline EvalOutcome evaluate_external(const genclient::ExternalExecutorConfig& exec_cfg,
                                     const std::string& candidate_code,
                                     const datagen::Benchmark& data,
                                     const scoring::FarRange& far_range = {},
                                     const EvaluationLimits& limits = {}) {
  namespace fs = std::filesystem;
  const auto work = fs::temp_directory_path() /
                    ("gwsearch_external_" + std::to_string(::getpid()));
  fs::create_directories(work);
  const auto code_path = work / "candidate.txt";
  io::write_text(code_path, candidate_code);

  int error_trials = 0;
  auto run_segments = [&](const std::vector<datagen::StrainDataset>& segments,
                          pipelines::DetectionCatalog& pooled, double* duration,
                          const char* label) -> std::optional<FailureReport> {
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const auto base_h1 = work / (std::string(label) + std::to_string(i) + ".h1");
      const auto base_l1 = work / (std::string(label) + std::to_string(i) + ".l1");
      const auto out_csv = work / (std::string(label) + std::to_string(i) + ".catalog.csv");
      io::write_strain(base_h1, segments[i].h1, segments[i].seed, "H1");
      io::write_strain(base_l1, segments[i].l1, segments[i].seed, "L1");

      genclient::ExternalExecutorConfig cfg = exec_cfg;
      cfg.timeout_s = limits.t_max_s;
      const auto res = genclient::run_external(
          cfg, {{"code", code_path.string()},
                {"h1", base_h1.string() + ".f64"},
                {"h1_meta", base_h1.string() + ".json"},
                {"l1", base_l1.string() + ".f64"},
                {"l1_meta", base_l1.string() + ".json"},
                {"out", out_csv.string()}});
      if (res.timed_out) {
        return FailureReport{FailureReport::Kind::Timeout, "external executor timed out"};
      }
      if (res.exit_code != 0) {
        if (++error_trials > limits.e_max) {
          return FailureReport{FailureReport::Kind::Runtime,
                               "external executor exit code " + std::to_string(res.exit_code)};
        }
        continue;
      }
      try {
        pooled.append(io::read_catalog(out_csv));
      } catch (const std::exception& e) {
        return FailureReport{FailureReport::Kind::Runtime,
                             std::string("bad external catalog: ") + e.what()};
      }
      if (duration != nullptr) {
        *duration += segments[i].h1.dt * static_cast<double>(segments[i].h1.size());
      }
    }
    return std::nullopt;
  };

  pipelines::DetectionCatalog background, foreground;
  double bg_duration = 0.0;
  if (auto fail = run_segments(data.train_bg, background, &bg_duration, "bg")) {
    fs::remove_all(work);
    return *fail;
  }
  if (auto fail = run_segments(data.train_fg, foreground, nullptr, "fg")) {
    fs::remove_all(work);
    return *fail;
  }
  fs::remove_all(work);
  if (bg_duration <= 0.0) {
    return FailureReport{FailureReport::Kind::Runtime, "no background segment succeeded"};
  }
  std::vector<datagen::InjectionRecord> truth;
  for (const auto& s : data.train_fg) {
    truth.insert(truth.end(), s.injections.begin(), s.injections.end());
  }
  if (foreground.size() == 0) {
    return FailureReport{FailureReport::Kind::NoTrigger, "external candidate found no signals"};
  }
  CandidateEvaluation eval;
  eval.result = scoring::auc_fitness(background, foreground, truth, bg_duration,
                                     data.config.d_max_mpc, far_range);
  eval.result.error_trials = error_trials;
  eval.background = std::move(background);
  eval.foreground = std::move(foreground);
  return eval;
}

}  // namespace gwsearch::evaluator
