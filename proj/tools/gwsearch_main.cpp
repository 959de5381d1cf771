// Command-line surface: dataset generation, the search loop, standalone
// evaluation, edge re-runs, reports and tree export.
//
// Exit codes: 0 ok, 2 usage error, 3 generator outage, 4 evaluation failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <variant>

#include "CLI11.hpp"

#include "gwsearch/report.hpp"
#include "gwsearch/search.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gwsearch;

namespace {

engine::RunConfig load_config(const std::string& path) {
  return engine::run_config_from_json(json::parse(io::read_text(path)));
}

int cmd_init_config(const std::string& out_path) {
  engine::RunConfig defaults;
  io::write_text(out_path, engine::run_config_to_json(defaults).dump(2) + "\n");
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

int cmd_datagen(const std::string& config_path, const std::string& out_dir) {
  const auto cfg = load_config(config_path);
  const auto bench = datagen::build_benchmark(cfg.dataset);
  io::save_benchmark(out_dir, bench);
  std::printf("wrote dataset (%d train, %d test segments) to %s\n", cfg.dataset.train_segments,
              cfg.dataset.test_segments, out_dir.c_str());
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_override) {
  auto cfg = load_config(config_path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  engine::SearchEngine eng(cfg);
  const auto summary = eng.run();
  std::printf("evaluations=%zu seed_fitness=%.3f best_fitness=%.3f best_node=%zu converged=%s\n",
              summary.evaluations, summary.seed_fitness, summary.best_fitness, summary.best_node,
              summary.converged ? "yes" : "no");
  if (summary.exit_code != 0) {
    std::fprintf(stderr, "run ended with error: %s\n", summary.message.c_str());
  }
  std::printf("artifacts in %s\n", cfg.output_dir.c_str());
  return summary.exit_code;
}

std::string resolve_candidate_text(const std::string& spec) {
  if (spec == "seed") return dsl::seed_dsl_text();
  if (spec == "elite") return dsl::elite_dsl_text();
  return io::read_text(spec);
}

int cmd_evaluate(const std::string& candidate_spec, const std::string& dataset_dir,
                 const std::string& config_path, const std::string& out_dir, double far_lo,
                 double far_hi, const std::string& executor_cmd) {
  engine::RunConfig cfg;
  if (!config_path.empty()) cfg = load_config(config_path);
  if (!dataset_dir.empty()) cfg.dataset_dir = dataset_dir;
  cfg.far_range.lo = far_lo;
  cfg.far_range.hi = far_hi;

  dsl::PipelineDsl program;
  if (executor_cmd.empty()) {
    try {
      program = dsl::parse_dsl(resolve_candidate_text(candidate_spec));
    } catch (const dsl::ParseError& e) {
      std::fprintf(stderr, "candidate parse error: %s\n", e.what());
      return 4;
    }
  }

  datagen::Benchmark bench;
  if (!cfg.dataset_dir.empty()) {
    if (!fs::exists(fs::path(cfg.dataset_dir) / "manifest.json")) {
      std::fprintf(stderr, "dataset dir %s has no manifest.json\n", cfg.dataset_dir.c_str());
      return 2;
    }
    try {
      bench = io::load_benchmark(cfg.dataset_dir);
    } catch (const std::exception& e) {
      // Missing strain or truth files inside a dataset directory are a usage
      // problem, not an evaluation failure.
      std::fprintf(stderr, "incomplete dataset directory: %s\n", e.what());
      return 2;
    }
  } else {
    bench = datagen::build_benchmark(cfg.dataset);
  }
  fs::create_directories(out_dir);

  if (!executor_cmd.empty()) {
    // Opaque candidate through the subprocess contract; strain in as files,
    // catalog out as CSV, wall budget enforced per call.
    genclient::ExternalExecutorConfig exec;
    exec.argv_template = {"/bin/sh", "-c", executor_cmd};
    const std::string code = resolve_candidate_text(candidate_spec);
    auto outcome = evaluator::evaluate_external(exec, code, bench, cfg.far_range, cfg.limits);
    if (std::holds_alternative<genclient::FailureReport>(outcome)) {
      std::fprintf(stderr, "external evaluation failed: %s\n",
                   std::get<genclient::FailureReport>(outcome).to_text().c_str());
      return 4;
    }
    const auto& ce = std::get<evaluator::CandidateEvaluation>(outcome);
    io::write_text(fs::path(out_dir) / "train_eval.json",
                   io::eval_result_to_json(ce.result).dump(2) + "\n");
    io::write_catalog(fs::path(out_dir) / "train_foreground.csv", ce.foreground);
    io::write_catalog(fs::path(out_dir) / "train_background.csv", ce.background);
    std::printf("train: auc=%.3f triggers(bg)=%zu triggers(fg)=%zu%s\n", ce.result.auc,
                ce.background.size(), ce.foreground.size(),
                ce.result.degenerate ? " [degenerate]" : "");
    return 0;
  }

  evaluator::BenchmarkEvaluator ev(bench, cfg.far_range, cfg.limits,
                                   std::max<std::size_t>(cfg.workers, 1));
  const struct {
    const char* name;
    bool train;
  } parts[] = {{"train", true}, {"test", false}};
  for (const auto& part : parts) {
    if (!part.train && bench.test_bg.empty()) continue;
    auto outcome = part.train ? ev.evaluate_training(program) : ev.evaluate_test(program);
    if (std::holds_alternative<genclient::FailureReport>(outcome)) {
      std::fprintf(stderr, "%s evaluation failed: %s\n", part.name,
                   std::get<genclient::FailureReport>(outcome).to_text().c_str());
      return 4;
    }
    const auto& ce = std::get<evaluator::CandidateEvaluation>(outcome);
    const std::string base = std::string(part.name);
    io::write_text(fs::path(out_dir) / (base + "_eval.json"),
                   io::eval_result_to_json(ce.result).dump(2) + "\n");
    io::write_catalog(fs::path(out_dir) / (base + "_foreground.csv"), ce.foreground);
    io::write_catalog(fs::path(out_dir) / (base + "_background.csv"), ce.background);
    std::printf("%s: auc=%.3f triggers(bg)=%zu triggers(fg)=%zu%s\n", part.name, ce.result.auc,
                ce.background.size(), ce.foreground.size(),
                ce.result.degenerate ? " [degenerate]" : "");
  }
  return 0;
}

int cmd_rerun_edge(const std::string& run_dir, std::size_t node_id, std::size_t n,
                   const std::string& out_path) {
  const fs::path dir(run_dir);
  for (const char* name : {"config.json", "tree.json", "runlog.jsonl"}) {
    if (!fs::exists(dir / name)) {
      std::fprintf(stderr, "missing %s in %s\n", name, run_dir.c_str());
      return 2;
    }
  }
  auto cfg = engine::run_config_from_json(json::parse(io::read_text(dir / "config.json")));
  engine::SearchEngine eng(cfg);
  eng.restore_tree(json::parse(io::read_text(dir / "tree.json")));
  eng.prepare_dataset();

  // Find the recorded transition that created node_id.
  std::optional<json> record;
  {
    std::istringstream in(io::read_text(dir / "runlog.jsonl"));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json rec = json::parse(line);
      if (!rec.at("node").is_null() && rec.at("node").get<std::size_t>() == node_id) {
        record = rec;
        break;
      }
    }
  }
  if (!record) {
    std::fprintf(stderr, "node %zu not found in run log\n", node_id);
    return 2;
  }
  const auto op = tree::op_from_name(record->at("op").get<std::string>());
  if (op == tree::OpKind::Seed || op == tree::OpKind::Init) {
    std::fprintf(stderr, "node %zu was not created by an evolutionary operation\n", node_id);
    return 2;
  }
  const auto inputs = record->at("inputs").get<std::vector<std::size_t>>();
  const auto& node = eng.state().node(node_id);
  const std::size_t focus = node.parent.value_or(0);
  const double reference = eng.state().node(focus).fitness_raw.value_or(0.0);

  const auto result = eng.rerun_edge(op, inputs, focus, reference, n);
  json out = {
      {"node", node_id},
      {"op", tree::op_name(op)},
      {"repetitions", n},
      {"reference_fitness", result.reference_fitness},
      {"mean", result.mean},
      {"sd", result.sd},
      {"exceed_fraction", result.exceed_fraction},
      {"failures", result.failures},
  };
  auto samples = json::array();
  for (const auto& s : result.samples) {
    if (s) {
      samples.push_back(*s);
    } else {
      samples.push_back(nullptr);
    }
  }
  out["samples"] = std::move(samples);
  const std::string path = out_path.empty() ? (dir / "edge_rerun.json").string() : out_path;
  io::write_text(path, out.dump(2) + "\n");
  std::printf("edge %zu: mean=%.3f sd=%.3f exceed_fraction=%.3f failures=%zu -> %s\n", node_id,
              result.mean, result.sd, result.exceed_fraction, result.failures, path.c_str());
  return 0;
}

int cmd_report(const std::string& run_dir) {
  try {
    report::write_report(run_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  }
  std::printf("report written to %s\n", run_dir.c_str());
  return 0;
}

int cmd_export_tree(const std::string& run_dir, const std::string& out_path) {
  const fs::path src = fs::path(run_dir) / "tree.json";
  if (!fs::exists(src)) {
    std::fprintf(stderr, "missing tree.json in %s\n", run_dir.c_str());
    return 2;
  }
  const std::string text = io::read_text(src);
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    io::write_text(out_path, text);
    std::printf("wrote %s\n", out_path.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM-informed evolutionary MCTS over signal-detection pipelines"};
  app.require_subcommand(1);

  std::string config_path, dataset_dir, candidate_spec, run_dir, executor_cmd;
  std::string out_init = "gwsearch_config.json", out_run, out_eval = "evaluation_out";
  std::string out_rerun, out_export;
  std::size_t node_id = 0, reps = 100;
  double far_lo = 4.0, far_hi = 1000.0;

  auto* init = app.add_subcommand("init-config", "write a config file with full defaults");
  init->add_option("--out", out_init, "output path");

  auto* dg = app.add_subcommand("datagen", "generate a benchmark dataset directory");
  dg->add_option("--config", config_path, "run config JSON")->required();
  dg->add_option("--out", dataset_dir, "dataset directory")->required();

  auto* run = app.add_subcommand("run", "run the search");
  run->add_option("--config", config_path, "run config JSON")->required();
  run->add_option("--out", out_run, "override the output directory");

  auto* ev = app.add_subcommand("evaluate", "evaluate one candidate on a dataset");
  ev->add_option("--candidate", candidate_spec, "DSL file path, or the aliases seed|elite")
      ->required();
  ev->add_option("--dataset", dataset_dir, "dataset directory (from datagen)");
  ev->add_option("--config", config_path, "run config JSON (for a generated dataset)");
  ev->add_option("--out", out_eval, "output directory");
  ev->add_option("--far-min", far_lo, "FAR range low (events/month)");
  ev->add_option("--far-max", far_hi, "FAR range high (events/month)");
  ev->add_option("--executor", executor_cmd,
                 "shell command template for opaque candidates; placeholders "
                 "{code} {h1} {h1_meta} {l1} {l1_meta} {out}");

  auto* rr = app.add_subcommand("rerun-edge", "re-execute one recorded transition n times");
  rr->add_option("--run", run_dir, "run directory")->required();
  rr->add_option("--node", node_id, "child node id of the edge")->required();
  rr->add_option("--n", reps, "repetitions")->default_val(100);
  rr->add_option("--out", out_rerun, "output JSON path");

  auto* rep = app.add_subcommand("report", "plots and summary for a run directory");
  rep->add_option("--run", run_dir, "run directory")->required();

  auto* ex = app.add_subcommand("export-tree", "export the search tree JSON");
  ex->add_option("--run", run_dir, "run directory")->required();
  ex->add_option("--out", out_export, "output path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (init->parsed()) return cmd_init_config(out_init);
    if (dg->parsed()) return cmd_datagen(config_path, dataset_dir);
    if (run->parsed()) return cmd_run(config_path, out_run);
    if (ev->parsed()) {
      if (dataset_dir.empty() && config_path.empty()) {
        std::fprintf(stderr, "evaluate needs --dataset or --config\n");
        return 2;
      }
      return cmd_evaluate(candidate_spec, dataset_dir, config_path, out_eval, far_lo, far_hi,
                          executor_cmd);
    }
    if (rr->parsed()) return cmd_rerun_edge(run_dir, node_id, reps, out_rerun);
    if (rep->parsed()) return cmd_report(run_dir);
    if (ex->parsed()) return cmd_export_tree(run_dir, out_export);
  } catch (const genclient::GeneratorError& e) {
    std::fprintf(stderr, "generator outage: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 2;
}
