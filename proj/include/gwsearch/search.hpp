#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "gwsearch/analysis.hpp"
#include "gwsearch/evaluator.hpp"
#include "gwsearch/evolve.hpp"
#include "gwsearch/genclient.hpp"
#include "gwsearch/io.hpp"
#include "gwsearch/prompts.hpp"
#include "gwsearch/tree.hpp"

namespace gwsearch::engine {

namespace fs = std::filesystem;
using nlohmann::json;

// Interface texts bound into every prompt: what a candidate receives and what
// it must return.
inline constexpr const char* kInterfaceInfo =
    "Inputs are the two detector strain channels (H1, L1) on a shared uniform time axis; "
    "the output is a catalog of candidate events, one (GPS time, ranking statistic, timing "
    "tolerance) triple per trigger, where larger statistics mean higher confidence.";
inline constexpr const char* kConstraintInfo =
    "Strain is sampled at 2048 Hz in finite segments; timing tolerances are in seconds; the "
    "pipeline must stay within the per-evaluation wall budget and must be expressed with the "
    "registered stages only.";

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  std::size_t budget = 100;        // candidate evaluations after the seed
  std::uint64_t search_seed = 42;  // selection / population sampling stream
  tree::TreeConfig tree;
  std::size_t population_k = 10;
  double population_beta = 0.005;
  std::size_t sc_siblings = 3;
  genclient::GeneratorConfig generator;
  datagen::DatasetConfig dataset;
  std::string dataset_dir;  // optional: load instead of generating
  evaluator::EvaluationLimits limits;
  scoring::FarRange far_range;
  std::size_t workers = 1;
  bool deterministic = true;  // zero wall-clock fields in artifacts
  std::size_t diversity_window = 50;
  std::string output_dir = "gwsearch_run";
};

inline json run_config_to_json(const RunConfig& c) {
  return json{
      {"budget", c.budget},
      {"seeds", {{"search", c.search_seed}, {"data", c.dataset.seed}}},
      {"tree",
       {{"c0", c.tree.c0},
        {"gamma", c.tree.gamma},
        {"epsilon", c.tree.epsilon},
        {"expansion_visits", c.tree.expansion_visits},
        {"prune_margin", c.tree.prune_margin},
        {"max_depth", c.tree.max_depth},
        {"convergence_window", c.tree.convergence_window},
        {"convergence_tol", c.tree.convergence_tol}}},
      {"population",
       {{"k", c.population_k}, {"beta", c.population_beta}, {"sc_siblings", c.sc_siblings}}},
      {"generator",
       {{"backend", c.generator.backend},
        {"generation_model", c.generator.generation_model},
        {"reflection_model", c.generator.reflection_model},
        {"temperature", c.generator.temperature},
        {"base_url", c.generator.base_url},
        {"credential_env", c.generator.credential_env},
        {"timeout_s", c.generator.timeout_s},
        {"max_in_flight", c.generator.max_in_flight},
        {"transport_retries", c.generator.transport_retries},
        {"mock_script", c.generator.mock_script_path}}},
      {"dataset", io::dataset_config_to_json(c.dataset)},
      {"dataset_dir", c.dataset_dir},
      {"limits", {{"t_max_s", c.limits.t_max_s}, {"e_max", c.limits.e_max}}},
      {"far_range", {c.far_range.lo, c.far_range.hi}},
      {"workers", c.workers},
      {"deterministic", c.deterministic},
      {"diversity_window", c.diversity_window},
      {"output_dir", c.output_dir},
  };
}

inline RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  c.budget = j.value("budget", c.budget);
  if (j.contains("seeds")) {
    c.search_seed = j.at("seeds").value("search", c.search_seed);
    c.dataset.seed = j.at("seeds").value("data", c.dataset.seed);
  }
  if (j.contains("tree")) {
    const auto& t = j.at("tree");
    c.tree.c0 = t.value("c0", c.tree.c0);
    c.tree.gamma = t.value("gamma", c.tree.gamma);
    c.tree.epsilon = t.value("epsilon", c.tree.epsilon);
    c.tree.expansion_visits = t.value("expansion_visits", c.tree.expansion_visits);
    c.tree.prune_margin = t.value("prune_margin", c.tree.prune_margin);
    c.tree.max_depth = t.value("max_depth", c.tree.max_depth);
    c.tree.convergence_window = t.value("convergence_window", c.tree.convergence_window);
    c.tree.convergence_tol = t.value("convergence_tol", c.tree.convergence_tol);
  }
  if (j.contains("population")) {
    const auto& p = j.at("population");
    c.population_k = p.value("k", c.population_k);
    c.population_beta = p.value("beta", c.population_beta);
    c.sc_siblings = p.value("sc_siblings", c.sc_siblings);
  }
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    c.generator.backend = g.value("backend", c.generator.backend);
    c.generator.generation_model = g.value("generation_model", c.generator.generation_model);
    c.generator.reflection_model = g.value("reflection_model", c.generator.reflection_model);
    c.generator.temperature = g.value("temperature", c.generator.temperature);
    c.generator.base_url = g.value("base_url", c.generator.base_url);
    c.generator.credential_env = g.value("credential_env", c.generator.credential_env);
    c.generator.timeout_s = g.value("timeout_s", c.generator.timeout_s);
    c.generator.max_in_flight = g.value("max_in_flight", c.generator.max_in_flight);
    c.generator.transport_retries = g.value("transport_retries", c.generator.transport_retries);
    c.generator.mock_script_path = g.value("mock_script", c.generator.mock_script_path);
  }
  if (j.contains("dataset")) c.dataset = io::dataset_config_from_json(j.at("dataset"));
  if (j.contains("seeds")) c.dataset.seed = j.at("seeds").value("data", c.dataset.seed);
  c.dataset_dir = j.value("dataset_dir", c.dataset_dir);
  if (j.contains("limits")) {
    c.limits.t_max_s = j.at("limits").value("t_max_s", c.limits.t_max_s);
    c.limits.e_max = j.at("limits").value("e_max", c.limits.e_max);
  }
  if (j.contains("far_range")) {
    c.far_range.lo = j.at("far_range").at(0).get<double>();
    c.far_range.hi = j.at("far_range").at(1).get<double>();
  }
  c.workers = j.value("workers", c.workers);
  c.deterministic = j.value("deterministic", c.deterministic);
  c.diversity_window = j.value("diversity_window", c.diversity_window);
  c.output_dir = j.value("output_dir", c.output_dir);
  return c;
}

// ---------------------------------------------------------------------------
// Run artifacts
// ---------------------------------------------------------------------------

struct RunSummary {
  int exit_code = 0;  // 0 ok, 3 generator outage, 4 evaluation failure
  std::string message;
  std::size_t evaluations = 0;
  double seed_fitness = 0.0;
  double best_fitness = 0.0;
  std::size_t best_node = 0;
  bool converged = false;
};

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

class SearchEngine {
 public:
  explicit SearchEngine(RunConfig cfg)
      : cfg_(std::move(cfg)),
        store_(),
        state_(cfg_.tree, cfg_.budget + 1),
        rng_(cfg_.search_seed) {
    generator_ = genclient::make_generator(cfg_.generator);
  }

  const tree::SearchState& state() const { return state_; }
  const evolve::Population& population() const { return pop_; }
  const std::vector<json>& log_records() const { return log_; }

  RunSummary run() {
    RunSummary summary;
    try {
      prepare_dataset();
      prepare_output();
      if (!evaluate_seed(summary)) return finalize(summary);
      if (summary.exit_code == 0 && state_.eval_count() <= cfg_.budget) {
        if (!build_initial_population(summary)) return finalize(summary);
        search_loop(summary);
      }
    } catch (const genclient::GeneratorError& e) {
      summary.exit_code = 3;
      summary.message = std::string("generator outage: ") + e.what();
    } catch (const std::exception& e) {
      summary.exit_code = 4;
      summary.message = e.what();
    }
    return finalize(summary);
  }

  // Replays one recorded evolutionary transition n times with fresh sampling.
  // The reflection phase (when the operation has one) is regenerated per
  // repetition; everything deterministic is reused.
  genclient::EdgeRerunResult rerun_edge(tree::OpKind op, const std::vector<std::size_t>& inputs,
                                        std::size_t focus, double reference_fitness,
                                        std::size_t n) {
    prepare_dataset();
    genclient::EdgeRerunResult out;
    out.reference_fitness = reference_fitness;
    for (std::size_t rep = 0; rep < n; ++rep) {
      std::optional<double> fitness;
      try {
        const auto bundle = synthesis_bundle(op, inputs, focus);
        const std::string raw = generator_->generate(bundle);
        const auto parsed = prompts::parse_response(raw);
        const auto program = dsl::parse_dsl(parsed.code);
        auto outcome = evaluator_->evaluate_training(program);
        if (std::holds_alternative<evaluator::CandidateEvaluation>(outcome)) {
          fitness = std::get<evaluator::CandidateEvaluation>(outcome).result.auc;
        }
      } catch (const genclient::GeneratorError&) {
        throw;
      } catch (const std::exception&) {
        fitness.reset();
      }
      if (!fitness) ++out.failures;
      out.samples.push_back(fitness);
    }
    double sum = 0.0, count = 0.0, exceed = 0.0;
    for (const auto& s : out.samples) {
      if (!s) continue;
      sum += *s;
      count += 1.0;
      if (*s > reference_fitness) exceed += 1.0;
    }
    if (count > 0.0) {
      out.mean = sum / count;
      double var = 0.0;
      for (const auto& s : out.samples) {
        if (s) var += (*s - out.mean) * (*s - out.mean);
      }
      out.sd = std::sqrt(var / count);
    }
    out.exceed_fraction = n > 0 ? exceed / static_cast<double>(n) : 0.0;
    return out;
  }

  // Restores the tree of a completed run so its transitions can be replayed.
  void restore_tree(const json& tree_json) {
    std::vector<tree::TreeNode> nodes;
    for (const auto& jn : tree_json.at("nodes")) {
      tree::TreeNode n;
      n.id = jn.at("id").get<std::size_t>();
      if (!jn.at("parent").is_null()) n.parent = jn.at("parent").get<std::size_t>();
      n.children = jn.at("children").get<std::vector<std::size_t>>();
      n.depth = jn.at("depth").get<int>();
      n.origin = tree::op_from_name(jn.at("op").get<std::string>());
      n.q = jn.at("q").get<double>();
      n.visits = jn.at("visits").get<double>();
      if (!jn.at("fitness").is_null()) n.fitness_raw = jn.at("fitness").get<double>();
      n.pruned = jn.at("pruned").get<bool>();
      n.candidate.code = jn.at("code").get<std::string>();
      n.candidate.design_idea = jn.at("design_idea").get<std::string>();
      n.candidate.summary = jn.at("summary").get<std::string>();
      n.candidate.reflection = jn.at("reflection").get<std::string>();
      nodes.push_back(std::move(n));
    }
    state_.restore(std::move(nodes), tree_json.at("q_min").get<double>(),
                   tree_json.at("q_max").get<double>());
    if (const auto best = state_.best_node()) {
      pop_.elite = *best;
      pop_.members = {*best};
    }
  }

  void prepare_dataset() {
    if (benchmark_) return;
    if (!cfg_.dataset_dir.empty() && fs::exists(fs::path(cfg_.dataset_dir) / "manifest.json")) {
      benchmark_ = std::make_unique<datagen::Benchmark>(io::load_benchmark(cfg_.dataset_dir));
    } else {
      benchmark_ = std::make_unique<datagen::Benchmark>(datagen::build_benchmark(cfg_.dataset));
    }
    evaluator_ = std::make_unique<evaluator::BenchmarkEvaluator>(*benchmark_, cfg_.far_range,
                                                                 cfg_.limits, cfg_.workers);
  }

  const datagen::Benchmark& benchmark() {
    prepare_dataset();
    return *benchmark_;
  }
  evaluator::BenchmarkEvaluator& benchmark_evaluator() {
    prepare_dataset();
    return *evaluator_;
  }

 private:
  // ----- prompt plumbing ----------------------------------------------------

  static std::string format_fitness(std::optional<double> f) {
    if (!f) return "unevaluated";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *f);
    return buf;
  }

  std::map<std::string, std::string> common_bindings() const {
    return {
        {"func_name", "pipeline_v2"},
        {"input_count", "3"},
        {"joined_inputs", "strain_h1, strain_l1, times"},
        {"output_count", "3"},
        {"joined_outputs", "peak_times, peak_heights, peak_deltat"},
        {"inout_inf", kInterfaceInfo},
        {"other_inf", kConstraintInfo},
        {"prompt_inout_inf", kInterfaceInfo},
        {"prompt_other_inf", kConstraintInfo},
    };
  }

  std::string describe(std::size_t id) const {
    const auto& c = state_.node(id).candidate;
    if (!c.summary.empty()) return c.summary;
    if (!c.design_idea.empty()) return c.design_idea;
    return "(no description recorded)";
  }

  std::string reflection_of(std::size_t id) const {
    const auto& c = state_.node(id).candidate;
    if (!c.reflection.empty()) return c.reflection;
    if (!c.summary.empty()) return c.summary;
    return c.design_idea;
  }

  // Reflection-phase text for one operation; empty when the phase failed to
  // produce a parseable brace span (the synthesis prompt still renders).
  std::string run_reflection_phase(tree::OpKind op, const std::vector<std::size_t>& inputs,
                                   std::size_t focus, int child_depth) {
    std::map<std::string, std::string> b = common_bindings();
    prompts::TemplateKind kind;
    switch (op) {
      case tree::OpKind::PC: {
        kind = prompts::TemplateKind::PcReflection;
        b["code_worse"] = state_.node(inputs.at(0)).candidate.code;
        b["code_better"] = state_.node(inputs.at(1)).candidate.code;
        break;
      }
      case tree::OpKind::SC: {
        kind = prompts::TemplateKind::ScPhase1;
        const auto& focus_node = state_.node(focus);
        b["parent_depth"] = std::to_string(focus_node.depth);
        b["father_depth"] = std::to_string(focus_node.depth);
        std::ostringstream peers;
        int idx = 1;
        for (std::size_t i = 1; i < inputs.size(); ++i) {
          peers << "[No." << idx++ << " Brother Reflection | Score: "
                << format_fitness(state_.node(inputs[i]).fitness_raw) << "]<"
                << reflection_of(inputs[i]) << ">\n";
        }
        b["parent_reflections"] = peers.str();
        b["father_reflection"] = reflection_of(focus);
        break;
      }
      case tree::OpKind::PM: {
        kind = prompts::TemplateKind::PmPhase1;
        std::ostringstream peers;
        peers << "[Parent 1 Reflection | Score: "
              << format_fitness(state_.node(focus).fitness_raw) << "]<" << reflection_of(focus)
              << ">\n";
        b["parent_reflections"] = peers.str();
        b["elite_reflection"] = reflection_of(inputs.back());
        break;
      }
      case tree::OpKind::PWC: {
        kind = prompts::TemplateKind::PwcReflectPhase1;
        b["num_algorithms"] = std::to_string(inputs.size());
        std::ostringstream refl;
        int idx = 1;
        for (std::size_t id : inputs) {
          refl << "[No." << idx++ << " algorithm's reflection (depth: "
               << state_.node(id).depth << ")]<" << reflection_of(id) << ">\n";
        }
        b["algorithm_reflections"] = refl.str();
        break;
      }
      default:
        return {};
    }
    const auto bundle = store_.render(kind, child_depth, std::move(b), prompts::OutputMode::Dsl,
                                      cfg_.tree.max_depth);
    const std::string raw = generator_->generate(bundle);
    try {
      return prompts::parse_reflection(raw);
    } catch (const prompts::ResponseParseError&) {
      // Keep the raw text; it still carries the insight for the synthesis turn.
      return raw;
    }
  }

  prompts::PromptBundle synthesis_bundle(tree::OpKind op, const std::vector<std::size_t>& inputs,
                                         std::size_t focus) {
    const int child_depth = state_.node(focus).depth + 1;
    const std::string reflection = run_reflection_phase(op, inputs, focus, child_depth);
    std::map<std::string, std::string> b = common_bindings();
    b["reflection"] = reflection;
    prompts::TemplateKind kind;
    switch (op) {
      case tree::OpKind::PC:
        kind = prompts::TemplateKind::PcSynthesis;
        b["worse_code"] = state_.node(inputs.at(0)).candidate.code;
        b["better_code"] = state_.node(inputs.at(1)).candidate.code;
        break;
      case tree::OpKind::SC:
        kind = prompts::TemplateKind::ScPhase2;
        b["algorithm_description"] = describe(focus);
        b["algorithm_code"] = state_.node(focus).candidate.code;
        break;
      case tree::OpKind::PM:
        kind = prompts::TemplateKind::PmPhase2;
        b["elite_algorithm_description"] = describe(inputs.back());
        b["elite_algorithm_code"] = state_.node(inputs.back()).candidate.code;
        break;
      case tree::OpKind::PWC:
        kind = prompts::TemplateKind::PwcPhase2;
        b["algorithm_description"] = describe(focus);
        b["algorithm_code"] = state_.node(focus).candidate.code;
        break;
      default:
        throw std::logic_error("synthesis_bundle: not an expansion op");
    }
    return store_.render(kind, child_depth, std::move(b), prompts::OutputMode::Dsl,
                         cfg_.tree.max_depth);
  }

  prompts::PromptBundle init_variant_bundle(std::size_t variant_index) {
    std::map<std::string, std::string> b = common_bindings();
    b["prompt_seed_func"] = dsl::seed_dsl_text();
    const std::string output_format =
        prompts::TemplateStore::substitute(prompts::texts::kOutputFormatDsl, b);
    auto bundle = store_.render(prompts::TemplateKind::SeedAnalysis, 1, std::move(b),
                                prompts::OutputMode::Dsl, cfg_.tree.max_depth);
    // Variation directive and the candidate output contract are appended
    // around the analysis template (artifact plumbing, not part of the
    // quoted template).
    std::ostringstream extra;
    extra << "\n\n## Variation Directive\n"
          << evolve::init_variant_directives()[variant_index % 8]
          << "\n\n## Candidate Output Format\n" << output_format << "\n";
    bundle.turns.front().second += extra.str();
    return bundle;
  }

  // ----- evaluation hook ------------------------------------------------------

  struct HookCapture {
    std::optional<evaluator::CandidateEvaluation> eval;
    dsl::PipelineDsl program;
  };

  genclient::EvaluateHook make_hook(HookCapture& capture) {
    return [this, &capture](const prompts::ParsedResponse& parsed)
               -> std::optional<genclient::FailureReport> {
      dsl::PipelineDsl program;
      try {
        program = dsl::parse_dsl(parsed.code);
      } catch (const dsl::ParseError& e) {
        return genclient::FailureReport{genclient::FailureReport::Kind::Parse, e.what()};
      }
      auto outcome = evaluator_->evaluate_training(program);
      if (std::holds_alternative<genclient::FailureReport>(outcome)) {
        return std::get<genclient::FailureReport>(outcome);
      }
      capture.eval = std::move(std::get<evaluator::CandidateEvaluation>(outcome));
      capture.program = std::move(program);
      return std::nullopt;
    };
  }

  // ----- run phases ---------------------------------------------------------

  void prepare_output() {
    out_dir_ = fs::path(cfg_.output_dir);
    fs::create_directories(out_dir_);
    io::write_text(out_dir_ / "config.json", run_config_to_json(cfg_).dump(2) + "\n");
  }

  bool evaluate_seed(RunSummary& summary) {
    const auto program = dsl::parse_dsl(dsl::seed_dsl_text());
    auto outcome = evaluator_->evaluate_training(program);
    if (std::holds_alternative<genclient::FailureReport>(outcome)) {
      summary.exit_code = 4;
      summary.message = "seed evaluation failed: " +
                        std::get<genclient::FailureReport>(outcome).to_text();
      return false;
    }
    auto eval = std::get<evaluator::CandidateEvaluation>(std::move(outcome));
    tree::CandidateProgram cand;
    cand.code = dsl::seed_dsl_text();
    cand.design_idea =
        "Baseline three-stage pipeline: Welch whitening, mean-power spectrogram metric, "
        "fixed-threshold peak picking.";
    const std::size_t root = state_.make_root(std::move(cand));
    state_.backpropagate(root, eval.result.auc);
    summary.seed_fitness = eval.result.auc;
    pop_.members = {root};
    pop_.elite = root;
    pop_.k = cfg_.population_k;
    pop_.beta = cfg_.population_beta;
    log_eval(0, tree::OpKind::Seed, {}, root, eval.result.auc, 0, 0, 0);
    store_eval(root, eval);
    write_eval_report(out_dir_ / "seed_eval.json", eval.result);
    return true;
  }

  // 8 analysis-prompt variants plus 2 point mutations, all evaluated; a
  // variant that stays failed after the rechat budget is re-requested a
  // bounded number of times before the run aborts.
  bool build_initial_population(RunSummary& summary) {
    const int kVariantRetries = 2;
    for (std::size_t v = 0; v < 8 && state_.eval_count() - 1 < cfg_.budget; ++v) {
      bool done = false;
      for (int attempt = 0; attempt <= kVariantRetries && !done; ++attempt) {
        done = run_generation(init_variant_bundle(v), tree::OpKind::Init, {0}, 0, 0);
      }
      if (!done) {
        summary.exit_code = 4;
        summary.message = "initial population variant " + std::to_string(v) +
                          " failed after bounded retries";
        return false;
      }
    }
    for (int m = 0; m < 2 && state_.eval_count() - 1 < cfg_.budget; ++m) {
      // Point mutations of the best and second-best depth-1 nodes.
      std::vector<std::size_t> depth1;
      for (const auto& n : state_.nodes()) {
        if (n.depth == 1 && n.fitness_raw) depth1.push_back(n.id);
      }
      std::sort(depth1.begin(), depth1.end(), [&](std::size_t a, std::size_t b) {
        return *state_.node(a).fitness_raw > *state_.node(b).fitness_raw;
      });
      if (depth1.empty()) break;
      const std::size_t focus = depth1[std::min<std::size_t>(m, depth1.size() - 1)];
      const std::vector<std::size_t> inputs = {focus, pop_.elite};
      bool done = false;
      for (int attempt = 0; attempt <= kVariantRetries && !done; ++attempt) {
        done = run_generation(synthesis_bundle(tree::OpKind::PM, inputs, focus),
                              tree::OpKind::PM, inputs, 0, 0);
      }
      if (!done) {
        summary.exit_code = 4;
        summary.message = "initial population mutation failed after bounded retries";
        return false;
      }
    }
    return true;
  }

  void search_loop(RunSummary& summary) {
    std::size_t round = 0;
    std::size_t safety = cfg_.budget * 20 + 100;
    // eval_count() includes the seed; the budget counts candidate evaluations.
    while (state_.eval_count() - 1 < cfg_.budget && safety-- > 0) {
      const std::size_t leaf = state_.select_leaf();
      if (!state_.can_expand(leaf)) {
        if (state_.node(leaf).depth >= cfg_.tree.max_depth) state_.mark_exhausted(leaf);
        if (all_exhausted()) break;
        continue;
      }
      ++round;
      for (tree::OpKind op : evolve::level_schedule()) {
        if (state_.eval_count() - 1 >= cfg_.budget) break;
        auto request = evolve::choose_inputs(op, state_, leaf, pop_, cfg_.sc_siblings, rng_);
        run_generation(synthesis_bundle(request.kind, request.inputs, leaf), request.kind,
                       request.inputs, leaf, round);
      }
      const auto rep = state_.maintenance();
      if (rep.converged) {
        summary.converged = true;
        break;
      }
    }
  }

  // One generation -> correction loop -> expansion + bookkeeping. Returns
  // true when a node was created.
  bool run_generation(const prompts::PromptBundle& bundle, tree::OpKind op,
                      const std::vector<std::size_t>& inputs, std::size_t leaf,
                      std::size_t round) {
    HookCapture capture;
    const auto result = genclient::correction_loop(*generator_, bundle, make_hook(capture));
    if (!result.success) {
      json rec = {
          {"eval", nullptr},
          {"round", round},
          {"op", tree::op_name(op)},
          {"inputs", inputs},
          {"node", nullptr},
          {"fitness", nullptr},
          {"elite_fitness", current_elite_fitness()},
          {"generator_calls", result.generator_calls},
          {"rechat_rounds", result.rechat_rounds},
          {"skipped", true},
          {"failure", result.last_failure ? result.last_failure->to_text() : ""},
      };
      log_.push_back(std::move(rec));
      return false;
    }

    tree::CandidateProgram cand;
    cand.code = result.response.code;
    cand.design_idea = result.response.design_idea;
    cand.reflection = bundle.bindings.count("reflection") ? bundle.bindings.at("reflection") : "";
    try {
      const auto sb = prompts::summarize(store_, cand.design_idea, cand.code, kInterfaceInfo,
                                         kConstraintInfo);
      cand.summary = generator_->generate(sb);
    } catch (const genclient::GeneratorError&) {
      throw;
    } catch (const std::exception&) {
      cand.summary.clear();
    }

    std::size_t node;
    if (op == tree::OpKind::Init || round == 0) {
      node = state_.expand_initial(leaf, std::move(cand), op);
    } else {
      node = state_.expand(leaf, std::move(cand), op);
    }
    const double fitness = capture.eval->result.auc;
    state_.backpropagate(node, fitness);
    pop_ = evolve::update_population(pop_, node, state_, rng_);
    store_eval(node, *capture.eval);
    log_eval(state_.eval_count() - 1, op, inputs, node, fitness, result.generator_calls,
             result.rechat_rounds, round);
    return true;
  }

  bool all_exhausted() const {
    for (const auto& n : state_.nodes()) {
      if (n.children.empty() && !n.exhausted && !n.pruned &&
          n.depth < cfg_.tree.max_depth)
        return false;
    }
    return true;
  }

  double current_elite_fitness() const {
    const auto& f = state_.node(pop_.elite).fitness_raw;
    return f ? *f : 0.0;
  }

  void log_eval(std::size_t eval_index, tree::OpKind op, const std::vector<std::size_t>& inputs,
                std::size_t node, double fitness, int generator_calls, int rechat_rounds,
                std::size_t round) {
    json rec = {
        {"eval", eval_index},
        {"round", round},
        {"op", tree::op_name(op)},
        {"inputs", inputs},
        {"node", node},
        {"fitness", fitness},
        {"elite_fitness", current_elite_fitness()},
        {"generator_calls", generator_calls},
        {"rechat_rounds", rechat_rounds},
        {"skipped", false},
        {"failure", ""},
    };
    log_.push_back(std::move(rec));
  }

  void store_eval(std::size_t node, const evaluator::CandidateEvaluation& eval) {
    evals_[node] = eval;
    if (cfg_.deterministic) evals_[node].result.wall_time = 0.0;
  }

  void write_eval_report(const fs::path& path, scoring::EvalResult result) const {
    if (cfg_.deterministic) result.wall_time = 0.0;
    io::write_text(path, io::eval_result_to_json(result).dump(2) + "\n");
  }

  RunSummary finalize(RunSummary summary) {
    summary.evaluations = state_.eval_count() > 0 ? state_.eval_count() - 1 : 0;
    if (!state_.empty()) {
      const auto best = state_.best_node();
      if (best) {
        summary.best_node = *best;
        summary.best_fitness = state_.node(*best).fitness_raw.value_or(0.0);
      }
    }
    try {
      write_artifacts(summary);
    } catch (const std::exception& e) {
      if (summary.exit_code == 0) {
        summary.exit_code = 4;
        summary.message = std::string("artifact write failed: ") + e.what();
      }
    }
    return summary;
  }

  void write_artifacts(const RunSummary& summary) {
    if (out_dir_.empty()) return;
    {
      std::ostringstream lines;
      for (const auto& rec : log_) lines << rec.dump() << "\n";
      io::write_text(out_dir_ / "runlog.jsonl", lines.str());
    }
    if (!state_.empty()) {
      io::write_text(out_dir_ / "tree.json", io::tree_to_json(state_).dump(2) + "\n");
      write_analysis();
      const auto best = state_.best_node();
      if (best) {
        io::write_text(out_dir_ / "best_candidate.dsl", state_.node(*best).candidate.code);
        const auto it = evals_.find(*best);
        if (it != evals_.end()) {
          write_eval_report(out_dir_ / "best_eval.json", it->second.result);
          io::write_catalog(out_dir_ / "best_catalog.csv", it->second.foreground);
        }
      }
    }
    json s = {
        {"exit_code", summary.exit_code},
        {"message", summary.message},
        {"evaluations", summary.evaluations},
        {"seed_fitness", summary.seed_fitness},
        {"best_fitness", summary.best_fitness},
        {"best_node", summary.best_node},
        {"converged", summary.converged},
    };
    io::write_text(out_dir_ / "summary.json", s.dump(2) + "\n");
  }

  void write_analysis() {
    std::vector<double> fitness;
    std::vector<std::string> canonical;
    for (const auto& rec : log_) {
      if (rec.at("skipped").get<bool>()) continue;
      fitness.push_back(rec.at("fitness").get<double>());
      const auto node = rec.at("node").get<std::size_t>();
      canonical.push_back(analysis::normalize_code(state_.node(node).candidate.code).text);
    }
    const auto& best = state_.best_history();
    const auto pts = analysis::detect_phase_transitions(best);
    const auto div = analysis::diversity_series(canonical, cfg_.diversity_window);

    json j;
    j["fitness"] = fitness;
    j["best_so_far"] = best;
    j["diversity_window"] = cfg_.diversity_window;
    j["phase_transitions"] = json::array();
    for (const auto& pt : pts) {
      j["phase_transitions"].push_back(
          {{"eval", pt.eval_index}, {"fitness", pt.fitness}, {"gain", pt.gain}});
    }
    j["diversity"] = json::array();
    for (const auto& d : div) {
      j["diversity"].push_back({{"eval", d.eval_index}, {"shannon", d.shannon}, {"cid", d.cid}});
    }
    io::write_text(out_dir_ / "analysis.json", j.dump(2) + "\n");

    std::ostringstream csv;
    csv << "eval,fitness,best_so_far,shannon,cid\n";
    for (std::size_t i = 0; i < fitness.size(); ++i) {
      csv << i << ',' << io::format_double(fitness[i]) << ','
          << io::format_double(i < best.size() ? best[i] : 0.0) << ',';
      const auto it = std::find_if(div.begin(), div.end(),
                                   [&](const auto& d) { return d.eval_index == i; });
      if (it != div.end()) {
        csv << io::format_double(it->shannon) << ',' << io::format_double(it->cid);
      } else {
        csv << ',';
      }
      csv << '\n';
    }
    io::write_text(out_dir_ / "analysis.csv", csv.str());
  }

  RunConfig cfg_;
  prompts::TemplateStore store_;
  tree::SearchState state_;
  rng::Rng rng_;
  evolve::Population pop_;
  std::unique_ptr<genclient::Generator> generator_;
  std::unique_ptr<datagen::Benchmark> benchmark_;
  std::unique_ptr<evaluator::BenchmarkEvaluator> evaluator_;
  std::vector<json> log_;
  std::map<std::size_t, evaluator::CandidateEvaluation> evals_;
  fs::path out_dir_;
};

}  // namespace gwsearch::engine
