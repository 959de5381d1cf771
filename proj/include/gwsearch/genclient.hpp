#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#ifdef GWSEARCH_ENABLE_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

#include "gwsearch/failure.hpp"
#include "gwsearch/prompts.hpp"
#include "gwsearch/rng.hpp"

#include <sys/wait.h>
#include <unistd.h>
#include <signal.h>

namespace gwsearch::genclient {

using prompts::ModelRole;
using prompts::PromptBundle;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct GeneratorConfig {
  std::string backend = "mock";  // "mock" or "http"
  std::string generation_model = "o3-mini";
  std::string reflection_model = "deepseek-reasoner";
  double temperature = 1.0;
  std::string base_url = "https://api.openai.com/v1";
  std::string credential_env = "GWSEARCH_API_KEY";
  double timeout_s = 120.0;
  int max_in_flight = 4;
  int transport_retries = 3;
  std::string mock_script_path;  // JSON script for the mock backend
};

struct GeneratorError : std::runtime_error {
  bool retryable;
  GeneratorError(const std::string& msg, bool retryable_)
      : std::runtime_error(msg), retryable(retryable_) {}
};

// Replace any occurrence of the secret in outgoing text; applied to every log
// and error excerpt so credentials cannot leak into artifacts.
inline std::string redact(std::string text, const std::string& secret) {
  if (secret.empty()) return text;
  std::size_t pos = 0;
  while ((pos = text.find(secret, pos)) != std::string::npos) {
    text.replace(pos, secret.size(), "[redacted]");
    pos += 10;
  }
  return text;
}

// ---------------------------------------------------------------------------
// Generator interface
// ---------------------------------------------------------------------------

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string generate(const PromptBundle& bundle) = 0;
};

// ---------------------------------------------------------------------------
// Live chat-completion backend (OpenAI-compatible wire schema)
// ---------------------------------------------------------------------------

class HttpGenerator : public Generator {
 public:
  explicit HttpGenerator(GeneratorConfig cfg) : cfg_(std::move(cfg)) {
    const auto scheme_end = cfg_.base_url.find("://");
    if (scheme_end == std::string::npos)
      throw std::invalid_argument("HttpGenerator: base_url needs a scheme");
    const auto path_start = cfg_.base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
      host_ = cfg_.base_url;
      path_prefix_.clear();
    } else {
      host_ = cfg_.base_url.substr(0, path_start);
      path_prefix_ = cfg_.base_url.substr(path_start);
    }
#ifndef GWSEARCH_ENABLE_TLS
    if (host_.rfind("https", 0) == 0)
      throw std::invalid_argument("HttpGenerator: built without TLS support; use an http:// URL");
#endif
  }

  std::string generate(const PromptBundle& bundle) override {
    nlohmann::json body;
    body["model"] = bundle.role == ModelRole::Reflection ? cfg_.reflection_model
                                                         : cfg_.generation_model;
    body["temperature"] = cfg_.temperature;
    auto messages = nlohmann::json::array();
    if (!bundle.system.empty()) {
      messages.push_back({{"role", "system"}, {"content", bundle.system}});
    }
    for (const auto& [role, content] : bundle.turns) {
      messages.push_back({{"role", role}, {"content", content}});
    }
    body["messages"] = std::move(messages);

    const char* key_env = std::getenv(cfg_.credential_env.c_str());
    const std::string key = key_env ? key_env : "";

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.transport_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(250 * (1 << std::min(attempt - 1, 4))));
      }
      httplib::Client client(host_);
      client.set_read_timeout(static_cast<time_t>(cfg_.timeout_s), 0);
      client.set_connection_timeout(static_cast<time_t>(cfg_.timeout_s), 0);
      httplib::Headers headers;
      if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
      auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(),
                             "application/json");
      if (!res) {
        last_error = "transport failure: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_error = "server error " + std::to_string(res->status) + ": " +
                     redact(res->body.substr(0, 200), key);
        continue;
      }
      if (res->status != 200) {
        throw GeneratorError("generator returned status " + std::to_string(res->status) + ": " +
                                 redact(res->body.substr(0, 200), key),
                             false);
      }
      try {
        const auto parsed = nlohmann::json::parse(res->body);
        return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const std::exception& e) {
        throw GeneratorError(std::string("malformed completion payload: ") + e.what(), false);
      }
    }
    throw GeneratorError(last_error.empty() ? "generator unreachable" : last_error, true);
  }

 private:
  GeneratorConfig cfg_;
  std::string host_;
  std::string path_prefix_;
};

// ---------------------------------------------------------------------------
// Deterministic mock backend
// ---------------------------------------------------------------------------

// Script format (JSON):
//   {
//     "seed": 1,
//     "fallback": "seed_tweaks",          // or "seed_echo"
//     "entries": [
//       {"kind": "pc_synthesis", "depth": -1, "responses": ["...", "..."]}
//     ],
//     "stochastic": [
//       {"kind": "pm_phase2", "responses": ["...", "..."], "weights": [0.7, 0.3]}
//     ]
//   }
// Exact entries are consumed by (kind, depth) call index; a -1 depth matches
// any depth. Unmatched reflection prompts get a fixed insight stub; unmatched
// generation prompts get the fallback candidate stream.
struct MockScript {
  struct Entry {
    std::string kind;
    int depth = -1;
    std::vector<std::string> responses;
  };
  struct Stochastic {
    std::string kind;
    std::vector<std::string> responses;
    std::vector<double> weights;
  };
  std::uint64_t seed = 1;
  std::string fallback = "seed_tweaks";
  std::vector<Entry> entries;
  std::vector<Stochastic> stochastic;

  static MockScript from_json(const nlohmann::json& j) {
    MockScript s;
    s.seed = j.value("seed", 1ULL);
    s.fallback = j.value("fallback", std::string("seed_tweaks"));
    if (j.contains("entries")) {
      for (const auto& e : j.at("entries")) {
        Entry entry;
        entry.kind = e.at("kind").get<std::string>();
        entry.depth = e.value("depth", -1);
        for (const auto& r : e.at("responses")) entry.responses.push_back(r.get<std::string>());
        s.entries.push_back(std::move(entry));
      }
    }
    if (j.contains("stochastic")) {
      for (const auto& e : j.at("stochastic")) {
        Stochastic st;
        st.kind = e.at("kind").get<std::string>();
        for (const auto& r : e.at("responses")) st.responses.push_back(r.get<std::string>());
        for (const auto& w : e.at("weights")) st.weights.push_back(w.get<double>());
        if (st.weights.size() != st.responses.size())
          throw std::invalid_argument("mock script: weights/responses size mismatch");
        s.stochastic.push_back(std::move(st));
      }
    }
    return s;
  }

  static MockScript from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("mock script not found: " + path.string());
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }
};

class MockGenerator : public Generator {
 public:
  explicit MockGenerator(MockScript script = {})
      : script_(std::move(script)), rng_(script_.seed) {}

  std::string generate(const PromptBundle& bundle) override {
    ++total_calls_;
    const std::string kind = prompts::template_name(bundle.kind);

    for (std::size_t i = 0; i < script_.entries.size(); ++i) {
      auto& e = script_.entries[i];
      if (e.kind != kind) continue;
      if (e.depth >= 0 && e.depth != bundle.depth) continue;
      auto& used = entry_cursor_[i];
      if (used < e.responses.size()) return e.responses[used++];
    }
    for (const auto& st : script_.stochastic) {
      if (st.kind != kind) continue;
      const std::size_t idx = rng_.weighted_index(st.weights);
      return st.responses[idx];
    }
    if (bundle.role == ModelRole::Reflection) {
      return "{Prefer adaptive thresholds over fixed ones and weight the two channels by their "
             "coherence; keep the spectrogram resolution unchanged.}";
    }
    if (bundle.kind == prompts::TemplateKind::PostSummary) {
      return "A staged strain pipeline: conditioning, a time-frequency detection metric, and "
             "threshold-based trigger selection.";
    }
    return fallback_candidate();
  }

  std::size_t total_calls() const { return total_calls_; }

 private:
  // Deterministic candidate stream: the canonical baseline with a small
  // parameter perturbation that cycles with the call index.
  std::string fallback_candidate() {
    const std::size_t k = fallback_count_++;
    if (script_.fallback == "seed_echo") {
      return "{The baseline three-stage pipeline.}\n```\n" + seed_text() + "```\n";
    }
    std::ostringstream body;
    const double prom = 0.3 + 0.05 * static_cast<double>(k % 5);
    const int dist = 2 + static_cast<int>(k % 3);
    body << "detrend_none()\n"
         << "whiten_welch(nperseg=4096, noverlap=2048, smooth_kernel=32)\n"
         << "metric_meanpower(nperseg=256, noverlap=128)\n"
         << "trigger_basic(height_factor=1, distance=" << dist << ", prominence_factor=" << prom
         << ", var_fixed=10)\n";
    return "{Baseline pipeline with perturbed trigger thresholds (variant " +
           std::to_string(k) + ").}\n```\n" + body.str() + "```\n";
  }

  static std::string seed_text() {
    return
        "detrend_none()\n"
        "whiten_welch(nperseg=4096, noverlap=2048, smooth_kernel=32)\n"
        "metric_meanpower(nperseg=256, noverlap=128)\n"
        "trigger_basic(height_factor=1, distance=2, prominence_factor=0.3, var_fixed=10)\n";
  }

  MockScript script_;
  rng::Rng rng_;
  std::map<std::size_t, std::size_t> entry_cursor_;
  std::size_t fallback_count_ = 0;
  std::size_t total_calls_ = 0;
};

inline std::unique_ptr<Generator> make_generator(const GeneratorConfig& cfg) {
  if (cfg.backend == "mock") {
    MockScript script;
    if (!cfg.mock_script_path.empty()) script = MockScript::from_file(cfg.mock_script_path);
    return std::make_unique<MockGenerator>(std::move(script));
  }
  if (cfg.backend == "http") return std::make_unique<HttpGenerator>(cfg);
  throw std::invalid_argument("unknown generator backend: " + cfg.backend);
}

// ---------------------------------------------------------------------------
// Correction loop
// ---------------------------------------------------------------------------

struct LoopResult {
  bool success = false;
  prompts::ParsedResponse response;
  int generator_calls = 0;
  int rechat_rounds = 0;
  std::optional<FailureReport> last_failure;
};

// The evaluator hook runs parse -> execute -> score on its side and returns a
// failure report, or nothing on success.
using EvaluateHook = std::function<std::optional<FailureReport>(const prompts::ParsedResponse&)>;

// Up to `max_corrections` rechat rounds per expansion; the fourth consecutive
// failure yields a skip (success=false). Never issues more than
// 1 + max_corrections generator calls.
inline LoopResult correction_loop(Generator& gen, const PromptBundle& bundle,
                                  const EvaluateHook& hook, int max_corrections = 3) {
  LoopResult res;
  PromptBundle current = bundle;
  std::string raw = gen.generate(current);
  ++res.generator_calls;
  for (int round = 0;; ++round) {
    std::optional<FailureReport> failure;
    try {
      const auto parsed = prompts::parse_response(raw);
      failure = hook(parsed);
      if (!failure) {
        res.success = true;
        res.response = parsed;
        res.rechat_rounds = round;
        return res;
      }
    } catch (const prompts::ResponseParseError& e) {
      failure = FailureReport{FailureReport::Kind::Parse, e.what()};
    }
    res.last_failure = failure;
    if (round >= max_corrections) {
      res.rechat_rounds = max_corrections;
      return res;  // skip signal
    }
    current = prompts::build_rechat(current, raw, failure->to_text());
    raw = gen.generate(current);
    ++res.generator_calls;
  }
}

// ---------------------------------------------------------------------------
// Edge re-execution (robustness protocol)
// ---------------------------------------------------------------------------

struct EdgeRerunResult {
  std::vector<std::optional<double>> samples;  // absent = failed repetition
  double mean = 0.0;
  double sd = 0.0;  // population standard deviation over successful samples
  double exceed_fraction = 0.0;  // count(f > reference) / n
  std::size_t failures = 0;
  double reference_fitness = 0.0;
};

using FitnessHook = std::function<std::optional<double>(const prompts::ParsedResponse&)>;

// Replays one recorded evolutionary transition n times with fresh sampling,
// collecting the fitness distribution against the reference node.
inline EdgeRerunResult rerun_edge(Generator& gen, const PromptBundle& bundle, std::size_t n,
                                  double reference_fitness, const FitnessHook& hook) {
  EdgeRerunResult out;
  out.reference_fitness = reference_fitness;
  out.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<double> fitness;
    try {
      const std::string raw = gen.generate(bundle);
      const auto parsed = prompts::parse_response(raw);
      fitness = hook(parsed);
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

// ---------------------------------------------------------------------------
// External executor escape hatch
// ---------------------------------------------------------------------------

// Runs candidate code through a user-configured subprocess. Strain goes in as
// files (raw f64 + JSON sidecar), the catalog comes back as time,stat,var
// CSV. Exit code 0 means the catalog was written; nonzero is a runtime error;
// overrunning the wall budget kills the process (timeout).
struct ExternalExecutorConfig {
  std::vector<std::string> argv_template;  // placeholders: {code} {h1} {h1_meta} {l1} {l1_meta} {out}
  double timeout_s = 60.0;
};

struct ExternalRunResult {
  int exit_code = -1;
  bool timed_out = false;
};

inline ExternalRunResult run_external(const ExternalExecutorConfig& cfg,
                                      const std::map<std::string, std::string>& paths) {
  std::vector<std::string> argv;
  for (std::string arg : cfg.argv_template) {
    for (const auto& [key, value] : paths) {
      const std::string token = "{" + key + "}";
      std::size_t pos = 0;
      while ((pos = arg.find(token, pos)) != std::string::npos) {
        arg.replace(pos, token.size(), value);
        pos += value.size();
      }
    }
    argv.push_back(std::move(arg));
  }
  if (argv.empty()) throw std::invalid_argument("run_external: empty argv template");

  std::vector<char*> cargv;
  for (auto& a : argv) cargv.push_back(a.data());
  cargv.push_back(nullptr);

  ExternalRunResult res;
  const pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("run_external: fork failed");
  if (pid == 0) {
    execvp(cargv[0], cargv.data());
    _exit(127);
  }
  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::duration<double>(cfg.timeout_s);
  int status = 0;
  while (true) {
    const pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (std::chrono::steady_clock::now() > deadline) {
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      res.timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (!res.timed_out && WIFEXITED(status)) res.exit_code = WEXITSTATUS(status);
  return res;
}

}  // namespace gwsearch::genclient
