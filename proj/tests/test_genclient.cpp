#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include "gwsearch/evaluator.hpp"
#include "gwsearch/genclient.hpp"

using namespace gwsearch;
using genclient::FailureReport;
using nlohmann::json;
using genclient::MockGenerator;
using genclient::MockScript;
using prompts::PromptBundle;

namespace {

PromptBundle bundle_of(prompts::TemplateKind kind, int depth) {
  PromptBundle b;
  b.kind = kind;
  b.role = prompts::role_of(kind);
  b.depth = depth;
  b.system = "system";
  b.turns = {{"user", "prompt"}};
  return b;
}

std::string candidate_response(const std::string& idea, const std::string& body) {
  return "{" + idea + "}\n```\n" + body + "```\n";
}

}  // namespace

TEST_CASE("mock scripted responses are keyed by kind, depth and call index", "[genclient]") {
  MockScript script;
  script.entries.push_back({"pc_synthesis", 3, {"first", "second"}});
  script.entries.push_back({"pc_synthesis", -1, {"any-depth"}});
  MockGenerator gen(script);
  const auto b3 = bundle_of(prompts::TemplateKind::PcSynthesis, 3);
  const auto b5 = bundle_of(prompts::TemplateKind::PcSynthesis, 5);
  CHECK(gen.generate(b3) == "first");
  CHECK(gen.generate(b3) == "second");
  CHECK(gen.generate(b5) == "any-depth");
  // exhausted entries fall through to the deterministic fallback stream
  const auto fallback = gen.generate(b3);
  CHECK(fallback.find("trigger_basic") != std::string::npos);
}

TEST_CASE("mock stochastic entries follow the seeded weights", "[genclient]") {
  MockScript script;
  script.seed = 7;
  script.stochastic.push_back({"pm_phase2", {"gold", "dirt"}, {0.7, 0.3}});
  MockGenerator gen(script);
  const auto b = bundle_of(prompts::TemplateKind::PmPhase2, 2);
  int gold = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    if (gen.generate(b) == "gold") ++gold;
  }
  CHECK(static_cast<double>(gold) / n == Catch::Approx(0.7).margin(0.05));

  // identical seed, identical sequence
  MockGenerator gen2(script);
  MockGenerator gen3(script);
  for (int i = 0; i < 50; ++i) {
    REQUIRE(gen2.generate(b) == gen3.generate(b));
  }
}

TEST_CASE("reflection prompts get a brace-delimited stub by default", "[genclient]") {
  MockGenerator gen;
  const auto reply = gen.generate(bundle_of(prompts::TemplateKind::PcReflection, 2));
  CHECK(reply.front() == '{');
  CHECK(reply.back() == '}');
}

TEST_CASE("correction loop succeeds without rechat on a valid first reply", "[genclient]") {
  MockScript script;
  script.entries.push_back({"pc_synthesis", -1, {candidate_response("idea", "ok\n")}});
  MockGenerator gen(script);
  const auto res = genclient::correction_loop(
      gen, bundle_of(prompts::TemplateKind::PcSynthesis, 2),
      [](const prompts::ParsedResponse&) { return std::nullopt; });
  CHECK(res.success);
  CHECK(res.generator_calls == 1);
  CHECK(res.rechat_rounds == 0);
  CHECK(res.response.design_idea == "idea");
}

TEST_CASE("correction loop recovers after scripted failures", "[genclient]") {
  // initial + two corrections fail, the third correction succeeds
  MockScript script;
  script.entries.push_back({"pc_synthesis",
                            -1,
                            {"no code fence at all", "still bad",
                             candidate_response("fixed", "better\n"),
                             candidate_response("unused", "x\n")}});
  MockGenerator gen(script);
  const auto res = genclient::correction_loop(
      gen, bundle_of(prompts::TemplateKind::PcSynthesis, 2),
      [](const prompts::ParsedResponse&) { return std::nullopt; });
  CHECK(res.success);
  CHECK(res.generator_calls == 3);
  CHECK(res.rechat_rounds == 2);
}

TEST_CASE("the loop skips after the third failed correction", "[genclient]") {
  MockScript script;
  script.entries.push_back(
      {"pc_synthesis", -1, {"bad0", "bad1", "bad2", "bad3", candidate_response("late", "x\n")}});
  MockGenerator gen(script);
  const auto res = genclient::correction_loop(
      gen, bundle_of(prompts::TemplateKind::PcSynthesis, 2),
      [](const prompts::ParsedResponse&) { return std::nullopt; });
  CHECK_FALSE(res.success);
  CHECK(res.generator_calls == 4);  // 1 initial + 3 corrections, never more
  CHECK(res.rechat_rounds == 3);
  REQUIRE(res.last_failure.has_value());
  CHECK(res.last_failure->kind == FailureReport::Kind::Parse);
}

TEST_CASE("evaluator failures feed the rechat round", "[genclient]") {
  MockScript script;
  script.entries.push_back({"pc_synthesis",
                            -1,
                            {candidate_response("a", "stage\n"),
                             candidate_response("b", "stage\n")}});
  MockGenerator gen(script);
  int calls = 0;
  const auto res = genclient::correction_loop(
      gen, bundle_of(prompts::TemplateKind::PcSynthesis, 2),
      [&](const prompts::ParsedResponse&) -> std::optional<FailureReport> {
        if (++calls == 1) {
          return FailureReport{FailureReport::Kind::NoTrigger, "empty catalog"};
        }
        return std::nullopt;
      });
  CHECK(res.success);
  CHECK(res.generator_calls == 2);
  CHECK(res.rechat_rounds == 1);
}

TEST_CASE("rerun_edge statistics", "[genclient]") {
  MockScript script;
  script.entries.push_back({"pm_phase2", -1, {}});
  MockGenerator constant_gen;
  // constant fallback stream cycles, so pin a scripted constant instead
  MockScript cscript;
  std::vector<std::string> constant(5, candidate_response("same", "body\n"));
  cscript.entries.push_back({"pm_phase2", -1, constant});
  MockGenerator gen(cscript);

  const auto res = genclient::rerun_edge(
      gen, bundle_of(prompts::TemplateKind::PmPhase2, 2), 5, 10.0,
      [](const prompts::ParsedResponse&) { return std::optional<double>(12.5); });
  REQUIRE(res.samples.size() == 5);
  CHECK(res.mean == Catch::Approx(12.5));
  CHECK(res.sd == 0.0);
  CHECK(res.exceed_fraction == 1.0);
  CHECK(res.failures == 0);

  const auto empty = genclient::rerun_edge(
      gen, bundle_of(prompts::TemplateKind::PmPhase2, 2), 0, 10.0,
      [](const prompts::ParsedResponse&) { return std::optional<double>(1.0); });
  CHECK(empty.samples.empty());
  CHECK(empty.exceed_fraction == 0.0);
}

TEST_CASE("rerun_edge counts the exceedance fraction over all repetitions", "[genclient]") {
  MockScript script;
  script.seed = 3;
  script.stochastic.push_back({"pm_phase2",
                               {candidate_response("hi", "good\n"),
                                candidate_response("lo", "bad\n")},
                               {0.7, 0.3}});
  MockGenerator gen(script);
  const auto res = genclient::rerun_edge(
      gen, bundle_of(prompts::TemplateKind::PmPhase2, 2), 100, 100.0,
      [](const prompts::ParsedResponse& r) {
        return std::optional<double>(r.design_idea == "hi" ? 150.0 : 50.0);
      });
  CHECK(res.exceed_fraction == Catch::Approx(0.7).margin(0.1));
}

TEST_CASE("credential redaction removes the secret everywhere", "[genclient]") {
  const std::string secret = "sk-THISISSECRET";
  const std::string text = "Authorization: Bearer sk-THISISSECRET and again sk-THISISSECRET.";
  const auto clean = genclient::redact(text, secret);
  CHECK(clean.find(secret) == std::string::npos);
  CHECK(clean.find("[redacted]") != std::string::npos);
  CHECK(genclient::redact("nothing here", secret) == "nothing here");
  CHECK(genclient::redact("x", "") == "x");
}

TEST_CASE("mock scripts load from JSON files", "[genclient]") {
  namespace fs = std::filesystem;
  const auto path = fs::temp_directory_path() / "gwsearch_mock_script.json";
  {
    std::ofstream out(path);
    out << R"({"seed": 5, "fallback": "seed_echo",
               "entries": [{"kind": "pc_synthesis", "depth": 2, "responses": ["hello"]}],
               "stochastic": [{"kind": "pm_phase2", "responses": ["a", "b"], "weights": [0.5, 0.5]}]})";
  }
  const auto script = MockScript::from_file(path);
  CHECK(script.seed == 5);
  CHECK(script.fallback == "seed_echo");
  REQUIRE(script.entries.size() == 1);
  CHECK(script.entries[0].depth == 2);
  REQUIRE(script.stochastic.size() == 1);
  fs::remove(path);
}

TEST_CASE("live requests carry temperature 1.0 and route reflection models", "[genclient]") {
  httplib::Server server;
  std::vector<json> bodies;
  std::vector<std::string> auth_headers;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    bodies.push_back(json::parse(req.body));
    auth_headers.push_back(req.get_header_value("Authorization"));
    res.set_content(
        json{{"choices", {{{"message", {{"role", "assistant"}, {"content", "{idea}\n```\nx\n```"}}}}}}}
            .dump(),
        "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  genclient::GeneratorConfig cfg;
  cfg.backend = "http";
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  cfg.generation_model = "gen-model";
  cfg.reflection_model = "refl-model";
  cfg.credential_env = "GWSEARCH_TEST_KEY";
  ::setenv("GWSEARCH_TEST_KEY", "test-secret", 1);
  genclient::HttpGenerator gen(cfg);

  auto synth = bundle_of(prompts::TemplateKind::PcSynthesis, 2);
  CHECK(gen.generate(synth) == "{idea}\n```\nx\n```");
  auto refl = bundle_of(prompts::TemplateKind::PcReflection, 2);
  gen.generate(refl);

  server.stop();
  server_thread.join();
  ::unsetenv("GWSEARCH_TEST_KEY");

  REQUIRE(bodies.size() == 2);
  CHECK(bodies[0].at("temperature").get<double>() == 1.0);
  CHECK(bodies[0].at("model").get<std::string>() == "gen-model");
  CHECK(bodies[1].at("model").get<std::string>() == "refl-model");
  CHECK(bodies[0].at("messages").at(0).at("role") == "system");
  CHECK(bodies[0].at("messages").at(1).at("role") == "user");
  CHECK(auth_headers[0] == "Bearer test-secret");
}

TEST_CASE("https URLs require TLS support in this build", "[genclient]") {
#ifndef GWSEARCH_ENABLE_TLS
  genclient::GeneratorConfig cfg;
  cfg.backend = "http";
  cfg.base_url = "https://example.invalid/v1";
  CHECK_THROWS_AS(genclient::HttpGenerator(cfg), std::invalid_argument);
#endif
  genclient::GeneratorConfig bad;
  bad.backend = "http";
  bad.base_url = "no-scheme";
  CHECK_THROWS_AS(genclient::HttpGenerator(bad), std::invalid_argument);
}

TEST_CASE("external executor runs the argv template and respects the timeout", "[genclient]") {
  namespace fs = std::filesystem;
  const auto out_csv = fs::temp_directory_path() / "gwsearch_external_out.csv";
  fs::remove(out_csv);

  genclient::ExternalExecutorConfig cfg;
  cfg.argv_template = {"/bin/sh", "-c", "printf 'time,stat,var\\n12.5,3.25,0.2\\n' > {out}"};
  cfg.timeout_s = 10.0;
  const auto res = genclient::run_external(cfg, {{"out", out_csv.string()}});
  CHECK(res.exit_code == 0);
  CHECK_FALSE(res.timed_out);
  REQUIRE(fs::exists(out_csv));
  std::ifstream in(out_csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "time,stat,var");
  fs::remove(out_csv);

  genclient::ExternalExecutorConfig slow;
  slow.argv_template = {"/bin/sh", "-c", "sleep 5"};
  slow.timeout_s = 0.2;
  const auto killed = genclient::run_external(slow, {});
  CHECK(killed.timed_out);

  genclient::ExternalExecutorConfig failing;
  failing.argv_template = {"/bin/sh", "-c", "exit 7"};
  failing.timeout_s = 5.0;
  CHECK(genclient::run_external(failing, {}).exit_code == 7);
}

TEST_CASE("external evaluation scores a subprocess-produced catalog", "[genclient]") {
  datagen::DatasetConfig dcfg;
  dcfg.train_segments = 1;
  dcfg.test_segments = 0;
  dcfg.segment_duration_s = 60.0;
  dcfg.injections_per_segment = 1;
  dcfg.injection.min_separation_s = 5.0;
  dcfg.seed = 3;
  const auto bench = datagen::build_benchmark(dcfg);
  const double t_inj = bench.train_fg[0].injections[0].t_coal;

  // The stand-in executor parses the sidecar start time and emits a fixed
  // spread of background triggers plus one foreground trigger at the
  // injection time.
  genclient::ExternalExecutorConfig exec;
  exec.argv_template = {
      "/bin/sh", "-c",
      "printf 'time,stat,var\\n' > {out}; "
      "for i in 1 2 3 4 5 6 7 8; do printf \"$((i * 5)).0,$i.0,0.2\\n\" >> {out}; done; "
      "printf '" + std::to_string(t_inj) + ",50.0,0.15\\n' >> {out}"};
  evaluator::EvaluationLimits limits;
  limits.t_max_s = 30.0;
  const auto outcome = evaluator::evaluate_external(
      exec, "opaque candidate body", bench, scoring::FarRange{4000.0, 500000.0}, limits);
  REQUIRE(std::holds_alternative<evaluator::CandidateEvaluation>(outcome));
  const auto& ce = std::get<evaluator::CandidateEvaluation>(outcome);
  CHECK(ce.background.size() == 9);
  CHECK(ce.foreground.size() == 9);
  CHECK(ce.result.auc > 0.0);
}

TEST_CASE("external evaluation reports nonzero exits as runtime failures", "[genclient]") {
  datagen::DatasetConfig dcfg;
  dcfg.train_segments = 1;
  dcfg.test_segments = 0;
  dcfg.segment_duration_s = 60.0;
  dcfg.injections_per_segment = 0;
  dcfg.seed = 3;
  const auto bench = datagen::build_benchmark(dcfg);
  genclient::ExternalExecutorConfig exec;
  exec.argv_template = {"/bin/sh", "-c", "exit 3"};
  evaluator::EvaluationLimits limits;
  limits.e_max = 0;
  const auto outcome = evaluator::evaluate_external(exec, "body", bench, {}, limits);
  REQUIRE(std::holds_alternative<genclient::FailureReport>(outcome));
  CHECK(std::get<genclient::FailureReport>(outcome).kind ==
        genclient::FailureReport::Kind::Runtime);
}
