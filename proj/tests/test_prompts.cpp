#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "gwsearch/prompts.hpp"
#include "gwsearch/rng.hpp"

using namespace gwsearch;
using prompts::TemplateKind;
using prompts::TemplateStore;

namespace {

// Bindings generous enough to render any template family.
std::map<std::string, std::string> full_bindings() {
  return {
      {"prompt_seed_func", "whiten_welch()\nmetric_meanpower()\ntrigger_basic()"},
      {"prompt_other_inf", "other-inf"},
      {"prompt_inout_inf", "inout-inf"},
      {"worse_code", "worse-code"},
      {"better_code", "better-code"},
      {"code_worse", "worse-code"},
      {"code_better", "better-code"},
      {"reflection", "reflection-text"},
      {"parent_reflections", "[No.1 Brother Reflection | Score: 10]<r1>"},
      {"father_reflection", "father-reflection"},
      {"parent_depth", "3"},
      {"father_depth", "2"},
      {"elite_reflection", "elite-reflection"},
      {"algorithm_description", "a pipeline"},
      {"algorithm_code", "code-here"},
      {"algorithm_reflections", "[No.1 algorithm's reflection (depth: 1)]<r>"},
      {"parent_info", "[No.1 algorithm's reflection (depth: 1)]<d><o><c>"},
      {"num_algorithms", "3"},
      {"original_algorithm_description", "orig-desc"},
      {"original_algorithm_code", "orig-code"},
      {"original_objective_value", "100.0"},
      {"better_algorithm_description", "better-desc"},
      {"better_algorithm_code", "better-code"},
      {"better_objective_value", "200.0"},
      {"better_algorithm_reflection", "better-reflection"},
      {"elite_algorithm_description", "elite-desc"},
      {"elite_algorithm_code", "elite-code"},
      {"algorithm", "design-idea"},
      {"code", "code-body"},
      {"func_name", "pipeline_v2"},
      {"input_count", "3"},
      {"joined_inputs", "strain_h1, strain_l1, times"},
      {"output_count", "3"},
      {"joined_outputs", "peak_times, peak_heights, peak_deltat"},
      {"inout_inf", "inout-inf"},
      {"other_inf", "other-inf"},
  };
}

}  // namespace

TEST_CASE("template checksums are frozen", "[prompts]") {
  TemplateStore store;
  const std::map<TemplateKind, std::uint64_t> expected = {
      {TemplateKind::System, 0xef1e4c05e8b015ecULL},
      {TemplateKind::SeedAnalysis, 0x13a6a82a63d9f143ULL},
      {TemplateKind::PcReflection, 0xdbca674700dcb9c9ULL},
      {TemplateKind::PcSynthesis, 0x9adc5ac64c3f0538ULL},
      {TemplateKind::ScPhase1, 0xac3fcba826ad3207ULL},
      {TemplateKind::ScPhase2, 0x41b4564a393914dfULL},
      {TemplateKind::PmSingle, 0x427068ea12711d6dULL},
      {TemplateKind::PmPhase1, 0xa10872b43e05081aULL},
      {TemplateKind::PmPhase2, 0xdbbff9e51acb3880ULL},
      {TemplateKind::PwcReflectPhase1, 0x03b17dbefd38a4fdULL},
      {TemplateKind::PwcComprehensivePhase1, 0xe33586905d8c120cULL},
      {TemplateKind::PwcPhase2, 0xcd1148fb98b84879ULL},
      {TemplateKind::DomainKnowledge, 0xaadfad7a93a8debcULL},
      {TemplateKind::PostSummary, 0xf318b52e6531f4fbULL},
  };
  for (const auto& [kind, sum] : expected) {
    INFO(prompts::template_name(kind));
    CHECK(store.checksum(kind) == sum);
  }
}

TEST_CASE("every template family renders at every depth band", "[prompts]") {
  TemplateStore store;
  for (const auto& [kind, name] : prompts::template_names()) {
    for (int depth : {1, 2, 3, 4, 5, 8, 10}) {
      INFO(name << " at depth " << depth);
      const auto bundle = store.render(kind, depth, full_bindings());
      REQUIRE(bundle.turns.size() == 1);
      REQUIRE(bundle.turns.front().first == "user");
      REQUIRE_FALSE(bundle.turns.front().second.empty());
      // no unexpanded placeholder survives
      CHECK(bundle.turns.front().second.find("{func_name}") == std::string::npos);
    }
  }
}

TEST_CASE("rendered PC synthesis carries the version headers", "[prompts]") {
  TemplateStore store;
  const auto bundle = store.render(TemplateKind::PcSynthesis, 3, full_bindings());
  const auto& text = bundle.turns.front().second;
  CHECK(text.find("VERSION A (Baseline Implementation)") != std::string::npos);
  CHECK(text.find("VERSION B (Enhanced Implementation)") != std::string::npos);
  // literal brace escapes collapse to single braces
  CHECK(text.find("\\{A hybrid gravitational wave detection pipeline...}") != std::string::npos);
}

TEST_CASE("depth guidance selects the right band", "[prompts]") {
  TemplateStore store;
  CHECK(store.render(TemplateKind::PcSynthesis, 1, full_bindings()).bindings.at("depth_band") ==
        "Shallow (Depth 1-2)");
  CHECK(store.render(TemplateKind::PcSynthesis, 4, full_bindings()).bindings.at("depth_band") ==
        "Medium (Depth 3-4)");
  CHECK(store.render(TemplateKind::PcSynthesis, 6, full_bindings()).bindings.at("depth_band") ==
        "Deep (Depth 5+)");
}

TEST_CASE("reflection model routing", "[prompts]") {
  TemplateStore store;
  CHECK(store.render(TemplateKind::PcReflection, 2, full_bindings()).role ==
        prompts::ModelRole::Reflection);
  CHECK(store.render(TemplateKind::ScPhase1, 2, full_bindings()).role ==
        prompts::ModelRole::Reflection);
  CHECK(store.render(TemplateKind::PmPhase1, 2, full_bindings()).role ==
        prompts::ModelRole::Reflection);
  CHECK(store.render(TemplateKind::PwcReflectPhase1, 2, full_bindings()).role ==
        prompts::ModelRole::Reflection);
  CHECK(store.render(TemplateKind::PcSynthesis, 2, full_bindings()).role ==
        prompts::ModelRole::Generation);
  CHECK(store.render(TemplateKind::PostSummary, 2, full_bindings()).role ==
        prompts::ModelRole::Generation);
}

TEST_CASE("missing placeholders raise a render error naming them", "[prompts]") {
  TemplateStore store;
  auto bindings = full_bindings();
  bindings.erase("reflection");
  CHECK_THROWS_WITH(store.render(TemplateKind::PcSynthesis, 3, bindings),
                    Catch::Matchers::ContainsSubstring("reflection"));
}

TEST_CASE("rendering is pure", "[prompts]") {
  TemplateStore store;
  const auto a = store.render(TemplateKind::ScPhase2, 4, full_bindings());
  const auto b = store.render(TemplateKind::ScPhase2, 4, full_bindings());
  CHECK(a.turns == b.turns);
  CHECK(a.system == b.system);
}

TEST_CASE("parse_response extracts the idea and the fenced code", "[prompts]") {
  const auto parsed = prompts::parse_response("{A hybrid pipeline}\n```\nstages here\n```\n");
  CHECK(parsed.design_idea == "A hybrid pipeline");
  CHECK(parsed.code == "stages here\n");
}

TEST_CASE("the first brace span wins", "[prompts]") {
  const auto parsed =
      prompts::parse_response("{first idea} and {second idea}\n```text\ncode\n```");
  CHECK(parsed.design_idea == "first idea");
}

TEST_CASE("docstring fallback supplies the idea", "[prompts]") {
  const auto parsed = prompts::parse_response(
      "no braces before the code\n```python\ndef pipeline_v2():\n    \"\"\"Docstring idea\"\"\"\n"
      "    pass\n```");
  CHECK(parsed.design_idea == "Docstring idea");

  const auto comment = prompts::parse_response(
      "```\n# comment idea line\nwhiten_welch()\nmetric_meanpower()\ntrigger_basic()\n```");
  CHECK(comment.design_idea == "comment idea line");
}

TEST_CASE("parse failures are structured", "[prompts]") {
  CHECK_THROWS_AS(prompts::parse_response("{idea only, no code}"), prompts::ResponseParseError);
  CHECK_THROWS_AS(prompts::parse_response("```\ncode but no idea anywhere\n```"),
                  prompts::ResponseParseError);
  CHECK_THROWS_AS(prompts::parse_response(""), prompts::ResponseParseError);
}

TEST_CASE("parse is the inverse of a well-formed emitter", "[prompts][property]") {
  rng::Rng r(2024);
  const std::string alphabet = "abcdefghij_ 123.";
  auto random_text = [&](std::size_t len) {
    std::string s;
    for (std::size_t i = 0; i < len; ++i) {
      s.push_back(alphabet[static_cast<std::size_t>(r.uniform() * alphabet.size())]);
    }
    return s;
  };
  auto strip = [](std::string s) {
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s;
  };
  for (int trial = 0; trial < 200; ++trial) {
    const std::string idea =
        strip("idea " + random_text(1 + static_cast<std::size_t>(r.uniform() * 40)));
    const std::string code =
        "line " + random_text(1 + static_cast<std::size_t>(r.uniform() * 60)) + "\n";
    const std::string emitted = "{" + idea + "}\n```\n" + code + "```\n";
    const auto parsed = prompts::parse_response(emitted);
    REQUIRE(parsed.design_idea == idea);
    REQUIRE(parsed.code == code);
  }
}

TEST_CASE("build_rechat appends the failed reply and the debug request", "[prompts]") {
  TemplateStore store;
  const auto original = store.render(TemplateKind::PcSynthesis, 2, full_bindings());
  const auto rechat = prompts::build_rechat(original, "bad reply", "parse error: missing fence");
  REQUIRE(rechat.turns.size() == 3);
  CHECK(rechat.turns[0].first == "user");
  CHECK(rechat.turns[1].first == "assistant");
  CHECK(rechat.turns[1].second == "bad reply");
  CHECK(rechat.turns[2].first == "user");
  const auto& last = rechat.turns[2].second;
  CHECK(last.rfind("Your previous code had execution errors, couldn't find signals, or timed "
                   "out. Please debug and fix the issues:\n\n",
                   0) == 0);
  CHECK(last.find(original.turns[0].second) != std::string::npos);
  CHECK(last.find("parse error: missing fence") != std::string::npos);
}

TEST_CASE("summarize renders the post-thought template", "[prompts]") {
  TemplateStore store;
  const auto bundle = prompts::summarize(store, "an idea", "some code", "io-inf", "other-inf");
  CHECK(bundle.turns.front().second.find("re-describe the algorithm") != std::string::npos);
  CHECK(bundle.turns.front().second.find("some code") != std::string::npos);
  CHECK_THROWS_AS(prompts::summarize(store, "idea", "   ", "a", "b"), prompts::RenderError);
}

TEST_CASE("override directory replaces template text", "[prompts]") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "gwsearch_prompt_override";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "domain_knowledge.txt", std::ios::binary);
    out << "custom knowledge block";
  }
  TemplateStore store(dir);
  CHECK(store.text(TemplateKind::DomainKnowledge) == "custom knowledge block");
  TemplateStore vanilla;
  CHECK(vanilla.text(TemplateKind::DomainKnowledge) != "custom knowledge block");
  fs::remove_all(dir);
}
