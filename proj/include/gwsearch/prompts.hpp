#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gwsearch/prompt_texts.hpp"
#include "gwsearch/tree.hpp"

namespace gwsearch::prompts {

enum class TemplateKind {
  System,
  SeedAnalysis,
  PcReflection,
  PcSynthesis,
  ScPhase1,
  ScPhase2,
  PmSingle,
  PmPhase1,
  PmPhase2,
  PwcReflectPhase1,
  PwcComprehensivePhase1,
  PwcPhase2,
  DomainKnowledge,
  PostSummary,
};

inline const std::vector<std::pair<TemplateKind, const char*>>& template_names() {
  static const std::vector<std::pair<TemplateKind, const char*>> names = {
      {TemplateKind::System, "system"},
      {TemplateKind::SeedAnalysis, "seed_analysis"},
      {TemplateKind::PcReflection, "pc_reflection"},
      {TemplateKind::PcSynthesis, "pc_synthesis"},
      {TemplateKind::ScPhase1, "sc_phase1"},
      {TemplateKind::ScPhase2, "sc_phase2"},
      {TemplateKind::PmSingle, "pm_single"},
      {TemplateKind::PmPhase1, "pm_phase1"},
      {TemplateKind::PmPhase2, "pm_phase2"},
      {TemplateKind::PwcReflectPhase1, "pwc_reflect_phase1"},
      {TemplateKind::PwcComprehensivePhase1, "pwc_comprehensive_phase1"},
      {TemplateKind::PwcPhase2, "pwc_phase2"},
      {TemplateKind::DomainKnowledge, "domain_knowledge"},
      {TemplateKind::PostSummary, "post_summary"},
  };
  return names;
}

inline const char* template_name(TemplateKind k) {
  for (const auto& [kind, name] : template_names()) {
    if (kind == k) return name;
  }
  throw std::logic_error("template_name: unknown kind");
}

// Reflection-phase templates go to the reflection model; the rest to the
// generation model.
enum class ModelRole { Generation, Reflection };

inline ModelRole role_of(TemplateKind k) {
  switch (k) {
    case TemplateKind::PcReflection:
    case TemplateKind::ScPhase1:
    case TemplateKind::PmPhase1:
    case TemplateKind::PwcReflectPhase1:
    case TemplateKind::PwcComprehensivePhase1:
      return ModelRole::Reflection;
    default:
      return ModelRole::Generation;
  }
}

// Candidate expression mode: the built-in registered-stage executor, or the
// original free-code instructions for an external executor.
enum class OutputMode { Dsl, Python };

struct RenderError : std::runtime_error {
  explicit RenderError(const std::string& msg) : std::runtime_error(msg) {}
};

struct PromptBundle {
  std::string system;
  std::vector<std::pair<std::string, std::string>> turns;  // (role, content)
  TemplateKind kind = TemplateKind::System;
  ModelRole role = ModelRole::Generation;
  int depth = 0;
  std::map<std::string, std::string> bindings;  // fully bound placeholders
};

struct ParsedResponse {
  std::string design_idea;
  std::string code;
  std::string raw;
};

struct ResponseParseError : std::runtime_error {
  explicit ResponseParseError(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline const char* depth_band(int depth) {
  if (depth <= 2) return "Shallow (Depth 1-2)";
  if (depth <= 4) return "Medium (Depth 3-4)";
  return "Deep (Depth 5+)";
}

// ---------------------------------------------------------------------------
// Template store
// ---------------------------------------------------------------------------

class TemplateStore {
 public:
  // Override directory: <name>.txt files replace the built-in text of the
  // same template family.
  explicit TemplateStore(const std::filesystem::path& override_dir = {}) {
    texts_[TemplateKind::System] = texts::kSystem;
    texts_[TemplateKind::SeedAnalysis] = texts::kSeedAnalysis;
    texts_[TemplateKind::PcReflection] = texts::kPcReflection;
    texts_[TemplateKind::PcSynthesis] = texts::kPcSynthesis;
    texts_[TemplateKind::ScPhase1] = texts::kScPhase1;
    texts_[TemplateKind::ScPhase2] = texts::kScPhase2;
    texts_[TemplateKind::PmSingle] = texts::kPmSingle;
    texts_[TemplateKind::PmPhase1] = texts::kPmPhase1;
    texts_[TemplateKind::PmPhase2] = texts::kPmPhase2;
    texts_[TemplateKind::PwcReflectPhase1] = texts::kPwcReflectPhase1;
    texts_[TemplateKind::PwcComprehensivePhase1] = texts::kPwcComprehensivePhase1;
    texts_[TemplateKind::PwcPhase2] = texts::kPwcPhase2;
    texts_[TemplateKind::DomainKnowledge] = texts::kDomainKnowledge;
    texts_[TemplateKind::PostSummary] = texts::kPostSummary;
    if (!override_dir.empty()) {
      for (const auto& [kind, name] : template_names()) {
        const auto path = override_dir / (std::string(name) + ".txt");
        if (std::filesystem::exists(path)) {
          std::ifstream in(path);
          std::ostringstream buf;
          buf << in.rdbuf();
          texts_[kind] = buf.str();
        }
      }
    }
  }

  const std::string& text(TemplateKind k) const { return texts_.at(k); }
  std::uint64_t checksum(TemplateKind k) const { return fnv1a64(texts_.at(k)); }

  // Substitutes {name} from bindings; "{{" and "}}" are literal braces.
  // A placeholder without a binding raises RenderError naming it.
  static std::string substitute(std::string_view tpl,
                                const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(tpl.size());
    for (std::size_t i = 0; i < tpl.size();) {
      const char c = tpl[i];
      if (c == '{') {
        if (i + 1 < tpl.size() && tpl[i + 1] == '{') {
          out.push_back('{');
          i += 2;
          continue;
        }
        const auto close = tpl.find('}', i + 1);
        if (close == std::string_view::npos)
          throw RenderError("unterminated placeholder in template");
        const std::string name(tpl.substr(i + 1, close - i - 1));
        const auto it = bindings.find(name);
        if (it == bindings.end()) throw RenderError("unbound placeholder: " + name);
        out += it->second;
        i = close + 1;
        continue;
      }
      if (c == '}') {
        if (i + 1 < tpl.size() && tpl[i + 1] == '}') {
          out.push_back('}');
          i += 2;
          continue;
        }
        throw RenderError("stray '}' in template");
      }
      out.push_back(c);
      i += 1;
    }
    return out;
  }

  // Renders one template family into a single-user-turn bundle. Besides the
  // caller bindings, {depth}, {max_depth}, {depth_band}, {external_knowledge}
  // and {output_format} are bound automatically (callers may override).
  PromptBundle render(TemplateKind kind, int depth,
                      std::map<std::string, std::string> bindings,
                      OutputMode mode = OutputMode::Dsl, int max_depth = 10) const {
    PromptBundle bundle;
    bundle.kind = kind;
    bundle.role = role_of(kind);
    bundle.depth = depth;

    auto set_default = [&](const std::string& key, std::string value) {
      if (bindings.find(key) == bindings.end()) bindings[key] = std::move(value);
    };
    set_default("depth", std::to_string(depth));
    set_default("max_depth", std::to_string(max_depth));
    set_default("depth_band", depth_band(depth));
    set_default("external_knowledge", text(TemplateKind::DomainKnowledge));
    if (bindings.find("output_format") == bindings.end() &&
        text(kind).find("{output_format}") != std::string::npos) {
      const char* fmt = (mode == OutputMode::Dsl) ? texts::kOutputFormatDsl
                                                  : texts::kOutputFormatPython;
      bindings["output_format"] = substitute(fmt, bindings);
    }

    bundle.system = text(TemplateKind::System);
    bundle.turns.emplace_back("user", substitute(text(kind), bindings));
    bundle.bindings = std::move(bindings);
    return bundle;
  }

 private:
  std::map<TemplateKind, std::string> texts_;
};

// ---------------------------------------------------------------------------
// Response parsing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

// First brace-delimited span, non-greedy with dot-matches-newline semantics:
// the first '{' paired with the next '}'.
inline std::optional<std::string> first_brace_span(std::string_view s) {
  const auto open = s.find('{');
  if (open == std::string_view::npos) return std::nullopt;
  const auto close = s.find('}', open + 1);
  if (close == std::string_view::npos) return std::nullopt;
  return std::string(s.substr(open + 1, close - open - 1));
}

// First fenced code block; an optional language tag on the opening fence is
// skipped.
inline std::optional<std::string> first_fenced_block(std::string_view s) {
  const auto open = s.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  auto body_start = s.find('\n', open + 3);
  if (body_start == std::string_view::npos) return std::nullopt;
  body_start += 1;
  const auto close = s.find("```", body_start);
  if (close == std::string_view::npos) return std::nullopt;
  return std::string(s.substr(body_start, close - body_start));
}

// Docstring fallback: a leading """...""" block, or leading '#' comment lines
// for stage-language candidates.
inline std::optional<std::string> docstring_idea(std::string_view code) {
  const auto q = code.find("\"\"\"");
  if (q != std::string_view::npos) {
    const auto end = code.find("\"\"\"", q + 3);
    if (end != std::string_view::npos) {
      const auto idea = trim(code.substr(q + 3, end - q - 3));
      if (!idea.empty()) return idea;
    }
  }
  std::istringstream in{std::string(code)};
  std::string line;
  std::string acc;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      if (!acc.empty()) acc += ' ';
      acc += trim(std::string_view(t).substr(1));
      continue;
    }
    break;
  }
  if (!acc.empty()) return acc;
  return std::nullopt;
}

}  // namespace detail

// Extracts the design idea (first brace span, docstring fallback) and the
// first fenced code block. Missing pieces raise ResponseParseError; the
// message feeds the rechat loop.
inline ParsedResponse parse_response(const std::string& raw) {
  ParsedResponse out;
  out.raw = raw;

  auto code = detail::first_fenced_block(raw);
  if (!code) throw ResponseParseError("response has no fenced code block");
  out.code = *code;
  if (detail::trim(out.code).empty()) throw ResponseParseError("fenced code block is empty");

  std::string before_fence = raw.substr(0, raw.find("```"));
  auto idea = detail::first_brace_span(before_fence);
  if (!idea) idea = detail::first_brace_span(raw);
  if (idea && detail::trim(*idea).empty()) idea.reset();
  if (!idea) idea = detail::docstring_idea(out.code);
  if (!idea) throw ResponseParseError("response has no brace-delimited design idea or docstring");
  out.design_idea = detail::trim(*idea);
  return out;
}

// Reflection responses carry only the brace-delimited insight text.
inline std::string parse_reflection(const std::string& raw) {
  auto span = detail::first_brace_span(raw);
  if (!span || detail::trim(*span).empty())
    throw ResponseParseError("reflection response has no brace-delimited content");
  return detail::trim(*span);
}

// Appends the failed assistant reply and a debug request carrying the
// original prompt plus the structured error report.
inline PromptBundle build_rechat(const PromptBundle& previous, const std::string& assistant_reply,
                                 const std::string& error_report) {
  if (previous.turns.empty()) throw std::invalid_argument("build_rechat: no prior exchange");
  PromptBundle next = previous;
  next.turns.emplace_back("assistant", assistant_reply);
  std::string content = texts::kRechatPreamble;
  content += previous.turns.front().second;
  content += "\n\n## Error Report\n";
  content += error_report;
  next.turns.emplace_back("user", content);
  return next;
}

// Post-generation compression prompt; the returned summary replaces full code
// in later description bindings.
inline PromptBundle summarize(const TemplateStore& store, const std::string& design_idea,
                              const std::string& code, const std::string& inout_inf,
                              const std::string& other_inf) {
  if (detail::trim(code).empty()) throw RenderError("summarize: empty code");
  std::map<std::string, std::string> bindings = {
      {"prompt_inout_inf", inout_inf},
      {"prompt_other_inf", other_inf},
      {"algorithm", design_idea},
      {"code", code},
  };
  return store.render(TemplateKind::PostSummary, 0, std::move(bindings));
}

}  // namespace gwsearch::prompts
