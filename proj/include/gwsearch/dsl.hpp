#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gwsearch/pipelines.hpp"

namespace gwsearch::dsl {

using pipelines::DetectionCatalog;
using dsp::SampledSeries;

// Candidate pipeline text format
// ------------------------------
//   one stage per line:        stage_name(key=value, key2=value2)
//   all defaults:              stage_name()   or   stage_name(default)
//   comments:                  # to end of line
//
// A program must contain, in order: an optional detrend stage, exactly one
// conditioning (whiten_*) stage, exactly one metric_* stage and exactly one
// trigger_* stage. Values are numbers; integer-valued parameters reject
// fractional input.

struct ParseError : std::runtime_error {
  int line;
  std::string detail;
  ParseError(int line_, std::string detail_)
      : std::runtime_error("line " + std::to_string(line_) + ": " + detail_),
        line(line_),
        detail(std::move(detail_)) {}
};

struct Stage {
  std::string name;
  std::map<std::string, double> params;
};

struct PipelineDsl {
  std::vector<Stage> stages;
  std::string provenance;  // design-idea text attached by the caller

  double param(const std::string& stage, const std::string& key) const {
    for (const auto& s : stages) {
      if (s.name == stage) {
        auto it = s.params.find(key);
        if (it != s.params.end()) return it->second;
      }
    }
    throw std::logic_error("PipelineDsl: missing parameter " + stage + "." + key);
  }
};

// ---------------------------------------------------------------------------
// Stage registry
// ---------------------------------------------------------------------------

enum class StageCategory { Detrend, Whiten, Metric, Trigger };

struct ParamSpec {
  const char* name;
  double def;
  double lo;
  double hi;
  bool integer = false;
  bool odd = false;
};

struct StageSpec {
  const char* name;
  StageCategory category;
  std::vector<ParamSpec> params;
};

inline const std::vector<StageSpec>& stage_registry() {
  static const std::vector<StageSpec> registry = {
      {"detrend_none", StageCategory::Detrend, {}},
      {"detrend_median",
       StageCategory::Detrend,
       {{"kernel", 101, 3, 1e6, true, true}}},
      {"whiten_welch",
       StageCategory::Whiten,
       {{"nperseg", 4096, 64, 1 << 22, true},
        {"noverlap", 2048, 0, 1 << 22, true},
        {"smooth_kernel", 32, 1, 65536, true}}},
      {"whiten_adaptive",
       StageCategory::Whiten,
       {{"win_div", 20, 1, 1000},
        {"win_min_s", 5, 0.01, 600},
        {"win_max_s", 30, 0.01, 3600},
        {"tukey_alpha", 0.25, 0, 1},
        {"overlap_frac", 0.75, 0, 0.99},
        {"alpha_base", 0.8, 0, 1},
        {"alpha_gain", 0.05, 0, 1},
        {"alpha_lo", 0.75, 0, 1},
        {"alpha_hi", 0.85, 0, 1},
        {"sg_window", 11, 3, 4097, true, true},
        {"sg_polyorder", 2, 1, 6, true},
        {"sigmoid_gain", 2, 0, 100},
        {"gain_rate", 0.5, 0, 100},
        {"gain_clip", 8, 0.1, 1000}}},
      {"metric_meanpower",
       StageCategory::Metric,
       {{"nperseg", 256, 16, 65536, true}, {"noverlap", 128, 0, 65536, true}}},
      {"metric_coherent",
       StageCategory::Metric,
       {{"nperseg", 256, 16, 65536, true},
        {"noverlap", 128, 0, 65536, true},
        {"lambda_lo", 1e-4, 0, 1},
        {"lambda_hi", 1e-2, 0, 1},
        {"curv_lin", 0.1, 0, 100},
        {"curv_tanh", 5, 0, 1000}}},
      {"trigger_basic",
       StageCategory::Trigger,
       {{"height_factor", 1, 0, 1e6},
        {"distance", 2, 1, 1000000, true},
        {"prominence_factor", 0.3, 0, 1e6},
        {"var_fixed", 10, 1e-6, 1e6}}},
      {"trigger_multires",
       StageCategory::Trigger,
       {{"threshold_sigma", 1.5, 0, 1000},
        {"distance", 2, 1, 1000000, true},
        {"prominence_factor", 0.8, 0, 1e6},
        {"curvature_factor", 0.1, 0, 1000},
        {"curvature_veto", 1, 0, 1, true},
        {"unc_window", 5, 1, 10000, true},
        {"unc_sigma_div", 2.5, 0.1, 100},
        {"unc_floor", 0.01, 1e-9, 1000},
        {"cwt_wmin", 1, 0.5, 1000},
        {"cwt_wmax", 8, 0.5, 1000}}},
  };
  return registry;
}

inline const StageSpec* find_stage_spec(std::string_view name) {
  for (const auto& s : stage_registry()) {
    if (name == s.name) return &s;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view strip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline bool valid_identifier(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  return true;
}

inline double parse_number(std::string_view token, int line, const std::string& key) {
  const std::string buf(token);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || buf.empty())
    throw ParseError(line, "parameter '" + key + "' has a non-numeric value '" + buf + "'");
  if (!std::isfinite(v)) throw ParseError(line, "parameter '" + key + "' is not finite");
  return v;
}

}  // namespace detail

// Parses and validates a candidate program. Stage names must come from the
// registry, every parameter must be in range, and the stage categories must
// appear in pipeline order with the required ones present exactly once.
// Unknown keys, range violations and structural problems throw ParseError
// with the offending line.
inline PipelineDsl parse_dsl(const std::string& text) {
  PipelineDsl out;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (auto pos = line.find('#'); pos != std::string_view::npos) line = line.substr(0, pos);
    line = detail::strip(line);
    if (line.empty()) continue;

    const auto open = line.find('(');
    if (open == std::string_view::npos || line.back() != ')')
      throw ParseError(line_no, "expected 'stage_name(key=value, ...)'");
    const std::string_view name = detail::strip(line.substr(0, open));
    if (!detail::valid_identifier(name))
      throw ParseError(line_no, "invalid stage name '" + std::string(name) + "'");
    const StageSpec* spec = find_stage_spec(name);
    if (spec == nullptr) throw ParseError(line_no, "unknown stage '" + std::string(name) + "'");

    Stage stage;
    stage.name = std::string(name);
    std::string_view args = detail::strip(line.substr(open + 1, line.size() - open - 2));
    if (!args.empty() && args != "default") {
      std::size_t start = 0;
      while (start <= args.size()) {
        auto comma = args.find(',', start);
        std::string_view item = detail::strip(
            args.substr(start, comma == std::string_view::npos ? args.size() - start
                                                               : comma - start));
        if (item.empty()) throw ParseError(line_no, "empty parameter entry");
        const auto eq = item.find('=');
        if (eq == std::string_view::npos)
          throw ParseError(line_no, "expected key=value in '" + std::string(item) + "'");
        const std::string key(detail::strip(item.substr(0, eq)));
        const std::string_view val = detail::strip(item.substr(eq + 1));
        const ParamSpec* pspec = nullptr;
        for (const auto& p : spec->params) {
          if (key == p.name) {
            pspec = &p;
            break;
          }
        }
        if (pspec == nullptr)
          throw ParseError(line_no,
                           "unknown parameter '" + key + "' for stage '" + stage.name + "'");
        const double v = detail::parse_number(val, line_no, key);
        if (pspec->integer && v != std::floor(v))
          throw ParseError(line_no, "parameter '" + key + "' must be an integer");
        if (pspec->odd && (static_cast<long long>(v) % 2 == 0))
          throw ParseError(line_no, "parameter '" + key + "' must be odd");
        if (v < pspec->lo || v > pspec->hi) {
          std::ostringstream msg;
          msg << "parameter '" << key << "' out of range [" << pspec->lo << ", " << pspec->hi
              << "]";
          throw ParseError(line_no, msg.str());
        }
        if (stage.params.count(key) != 0)
          throw ParseError(line_no, "duplicate parameter '" + key + "'");
        stage.params[key] = v;
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
    }
    // Materialize defaults so downstream code sees a complete parameter set.
    for (const auto& p : spec->params) {
      if (stage.params.count(p.name) == 0) stage.params[p.name] = p.def;
    }
    out.stages.push_back(std::move(stage));
  }

  // Structural validation.
  int n_detrend = 0, n_whiten = 0, n_metric = 0, n_trigger = 0;
  int last_rank = -1;
  for (const auto& s : out.stages) {
    const StageSpec* spec = find_stage_spec(s.name);
    int rank = 0;
    switch (spec->category) {
      case StageCategory::Detrend: rank = 0; ++n_detrend; break;
      case StageCategory::Whiten: rank = 1; ++n_whiten; break;
      case StageCategory::Metric: rank = 2; ++n_metric; break;
      case StageCategory::Trigger: rank = 3; ++n_trigger; break;
    }
    if (rank < last_rank) throw ParseError(0, "stage '" + s.name + "' out of pipeline order");
    last_rank = rank;
  }
  if (n_detrend > 1) throw ParseError(0, "duplicate detrend stage");
  if (n_whiten == 0) throw ParseError(0, "missing conditioning stage");
  if (n_whiten > 1) throw ParseError(0, "duplicate conditioning stage");
  if (n_metric == 0) throw ParseError(0, "missing metric stage");
  if (n_metric > 1) throw ParseError(0, "duplicate metric stage");
  if (n_trigger == 0) throw ParseError(0, "missing trigger stage");
  if (n_trigger > 1) throw ParseError(0, "duplicate trigger stage");

  // Cross-parameter sanity that the per-parameter ranges cannot express.
  for (const auto& s : out.stages) {
    auto has = [&](const char* k) { return s.params.count(k) != 0; };
    if (has("noverlap") && has("nperseg") && s.params.at("noverlap") >= s.params.at("nperseg"))
      throw ParseError(0, "stage '" + s.name + "': noverlap must be < nperseg");
    if (s.name == "whiten_adaptive" &&
        s.params.at("win_min_s") > s.params.at("win_max_s"))
      throw ParseError(0, "whiten_adaptive: win_min_s must be <= win_max_s");
    if (s.name == "whiten_adaptive" && s.params.at("alpha_lo") > s.params.at("alpha_hi"))
      throw ParseError(0, "whiten_adaptive: alpha_lo must be <= alpha_hi");
    if (s.name == "trigger_multires" && s.params.at("cwt_wmin") > s.params.at("cwt_wmax"))
      throw ParseError(0, "trigger_multires: cwt_wmin must be <= cwt_wmax");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canonical emission (used by the diversity analysis)
// ---------------------------------------------------------------------------

inline std::string format_number(double v) {
  if (v == std::floor(v) && std::fabs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

// Fully explicit form: stages in order, parameters sorted by key, canonical
// numerals, no comments. Idempotent under parse + emit.
inline std::string canonical_text(const PipelineDsl& p) {
  std::ostringstream out;
  for (const auto& s : p.stages) {
    out << s.name << "(";
    bool first = true;
    for (const auto& [k, v] : s.params) {  // std::map iterates sorted
      if (!first) out << ", ";
      first = false;
      out << k << "=" << format_number(v);
    }
    out << ")\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

inline std::string seed_dsl_text() {
  return
      "detrend_none()\n"
      "whiten_welch(nperseg=4096, noverlap=2048, smooth_kernel=32)\n"
      "metric_meanpower(nperseg=256, noverlap=128)\n"
      "trigger_basic(height_factor=1, distance=2, prominence_factor=0.3, var_fixed=10)\n";
}

inline std::string elite_dsl_text() {
  return
      "detrend_median(kernel=101)\n"
      "whiten_adaptive()\n"
      "metric_coherent()\n"
      "trigger_multires()\n";
}

// Executes the validated program: pure function of (program, data).
inline DetectionCatalog run_dsl(const PipelineDsl& p, const SampledSeries& h1,
                                const SampledSeries& l1) {
  pipelines::check_channels(h1, l1);
  SampledSeries a = h1;
  SampledSeries b = l1;
  pipelines::MetricSeries metric;
  bool have_metric = false;

  for (const auto& s : p.stages) {
    if (s.name == "detrend_none") {
      continue;
    } else if (s.name == "detrend_median") {
      const auto kernel = static_cast<std::size_t>(s.params.at("kernel"));
      a = pipelines::detrend_median(a, kernel);
      b = pipelines::detrend_median(b, kernel);
    } else if (s.name == "whiten_welch") {
      pipelines::WhitenWelchParams wp;
      wp.nperseg = static_cast<std::size_t>(s.params.at("nperseg"));
      wp.noverlap = static_cast<std::size_t>(s.params.at("noverlap"));
      wp.smooth_kernel = static_cast<std::size_t>(s.params.at("smooth_kernel"));
      a = pipelines::whiten_welch_stage(a, wp);
      b = pipelines::whiten_welch_stage(b, wp);
    } else if (s.name == "whiten_adaptive") {
      pipelines::WhitenAdaptiveParams wp;
      wp.win_div = s.params.at("win_div");
      wp.win_min_s = s.params.at("win_min_s");
      wp.win_max_s = s.params.at("win_max_s");
      wp.tukey_alpha = s.params.at("tukey_alpha");
      wp.overlap_frac = s.params.at("overlap_frac");
      wp.alpha_base = s.params.at("alpha_base");
      wp.alpha_gain = s.params.at("alpha_gain");
      wp.alpha_lo = s.params.at("alpha_lo");
      wp.alpha_hi = s.params.at("alpha_hi");
      wp.sg_window = static_cast<std::size_t>(s.params.at("sg_window"));
      wp.sg_polyorder = static_cast<std::size_t>(s.params.at("sg_polyorder"));
      wp.sigmoid_gain = s.params.at("sigmoid_gain");
      wp.gain_rate = s.params.at("gain_rate");
      wp.gain_clip = s.params.at("gain_clip");
      a = pipelines::whiten_adaptive_stage(a, wp);
      b = pipelines::whiten_adaptive_stage(b, wp);
    } else if (s.name == "metric_meanpower") {
      pipelines::MetricMeanPowerParams mp;
      mp.nperseg = static_cast<std::size_t>(s.params.at("nperseg"));
      mp.noverlap = static_cast<std::size_t>(s.params.at("noverlap"));
      metric = pipelines::metric_meanpower(a, b, mp);
      have_metric = true;
    } else if (s.name == "metric_coherent") {
      pipelines::MetricCoherentParams mp;
      mp.nperseg = static_cast<std::size_t>(s.params.at("nperseg"));
      mp.noverlap = static_cast<std::size_t>(s.params.at("noverlap"));
      mp.lambda_lo = s.params.at("lambda_lo");
      mp.lambda_hi = s.params.at("lambda_hi");
      mp.curv_lin = s.params.at("curv_lin");
      mp.curv_tanh = s.params.at("curv_tanh");
      metric = pipelines::metric_coherent(a, b, mp);
      have_metric = true;
    } else if (s.name == "trigger_basic") {
      pipelines::TriggerBasicParams tp;
      tp.height_factor = s.params.at("height_factor");
      tp.distance = static_cast<std::size_t>(s.params.at("distance"));
      tp.prominence_factor = s.params.at("prominence_factor");
      tp.var_fixed = s.params.at("var_fixed");
      if (!have_metric) throw std::logic_error("run_dsl: trigger before metric");
      return pipelines::trigger_basic(metric, tp);
    } else if (s.name == "trigger_multires") {
      pipelines::TriggerMultiresParams tp;
      tp.threshold_sigma = s.params.at("threshold_sigma");
      tp.distance = static_cast<std::size_t>(s.params.at("distance"));
      tp.prominence_factor = s.params.at("prominence_factor");
      tp.curvature_factor = s.params.at("curvature_factor");
      tp.curvature_veto = s.params.at("curvature_veto") != 0.0;
      tp.unc_window = static_cast<std::size_t>(s.params.at("unc_window"));
      tp.unc_sigma_div = s.params.at("unc_sigma_div");
      tp.unc_floor = s.params.at("unc_floor");
      tp.cwt_wmin = s.params.at("cwt_wmin");
      tp.cwt_wmax = s.params.at("cwt_wmax");
      if (!have_metric) throw std::logic_error("run_dsl: trigger before metric");
      return pipelines::trigger_multires(metric, tp);
    } else {
      throw std::logic_error("run_dsl: unhandled stage " + s.name);
    }
  }
  throw std::logic_error("run_dsl: validated program ended without a trigger stage");
}

}  // namespace gwsearch::dsl
