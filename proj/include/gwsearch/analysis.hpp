#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gwsearch/dsl.hpp"

namespace gwsearch::analysis {

// ---------------------------------------------------------------------------
// Code normalization
// ---------------------------------------------------------------------------

struct NormalizedCode {
  std::string text;
  bool parsed = false;  // false: fell back to whitespace-only normalization
};

namespace detail {

inline std::string collapse_whitespace(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = true;  // strips leading space too
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(c);
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

inline std::string strip_comments(const std::string& text) {
  std::string out;
  std::istringstream in(text);
  std::string line;
  bool in_docstring = false;
  while (std::getline(in, line)) {
    std::string_view v(line);
    if (in_docstring) {
      const auto end = v.find("\"\"\"");
      if (end == std::string_view::npos) continue;
      v = v.substr(end + 3);
      in_docstring = false;
    }
    while (true) {
      const auto q = v.find("\"\"\"");
      const auto h = v.find('#');
      if (q != std::string_view::npos && (h == std::string_view::npos || q < h)) {
        const auto end = v.find("\"\"\"", q + 3);
        if (end == std::string_view::npos) {
          v = v.substr(0, q);
          in_docstring = true;
          break;
        }
        out.append(v.substr(0, q));
        v = v.substr(end + 3);
        continue;
      }
      if (h != std::string_view::npos) v = v.substr(0, h);
      break;
    }
    out.append(v);
    out.push_back('\n');
  }
  return out;
}

}  // namespace detail

// Canonical text for diversity metrics: DSL candidates get exact grammar
// canonicalization (ordered keys, materialized defaults, canonical numerals);
// anything unparseable keeps comment-stripped, whitespace-collapsed text and
// is flagged.
inline NormalizedCode normalize_code(const std::string& candidate_text) {
  NormalizedCode out;
  try {
    const auto program = dsl::parse_dsl(candidate_text);
    out.text = dsl::canonical_text(program);
    out.parsed = true;
    return out;
  } catch (const dsl::ParseError&) {
    out.text = detail::collapse_whitespace(detail::strip_comments(candidate_text));
    out.parsed = false;
    return out;
  }
}

// ---------------------------------------------------------------------------
// Diversity metrics
// ---------------------------------------------------------------------------

// Natural-log Shannon entropy of the unique-variant frequency distribution.
inline double shannon_index(const std::vector<std::string>& canonical_texts) {
  if (canonical_texts.empty()) throw std::invalid_argument("shannon_index: empty population");
  std::map<std::string, std::size_t> counts;
  for (const auto& t : canonical_texts) ++counts[t];
  const double n = static_cast<double>(canonical_texts.size());
  double h = 0.0;
  for (const auto& [text, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

struct EmbeddingVector {
  std::vector<double> values;
  std::size_t source = 0;  // candidate id, caller-defined
};

// Term-frequency embedding over a shared vocabulary built from the whole
// population (the neural embedding the metric was defined with is a pluggable
// input; this is the self-contained default).
inline std::vector<EmbeddingVector> token_frequency_embeddings(
    const std::vector<std::string>& canonical_texts) {
  auto tokenize = [](const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
        cur.push_back(c);
      } else if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
  };

  std::set<std::string> vocab_set;
  std::vector<std::vector<std::string>> token_lists;
  token_lists.reserve(canonical_texts.size());
  for (const auto& t : canonical_texts) {
    token_lists.push_back(tokenize(t));
    for (const auto& tok : token_lists.back()) vocab_set.insert(tok);
  }
  std::vector<std::string> vocab(vocab_set.begin(), vocab_set.end());
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < vocab.size(); ++i) index[vocab[i]] = i;

  std::vector<EmbeddingVector> out(canonical_texts.size());
  for (std::size_t i = 0; i < token_lists.size(); ++i) {
    out[i].source = i;
    out[i].values.assign(std::max<std::size_t>(vocab.size(), 1), 0.0);
    for (const auto& tok : token_lists[i]) out[i].values[index[tok]] += 1.0;
  }
  return out;
}

struct CidResult {
  double value = 0.0;
  bool degenerate = false;  // centroid norm at the epsilon floor
};

constexpr double kCidEpsilon = 1e-10;

// CID = mean_i ||x_i - xbar|| / (||xbar|| + eps).
inline CidResult cid_index(const std::vector<EmbeddingVector>& embeddings) {
  if (embeddings.empty()) throw std::invalid_argument("cid_index: empty population");
  const std::size_t dim = embeddings.front().values.size();
  for (const auto& e : embeddings) {
    if (e.values.size() != dim) throw std::invalid_argument("cid_index: dimension mismatch");
  }
  std::vector<double> centroid(dim, 0.0);
  for (const auto& e : embeddings) {
    for (std::size_t d = 0; d < dim; ++d) centroid[d] += e.values[d];
  }
  const double n = static_cast<double>(embeddings.size());
  for (double& v : centroid) v /= n;
  double cnorm = 0.0;
  for (double v : centroid) cnorm += v * v;
  cnorm = std::sqrt(cnorm);

  double acc = 0.0;
  for (const auto& e : embeddings) {
    double d2 = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = e.values[d] - centroid[d];
      d2 += diff * diff;
    }
    acc += std::sqrt(d2) / (cnorm + kCidEpsilon);
  }
  CidResult res;
  res.value = acc / n;
  res.degenerate = cnorm < 1e-6;
  return res;
}

inline CidResult cid_index_texts(const std::vector<std::string>& canonical_texts) {
  return cid_index(token_frequency_embeddings(canonical_texts));
}

// ---------------------------------------------------------------------------
// Phase transitions
// ---------------------------------------------------------------------------

constexpr double kPhaseTransitionGain = 400.0;

struct PhaseTransition {
  std::size_t eval_index;
  double fitness;
  double gain;
};

// A phase transition is an evaluation where the best-so-far fitness jumps by
// at least the gain threshold relative to the previous best-so-far.
inline std::vector<PhaseTransition> detect_phase_transitions(
    const std::vector<double>& best_so_far, double min_gain = kPhaseTransitionGain) {
  std::vector<PhaseTransition> out;
  for (std::size_t i = 1; i < best_so_far.size(); ++i) {
    const double gain = best_so_far[i] - best_so_far[i - 1];
    if (gain >= min_gain) out.push_back({i, best_so_far[i], gain});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diversity time series
// ---------------------------------------------------------------------------

struct DiversityPoint {
  std::size_t eval_index;
  double shannon;
  double cid;
};

// Sliding-window diversity over the evaluation stream (window in
// evaluations, stepping one point per evaluation once filled).
inline std::vector<DiversityPoint> diversity_series(const std::vector<std::string>& canonical_texts,
                                                    std::size_t window = 50) {
  std::vector<DiversityPoint> out;
  if (window == 0 || canonical_texts.size() < 2) return out;
  for (std::size_t end = 2; end <= canonical_texts.size(); ++end) {
    const std::size_t start = end > window ? end - window : 0;
    std::vector<std::string> slice(canonical_texts.begin() + static_cast<std::ptrdiff_t>(start),
                                   canonical_texts.begin() + static_cast<std::ptrdiff_t>(end));
    DiversityPoint p;
    p.eval_index = end - 1;
    p.shannon = shannon_index(slice);
    p.cid = cid_index_texts(slice).value;
    out.push_back(p);
  }
  return out;
}

}  // namespace gwsearch::analysis
