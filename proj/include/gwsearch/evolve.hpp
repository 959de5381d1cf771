#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gwsearch/rng.hpp"
#include "gwsearch/tree.hpp"

namespace gwsearch::evolve {

using tree::OpKind;
using tree::SearchState;

// Top-k population with softmax selection pressure over raw fitness; the
// elite is always one of the members and never dropped.
struct Population {
  std::vector<std::size_t> members;
  std::size_t elite = 0;
  std::size_t k = 10;
  double beta = 0.005;  // per-unit-AUC selection pressure
};

// One evolutionary operation with the node inputs its prompt family needs.
// PC: {focus parent (baseline), best at focus depth or above (enhanced)}
// SC: {focus, sampled same-depth siblings...}
// PWC: root-to-focus path, root first
// PM: {focus, elite}
struct OpRequest {
  OpKind kind;
  std::vector<std::size_t> inputs;
};

// Per-expansion-level operation order: PC x5, PWC x2, SC x1, PM x2.
inline std::array<OpKind, 10> level_schedule() {
  return {OpKind::PC, OpKind::PC, OpKind::PC, OpKind::PC, OpKind::PC,
          OpKind::PWC, OpKind::PWC, OpKind::SC, OpKind::PM, OpKind::PM};
}

// Prompting variations used to grow the 8 initial variants from the seed.
inline const std::vector<std::string>& init_variant_directives() {
  static const std::vector<std::string> directives = {
      "Explore an alternative whitening scheme while keeping the other stages near the seed.",
      "Vary the time-frequency decomposition resolution (window and overlap).",
      "Vary the peak detection strategy and its threshold parameters.",
      "Combine a robust baseline correction with the seed's whitening.",
      "Explore a coherence-based combination of the two detector channels.",
      "Use robust statistics (median absolute deviation) for the background estimate.",
      "Trade spectrogram time resolution against frequency resolution.",
      "Re-balance the trigger thresholds toward higher sensitivity at a modest false-alarm cost.",
  };
  return directives;
}

namespace detail {

inline double fitness_of(const SearchState& state, std::size_t id) {
  const auto& f = state.node(id).fitness_raw;
  if (!f) throw std::logic_error("evolve: node without fitness used in selection");
  return *f;
}

// Fitness-proportional weights (normalized raw fitness + epsilon). The
// reference listing weights 1/(-fitness) for a minimized objective; AUC is
// maximized here, so proportional weights preserve the stated intent.
inline std::vector<double> fitness_weights(const SearchState& state,
                                           const std::vector<std::size_t>& ids) {
  double total = 0.0;
  for (std::size_t id : ids) total += fitness_of(state, id);
  std::vector<double> w(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double base = total > 0.0 ? fitness_of(state, ids[i]) / total : 0.0;
    w[i] = base + 1e-6;
  }
  return w;
}

}  // namespace detail

// Best evaluated node at depth <= max_depth (ties to the lowest id).
inline std::optional<std::size_t> best_at_or_above(const SearchState& state, int max_depth) {
  std::optional<std::size_t> best;
  for (const auto& n : state.nodes()) {
    if (!n.fitness_raw || n.depth > max_depth) continue;
    if (!best || *n.fitness_raw > *state.node(*best).fitness_raw) best = n.id;
  }
  return best;
}

// Evaluated nodes at exactly the given depth, excluding one id.
inline std::vector<std::size_t> evaluated_at_depth(const SearchState& state, int depth,
                                                   std::size_t exclude) {
  std::vector<std::size_t> ids;
  for (const auto& n : state.nodes()) {
    if (n.id == exclude || n.depth != depth || !n.fitness_raw) continue;
    ids.push_back(n.id);
  }
  return ids;
}

// Select the node inputs for one operation at the given focus leaf. SC with
// no same-depth peers degrades to PM.
inline OpRequest choose_inputs(OpKind kind, const SearchState& state, std::size_t focus,
                               const Population& pop, std::size_t sc_siblings, rng::Rng& rng) {
  OpRequest req;
  req.kind = kind;
  switch (kind) {
    case OpKind::PC: {
      const auto& node = state.node(focus);
      const std::size_t baseline = node.parent ? *node.parent : focus;
      const auto better = best_at_or_above(state, node.depth);
      req.inputs = {baseline, better ? *better : focus};
      return req;
    }
    case OpKind::SC: {
      auto sibs = evaluated_at_depth(state, state.node(focus).depth, focus);
      if (sibs.empty()) {
        req.kind = OpKind::PM;
        req.inputs = {focus, pop.elite};
        return req;
      }
      req.inputs = {focus};
      if (sibs.size() <= sc_siblings) {
        req.inputs.insert(req.inputs.end(), sibs.begin(), sibs.end());
        return req;
      }
      auto weights = detail::fitness_weights(state, sibs);
      for (std::size_t pick = 0; pick < sc_siblings; ++pick) {
        const std::size_t idx = rng.weighted_index(weights);
        req.inputs.push_back(sibs[idx]);
        sibs.erase(sibs.begin() + static_cast<std::ptrdiff_t>(idx));
        weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(idx));
      }
      return req;
    }
    case OpKind::PWC: {
      req.inputs = state.path_to_root(focus);
      return req;
    }
    case OpKind::PM: {
      req.inputs = {focus, pop.elite};
      return req;
    }
    default:
      throw std::invalid_argument("choose_inputs: not an expansion operation");
  }
}

// Candidate pool = members + new node; the elite always survives, the other
// k-1 slots are drawn without replacement with softmax(beta * fitness)
// probabilities. The elite is replaced whenever the new node beats it.
inline Population update_population(Population pop, std::size_t new_id, const SearchState& state,
                                    rng::Rng& rng) {
  std::vector<std::size_t> pool = pop.members;
  if (std::find(pool.begin(), pool.end(), new_id) == pool.end()) pool.push_back(new_id);

  if (detail::fitness_of(state, new_id) > detail::fitness_of(state, pop.elite)) {
    pop.elite = new_id;
  }

  if (pool.size() <= pop.k) {
    pop.members = std::move(pool);
    return pop;
  }

  std::vector<std::size_t> rest;
  for (std::size_t id : pool) {
    if (id != pop.elite) rest.push_back(id);
  }
  double fmax = -std::numeric_limits<double>::infinity();
  for (std::size_t id : rest) fmax = std::max(fmax, detail::fitness_of(state, id));
  std::vector<double> weights(rest.size());
  for (std::size_t i = 0; i < rest.size(); ++i) {
    weights[i] = std::exp(pop.beta * (detail::fitness_of(state, rest[i]) - fmax));
  }

  std::vector<std::size_t> members = {pop.elite};
  while (members.size() < pop.k && !rest.empty()) {
    const std::size_t idx = rng.weighted_index(weights);
    members.push_back(rest[idx]);
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(idx));
    weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(idx));
  }
  pop.members = std::move(members);
  return pop;
}

}  // namespace gwsearch::evolve
