#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gwsearch::tree {

// A candidate detection algorithm: DSL pipeline text (or opaque external
// script text), plus the texts the search accumulates about it.
struct CandidateProgram {
  std::string code;
  std::string design_idea;
  std::string summary;     // post-generation compressed description
  std::string reflection;  // reflection text from the operation that made it
};

enum class OpKind { Seed, Init, PC, SC, PWC, PM };

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::Seed: return "seed";
    case OpKind::Init: return "init";
    case OpKind::PC: return "PC";
    case OpKind::SC: return "SC";
    case OpKind::PWC: return "PWC";
    case OpKind::PM: return "PM";
  }
  return "?";
}

inline OpKind op_from_name(const std::string& s) {
  if (s == "seed") return OpKind::Seed;
  if (s == "init") return OpKind::Init;
  if (s == "PC") return OpKind::PC;
  if (s == "SC") return OpKind::SC;
  if (s == "PWC") return OpKind::PWC;
  if (s == "PM") return OpKind::PM;
  throw std::invalid_argument("unknown op kind: " + s);
}

struct TreeNode {
  std::size_t id = 0;
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;
  CandidateProgram candidate;
  std::optional<double> fitness_raw;  // absent if unevaluated or failed
  double q = 0.0;                     // normalized value in [0, 1]
  double visits = 0.0;
  int depth = 0;                      // root = 0, initial population = 1
  OpKind origin = OpKind::Seed;
  bool pruned = false;     // excluded from selection, kept for path context
  bool exhausted = false;  // depth-capped leaf the selection must back off from
};

struct TreeConfig {
  double c0 = 1.0;
  double gamma = 0.5;
  double epsilon = 1e-6;
  double expansion_visits = 2.0;  // visit gate before a leaf may expand
  double prune_margin = 0.2;
  int max_depth = 10;
  std::size_t convergence_window = 30;
  double convergence_tol = 0.01;  // relative best-fitness improvement
};

struct MaintenanceReport {
  std::size_t pruned_count = 0;
  bool converged = false;
};

// Single-writer MCTS store: UCT selection with adaptive exploration, gated
// expansion, discounted backpropagation with global re-normalization.
class SearchState {
 public:
  explicit SearchState(TreeConfig cfg = {}, std::size_t eval_budget = 0)
      : cfg_(cfg), budget_(eval_budget) {}

  const TreeConfig& config() const { return cfg_; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  std::size_t eval_count() const { return eval_count_; }
  std::size_t budget() const { return budget_; }
  void set_budget(std::size_t t) { budget_ = t; }
  double q_min() const { return q_min_; }
  double q_max() const { return q_max_; }
  const std::vector<double>& ranked_fitness() const { return ranked_fitness_; }
  const std::vector<double>& best_history() const { return best_history_; }

  TreeNode& node(std::size_t id) { return nodes_.at(id); }
  const TreeNode& node(std::size_t id) const { return nodes_.at(id); }
  const std::vector<TreeNode>& nodes() const { return nodes_; }

  std::size_t make_root(CandidateProgram candidate) {
    if (!nodes_.empty()) throw std::logic_error("make_root: tree not empty");
    TreeNode n;
    n.id = 0;
    n.depth = 0;
    n.origin = OpKind::Seed;
    n.candidate = std::move(candidate);
    nodes_.push_back(std::move(n));
    return 0;
  }

  // Restores a previously exported tree (ids must be dense and in order);
  // used to replay recorded transitions against an existing run.
  void restore(std::vector<TreeNode> nodes, double q_min, double q_max) {
    if (!nodes_.empty()) throw std::logic_error("restore: tree not empty");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].id != i) throw std::invalid_argument("restore: ids must be dense and ordered");
    }
    nodes_ = std::move(nodes);
    q_min_ = q_min;
    q_max_ = q_max;
    has_extrema_ = !nodes_.empty();
  }

  // Adaptive exploration constant: c0 * max(1 - t/T, 0).
  double exploration_constant() const {
    if (budget_ == 0) return cfg_.c0;
    const double frac = static_cast<double>(eval_count_) / static_cast<double>(budget_);
    return cfg_.c0 * std::max(1.0 - frac, 0.0);
  }

  // UCT score of a non-root node against its parent.
  double uct_score(std::size_t id) const {
    const TreeNode& n = nodes_.at(id);
    if (!n.parent) throw std::invalid_argument("uct_score: node has no parent");
    const TreeNode& p = nodes_.at(*n.parent);
    const double c = exploration_constant();
    const double explore = c * std::sqrt(std::log(p.visits + 1.0) / (n.visits + cfg_.epsilon));
    return n.q + explore;
  }

  // Root-to-leaf descent by maximal UCT (ties to the lowest id), skipping
  // pruned/exhausted children; visits increment along the walked path.
  std::size_t select_leaf() {
    if (nodes_.empty()) throw std::logic_error("select_leaf: empty tree");
    std::size_t cur = 0;
    nodes_[cur].visits += 1.0;
    while (true) {
      const TreeNode& n = nodes_[cur];
      if (n.depth >= cfg_.max_depth) break;
      std::optional<std::size_t> best;
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t c : n.children) {
        const TreeNode& child = nodes_[c];
        if (child.pruned || child.exhausted) continue;
        const double s = uct_score(c);
        if (s > best_score) {
          best_score = s;
          best = c;
        }
      }
      if (!best) break;
      cur = *best;
      nodes_[cur].visits += 1.0;
    }
    return cur;
  }

  bool can_expand(std::size_t id) const {
    const TreeNode& n = nodes_.at(id);
    return n.depth < cfg_.max_depth && n.visits >= cfg_.expansion_visits;
  }

  // Gated expansion: one child per call, child q seeded with the parent's q.
  std::size_t expand(std::size_t leaf_id, CandidateProgram candidate, OpKind op) {
    const TreeNode& leaf = nodes_.at(leaf_id);
    if (leaf.depth >= cfg_.max_depth)
      throw std::invalid_argument("expand: depth cap reached");
    if (leaf.visits < cfg_.expansion_visits)
      throw std::invalid_argument("expand: visit gate not met");
    return append_child(leaf_id, std::move(candidate), op);
  }

  // Ungated append used when building the initial population.
  std::size_t expand_initial(std::size_t parent_id, CandidateProgram candidate, OpKind op) {
    if (nodes_.at(parent_id).depth >= cfg_.max_depth)
      throw std::invalid_argument("expand_initial: depth cap reached");
    return append_child(parent_id, std::move(candidate), op);
  }

  // Record an evaluation: updates global extrema first, refreshes every
  // stored q against the new normalization, then sets the leaf and walks the
  // discounted max-child update to the root.
  void backpropagate(std::size_t leaf_id, double fitness_raw) {
    TreeNode& leaf = nodes_.at(leaf_id);
    const bool had = has_extrema_;
    const double old_min = q_min_, old_max = q_max_;
    const double new_min = had ? std::min(q_min_, fitness_raw) : fitness_raw;
    const double new_max = had ? std::max(q_max_, fitness_raw) : fitness_raw;
    if (!had || new_min != old_min || new_max != old_max) {
      refresh_normalization(old_min, old_max, new_min, new_max, had);
      q_min_ = new_min;
      q_max_ = new_max;
      has_extrema_ = true;
    }

    leaf.fitness_raw = fitness_raw;
    leaf.q = normalized(fitness_raw);

    std::optional<std::size_t> pid = leaf.parent;
    while (pid) {
      TreeNode& p = nodes_[*pid];
      double best_child = -std::numeric_limits<double>::infinity();
      for (std::size_t c : p.children) best_child = std::max(best_child, nodes_[c].q);
      if (p.children.empty()) best_child = p.q;
      p.q = p.q * (1.0 - cfg_.gamma) + best_child * cfg_.gamma;
      pid = p.parent;
    }

    ranked_fitness_.insert(
        std::upper_bound(ranked_fitness_.begin(), ranked_fitness_.end(), fitness_raw),
        fitness_raw);
    const double best = best_history_.empty() ? fitness_raw
                                              : std::max(best_history_.back(), fitness_raw);
    best_history_.push_back(best);
    ++eval_count_;
  }

  double normalized(double fitness_raw) const {
    return (fitness_raw - q_min_) / (q_max_ - q_min_ + cfg_.epsilon);
  }

  // Prune marks and convergence detection. Leaves sitting below their
  // evaluated-sibling median minus the margin are excluded from selection;
  // convergence fires when the best fitness improved by less than the
  // tolerance over the last window of evaluations.
  MaintenanceReport maintenance() {
    MaintenanceReport rep;
    for (TreeNode& n : nodes_) {
      if (!n.children.empty() || !n.parent || !n.fitness_raw) continue;
      const TreeNode& p = nodes_[*n.parent];
      std::vector<double> sib_q;
      for (std::size_t c : p.children) {
        if (c == n.id) continue;
        if (nodes_[c].fitness_raw) sib_q.push_back(nodes_[c].q);
      }
      if (sib_q.size() >= 3) {
        std::sort(sib_q.begin(), sib_q.end());
        const std::size_t m = sib_q.size();
        const double med = (m % 2 == 1) ? sib_q[m / 2]
                                        : 0.5 * (sib_q[m / 2 - 1] + sib_q[m / 2]);
        n.pruned = n.q < med - cfg_.prune_margin;
      } else {
        n.pruned = false;
      }
      if (n.pruned) ++rep.pruned_count;
    }
    rep.converged = converged();
    return rep;
  }

  bool converged() const {
    const std::size_t w = cfg_.convergence_window;
    if (best_history_.size() < w + 1) return false;
    const double now = best_history_.back();
    const double ago = best_history_[best_history_.size() - 1 - w];
    const double improvement = now - ago;
    const double rel = improvement / std::max(ago, std::numeric_limits<double>::min());
    return rel < cfg_.convergence_tol;
  }

  void mark_exhausted(std::size_t id) { nodes_.at(id).exhausted = true; }

  // Best evaluated node id (highest raw fitness; ties to the lowest id).
  std::optional<std::size_t> best_node() const {
    std::optional<std::size_t> best;
    for (const TreeNode& n : nodes_) {
      if (!n.fitness_raw) continue;
      if (!best || *n.fitness_raw > *nodes_[*best].fitness_raw) best = n.id;
    }
    return best;
  }

  // Node ids on the root-to-node path, root first.
  std::vector<std::size_t> path_to_root(std::size_t id) const {
    std::vector<std::size_t> path;
    std::optional<std::size_t> cur = id;
    while (cur) {
      path.push_back(*cur);
      cur = nodes_.at(*cur).parent;
    }
    std::reverse(path.begin(), path.end());
    return path;
  }

 private:
  std::size_t append_child(std::size_t parent_id, CandidateProgram candidate, OpKind op) {
    TreeNode& parent = nodes_.at(parent_id);
    TreeNode n;
    n.id = nodes_.size();
    n.parent = parent_id;
    n.depth = parent.depth + 1;
    n.origin = op;
    n.q = parent.q;  // inherited until evaluated
    n.candidate = std::move(candidate);
    parent.children.push_back(n.id);
    nodes_.push_back(std::move(n));
    return nodes_.back().id;
  }

  // Affine remap of every stored q from the old extrema to the new ones so a
  // leaf's q always equals normalized(fitness_raw) under the current scale.
  void refresh_normalization(double old_min, double old_max, double new_min, double new_max,
                             bool had_extrema) {
    if (!had_extrema) {
      for (TreeNode& n : nodes_) n.q = 0.0;
      return;
    }
    const double old_range = old_max - old_min + cfg_.epsilon;
    const double new_range = new_max - new_min + cfg_.epsilon;
    for (TreeNode& n : nodes_) {
      n.q = (n.q * old_range + old_min - new_min) / new_range;
    }
  }

  TreeConfig cfg_;
  std::vector<TreeNode> nodes_;
  double q_min_ = 0.0;
  double q_max_ = 0.0;
  bool has_extrema_ = false;
  std::size_t eval_count_ = 0;
  std::size_t budget_ = 0;
  std::vector<double> ranked_fitness_;  // ascending
  std::vector<double> best_history_;    // best-so-far per evaluation
};

}  // namespace gwsearch::tree
