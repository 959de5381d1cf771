#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gwsearch/rng.hpp"
#include "gwsearch/tree.hpp"

using namespace gwsearch;
using tree::OpKind;
using tree::SearchState;
using tree::TreeConfig;

namespace {

tree::CandidateProgram cand(const std::string& code = "x") {
  tree::CandidateProgram c;
  c.code = code;
  return c;
}

}  // namespace

TEST_CASE("uct formula oracle", "[tree]") {
  // Q_raw = Q_max = 2000, Q_min = 1000, N(parent) = e-1, N(node) = 1, c0 = 1.
  SearchState s(TreeConfig{}, 0);  // zero budget keeps c = c0
  const auto root = s.make_root(cand());
  s.backpropagate(root, 1000.0);
  const auto child = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(child, 2000.0);
  s.node(root).visits = std::exp(1.0) - 1.0;
  s.node(child).visits = 1.0;

  const double eps = s.config().epsilon;
  const double expected =
      (2000.0 - 1000.0) / (1000.0 + eps) + std::sqrt(std::log(std::exp(1.0)) / (1.0 + eps));
  CHECK(s.uct_score(child) == Catch::Approx(expected).epsilon(1e-12));
  CHECK(s.uct_score(child) == Catch::Approx(1.99999).margin(2e-5));
}

TEST_CASE("exploration constant anneals with the budget", "[tree]") {
  SearchState s(TreeConfig{}, 4);
  const auto root = s.make_root(cand());
  s.backpropagate(root, 1.0);  // t = 1
  CHECK(s.exploration_constant() == Catch::Approx(1.0 - 1.0 / 4.0));
  const auto a = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(a, 2.0);
  const auto b = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(b, 3.0);
  const auto c = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(c, 4.0);  // t = 4 = T
  CHECK(s.exploration_constant() == 0.0);
  // with c = 0 the score is purely the normalized exploitation term
  CHECK(s.uct_score(c) == Catch::Approx(s.node(c).q));
}

TEST_CASE("zero parent visits zero the exploration term", "[tree]") {
  SearchState s(TreeConfig{}, 0);
  const auto root = s.make_root(cand());
  s.backpropagate(root, 10.0);
  const auto child = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(child, 20.0);
  s.node(root).visits = 0.0;
  s.node(child).visits = 3.0;
  CHECK(s.uct_score(child) == Catch::Approx(s.node(child).q));
}

TEST_CASE("selection walks to the argmax child with ties to the lower id", "[tree]") {
  TreeConfig cfg;
  cfg.c0 = 0.0;  // exploitation only
  SearchState s(cfg, 0);
  const auto root = s.make_root(cand());
  s.backpropagate(root, 0.0);
  const auto a = s.expand_initial(root, cand(), OpKind::Init);
  const auto b = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(a, 900.0);
  s.backpropagate(b, 100.0);
  CHECK(s.select_leaf() == a);

  // exact tie -> the lower id
  SearchState t(cfg, 0);
  const auto r2 = t.make_root(cand());
  t.backpropagate(r2, 0.0);
  const auto c1 = t.expand_initial(r2, cand(), OpKind::Init);
  const auto c2 = t.expand_initial(r2, cand(), OpKind::Init);
  t.backpropagate(c1, 500.0);
  t.backpropagate(c2, 500.0);
  CHECK(t.select_leaf() == c1);
}

TEST_CASE("selection increments visits along the path", "[tree]") {
  SearchState s(TreeConfig{}, 0);
  const auto root = s.make_root(cand());
  s.backpropagate(root, 1.0);
  const auto child = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(child, 2.0);
  const double rv = s.node(root).visits;
  const double cv = s.node(child).visits;
  const auto leaf = s.select_leaf();
  CHECK(leaf == child);
  CHECK(s.node(root).visits == rv + 1.0);
  CHECK(s.node(child).visits == cv + 1.0);
}

TEST_CASE("expansion honors the depth cap and visit gate", "[tree]") {
  TreeConfig cfg;
  SearchState s(cfg, 0);
  auto id = s.make_root(cand());
  s.backpropagate(id, 1.0);
  for (int d = 1; d <= 10; ++d) {
    s.node(id).visits = cfg.expansion_visits;
    id = s.expand(id, cand(), OpKind::PM);
  }
  CHECK(s.node(id).depth == 10);
  s.node(id).visits = 10.0;
  CHECK_FALSE(s.can_expand(id));
  CHECK_THROWS_AS(s.expand(id, cand(), OpKind::PM), std::invalid_argument);

  // fresh leaf with one visit: the gate refuses
  SearchState t(cfg, 0);
  const auto root = t.make_root(cand());
  t.backpropagate(root, 1.0);
  t.node(root).visits = 1.0;
  CHECK_FALSE(t.can_expand(root));
}

TEST_CASE("a new child inherits the parent q exactly", "[tree]") {
  SearchState s(TreeConfig{}, 0);
  const auto root = s.make_root(cand());
  s.backpropagate(root, 100.0);
  const auto a = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(a, 250.0);
  const double parent_q = s.node(a).q;
  s.node(a).visits = 2.0;
  const auto child = s.expand(a, cand(), OpKind::PC);
  CHECK(s.node(child).q == parent_q);
  CHECK_FALSE(s.node(child).fitness_raw.has_value());
}

TEST_CASE("backpropagation discount oracle", "[tree]") {
  TreeConfig cfg;
  cfg.gamma = 0.5;
  SearchState s(cfg, 0);
  const auto root = s.make_root(cand());
  s.backpropagate(root, 0.0);
  const auto lo = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(lo, 0.0);
  const auto hi = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(hi, 1000.0);  // extrema now [0, 1000]

  const auto mid = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(mid, 400.0);
  s.node(mid).visits = 2.0;
  const auto leaf = s.expand(mid, cand(), OpKind::PM);

  s.node(mid).q = 0.4;
  s.backpropagate(leaf, 800.0);  // inside extrema: no refresh
  const double leaf_q = 800.0 / (1000.0 + cfg.epsilon);
  CHECK(s.node(leaf).q == Catch::Approx(leaf_q).epsilon(1e-12));
  CHECK(s.node(mid).q == Catch::Approx(0.4 * 0.5 + leaf_q * 0.5).epsilon(1e-12));
}

TEST_CASE("gamma zero keeps ancestors, gamma one copies the best child", "[tree]") {
  for (double gamma : {0.0, 1.0}) {
    TreeConfig cfg;
    cfg.gamma = gamma;
    SearchState s(cfg, 0);
    const auto root = s.make_root(cand());
    s.backpropagate(root, 0.0);
    const auto a = s.expand_initial(root, cand(), OpKind::Init);
    s.backpropagate(a, 1000.0);
    const double root_q_before = s.node(root).q;
    s.node(a).visits = 2.0;
    const auto leaf = s.expand(a, cand(), OpKind::PM);
    s.backpropagate(leaf, 500.0);
    if (gamma == 0.0) {
      // ancestor q values unchanged by the new evaluation
      CHECK(s.node(a).q == Catch::Approx(s.node(a).q).epsilon(0));
      CHECK(s.node(root).q == root_q_before);
    } else {
      const double best_child_of_a = s.node(leaf).q;  // only child
      CHECK(s.node(a).q == Catch::Approx(best_child_of_a));
    }
  }
}

TEST_CASE("normalization refresh keeps every q in [0,1]", "[tree][property]") {
  rng::Rng r(777);
  for (int trial = 0; trial < 200; ++trial) {
    SearchState s(TreeConfig{}, 0);
    const auto root = s.make_root(cand());
    s.backpropagate(root, r.normal() * 1000.0);
    std::vector<std::size_t> ids = {root};
    for (int step = 0; step < 30; ++step) {
      const auto parent = ids[static_cast<std::size_t>(r.uniform() * ids.size())];
      if (s.node(parent).depth >= s.config().max_depth) continue;
      const auto child = s.expand_initial(parent, cand(), OpKind::PM);
      s.backpropagate(child, r.normal() * 1000.0);
      ids.push_back(child);
    }
    for (const auto& n : s.nodes()) {
      REQUIRE(n.q >= 0.0);
      REQUIRE(n.q <= 1.0);
      if (n.parent) REQUIRE(n.depth == s.node(*n.parent).depth + 1);
    }
  }
}

TEST_CASE("selection is invariant under affine fitness rescaling", "[tree][property]") {
  rng::Rng r(4242);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = 0.1 + r.uniform() * 10.0;
    const double b = (r.uniform() - 0.5) * 2000.0;
    std::vector<double> fitness;
    for (int i = 0; i < 12; ++i) fitness.push_back(r.normal() * 500.0);

    auto build = [&](bool transformed) {
      SearchState s(TreeConfig{}, 0);
      const auto root = s.make_root(cand());
      auto f = [&](double v) { return transformed ? a * v + b : v; };
      s.backpropagate(root, f(fitness[0]));
      for (int i = 1; i < 12; ++i) {
        const auto child = s.expand_initial(root, cand(), OpKind::Init);
        s.backpropagate(child, f(fitness[i]));
      }
      return s;
    };
    auto s0 = build(false);
    auto s1 = build(true);
    REQUIRE(s0.select_leaf() == s1.select_leaf());
    REQUIRE(s0.select_leaf() == s1.select_leaf());  // after visit updates too
  }
}

TEST_CASE("maintenance prunes leaves far below the sibling median", "[tree]") {
  TreeConfig cfg;
  SearchState s(cfg, 0);
  const auto root = s.make_root(cand());
  s.backpropagate(root, 0.0);
  const auto top = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(top, 1000.0);  // extrema [0, 1000]
  // siblings with q 0.9, 0.8, 0.7 and the victim at 0.3
  const auto s1 = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(s1, 900.0);
  const auto s2 = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(s2, 800.0);
  const auto s3 = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(s3, 700.0);
  const auto victim = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(victim, 300.0);

  const auto rep = s.maintenance();
  CHECK(s.node(victim).pruned);
  CHECK(rep.pruned_count >= 1);

  // pruned nodes are skipped by selection but stay in the tree
  const auto leaf = s.select_leaf();
  CHECK(leaf != victim);
  CHECK(s.size() == 6);
}

TEST_CASE("fewer than three evaluated siblings never prunes", "[tree]") {
  SearchState s(TreeConfig{}, 0);
  const auto root = s.make_root(cand());
  s.backpropagate(root, 1000.0);
  const auto a = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(a, 900.0);
  const auto b = s.expand_initial(root, cand(), OpKind::Init);
  s.backpropagate(b, 0.0);
  s.maintenance();
  CHECK_FALSE(s.node(b).pruned);
}

TEST_CASE("convergence triggers on a stalling best fitness only", "[tree]") {
  TreeConfig cfg;
  cfg.convergence_window = 5;
  SearchState s(cfg, 0);
  const auto root = s.make_root(cand());
  s.backpropagate(root, 100.0);
  // strictly improving: never converged
  for (int i = 1; i <= 10; ++i) {
    const auto c = s.expand_initial(root, cand(), OpKind::Init);
    s.backpropagate(c, 100.0 + 10.0 * i);
    REQUIRE_FALSE(s.converged());
  }
  // now stall
  for (int i = 0; i < 5; ++i) {
    const auto c = s.expand_initial(root, cand(), OpKind::Init);
    s.backpropagate(c, 50.0);
  }
  CHECK(s.converged());
}

TEST_CASE("replaying an event log reproduces the state bit-for-bit", "[tree]") {
  rng::Rng r(808);
  struct Event {
    std::size_t parent;
    double fitness;
  };
  std::vector<Event> events;
  for (int i = 0; i < 40; ++i) {
    events.push_back({static_cast<std::size_t>(r.uniform() * (i + 1)), r.normal() * 300.0});
  }
  auto replay = [&]() {
    SearchState s(TreeConfig{}, 0);
    const auto root = s.make_root(cand());
    s.backpropagate(root, 42.0);
    for (const auto& e : events) {
      const auto parent = std::min<std::size_t>(e.parent, s.size() - 1);
      if (s.node(parent).depth >= s.config().max_depth) continue;
      const auto child = s.expand_initial(parent, cand(), OpKind::PM);
      s.backpropagate(child, e.fitness);
    }
    return s;
  };
  const auto s0 = replay();
  const auto s1 = replay();
  REQUIRE(s0.size() == s1.size());
  for (std::size_t i = 0; i < s0.size(); ++i) {
    REQUIRE(s0.node(i).q == s1.node(i).q);
    REQUIRE(s0.node(i).visits == s1.node(i).visits);
    REQUIRE(s0.node(i).fitness_raw == s1.node(i).fitness_raw);
  }
  CHECK(s0.q_min() == s1.q_min());
  CHECK(s0.q_max() == s1.q_max());
  CHECK(s0.ranked_fitness() == s1.ranked_fitness());
}
