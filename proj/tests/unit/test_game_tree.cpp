#include <functional>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"

using namespace stackel;
using stackel::test::q;

TEST_CASE("validate_tree counts") {
  GameTree single;
  single.set_root(single.add_leaf("x", {13, 13}));
  auto r = validate_tree(single);
  CHECK(r.ok());
  CHECK(r.internal_count == 0);
  CHECK(r.leaf_count == 1);

  auto r1 = validate_tree(test::t1());
  CHECK(r1.ok());
  CHECK(r1.internal_count == 1);
  CHECK(r1.leaf_count == 2);
  CHECK(r1.max_branching == 2);
  CHECK(r1.max_depth == 1);
}

TEST_CASE("validate_tree reports malformed nodes") {
  GameTree t;
  NodeId r = t.add_internal("r", Owner::kLeader);
  t.add_edge(r, "a", 7);
  t.set_root(r);
  auto rep = validate_tree(t);
  CHECK_FALSE(rep.ok());

  GameTree bare;
  bare.set_root(bare.add_internal("r", Owner::kFollower));
  CHECK_FALSE(validate_tree(bare).ok());

  GameTree shared;
  NodeId s = shared.add_internal("r", Owner::kLeader);
  NodeId leaf = shared.add_leaf("x", {1, 1});
  shared.add_edge(s, "a", leaf);
  shared.add_edge(s, "b", leaf);
  shared.set_root(s);
  CHECK_FALSE(validate_tree(shared).ok());
}

TEST_CASE("evaluate_policy on T1 and T3") {
  auto t = test::t1();
  LeaderPolicy pure;
  pure.set_pure(t, t.root(), 0);
  CHECK(evaluate_policy(t, pure, {}) == Value{q(200), q(300)});

  LeaderPolicy half;
  half.probs[t.root()] = {q(1, 2), q(1, 2)};
  CHECK(evaluate_policy(t, half, {}) == Value{q(100), q(150)});

  auto t3 = test::t3();
  LeaderPolicy la;
  la.set_pure(t3, t3.root(), 0);
  FollowerPolicy fa2;
  fa2.set_pure(t3, *t3.find("f"), 1);
  CHECK(evaluate_policy(t3, la, fa2) == Value{q(100), q(400)});
}

TEST_CASE("evaluate_policy requires entries at reachable nodes") {
  auto t = test::t3();
  LeaderPolicy la;
  la.set_pure(t, t.root(), 0);
  CHECK_THROWS_AS(evaluate_policy(t, la, {}), PolicyError);
  LeaderPolicy lb;
  lb.set_pure(t, t.root(), 1);
  CHECK(evaluate_policy(t, lb, {}) == Value{q(0), q(0)});
}

TEST_CASE("best_response examples") {
  auto t2 = test::t2();
  auto br = best_response(t2, {});
  CHECK(br.value == Value{q(0), q(200)});
  CHECK(br.policy.prob(t2.root(), 1) == 1);

  auto t4 = test::t4();
  LeaderPolicy c;
  c.set_pure(t4, *t4.find("l"), 0);
  CHECK(best_response(t4, c).value == Value{q(300), q(100)});

  GameTree tie;
  NodeId r = tie.add_internal("r", Owner::kFollower);
  tie.add_edge(r, "a", tie.add_leaf("la", {500, 100}));
  tie.add_edge(r, "b", tie.add_leaf("lb", {0, 100}));
  tie.set_root(r);
  auto tb = best_response(tie, {});
  CHECK(tb.value == Value{q(500), q(100)});
  CHECK(tb.policy.prob(r, 0) == 1);
}

TEST_CASE("minimax_follower_value examples") {
  auto t4 = test::t4();
  CHECK(minimax_follower_value(t4, *t4.find("la")) == 100);
  CHECK(minimax_follower_value(t4, *t4.find("l")) == 0);
  auto t2 = test::t2();
  CHECK(minimax_follower_value(t2, t2.root()) == 200);
  CHECK_THROWS(minimax_follower_value(t2, 99));
}

namespace {

// Every pure leader policy, by odometer over leader nodes.
void for_each_pure_leader(const GameTree& t, const std::function<void(const LeaderPolicy&)>& fn) {
  std::vector<NodeId> leaders;
  for (NodeId i = 0; i < t.size(); ++i)
    if (t.node(i).owner == Owner::kLeader) leaders.push_back(i);
  std::vector<std::size_t> idx(leaders.size(), 0);
  while (true) {
    LeaderPolicy p;
    for (std::size_t k = 0; k < leaders.size(); ++k) p.set_pure(t, leaders[k], idx[k]);
    fn(p);
    std::size_t k = 0;
    while (k < leaders.size() && ++idx[k] == t.node(leaders[k]).children.size()) idx[k++] = 0;
    if (k == leaders.size()) return;
  }
}

// Sum over root-to-leaf paths of path probability times reward.
Value path_sum(const GameTree& t, const LeaderPolicy& l, const FollowerPolicy& f) {
  Value v{0, 0};
  std::function<void(NodeId, Rational)> walk = [&](NodeId id, Rational p) {
    const Node& n = t.node(id);
    if (n.is_leaf()) {
      v.leader += p * n.reward->leader;
      v.follower += p * n.reward->follower;
      return;
    }
    const Policy& pol = n.owner == Owner::kLeader ? static_cast<const Policy&>(l) : f;
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      Rational w = pol.prob(id, i);
      if (w != 0) walk(n.children[i].child, p * w);
    }
  };
  walk(t.root(), 1);
  return v;
}

LeaderPolicy random_leader(const GameTree& t, std::mt19937_64& rng) {
  LeaderPolicy p;
  for (NodeId i = 0; i < t.size(); ++i) {
    const Node& n = t.node(i);
    if (n.owner != Owner::kLeader) continue;
    std::vector<Rational> w;
    Rational total = 0;
    for (std::size_t k = 0; k < n.children.size(); ++k) {
      w.emplace_back(static_cast<long>(rng() % 4));
      total += w.back();
    }
    if (total == 0) {
      w[0] = 1;
      total = 1;
    }
    for (auto& x : w) x /= total;
    p.probs[i] = std::move(w);
  }
  return p;
}

}  // namespace

TEST_CASE("random_tree is deterministic and valid") {
  auto a = random_tree(1, 1, 2, 500);
  CHECK(validate_tree(a).ok());
  auto b = random_tree(42, 4, 3, 500);
  auto c = random_tree(42, 4, 3, 500);
  REQUIRE(b.size() == c.size());
  for (NodeId i = 0; i < b.size(); ++i) {
    CHECK(b.node(i).id == c.node(i).id);
    CHECK(b.node(i).reward == c.node(i).reward);
    CHECK(b.node(i).children.size() == c.node(i).children.size());
  }
  auto d = random_tree(7, 6, 3, 500);
  CHECK(validate_tree(d).ok());
  for (const auto& n : d.nodes())
    if (n.reward) {
      CHECK(n.reward->leader >= 0);
      CHECK(n.reward->leader <= 500);
    }
}

TEST_CASE("best_response properties on random trees") {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto t = random_tree(RandomTreeOptions{seed, 5, 3, 500, 4});
    REQUIRE(validate_tree(t).ok());
    auto leader = random_leader(t, rng);
    auto br = best_response(t, leader);
    CHECK(check_policy(t, br.policy, Owner::kFollower).empty());
    CHECK(br.value == evaluate_policy(t, leader, br.policy));
    CHECK(br.value == path_sum(t, leader, br.policy));
    CHECK(best_response(t, leader).value == br.value);
    // No pure follower deviation at any single node does better; with
    // backward induction this covers every pure follower policy.
    for (const auto& [id, probs] : br.policy.probs) {
      for (std::size_t k = 0; k < probs.size(); ++k) {
        FollowerPolicy dev = br.policy;
        dev.set_pure(t, id, k);
        CHECK(evaluate_policy(t, leader, dev).follower <= br.value.follower);
      }
    }
  }
}

TEST_CASE("minimax equals the best pure leader threat") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto t = random_tree(RandomTreeOptions{seed, 4, 3, 500, 5});
    std::optional<Rational> lowest;
    for_each_pure_leader(t, [&](const LeaderPolicy& p) {
      Rational f = best_response(t, p).value.follower;
      if (!lowest || f < *lowest) lowest = f;
    });
    CHECK(minimax_follower_value(t, t.root()) == *lowest);
  }
}
