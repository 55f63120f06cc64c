#include "doctest.h"
#include "fixtures.hpp"
#include "stackel/oracle.hpp"

using namespace stackel;
using stackel::test::q;

TEST_CASE("enumerate_pure_leader examples") {
  auto t1 = test::t1();
  auto a = enumerate_pure_leader(t1, std::nullopt);
  CHECK(a.best_leader_value == 200);
  CHECK(a.witness_policy.prob(t1.root(), 0) == 1);
  auto b = enumerate_pure_leader(t1, q(100));
  CHECK(b.best_leader_value == 0);
  CHECK(b.method == OracleMethod::kPureEnumeration);

  auto t4 = test::t4();
  auto c = enumerate_pure_leader(t4, q(100));
  CHECK(c.best_leader_value == 300);
  CHECK(c.witness_policy.prob(*t4.find("l"), 0) == 1);

  CHECK_THROWS_AS(enumerate_pure_leader(t1, q(-5)), InfeasibleCap);
}

TEST_CASE("grid_search_leader examples") {
  auto t1 = test::t1();
  auto a = grid_search_leader(t1, q(1, 10), q(100));
  CHECK(a.best_leader_value == 60);
  CHECK(a.follower_value == 90);
  CHECK(a.witness_policy.prob(t1.root(), 0) == q(3, 10));
  CHECK(a.method == OracleMethod::kGrid);

  auto b = grid_search_leader(t1, q(1, 20), q(100));
  CHECK(b.best_leader_value >= 60);
  CHECK(b.best_leader_value <= q(200, 3));

  CHECK_THROWS_AS(grid_search_leader(t1, q(3, 10), std::nullopt), std::invalid_argument);
}

TEST_CASE("grid budgets are hard errors") {
  GameTree wide;
  NodeId r = wide.add_internal("r", Owner::kLeader);
  for (int i = 0; i < 4; ++i)
    wide.add_edge(r, std::string(1, static_cast<char>('a' + i)),
                  wide.add_leaf("l" + std::to_string(i), {i, i}));
  wide.set_root(r);
  CHECK_THROWS_AS(grid_search_leader(wide, q(1, 10), std::nullopt), OracleBudgetExceeded);
  OracleLimits tiny;
  tiny.max_grid_work = 3;
  CHECK_THROWS_AS(grid_search_leader(test::t1(), q(1, 10), std::nullopt, tiny),
                  OracleBudgetExceeded);
}

TEST_CASE("verify_point") {
  auto t1 = test::t1();
  LeaderPolicy third;
  third.probs[t1.root()] = {q(1, 3), q(2, 3)};
  TargetPoint target{q(200, 3), q(100), {}};
  CHECK(verify_point(t1, third, target));
  LeaderPolicy pure;
  pure.set_pure(t1, t1.root(), 0);
  CHECK_FALSE(verify_point(t1, pure, target));
  CHECK_FALSE(verify_point(t1, LeaderPolicy{}, target));
}

TEST_CASE("oracle witnesses reproduce their values") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto t = random_tree(RandomTreeOptions{seed, 4, 3, 500, 3});
    for (std::optional<Rational> theta : {std::optional<Rational>{}, std::optional<Rational>{q(200)}}) {
      try {
        auto p = enumerate_pure_leader(t, theta);
        CHECK(verify_point(t, p.witness_policy, {p.best_leader_value, p.follower_value, {}}));
        auto g = grid_search_leader(t, q(1, 10), theta);
        CHECK(verify_point(t, g.witness_policy, {g.best_leader_value, g.follower_value, {}}));
        CHECK(g.best_leader_value >= p.best_leader_value);
      } catch (const InfeasibleCap&) {
      }
    }
  }
}
