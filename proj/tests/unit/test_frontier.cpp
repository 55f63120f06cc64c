#include "doctest.h"
#include "fixtures.hpp"
#include "stackel/frontier.hpp"

using namespace stackel;
using stackel::test::q;

namespace {

Frontier points(std::initializer_list<std::pair<long, long>> xs) {
  Frontier f;
  for (auto [l, fo] : xs) f.points.push_back(FrontierPoint{q(l), q(fo), {}});
  std::sort(f.points.begin(), f.points.end(), [](const auto& a, const auto& b) {
    return a.follower != b.follower ? a.follower < b.follower : a.leader < b.leader;
  });
  return f;
}

Frontier seg(long l0, long f0, long l1, long f1) {
  Frontier f = points({{l0, f0}, {l1, f1}});
  f.segments.push_back(FrontierSegment{0, 1, {}, 0, 1});
  return f;
}

bool has_point(const Frontier& f, const Rational& l, const Rational& fo) {
  for (const auto& p : f.points)
    if (p.leader == l && p.follower == fo) return true;
  return false;
}

// Non-domination on sampled follower values: each retained element sits on
// the envelope wherever it is defined.
void check_envelope(const Frontier& f) {
  for (std::size_t i = 0; i + 1 < f.points.size(); ++i)
    CHECK(f.points[i].follower <= f.points[i + 1].follower);
  for (const auto& s : f.segments) {
    const auto& lo = f.points[s.lo];
    const auto& hi = f.points[s.hi];
    CHECK(lo.follower < hi.follower);
    for (int k = 1; k < 8; ++k) {
      Rational x = lo.follower + (hi.follower - lo.follower) * q(k, 8);
      Rational y = lo.leader + (hi.leader - lo.leader) * q(k, 8);
      CHECK(*envelope_value(f, x) == y);
    }
  }
}

}  // namespace

TEST_CASE("leaf_frontier") {
  auto f = leaf_frontier({200, 300});
  REQUIRE(f.points.size() == 1);
  CHECK(f.points[0].leader == 200);
  CHECK(f.points[0].follower == 300);
  CHECK(f.segments.empty());
  CHECK(f.points[0].source.kind == PointSource::Kind::kLeaf);
}

TEST_CASE("merge_leader") {
  std::vector<Frontier> kids{leaf_frontier({200, 300}), leaf_frontier({0, 0})};
  auto f = merge_leader(kids);
  CHECK(f.points.size() == 2);
  REQUIRE(f.segments.size() == 1);
  CHECK(f.points[f.segments[0].lo].follower == 0);
  CHECK(f.points[f.segments[0].hi].follower == 300);

  std::vector<Frontier> same{leaf_frontier({200, 300}), leaf_frontier({100, 300})};
  auto g = merge_leader(same);
  REQUIRE(g.points.size() == 1);
  CHECK(g.points[0].leader == 200);
  CHECK(g.points[0].source.a.action == 0);

  CHECK_THROWS_AS(merge_leader(std::span<const Frontier>{}), FrontierError);
}

TEST_CASE("sigma_thresholds") {
  auto t2 = test::t2();
  auto s2 = sigma_thresholds(t2, t2.root());
  CHECK(*s2[0] == 200);
  CHECK(*s2[1] == 100);
  auto t4 = test::t4();
  auto s4 = sigma_thresholds(t4, t4.root());
  CHECK(*s4[0] == 0);
  CHECK(*s4[1] == 100);

  GameTree one;
  NodeId r = one.add_internal("r", Owner::kFollower);
  one.add_edge(r, "a", one.add_leaf("x", {1, 1}));
  one.set_root(r);
  CHECK_FALSE(sigma_thresholds(one, r)[0].has_value());
}

TEST_CASE("clip_frontier") {
  auto c = clip_frontier(seg(0, 0, 500, 500), q(100));
  REQUIRE(c.segments.size() == 1);
  CHECK(has_point(c, q(100), q(100)));
  CHECK(has_point(c, q(500), q(500)));
  CHECK(c.points.size() == 2);

  CHECK(clip_frontier(points({{300, 100}}), q(200)).empty());

  auto s = seg(0, 0, 500, 500);
  auto u = clip_frontier(s, std::nullopt);
  CHECK(u.points.size() == 2);
  CHECK(u.segments.size() == 1);
}

TEST_CASE("merge_follower") {
  auto t2 = test::t2();
  auto f2 = solve_frontier(t2).root();
  REQUIRE(f2.points.size() == 1);
  CHECK(has_point(f2, q(0), q(200)));

  auto t4 = test::t4();
  auto f4 = solve_frontier(t4).root();
  CHECK(has_point(f4, q(300), q(100)));
  // Segment endpoint kept even though (300,100) beats it.
  CHECK(has_point(f4, q(100), q(100)));
  CHECK(*envelope_value(f4, q(100)) == 300);
  CHECK(*envelope_value(f4, q(300)) == 300);
  CHECK(*envelope_value(f4, q(500)) == 500);
  REQUIRE(f4.segments.size() == 1);
  check_envelope(f4);

  auto t3 = test::t3();
  auto sol3 = solve_frontier(t3);
  const Frontier& ff = *sol3.find(*t3.find("f"));
  REQUIRE(ff.points.size() == 1);
  CHECK(has_point(ff, q(100), q(400)));

  std::vector<Frontier> none{points({{1, 1}})};
  CHECK(merge_follower(none, SigmaThresholds{q(5)}).empty());
}

TEST_CASE("prune_envelope") {
  auto a = prune_envelope(points({{200, 300}, {100, 300}}));
  REQUIRE(a.points.size() == 1);
  CHECK(a.points[0].leader == 200);

  auto s = seg(0, 0, 200, 300);
  auto b = prune_envelope(s);
  CHECK(b.points.size() == 2);
  CHECK(b.segments.size() == 1);

  Frontier mixed = seg(0, 0, 100, 400);
  mixed.points.push_back(FrontierPoint{q(50), q(100), {}});
  std::swap(mixed.points[1], mixed.points[2]);
  mixed.segments[0].hi = 2;
  auto c = prune_envelope(mixed);
  CHECK(*envelope_value(c, q(100)) == 50);
  CHECK(*envelope_value(c, q(0)) == 0);
  CHECK(*envelope_value(c, q(400)) == 100);
  CHECK(*envelope_value(c, q(200)) == 50);
  check_envelope(c);
  CHECK(prune_envelope(c) == c);
}

TEST_CASE("solve and extract on small trees") {
  auto t1 = test::t1();
  auto s1 = solve_frontier(t1);
  CHECK(s1.root().points.size() == 2);
  CHECK(s1.root().segments.size() == 1);
  auto e1 = extract_equilibrium(s1.root());
  CHECK(e1.leader == 200);
  CHECK(e1.follower == 300);

  auto p1 = extract_punishment(s1.root(), PunishmentQuery::cap(q(100)));
  CHECK(p1.leader == q(200, 3));
  CHECK(p1.follower == 100);
  CHECK(p1.support.on_segment);
  CHECK(p1.support.lambda == q(1, 3));

  auto pol = unroll_policy(s1, p1);
  CHECK(pol.prob(t1.root(), 0) == q(1, 3));
  CHECK(best_response(t1, pol).value == Value{q(200, 3), q(100)});
  CHECK_THROWS_AS(extract_punishment(s1.root(), PunishmentQuery::cap(q(-1))), InfeasibleCap);

  auto t4 = test::t4();
  auto s4 = solve_frontier(t4);
  auto e4 = extract_equilibrium(s4.root());
  CHECK(e4.leader == 500);
  CHECK(e4.follower == 500);
  auto p4 = extract_punishment(s4.root(), PunishmentQuery::cap(q(100)));
  CHECK(p4.leader == 300);
  CHECK(p4.follower == 100);
  auto pol4 = unroll_policy(s4, p4);
  CHECK(pol4.prob(*t4.find("l"), 0) == 1);
  auto br4 = best_response(t4, pol4);
  CHECK(br4.value == Value{q(300), q(100)});
  CHECK(br4.policy.prob(t4.root(), 0) == 1);
}

TEST_CASE("unroll rejects targets off the root frontier") {
  auto t1 = test::t1();
  auto s1 = solve_frontier(t1);
  TargetPoint bad{q(1), q(1), Location{0, false, 0}};
  CHECK_THROWS_AS(unroll_policy(s1, bad), FrontierError);
  TargetPoint oob{q(1), q(1), Location{9, false, 0}};
  CHECK_THROWS_AS(unroll_policy(s1, oob), FrontierError);
}

TEST_CASE("frontier properties on random trees") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    auto t = random_tree(RandomTreeOptions{seed, 5, 3, 500, 6});
    auto sol = solve_frontier(t);
    const Frontier& root = sol.root();
    REQUIRE_FALSE(root.empty());
    check_envelope(root);
    CHECK(prune_envelope(root) == root);

    auto eq = extract_equilibrium(root);
    auto inf = extract_punishment(root, PunishmentQuery::unbounded());
    CHECK(eq.leader == inf.leader);
    CHECK(eq.follower == inf.follower);

    // Every envelope vertex is achievable.
    for (std::uint32_t k = 0; k < root.points.size(); ++k) {
      const auto& p = root.points[k];
      if (*envelope_value(root, p.follower) != p.leader) continue;
      auto pol = unroll_policy(sol, TargetPoint{p.leader, p.follower, Location{k, false, 0}});
      CHECK(best_response(t, pol).value == Value{p.leader, p.follower});
    }

    for (std::uint32_t k = 0; k < root.segments.size(); ++k) {
      const auto& sg = root.segments[k];
      const auto& lo = root.points[sg.lo];
      const auto& hi = root.points[sg.hi];
      Rational lam = q(2, 5);
      TargetPoint mid{lo.leader + lam * (hi.leader - lo.leader),
                      lo.follower + lam * (hi.follower - lo.follower), Location{k, true, lam}};
      auto pol = unroll_policy(sol, mid);
      CHECK(best_response(t, pol).value == Value{mid.leader, mid.follower});
    }

    // Monotone in theta, cap respected, lean solve agrees.
    Rational last = -1;
    for (long theta : {0L, 50L, 100L, 200L, 300L, 500L}) {
      try {
        auto tp = extract_punishment(root, PunishmentQuery::cap(q(theta)));
        CHECK(tp.leader >= last);
        last = tp.leader;
        auto v = best_response(t, unroll_policy(sol, tp)).value;
        CHECK(v.follower <= theta);
        CHECK(v == Value{tp.leader, tp.follower});
      } catch (const InfeasibleCap&) {
        CHECK(root.points.front().follower > theta);
      }
    }
    auto lean = solve_frontier(t, SolveOptions{false});
    CHECK(lean.root() == root);
    auto lp = unroll_policy(lean, eq);
    CHECK(best_response(t, lp).value == Value{eq.leader, eq.follower});
  }
}
