#pragma once

#include "doctest.h"
#include "stackel/game_tree.hpp"

namespace stackel::test {

// T1: leader root, a -> (200,300), b -> (0,0).
inline GameTree t1() {
  GameTree t;
  NodeId r = t.add_internal("r", Owner::kLeader);
  t.add_edge(r, "a", t.add_leaf("la", {200, 300}));
  t.add_edge(r, "b", t.add_leaf("lb", {0, 0}));
  t.set_root(r);
  return t;
}

// T2: follower root, a -> (500,100), b -> (0,200).
inline GameTree t2() {
  GameTree t;
  NodeId r = t.add_internal("r", Owner::kFollower);
  t.add_edge(r, "a", t.add_leaf("la", {500, 100}));
  t.add_edge(r, "b", t.add_leaf("lb", {0, 200}));
  t.set_root(r);
  return t;
}

// T3: leader root, a -> follower {a1 -> (300,100), a2 -> (100,400)}, b -> (0,0).
inline GameTree t3() {
  GameTree t;
  NodeId r = t.add_internal("r", Owner::kLeader);
  NodeId f = t.add_internal("f", Owner::kFollower);
  t.add_edge(f, "a1", t.add_leaf("l1", {300, 100}));
  t.add_edge(f, "a2", t.add_leaf("l2", {100, 400}));
  t.add_edge(r, "a", f);
  t.add_edge(r, "b", t.add_leaf("lb", {0, 0}));
  t.set_root(r);
  return t;
}

// T4: follower root, a -> (300,100), b -> leader {c -> (0,0), d -> (500,500)}.
inline GameTree t4() {
  GameTree t;
  NodeId r = t.add_internal("r", Owner::kFollower);
  NodeId l = t.add_internal("l", Owner::kLeader);
  t.add_edge(l, "c", t.add_leaf("lc", {0, 0}));
  t.add_edge(l, "d", t.add_leaf("ld", {500, 500}));
  t.add_edge(r, "a", t.add_leaf("la", {300, 100}));
  t.add_edge(r, "b", l);
  t.set_root(r);
  return t;
}

inline Rational q(long n, long d = 1) { return make_rational(n, d); }

}  // namespace stackel::test

namespace doctest {
template <>
struct StringMaker<stackel::Value> {
  static String convert(const stackel::Value& v) { return stackel::to_string(v).c_str(); }
};
template <>
struct StringMaker<stackel::Rational> {
  static String convert(const stackel::Rational& r) { return stackel::to_string(r).c_str(); }
};
}  // namespace doctest
