#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stackel/game_tree.hpp"
#include "stackel/rational.hpp"

namespace stackel {

/// Position inside one frontier: a point, or a segment at `lambda` in [0, 1]
/// measured from its lower-follower end toward its higher-follower end.
struct Location {
  std::uint32_t element = 0;
  bool on_segment = false;
  Rational lambda;

  friend bool operator==(const Location&, const Location&) = default;
};

/// A location in the frontier of the child reached by `action` (an index into
/// the node's sorted children).
struct ChildRef {
  std::uint32_t action = 0;
  Location at;

  friend bool operator==(const ChildRef&, const ChildRef&) = default;
};

/// How a frontier point is realized one level down.
struct PointSource {
  enum class Kind : std::uint8_t { kLeaf, kChild, kMix };
  Kind kind = Kind::kLeaf;
  ChildRef a;
  ChildRef b;       // kMix only
  Rational weight;  // kMix only: probability on `b`

  friend bool operator==(const PointSource&, const PointSource&) = default;
};

/// The line a frontier segment lies on: part of a child's segment, or the
/// mixing line between two locations in different children (leader nodes).
struct SegmentSource {
  enum class Kind : std::uint8_t { kChildSegment, kCross };
  Kind kind = Kind::kChildSegment;
  std::uint32_t action = 0;    // kChildSegment
  std::uint32_t segment = 0;   // kChildSegment
  ChildRef a;                  // kCross: low-follower end
  ChildRef b;                  // kCross: high-follower end

  friend bool operator==(const SegmentSource&, const SegmentSource&) = default;
};

struct FrontierPoint {
  Rational leader;
  Rational follower;
  PointSource source;

  friend bool operator==(const FrontierPoint&, const FrontierPoint&) = default;
};

/// Segment between two points of the same frontier, `lo` having the smaller
/// follower value. `t_lo`/`t_hi` place the endpoints on the source line.
struct FrontierSegment {
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;
  SegmentSource source;
  Rational t_lo;
  Rational t_hi;

  friend bool operator==(const FrontierSegment&, const FrontierSegment&) = default;
};

/// Achievable (leader, follower) payoffs at a node: the upper envelope of
/// leader value as a function of follower value. Points are sorted by
/// (follower, leader); segments by their low end.
struct Frontier {
  std::vector<FrontierPoint> points;
  std::vector<FrontierSegment> segments;

  bool empty() const { return points.empty(); }
  Value at(const Location& loc) const;

  friend bool operator==(const Frontier&, const Frontier&) = default;
};

/// Per-action follower threshold at a follower node; nullopt stands for -inf.
using SigmaThresholds = std::vector<LowerBound>;

struct TargetPoint {
  Rational leader;
  Rational follower;
  Location support;
};

class InfeasibleCap : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FrontierError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Follower cap; nullopt is +inf.
struct PunishmentQuery {
  std::optional<Rational> theta;

  static PunishmentQuery unbounded() { return {}; }
  static PunishmentQuery cap(Rational t) { return {std::move(t)}; }
};

Frontier leaf_frontier(const PayoffPair& reward);

/// Union of child frontiers plus every cross-child mixing segment, pruned.
/// Children are indexed by action position.
Frontier merge_leader(std::span<const Frontier> children);

SigmaThresholds sigma_thresholds(const GameTree& tree, NodeId node,
                                 const std::vector<Cents>& minimax);
SigmaThresholds sigma_thresholds(const GameTree& tree, NodeId node);

/// Drops everything with follower value below `min_follower`, truncating
/// segments that straddle it.
Frontier clip_frontier(const Frontier& f, const LowerBound& min_follower);

/// Union of the clipped children, pruned. Empty when every child clips away.
Frontier merge_follower(std::span<const Frontier> children, const SigmaThresholds& sigmas);

/// Upper envelope of `f`; idempotent.
Frontier prune_envelope(const Frontier& f);

struct SolveOptions {
  // When false only frontiers at depth <= retain_depth are kept;
  // unroll_policy recomputes the subtrees it descends into below that.
  bool retain_all = true;
  int retain_depth = 0;
};

struct SolveStats {
  std::size_t nodes = 0;
  std::size_t max_segments = 0;
  std::size_t max_points = 0;
  NodeId max_segments_node = kNoNode;
};

class FrontierSolution {
 public:
  FrontierSolution(const GameTree& tree, std::vector<std::optional<Frontier>> frontiers,
                   std::vector<Cents> minimax, SolveStats stats);

  const GameTree& tree() const { return *tree_; }
  const Frontier& root() const;
  /// nullptr when the frontier was not retained.
  const Frontier* find(NodeId node) const;
  const std::vector<Cents>& minimax() const { return minimax_; }
  const SolveStats& stats() const { return stats_; }

 private:
  const GameTree* tree_;
  std::vector<std::optional<Frontier>> frontiers_;
  std::vector<Cents> minimax_;
  SolveStats stats_;
};

/// Bottom-up frontier computation over the whole tree. The tree must outlive
/// the returned solution.
FrontierSolution solve_frontier(const GameTree& tree, SolveOptions options = {});

/// Frontier of the subtree rooted at `node` (nothing retained).
Frontier solve_subtree(const GameTree& tree, NodeId node, const std::vector<Cents>& minimax);

/// Highest leader value; ties go to higher follower value, then to the
/// earliest element.
TargetPoint extract_equilibrium(const Frontier& root);

/// Highest leader value subject to follower value <= theta.
TargetPoint extract_punishment(const Frontier& root, const PunishmentQuery& q);

/// Leader policy whose best response yields exactly `target`.
LeaderPolicy unroll_policy(const FrontierSolution& solution, const TargetPoint& target);

/// Exact upper-envelope value at follower value x, or nullopt if no element
/// attains x.
std::optional<Rational> envelope_value(const Frontier& f, const Rational& x);

}  // namespace stackel
