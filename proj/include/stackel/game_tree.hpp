#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stackel/rational.hpp"

namespace stackel {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

enum class Owner : std::uint8_t { kLeader, kFollower, kLeaf };

const char* to_string(Owner owner);
std::optional<Owner> parse_owner(const std::string& text);

/// Leaf reward in integer cents.
struct PayoffPair {
  Cents leader = 0;
  Cents follower = 0;
  friend bool operator==(const PayoffPair&, const PayoffPair&) = default;
};

/// Exact (leader, follower) value of a joint policy.
struct Value {
  Rational leader;
  Rational follower;
  friend bool operator==(const Value&, const Value&) = default;
};

std::string to_string(const Value& v);

struct Edge {
  std::string action;
  NodeId child = kNoNode;
};

struct Node {
  std::string id;
  Owner owner = Owner::kLeaf;
  // Sorted by action label.
  std::vector<Edge> children;
  std::optional<PayoffPair> reward;

  bool is_leaf() const { return owner == Owner::kLeaf; }
  /// Index of `action` in `children`, or -1.
  int child_index(const std::string& action) const;
};

/// Alternating-move two-player game over an explicit tree. Nodes are stored
/// in a flat vector; NodeId is the index. Construction goes through the
/// add_* methods, which keep children sorted lexicographically by label.
class GameTree {
 public:
  GameTree() = default;

  NodeId add_leaf(std::string id, PayoffPair reward);
  NodeId add_internal(std::string id, Owner owner);
  /// Adds a node with arbitrary fields; used by parsers so that malformed
  /// input survives until validation.
  NodeId add_node(Node node);
  void add_edge(NodeId parent, std::string action, NodeId child);
  void set_root(NodeId root) { root_ = root; }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  NodeId root() const { return root_; }
  std::size_t size() const { return nodes_.size(); }
  bool contains(NodeId id) const { return id < nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const std::vector<Node>& nodes() const { return nodes_; }

  /// Index lookup by the node's string id (linear scan; for small trees).
  std::optional<NodeId> find(const std::string& id) const;

 private:
  std::vector<Node> nodes_;
  NodeId root_ = kNoNode;
};

struct ValidationReport {
  std::size_t internal_count = 0;  // m
  std::size_t leaf_count = 0;      // n
  std::size_t max_depth = 0;
  std::size_t max_branching = 0;
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
};

ValidationReport validate_tree(const GameTree& tree);

/// Behavioral strategy for one player: owned node -> probabilities aligned with
/// that node's (sorted) children.
struct Policy {
  std::unordered_map<NodeId, std::vector<Rational>> probs;

  bool covers(NodeId id) const { return probs.count(id) != 0; }
  void set_pure(const GameTree& tree, NodeId id, std::size_t child_index);
  /// Probability of `child_index` at `id`; throws if `id` is unmapped.
  const Rational& prob(NodeId id, std::size_t child_index) const;
};

struct LeaderPolicy : Policy {};
struct FollowerPolicy : Policy {};

class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checks nonnegativity, normalization, arity and ownership of every entry.
std::vector<std::string> check_policy(const GameTree& tree, const Policy& policy,
                                      Owner owner);

/// Exact expected payoff pair at the root. Throws PolicyError when a node
/// reached with positive probability has no entry.
Value evaluate_policy(const GameTree& tree, const LeaderPolicy& leader,
                      const FollowerPolicy& follower);

/// Same, from an arbitrary node.
Value evaluate_policy(const GameTree& tree, const LeaderPolicy& leader,
                      const FollowerPolicy& follower, NodeId from);

struct BestResponse {
  FollowerPolicy policy;
  Value value;
};

/// Pure follower best response by backward induction with the leader's mixing
/// fixed. Follower ties go to the larger leader value, then the first label.
BestResponse best_response(const GameTree& tree, const LeaderPolicy& leader);

/// Lowest follower value the leader can force at `node` (leaf -> follower
/// reward, leader node -> min, follower node -> max).
Rational minimax_follower_value(const GameTree& tree, NodeId node);

/// minimax_follower_value for every node at once, in cents.
std::vector<Cents> minimax_follower_values(const GameTree& tree);

/// Leader policy realizing minimax_follower_value over the subtree at `node`.
/// Entries are written into `out`; leader children off the minimizing choice
/// are left unmapped.
void add_threat_policy(const GameTree& tree, const std::vector<Cents>& minimax,
                       NodeId node, LeaderPolicy& out);

struct RandomTreeOptions {
  std::uint64_t seed = 0;
  int max_depth = 3;
  int branching = 2;
  Cents reward_bound = 500;
  // Negative means unlimited; once reached, further internal nodes are
  // follower-owned.
  int max_leader_nodes = -1;
};

/// Deterministic random game. Internal nodes get between 1 and `branching`
/// children (root gets at least 2 when depth allows); owners are sampled;
/// subtrees stop early with some probability.
GameTree random_tree(const RandomTreeOptions& options);

inline GameTree random_tree(std::uint64_t seed, int max_depth, int branching,
                            Cents reward_bound) {
  return random_tree(RandomTreeOptions{seed, max_depth, branching, reward_bound, -1});
}

}  // namespace stackel
