#include "stackel/game_tree.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace stackel {

const char* to_string(Owner owner) {
  switch (owner) {
    case Owner::kLeader:
      return "leader";
    case Owner::kFollower:
      return "follower";
    case Owner::kLeaf:
      return "leaf";
  }
  return "?";
}

std::optional<Owner> parse_owner(const std::string& text) {
  if (text == "leader") return Owner::kLeader;
  if (text == "follower") return Owner::kFollower;
  if (text == "leaf") return Owner::kLeaf;
  return std::nullopt;
}

std::string to_string(const Value& v) {
  return "(" + to_string(v.leader) + ", " + to_string(v.follower) + ")";
}

int Node::child_index(const std::string& action) const {
  auto it = std::lower_bound(
      children.begin(), children.end(), action,
      [](const Edge& e, const std::string& a) { return e.action < a; });
  if (it == children.end() || it->action != action) return -1;
  return static_cast<int>(it - children.begin());
}

NodeId GameTree::add_leaf(std::string id, PayoffPair reward) {
  Node n;
  n.id = std::move(id);
  n.owner = Owner::kLeaf;
  n.reward = reward;
  return add_node(std::move(n));
}

NodeId GameTree::add_internal(std::string id, Owner owner) {
  Node n;
  n.id = std::move(id);
  n.owner = owner;
  return add_node(std::move(n));
}

NodeId GameTree::add_node(Node node) {
  nodes_.push_back(std::move(node));
  auto id = static_cast<NodeId>(nodes_.size() - 1);
  if (root_ == kNoNode) root_ = id;
  return id;
}

void GameTree::add_edge(NodeId parent, std::string action, NodeId child) {
  auto& kids = nodes_.at(parent).children;
  auto it = std::upper_bound(
      kids.begin(), kids.end(), action,
      [](const std::string& a, const Edge& e) { return a < e.action; });
  kids.insert(it, Edge{std::move(action), child});
}

std::optional<NodeId> GameTree::find(const std::string& id) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].id == id) return static_cast<NodeId>(i);
  return std::nullopt;
}

ValidationReport validate_tree(const GameTree& tree) {
  ValidationReport report;
  const auto& nodes = tree.nodes();
  auto err = [&](std::string msg) { report.errors.push_back(std::move(msg)); };

  for (const auto& n : nodes) {
    if (n.is_leaf()) {
      ++report.leaf_count;
      if (!n.children.empty()) err("leaf '" + n.id + "' has children");
      if (!n.reward) err("leaf '" + n.id + "' has no reward");
    } else {
      ++report.internal_count;
      if (n.children.empty()) err("internal node '" + n.id + "' has no children");
      if (n.reward) err("internal node '" + n.id + "' carries a reward");
    }
    report.max_branching = std::max(report.max_branching, n.children.size());
    for (std::size_t i = 1; i < n.children.size(); ++i)
      if (n.children[i].action == n.children[i - 1].action)
        err("node '" + n.id + "' repeats action '" + n.children[i].action + "'");
    for (const auto& e : n.children)
      if (!tree.contains(e.child))
        err("node '" + n.id + "' action '" + e.action + "' references a missing child");
  }

  if (!tree.contains(tree.root())) {
    err("root is missing");
    return report;
  }

  // Walk from the root; a node seen twice means a shared child or a cycle.
  std::vector<std::uint8_t> seen(nodes.size(), 0);
  std::vector<std::pair<NodeId, std::size_t>> stack{{tree.root(), 0}};
  seen[tree.root()] = 1;
  while (!stack.empty()) {
    auto [id, depth] = stack.back();
    stack.pop_back();
    report.max_depth = std::max(report.max_depth, depth);
    for (const auto& e : nodes[id].children) {
      if (!tree.contains(e.child)) continue;
      if (seen[e.child]) {
        err("node '" + nodes[e.child].id + "' is reachable by more than one path");
        continue;
      }
      seen[e.child] = 1;
      stack.emplace_back(e.child, depth + 1);
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (!seen[i]) err("node '" + nodes[i].id + "' is unreachable from the root");
  return report;
}

void Policy::set_pure(const GameTree& tree, NodeId id, std::size_t child_index) {
  auto& p = probs[id];
  p.assign(tree.node(id).children.size(), Rational(0));
  p.at(child_index) = 1;
}

const Rational& Policy::prob(NodeId id, std::size_t child_index) const {
  auto it = probs.find(id);
  if (it == probs.end())
    throw PolicyError("no policy entry for node #" + std::to_string(id));
  return it->second.at(child_index);
}

std::vector<std::string> check_policy(const GameTree& tree, const Policy& policy,
                                      Owner owner) {
  std::vector<std::string> errors;
  for (const auto& [id, dist] : policy.probs) {
    if (!tree.contains(id)) {
      errors.push_back("policy names missing node #" + std::to_string(id));
      continue;
    }
    const Node& n = tree.node(id);
    if (n.owner != owner) {
      errors.push_back("policy entry at '" + n.id + "' which is owned by " +
                       to_string(n.owner));
      continue;
    }
    if (dist.size() != n.children.size()) {
      errors.push_back("policy at '" + n.id + "' has wrong arity");
      continue;
    }
    Rational sum = 0;
    for (const auto& p : dist) {
      if (p < 0) errors.push_back("negative probability at '" + n.id + "'");
      sum += p;
    }
    if (sum != 1) errors.push_back("probabilities at '" + n.id + "' sum to " + to_string(sum));
  }
  return errors;
}

namespace {

Value leaf_value(const Node& n) {
  return Value{Rational(n.reward->leader), Rational(n.reward->follower)};
}

const std::vector<Rational>& entry(const Policy& policy, const GameTree& tree,
                                   NodeId id) {
  auto it = policy.probs.find(id);
  if (it == policy.probs.end())
    throw PolicyError("no policy entry for reachable node '" + tree.node(id).id + "'");
  return it->second;
}

Value evaluate_at(const GameTree& tree, const Policy& leader, const Policy& follower,
                  NodeId id) {
  const Node& n = tree.node(id);
  if (n.is_leaf()) return leaf_value(n);
  const auto& dist = entry(n.owner == Owner::kLeader ? leader : follower, tree, id);
  Value v{0, 0};
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    if (dist.at(i) == 0) continue;
    Value c = evaluate_at(tree, leader, follower, n.children[i].child);
    v.leader += dist[i] * c.leader;
    v.follower += dist[i] * c.follower;
  }
  return v;
}

Value best_response_at(const GameTree& tree, const LeaderPolicy& leader, NodeId id,
                       FollowerPolicy& out) {
  const Node& n = tree.node(id);
  if (n.is_leaf()) return leaf_value(n);
  if (n.owner == Owner::kLeader) {
    const auto& dist = entry(leader, tree, id);
    Value v{0, 0};
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      if (dist.at(i) == 0) continue;
      Value c = best_response_at(tree, leader, n.children[i].child, out);
      v.leader += dist[i] * c.leader;
      v.follower += dist[i] * c.follower;
    }
    return v;
  }
  std::size_t best = 0;
  Value best_value;
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    Value c = best_response_at(tree, leader, n.children[i].child, out);
    if (i == 0 || c.follower > best_value.follower ||
        (c.follower == best_value.follower && c.leader > best_value.leader)) {
      best = i;
      best_value = std::move(c);
    }
  }
  out.set_pure(tree, id, best);
  return best_value;
}

}  // namespace

Value evaluate_policy(const GameTree& tree, const LeaderPolicy& leader,
                      const FollowerPolicy& follower, NodeId from) {
  return evaluate_at(tree, leader, follower, from);
}

Value evaluate_policy(const GameTree& tree, const LeaderPolicy& leader,
                      const FollowerPolicy& follower) {
  return evaluate_at(tree, leader, follower, tree.root());
}

BestResponse best_response(const GameTree& tree, const LeaderPolicy& leader) {
  BestResponse br;
  br.value = best_response_at(tree, leader, tree.root(), br.policy);
  return br;
}

std::vector<Cents> minimax_follower_values(const GameTree& tree) {
  const auto& nodes = tree.nodes();
  std::vector<Cents> value(nodes.size(), 0);
  // Iterative post-order from the root.
  std::vector<std::pair<NodeId, bool>> stack{{tree.root(), false}};
  while (!stack.empty()) {
    auto [id, expanded] = stack.back();
    stack.pop_back();
    const Node& n = nodes[id];
    if (n.is_leaf()) {
      value[id] = n.reward ? n.reward->follower : 0;
      continue;
    }
    if (!expanded) {
      stack.emplace_back(id, true);
      for (const auto& e : n.children) stack.emplace_back(e.child, false);
      continue;
    }
    Cents v = value[n.children.front().child];
    for (const auto& e : n.children)
      v = n.owner == Owner::kLeader ? std::min(v, value[e.child])
                                    : std::max(v, value[e.child]);
    value[id] = v;
  }
  return value;
}

Rational minimax_follower_value(const GameTree& tree, NodeId node) {
  if (!tree.contains(node))
    throw std::out_of_range("unknown node #" + std::to_string(node));
  const Node& n = tree.node(node);
  if (n.is_leaf()) return Rational(n.reward->follower);
  Rational best;
  bool first = true;
  for (const auto& e : n.children) {
    Rational c = minimax_follower_value(tree, e.child);
    if (first || (n.owner == Owner::kLeader ? c < best : c > best)) best = c;
    first = false;
  }
  return best;
}

void add_threat_policy(const GameTree& tree, const std::vector<Cents>& minimax,
                       NodeId node, LeaderPolicy& out) {
  std::vector<NodeId> stack{node};
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    const Node& n = tree.node(id);
    if (n.is_leaf()) continue;
    if (n.owner == Owner::kFollower) {
      for (const auto& e : n.children) stack.push_back(e.child);
      continue;
    }
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n.children.size(); ++i)
      if (minimax[n.children[i].child] < minimax[n.children[arg].child]) arg = i;
    out.set_pure(tree, id, arg);
    stack.push_back(n.children[arg].child);
  }
}

namespace {

struct RandomBuilder {
  const RandomTreeOptions& opt;
  std::mt19937_64 rng;
  GameTree tree;
  int leader_nodes = 0;
  int counter = 0;

  // Plain modulo keeps the stream identical across standard libraries.
  std::uint64_t uniform(std::uint64_t n) { return rng() % n; }

  NodeId build(int depth) {
    std::string id = "n" + std::to_string(counter++);
    bool must_stop = depth >= opt.max_depth;
    bool stop = uniform(100) < (depth == 0 ? 10u : 35u);
    if (must_stop || stop) {
      auto span = static_cast<std::uint64_t>(opt.reward_bound) + 1;
      auto a = static_cast<Cents>(uniform(span));
      auto b = static_cast<Cents>(uniform(span));
      return tree.add_leaf(std::move(id), PayoffPair{a, b});
    }
    bool leader = uniform(2) == 0;
    if (leader && opt.max_leader_nodes >= 0 && leader_nodes >= opt.max_leader_nodes)
      leader = false;
    if (leader) ++leader_nodes;
    NodeId self = tree.add_internal(std::move(id), leader ? Owner::kLeader : Owner::kFollower);
    int lo = depth == 0 && opt.branching >= 2 ? 2 : 1;
    int k = lo + static_cast<int>(uniform(static_cast<std::uint64_t>(opt.branching - lo + 1)));
    for (int i = 0; i < k; ++i) {
      NodeId child = build(depth + 1);
      tree.add_edge(self, std::string(1, static_cast<char>('a' + i)), child);
    }
    return self;
  }
};

}  // namespace

GameTree random_tree(const RandomTreeOptions& options) {
  RandomBuilder b{options, std::mt19937_64(options.seed), {}, 0, 0};
  NodeId root = b.build(0);
  b.tree.set_root(root);
  return std::move(b.tree);
}

}  // namespace stackel
