#include "stackel/oracle.hpp"

#include <algorithm>
#include <cstdlib>

namespace stackel {

namespace {

std::vector<NodeId> leader_nodes(const GameTree& tree) {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < tree.size(); ++i)
    if (tree.node(i).owner == Owner::kLeader) out.push_back(i);
  return out;
}

bool feasible(const Rational& f, const std::optional<Rational>& theta) {
  return !theta || f <= *theta;
}

bool better(const Rational& l, const Rational& f, const OracleResult& cur) {
  return l > cur.best_leader_value || (l == cur.best_leader_value && f > cur.follower_value);
}

std::string cap_text(const std::optional<Rational>& theta) {
  return theta ? to_string(*theta) : std::string("inf");
}

struct Scaled {
  std::int64_t l = 0;
  std::int64_t f = 0;
  std::uint32_t back = 0;  // offset into the node's backpointer array
};

// Follower preference order: higher f, then higher l.
bool follower_prefers(const Scaled& a, const Scaled& b) {
  return a.f != b.f ? a.f > b.f : a.l > b.l;
}

struct GridNode {
  std::vector<Scaled> best;  // max leader per follower value, sorted by f
  Scaled lexmin;             // follower-least-preferred outcome
  std::uint32_t threat = 0;  // leader nodes: child played in the lexmin
  // Leader: [composition, outcome index per support child]; follower: [child, index].
  std::vector<std::uint32_t> backs;
};

void compositions(std::size_t parts, long total, std::vector<long>& cur,
                  std::vector<std::vector<long>>& out) {
  if (cur.size() + 1 == parts) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (long k = 0; k <= total; ++k) {
    cur.push_back(k);
    compositions(parts, total - k, cur, out);
    cur.pop_back();
  }
}

void reduce(std::vector<Scaled>& xs) {
  std::stable_sort(xs.begin(), xs.end(), [](const Scaled& a, const Scaled& b) {
    return a.f != b.f ? a.f < b.f : a.l > b.l;
  });
  auto last = std::unique(xs.begin(), xs.end(),
                          [](const Scaled& a, const Scaled& b) { return a.f == b.f; });
  xs.erase(last, xs.end());
}

}  // namespace

struct GridOracle::Impl {
  const GameTree* tree = nullptr;
  long denom = 1;
  std::int64_t scale = 1;
  std::vector<std::vector<long>> comps2, comps3;
  std::vector<GridNode> nodes;
  std::size_t budget = 0;
  std::size_t used = 0;

  void spend(std::size_t work) {
    used += work;
    if (used > budget)
      throw OracleBudgetExceeded("grid search exceeded its work budget of " +
                                 std::to_string(budget));
  }

  const std::vector<std::vector<long>>& comps(std::size_t k) {
    auto& slot = k == 2 ? comps2 : comps3;
    if (slot.empty()) {
      std::vector<long> cur;
      compositions(k, denom, cur, slot);
    }
    return slot;
  }

  void solve() {
    nodes.assign(tree->size(), {});
    std::vector<std::pair<NodeId, bool>> stack{{tree->root(), false}};
    while (!stack.empty()) {
      auto [id, expanded] = stack.back();
      stack.pop_back();
      const Node& n = tree->node(id);
      if (!expanded && !n.is_leaf()) {
        stack.emplace_back(id, true);
        for (const auto& e : n.children) stack.emplace_back(e.child, false);
        continue;
      }
      if (n.is_leaf()) {
        Scaled s{n.reward->leader * scale, n.reward->follower * scale, 0};
        nodes[id].best = {s};
        nodes[id].lexmin = s;
      } else if (n.owner == Owner::kLeader) {
        leader(id, n);
      } else {
        follower(id, n);
      }
    }
  }

  // Keeps only the backpointers of surviving outcomes.
  template <class Len>
  static void compact(GridNode& out, std::vector<Scaled>& kept, Len len) {
    std::vector<std::uint32_t> backs;
    for (auto& o : kept) {
      const std::uint32_t* b = &out.backs[o.back];
      o.back = static_cast<std::uint32_t>(backs.size());
      backs.insert(backs.end(), b, b + len(b));
    }
    out.backs = std::move(backs);
    out.best = std::move(kept);
  }

  void leader(NodeId id, const Node& n) {
    GridNode& out = nodes[id];
    std::vector<const GridNode*> kids;
    for (const auto& e : n.children) kids.push_back(&nodes[e.child]);
    std::vector<std::vector<long>> single;
    const auto& cs = kids.size() == 1 ? (single = {{denom}}) : comps(kids.size());
    std::vector<Scaled> all;
    for (std::uint32_t ci = 0; ci < cs.size(); ++ci) {
      const auto& c = cs[ci];
      std::vector<std::uint32_t> support;
      std::size_t work = 1;
      for (std::uint32_t i = 0; i < c.size(); ++i)
        if (c[i] > 0) {
          support.push_back(i);
          work *= kids[i]->best.size();
        }
      spend(work);
      std::vector<std::uint32_t> idx(support.size(), 0);
      while (true) {
        std::int64_t l = 0, f = 0;
        for (std::size_t s = 0; s < support.size(); ++s) {
          const Scaled& o = kids[support[s]]->best[idx[s]];
          l += c[support[s]] * o.l;
          f += c[support[s]] * o.f;
        }
        auto back = static_cast<std::uint32_t>(out.backs.size());
        out.backs.push_back(ci);
        out.backs.insert(out.backs.end(), idx.begin(), idx.end());
        all.push_back(Scaled{l / denom, f / denom, back});
        std::size_t s = 0;
        while (s < support.size() && ++idx[s] == kids[support[s]]->best.size()) idx[s++] = 0;
        if (s == support.size()) break;
      }
    }
    reduce(all);
    compact(out, all, [&](const std::uint32_t* b) {
      std::size_t len = 1;
      for (long w : cs[b[0]]) len += w > 0;
      return len;
    });
    std::uint32_t worst = 0;
    for (std::uint32_t i = 1; i < kids.size(); ++i)
      if (follower_prefers(kids[worst]->lexmin, kids[i]->lexmin)) worst = i;
    out.threat = worst;
    out.lexmin = kids[worst]->lexmin;
  }

  void follower(NodeId id, const Node& n) {
    GridNode& out = nodes[id];
    std::vector<const GridNode*> kids;
    for (const auto& e : n.children) kids.push_back(&nodes[e.child]);
    std::vector<Scaled> all;
    for (std::uint32_t a = 0; a < kids.size(); ++a) {
      spend(kids[a]->best.size());
      for (std::uint32_t k = 0; k < kids[a]->best.size(); ++k) {
        const Scaled& o = kids[a]->best[k];
        bool chosen = true;
        for (std::uint32_t j = 0; j < kids.size() && chosen; ++j) {
          if (j == a) continue;
          const Scaled& m = kids[j]->lexmin;
          bool tie = o.f == m.f && o.l == m.l;
          if (tie ? j < a : !follower_prefers(o, m)) chosen = false;
        }
        if (!chosen) continue;
        auto back = static_cast<std::uint32_t>(out.backs.size());
        out.backs.push_back(a);
        out.backs.push_back(k);
        all.push_back(Scaled{o.l, o.f, back});
      }
    }
    reduce(all);
    compact(out, all, [](const std::uint32_t*) { return std::size_t{2}; });
    std::uint32_t pick = 0;
    for (std::uint32_t j = 1; j < kids.size(); ++j)
      if (follower_prefers(kids[j]->lexmin, kids[pick]->lexmin)) pick = j;
    out.lexmin = kids[pick]->lexmin;
  }

  void threat(NodeId id, LeaderPolicy& out) const {
    const Node& n = tree->node(id);
    if (n.is_leaf()) return;
    if (n.owner == Owner::kLeader) {
      out.set_pure(*tree, id, nodes[id].threat);
      threat(n.children[nodes[id].threat].child, out);
      return;
    }
    for (const auto& e : n.children) threat(e.child, out);
  }

  void realize(NodeId id, std::uint32_t index, LeaderPolicy& out) const {
    const Node& n = tree->node(id);
    if (n.is_leaf()) return;
    const GridNode& g = nodes[id];
    const std::uint32_t* b = &g.backs[g.best[index].back];
    if (n.owner == Owner::kLeader) {
      const auto& c = (n.children.size() == 2 ? comps2 : comps3);
      std::vector<long> comp = n.children.size() == 1 ? std::vector<long>{denom} : c[b[0]];
      std::vector<Rational> probs(n.children.size(), Rational(0));
      std::size_t s = 1;
      for (std::uint32_t i = 0; i < comp.size(); ++i) {
        if (comp[i] == 0) continue;
        probs[i] = Rational(comp[i], denom);
        realize(n.children[i].child, b[s++], out);
      }
      out.probs[id] = std::move(probs);
      return;
    }
    std::uint32_t a = b[0];
    for (std::uint32_t j = 0; j < n.children.size(); ++j) {
      if (j == a)
        realize(n.children[j].child, b[1], out);
      else
        threat(n.children[j].child, out);
    }
  }
};

namespace {
}  // namespace

OracleResult enumerate_pure_leader(const GameTree& tree, const std::optional<Rational>& theta,
                                   const OracleLimits& limits) {
  auto leaders = leader_nodes(tree);
  if (leaders.size() > limits.max_leader_nodes_pure)
    throw OracleBudgetExceeded("pure enumeration supports at most " +
                               std::to_string(limits.max_leader_nodes_pure) + " leader nodes");
  std::size_t count = 1;
  for (NodeId id : leaders) {
    count *= tree.node(id).children.size();
    if (count > limits.max_pure_policies)
      throw OracleBudgetExceeded("too many pure leader policies");
  }
  std::optional<OracleResult> best;
  std::vector<std::size_t> idx(leaders.size(), 0);
  while (true) {
    LeaderPolicy p;
    for (std::size_t k = 0; k < leaders.size(); ++k) p.set_pure(tree, leaders[k], idx[k]);
    Value v = best_response(tree, p).value;
    if (feasible(v.follower, theta) && (!best || better(v.leader, v.follower, *best)))
      best = OracleResult{v.leader, v.follower, std::move(p), OracleMethod::kPureEnumeration};
    std::size_t k = 0;
    while (k < leaders.size() && ++idx[k] == tree.node(leaders[k]).children.size()) idx[k++] = 0;
    if (k == leaders.size()) break;
  }
  if (!best) throw InfeasibleCap("no pure leader policy has follower value <= " + cap_text(theta));
  return std::move(*best);
}

GridOracle::GridOracle(const GameTree& tree, const Rational& step, const OracleLimits& limits)
    : impl_(std::make_unique<Impl>()) {
  using boost::multiprecision::denominator;
  using boost::multiprecision::numerator;
  if (step <= 0 || step > 1 || numerator(step) != 1)
    throw std::invalid_argument("grid step must be a unit fraction");
  auto leaders = leader_nodes(tree);
  if (leaders.size() > limits.max_leader_nodes_grid)
    throw OracleBudgetExceeded("grid search supports at most " +
                               std::to_string(limits.max_leader_nodes_grid) + " leader nodes");
  for (NodeId id : leaders)
    if (tree.node(id).children.size() > limits.max_branching_grid)
      throw OracleBudgetExceeded("grid search supports branching at most " +
                                 std::to_string(limits.max_branching_grid));
  Impl& m = *impl_;
  m.tree = &tree;
  m.denom = static_cast<long>(denominator(step));
  m.budget = limits.max_grid_work;
  Cents bound = 1;
  for (const auto& n : tree.nodes())
    if (n.reward) bound = std::max({bound, std::abs(n.reward->leader), std::abs(n.reward->follower)});
  // Room for one more factor of denom while mixing, and for summing.
  long double room = static_cast<long double>(bound) * m.denom * 4;
  for (std::size_t k = 0; k < leaders.size(); ++k) {
    m.scale *= m.denom;
    room *= m.denom;
  }
  if (room > 9e18L) throw OracleBudgetExceeded("grid values would overflow 64-bit integers");
  m.solve();
}

GridOracle::~GridOracle() = default;
GridOracle::GridOracle(GridOracle&&) noexcept = default;

std::size_t GridOracle::outcome_count() const {
  return impl_->nodes[impl_->tree->root()].best.size();
}

OracleResult GridOracle::query(const std::optional<Rational>& theta) const {
  const Impl& m = *impl_;
  const GridNode& root = m.nodes[m.tree->root()];
  std::optional<std::uint32_t> best;
  for (std::uint32_t k = 0; k < root.best.size(); ++k) {
    const Scaled& o = root.best[k];
    if (theta && Rational(o.f) > *theta * m.scale) continue;
    if (!best || o.l > root.best[*best].l || (o.l == root.best[*best].l && o.f > root.best[*best].f))
      best = k;
  }
  if (!best) throw InfeasibleCap("no grid leader policy has follower value <= " + cap_text(theta));
  const Scaled& o = root.best[*best];
  OracleResult r{Rational(o.l) / m.scale, Rational(o.f) / m.scale, {}, OracleMethod::kGrid};
  m.realize(m.tree->root(), *best, r.witness_policy);
  return r;
}

OracleResult grid_search_leader(const GameTree& tree, const Rational& step,
                                const std::optional<Rational>& theta, const OracleLimits& limits) {
  return GridOracle(tree, step, limits).query(theta);
}

bool verify_point(const GameTree& tree, const LeaderPolicy& policy, const TargetPoint& expected) {
  try {
    Value v = best_response(tree, policy).value;
    return v.leader == expected.leader && v.follower == expected.follower;
  } catch (const PolicyError&) {
    return false;
  }
}

}  // namespace stackel
