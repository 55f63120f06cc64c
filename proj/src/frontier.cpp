#include "stackel/frontier.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <unordered_map>

namespace stackel {

namespace {

struct Cand {
  Rational l;
  Rational f;
  PointSource src;
};

// Candidate segment, lo.f < hi.f.
struct Line {
  Cand lo;
  Cand hi;
  SegmentSource src;
  Rational t_lo;
  Rational t_hi;

  Rational at(const Rational& x) const {
    return lo.l + (hi.l - lo.l) * (x - lo.f) / (hi.f - lo.f);
  }
  Rational t_at(const Rational& x) const {
    return t_lo + (t_hi - t_lo) * (x - lo.f) / (hi.f - lo.f);
  }
};

struct Elements {
  std::vector<Cand> points;
  std::vector<Line> lines;
};

PointSource derive(const SegmentSource& s, const Rational& t) {
  PointSource p;
  if (s.kind == SegmentSource::Kind::kChildSegment) {
    p.kind = PointSource::Kind::kChild;
    p.a = ChildRef{s.action, Location{s.segment, true, t}};
    return p;
  }
  if (t == 0) {
    p.kind = PointSource::Kind::kChild;
    p.a = s.a;
  } else if (t == 1) {
    p.kind = PointSource::Kind::kChild;
    p.a = s.b;
  } else {
    p.kind = PointSource::Kind::kMix;
    p.a = s.a;
    p.b = s.b;
    p.weight = t;
  }
  return p;
}

Cand point_cand(const FrontierPoint& p) { return Cand{p.leader, p.follower, p.source}; }

// Elements of `f` re-expressed as references into a child reached by `action`.
void add_as_child(const Frontier& f, std::uint32_t action, Elements& out) {
  auto ref_point = [&](std::uint32_t k) {
    PointSource s;
    s.kind = PointSource::Kind::kChild;
    s.a = ChildRef{action, Location{k, false, 0}};
    return Cand{f.points[k].leader, f.points[k].follower, std::move(s)};
  };
  for (std::uint32_t k = 0; k < f.points.size(); ++k) out.points.push_back(ref_point(k));
  for (std::uint32_t k = 0; k < f.segments.size(); ++k) {
    const auto& seg = f.segments[k];
    SegmentSource src;
    src.kind = SegmentSource::Kind::kChildSegment;
    src.action = action;
    src.segment = k;
    out.lines.push_back(Line{ref_point(seg.lo), ref_point(seg.hi), src, 0, 1});
  }
}

// Elements of `f` at the same level (sources kept).
Elements same_level(const Frontier& f) {
  Elements out;
  for (const auto& p : f.points) out.points.push_back(point_cand(p));
  for (const auto& seg : f.segments)
    out.lines.push_back(Line{point_cand(f.points[seg.lo]), point_cand(f.points[seg.hi]),
                             seg.source, seg.t_lo, seg.t_hi});
  return out;
}

void clip(Elements& el, const LowerBound& bound) {
  if (!bound) return;
  const Rational& s = *bound;
  std::erase_if(el.points, [&](const Cand& c) { return c.f < s; });
  std::vector<Line> kept;
  kept.reserve(el.lines.size());
  for (auto& line : el.lines) {
    if (line.hi.f <= s) {
      // Entirely below, or touching only at the top endpoint (kept as a point).
      continue;
    }
    if (line.lo.f < s) {
      Rational t = line.t_at(s);
      line.lo = Cand{line.at(s), s, derive(line.src, t)};
      line.t_lo = std::move(t);
    }
    kept.push_back(std::move(line));
  }
  el.lines = std::move(kept);
}

// Incremental upper envelope over follower value x. Breakpoints carry the
// best value seen at x; gaps between consecutive breakpoints carry the index
// of the dominating line (or -1).
class Envelope {
 public:
  void add_point(const Cand& c) {
    std::size_t i = ensure(c.f);
    offer(i, c.l, c.src);
  }

  void add_line(Line line) {
    std::size_t i0 = ensure(line.lo.f);
    offer(i0, line.lo.l, line.lo.src);
    std::size_t i1 = ensure(line.hi.f);
    offer(i1, line.hi.l, line.hi.src);
    int li = static_cast<int>(lines_.size());
    lines_.push_back(std::move(line));
    const Line& L = lines_.back();
    for (std::size_t k = i0 + 1; k < i1; ++k) {
      Rational y = L.at(br_[k].x);
      if (y > br_[k].y) offer(k, y, derive(L.src, L.t_at(br_[k].x)));
    }
    for (std::size_t g = i0; g < i1; ++g) {
      int cur = gap_[g];
      if (cur < 0) {
        gap_[g] = li;
        continue;
      }
      const Line& C = lines_[static_cast<std::size_t>(cur)];
      const Rational& xa = br_[g].x;
      const Rational& xb = br_[g + 1].x;
      Rational d0 = L.at(xa) - C.at(xa);
      Rational d1 = L.at(xb) - C.at(xb);
      if (d0 >= 0 && d1 >= 0) {
        if (d0 > 0 || d1 > 0) gap_[g] = li;
      } else if (d0 <= 0 && d1 <= 0) {
        // existing line stays
      } else {
        Rational xs = xa + (xb - xa) * d0 / (d0 - d1);
        Rational ys = C.at(xs);
        PointSource src = derive(C.src, C.t_at(xs));
        br_.insert(br_.begin() + static_cast<std::ptrdiff_t>(g + 1),
                   Break{xs, std::move(ys), std::move(src), true});
        int left = d0 > 0 ? li : cur;
        int right = d0 > 0 ? cur : li;
        gap_[g] = left;
        gap_.insert(gap_.begin() + static_cast<std::ptrdiff_t>(g + 1), right);
        ++g;
        ++i1;
      }
    }
  }

  Frontier finish() const {
    struct Out {
      Rational f;
      Rational l;
      PointSource src;
      int rank;  // emission order, breakpoints first
    };
    std::vector<Out> pts;
    struct Run {
      std::size_t first;
      std::size_t last;  // breakpoint indices
      int line;
    };
    std::vector<Run> runs;
    std::size_t n = br_.size();
    std::vector<std::uint8_t> interior(n, 0);
    for (std::size_t g = 0; g < gap_.size();) {
      if (gap_[g] < 0) {
        ++g;
        continue;
      }
      int li = gap_[g];
      const Line& L = lines_[static_cast<std::size_t>(li)];
      std::size_t h = g;
      while (h + 1 < gap_.size() && gap_[h + 1] == li && br_[h + 1].y == L.at(br_[h + 1].x)) {
        interior[h + 1] = 1;
        ++h;
      }
      runs.push_back(Run{g, h + 1, li});
      g = h + 1;
    }
    int rank = 0;
    for (std::size_t k = 0; k < n; ++k)
      if (!interior[k]) pts.push_back(Out{br_[k].x, br_[k].y, br_[k].src, rank++});
    for (const auto& r : runs) {
      const Line& L = lines_[static_cast<std::size_t>(r.line)];
      for (std::size_t k : {r.first, r.last}) {
        Rational v = L.at(br_[k].x);
        if (v != br_[k].y) pts.push_back(Out{br_[k].x, v, derive(L.src, L.t_at(br_[k].x)), rank++});
      }
    }
    std::stable_sort(pts.begin(), pts.end(), [](const Out& a, const Out& b) {
      if (a.f != b.f) return a.f < b.f;
      return a.l < b.l;
    });
    Frontier out;
    for (auto& p : pts) {
      if (!out.points.empty() && out.points.back().follower == p.f &&
          out.points.back().leader == p.l)
        continue;
      out.points.push_back(FrontierPoint{p.l, p.f, p.src});
    }
    auto index_of = [&](const Rational& f, const Rational& l) {
      auto it = std::lower_bound(out.points.begin(), out.points.end(), std::pair(&f, &l),
                                 [](const FrontierPoint& p, const auto& key) {
                                   if (p.follower != *key.first) return p.follower < *key.first;
                                   return p.leader < *key.second;
                                 });
      return static_cast<std::uint32_t>(it - out.points.begin());
    };
    for (const auto& r : runs) {
      const Line& L = lines_[static_cast<std::size_t>(r.line)];
      const Rational& xa = br_[r.first].x;
      const Rational& xb = br_[r.last].x;
      out.segments.push_back(FrontierSegment{index_of(xa, L.at(xa)), index_of(xb, L.at(xb)),
                                             L.src, L.t_at(xa), L.t_at(xb)});
    }
    return out;
  }

 private:
  struct Break {
    Rational x;
    Rational y;
    PointSource src;
    bool has_value = false;
  };

  std::size_t ensure(const Rational& x) {
    auto it = std::lower_bound(br_.begin(), br_.end(), x,
                               [](const Break& b, const Rational& v) { return b.x < v; });
    auto pos = static_cast<std::size_t>(it - br_.begin());
    if (it != br_.end() && it->x == x) return pos;
    Break b{x, 0, {}, false};
    bool inside = pos > 0 && pos < br_.size();
    int covering = inside ? gap_[pos - 1] : -1;
    if (covering >= 0) {
      const Line& C = lines_[static_cast<std::size_t>(covering)];
      b.y = C.at(x);
      b.src = derive(C.src, C.t_at(x));
      b.has_value = true;
    }
    br_.insert(br_.begin() + static_cast<std::ptrdiff_t>(pos), std::move(b));
    if (br_.size() == 1) return pos;
    if (pos == 0) {
      gap_.insert(gap_.begin(), -1);
    } else if (pos == br_.size() - 1) {
      gap_.push_back(-1);
    } else {
      gap_.insert(gap_.begin() + static_cast<std::ptrdiff_t>(pos - 1), covering);
    }
    return pos;
  }

  void offer(std::size_t i, const Rational& y, const PointSource& src) {
    Break& b = br_[i];
    if (!b.has_value || y > b.y) {
      b.y = y;
      b.src = src;
      b.has_value = true;
    }
  }

  std::vector<Break> br_;
  std::vector<int> gap_;
  std::vector<Line> lines_;
};

Frontier envelope_of(const Elements& el) {
  Envelope env;
  for (const auto& c : el.points) env.add_point(c);
  for (const auto& line : el.lines) {
    if (line.lo.f == line.hi.f) {
      env.add_point(line.lo);
      env.add_point(line.hi);
    } else {
      env.add_line(line);
    }
  }
  return env.finish();
}

Frontier merge_leader_impl(std::span<const Frontier* const> children) {
  if (children.empty()) throw FrontierError("merge_leader needs at least one child");
  Elements el;
  for (std::uint32_t a = 0; a < children.size(); ++a) add_as_child(*children[a], a, el);
  for (std::uint32_t a = 0; a < children.size(); ++a) {
    for (std::uint32_t b = a + 1; b < children.size(); ++b) {
      const auto& pa = children[a]->points;
      const auto& pb = children[b]->points;
      for (std::uint32_t i = 0; i < pa.size(); ++i) {
        for (std::uint32_t j = 0; j < pb.size(); ++j) {
          if (pa[i].follower == pb[j].follower) continue;
          bool a_low = pa[i].follower < pb[j].follower;
          ChildRef ra{a, Location{i, false, 0}};
          ChildRef rb{b, Location{j, false, 0}};
          SegmentSource src;
          src.kind = SegmentSource::Kind::kCross;
          src.a = a_low ? ra : rb;
          src.b = a_low ? rb : ra;
          PointSource sa{PointSource::Kind::kChild, ra, {}, 0};
          PointSource sb{PointSource::Kind::kChild, rb, {}, 0};
          Cand ca{pa[i].leader, pa[i].follower, sa};
          Cand cb{pb[j].leader, pb[j].follower, sb};
          el.lines.push_back(a_low ? Line{ca, cb, src, 0, 1} : Line{cb, ca, src, 0, 1});
        }
      }
    }
  }
  return envelope_of(el);
}

Frontier merge_follower_impl(std::span<const Frontier* const> children,
                             const SigmaThresholds& sigmas) {
  Elements all;
  for (std::uint32_t a = 0; a < children.size(); ++a) {
    Elements el;
    add_as_child(*children[a], a, el);
    clip(el, sigmas.at(a));
    all.points.insert(all.points.end(), el.points.begin(), el.points.end());
    all.lines.insert(all.lines.end(), el.lines.begin(), el.lines.end());
  }
  return envelope_of(all);
}

Frontier node_frontier(const GameTree& tree, NodeId id, const std::vector<Cents>& minimax,
                       const std::function<const Frontier&(NodeId)>& child) {
  const Node& n = tree.node(id);
  if (n.is_leaf()) return leaf_frontier(*n.reward);
  std::vector<const Frontier*> kids;
  kids.reserve(n.children.size());
  for (const auto& e : n.children) kids.push_back(&child(e.child));
  if (n.owner == Owner::kLeader) return merge_leader_impl(kids);
  return merge_follower_impl(kids, sigma_thresholds(tree, id, minimax));
}

// Post-order solve of the subtree at `start`. Frontiers at depth greater than
// `keep_depth` are released once their parent has consumed them.
void solve_into(const GameTree& tree, NodeId start, const std::vector<Cents>& minimax,
                std::vector<std::optional<Frontier>>& store, int keep_depth, SolveStats* stats) {
  struct Item {
    NodeId id;
    int depth;
    bool expanded;
  };
  std::vector<Item> stack{{start, 0, false}};
  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    const Node& n = tree.node(it.id);
    if (!it.expanded && !n.is_leaf()) {
      stack.push_back({it.id, it.depth, true});
      for (auto c = n.children.rbegin(); c != n.children.rend(); ++c)
        stack.push_back({c->child, it.depth + 1, false});
      continue;
    }
    Frontier f = node_frontier(tree, it.id, minimax,
                               [&](NodeId c) -> const Frontier& { return *store[c]; });
    if (stats) {
      ++stats->nodes;
      stats->max_points = std::max(stats->max_points, f.points.size());
      if (stats->max_segments_node == kNoNode || f.segments.size() > stats->max_segments) {
        stats->max_segments = f.segments.size();
        stats->max_segments_node = it.id;
      }
    }
    store[it.id] = std::move(f);
    if (it.depth + 1 > keep_depth)
      for (const auto& e : n.children) store[e.child].reset();
  }
}

}  // namespace

Value Frontier::at(const Location& loc) const {
  if (!loc.on_segment) {
    const auto& p = points.at(loc.element);
    return Value{p.leader, p.follower};
  }
  const auto& s = segments.at(loc.element);
  const auto& lo = points.at(s.lo);
  const auto& hi = points.at(s.hi);
  return Value{lo.leader + loc.lambda * (hi.leader - lo.leader),
               lo.follower + loc.lambda * (hi.follower - lo.follower)};
}

Frontier leaf_frontier(const PayoffPair& reward) {
  Frontier f;
  f.points.push_back(FrontierPoint{Rational(reward.leader), Rational(reward.follower), {}});
  return f;
}

Frontier merge_leader(std::span<const Frontier> children) {
  std::vector<const Frontier*> ptrs;
  for (const auto& c : children) ptrs.push_back(&c);
  return merge_leader_impl(ptrs);
}

SigmaThresholds sigma_thresholds(const GameTree& tree, NodeId node,
                                 const std::vector<Cents>& minimax) {
  const Node& n = tree.node(node);
  SigmaThresholds out(n.children.size());
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    std::optional<Cents> best;
    for (std::size_t j = 0; j < n.children.size(); ++j) {
      if (j == i) continue;
      Cents v = minimax[n.children[j].child];
      if (!best || v > *best) best = v;
    }
    if (best) out[i] = Rational(*best);
  }
  return out;
}

SigmaThresholds sigma_thresholds(const GameTree& tree, NodeId node) {
  return sigma_thresholds(tree, node, minimax_follower_values(tree));
}

Frontier clip_frontier(const Frontier& f, const LowerBound& min_follower) {
  Elements el = same_level(f);
  clip(el, min_follower);
  return envelope_of(el);
}

Frontier merge_follower(std::span<const Frontier> children, const SigmaThresholds& sigmas) {
  if (sigmas.size() != children.size())
    throw FrontierError("one sigma threshold per child is required");
  std::vector<const Frontier*> ptrs;
  for (const auto& c : children) ptrs.push_back(&c);
  return merge_follower_impl(ptrs, sigmas);
}

Frontier prune_envelope(const Frontier& f) { return envelope_of(same_level(f)); }

FrontierSolution::FrontierSolution(const GameTree& tree,
                                   std::vector<std::optional<Frontier>> frontiers,
                                   std::vector<Cents> minimax, SolveStats stats)
    : tree_(&tree),
      frontiers_(std::move(frontiers)),
      minimax_(std::move(minimax)),
      stats_(stats) {}

const Frontier& FrontierSolution::root() const { return *frontiers_.at(tree_->root()); }

const Frontier* FrontierSolution::find(NodeId node) const {
  if (node >= frontiers_.size() || !frontiers_[node]) return nullptr;
  return &*frontiers_[node];
}

FrontierSolution solve_frontier(const GameTree& tree, SolveOptions options) {
  auto report = validate_tree(tree);
  if (!report.ok()) throw FrontierError("invalid tree: " + report.errors.front());
  std::vector<Cents> minimax = minimax_follower_values(tree);
  std::vector<std::optional<Frontier>> store(tree.size());
  SolveStats stats;
  int keep = options.retain_all ? std::numeric_limits<int>::max() : options.retain_depth;
  solve_into(tree, tree.root(), minimax, store, keep, &stats);
  return FrontierSolution(tree, std::move(store), std::move(minimax), stats);
}

Frontier solve_subtree(const GameTree& tree, NodeId node, const std::vector<Cents>& minimax) {
  std::vector<std::optional<Frontier>> store(tree.size());
  solve_into(tree, node, minimax, store, 0, nullptr);
  return std::move(*store[node]);
}

namespace {

// Keeps the first best candidate: higher leader, then higher follower.
struct Best {
  std::optional<TargetPoint> target;

  void offer(const Rational& l, const Rational& f, const Location& loc) {
    if (!target || l > target->leader || (l == target->leader && f > target->follower))
      target = TargetPoint{l, f, loc};
  }
};

}  // namespace

TargetPoint extract_equilibrium(const Frontier& root) {
  return extract_punishment(root, PunishmentQuery::unbounded());
}

TargetPoint extract_punishment(const Frontier& root, const PunishmentQuery& q) {
  if (root.empty()) throw FrontierError("empty frontier");
  Best best;
  for (std::uint32_t k = 0; k < root.points.size(); ++k) {
    const auto& p = root.points[k];
    if (!q.theta || p.follower <= *q.theta) best.offer(p.leader, p.follower, Location{k, false, 0});
  }
  if (q.theta) {
    const Rational& theta = *q.theta;
    for (std::uint32_t k = 0; k < root.segments.size(); ++k) {
      const auto& s = root.segments[k];
      const auto& lo = root.points[s.lo];
      const auto& hi = root.points[s.hi];
      if (lo.follower < theta && theta < hi.follower) {
        Rational lambda = (theta - lo.follower) / (hi.follower - lo.follower);
        Rational l = lo.leader + lambda * (hi.leader - lo.leader);
        best.offer(l, theta, Location{k, true, lambda});
      }
    }
  }
  if (!best.target) {
    throw InfeasibleCap("no frontier element has follower value <= " +
                        (q.theta ? to_string(*q.theta) : std::string("inf")));
  }
  return *best.target;
}

namespace {

struct Unroller {
  const FrontierSolution& sol;
  LeaderPolicy policy;
  std::unordered_map<NodeId, Frontier> cache;

  const Frontier& frontier(NodeId id) {
    if (const Frontier* f = sol.find(id)) return *f;
    auto it = cache.find(id);
    if (it != cache.end()) return it->second;
    return cache.emplace(id, solve_subtree(sol.tree(), id, sol.minimax())).first->second;
  }

  void descend(NodeId id, const Location& loc) {
    const GameTree& tree = sol.tree();
    const Node& n = tree.node(id);
    if (n.is_leaf()) return;
    std::vector<std::pair<ChildRef, Rational>> parts;
    {
      const Frontier& f = frontier(id);
      if (!loc.on_segment) {
        const auto& src = f.points.at(loc.element).source;
        switch (src.kind) {
          case PointSource::Kind::kLeaf:
            throw FrontierError("leaf provenance at internal node '" + n.id + "'");
          case PointSource::Kind::kChild:
            parts.emplace_back(src.a, 1);
            break;
          case PointSource::Kind::kMix:
            parts.emplace_back(src.a, 1 - src.weight);
            parts.emplace_back(src.b, src.weight);
            break;
        }
      } else {
        const auto& seg = f.segments.at(loc.element);
        Rational t = seg.t_lo + loc.lambda * (seg.t_hi - seg.t_lo);
        if (seg.source.kind == SegmentSource::Kind::kChildSegment) {
          parts.emplace_back(ChildRef{seg.source.action, Location{seg.source.segment, true, t}},
                             1);
        } else if (t == 0) {
          parts.emplace_back(seg.source.a, 1);
        } else if (t == 1) {
          parts.emplace_back(seg.source.b, 1);
        } else {
          parts.emplace_back(seg.source.a, 1 - t);
          parts.emplace_back(seg.source.b, t);
        }
      }
    }
    cache.erase(id);
    if (n.owner == Owner::kLeader) {
      std::vector<Rational> probs(n.children.size(), Rational(0));
      for (const auto& [ref, w] : parts) probs.at(ref.action) += w;
      policy.probs[id] = std::move(probs);
      for (const auto& [ref, w] : parts) descend(n.children[ref.action].child, ref.at);
      return;
    }
    if (parts.size() != 1) throw FrontierError("mixed provenance at follower node '" + n.id + "'");
    const ChildRef& ref = parts.front().first;
    for (std::uint32_t i = 0; i < n.children.size(); ++i)
      if (i != ref.action) add_threat_policy(tree, sol.minimax(), n.children[i].child, policy);
    descend(n.children[ref.action].child, ref.at);
  }
};

}  // namespace

LeaderPolicy unroll_policy(const FrontierSolution& solution, const TargetPoint& target) {
  const Frontier& root = solution.root();
  Value v;
  try {
    v = root.at(target.support);
  } catch (const std::out_of_range&) {
    throw FrontierError("target support is not an element of the root frontier");
  }
  if (v.leader != target.leader || v.follower != target.follower)
    throw FrontierError("target " + to_string(Value{target.leader, target.follower}) +
                        " does not lie on the root frontier element");
  Unroller u{solution, {}, {}};
  u.descend(solution.tree().root(), target.support);
  return std::move(u.policy);
}

std::optional<Rational> envelope_value(const Frontier& f, const Rational& x) {
  std::optional<Rational> best;
  auto offer = [&](const Rational& v) {
    if (!best || v > *best) best = v;
  };
  for (const auto& p : f.points)
    if (p.follower == x) offer(p.leader);
  for (const auto& s : f.segments) {
    const auto& lo = f.points[s.lo];
    const auto& hi = f.points[s.hi];
    if (lo.follower <= x && x <= hi.follower)
      offer(lo.leader + (hi.leader - lo.leader) * (x - lo.follower) / (hi.follower - lo.follower));
  }
  return best;
}

}  // namespace stackel
