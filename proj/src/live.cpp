#include "stackel/live.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace stackel::bridge {

const char* to_string(Mode m) {
  return m == Mode::kCooperative ? "cooperative" : "punishing";
}

std::optional<Mode> parse_mode(const std::string& text) {
  if (text == "cooperative") return Mode::kCooperative;
  if (text == "punishing") return Mode::kPunishing;
  return std::nullopt;
}

const char* to_string(BullyCondition c) {
  return c == BullyCondition::kForcedBackoff ? "forced_backoff" : "blocked";
}

Step cautious_policy(const LiveState& s, const Track& track, Mover right) {
  if (track.finished(s.sdc_cell)) return Step::kStay;
  if (right == Mover::kHuman) {
    if (track.finished(s.human_cell)) return Step::kForward;
    return s.sdc_cell < track.entrance() ? Step::kForward : Step::kStay;
  }
  if (track.on_bridge(s.human_cell))
    return track.on_bridge(s.sdc_cell) ? Step::kBackward : Step::kStay;
  return Step::kForward;
}

bool being_bullied_now(const LiveState& s, const Track& track, Mover right) {
  return right == Mover::kSdc && track.on_bridge(s.human_cell) && !track.finished(s.sdc_cell);
}

bool horn_signal(Mode mode, const LiveState&, bool bullied_now) {
  return mode == Mode::kPunishing || bullied_now;
}

Cents episode_reward(const std::optional<double>& finish_time_s, const BridgeConfig& cfg) {
  if (!finish_time_s) return 0;
  auto steps = static_cast<Cents>(std::floor(*finish_time_s / cfg.seconds_per_step + 1e-9));
  return std::max<Cents>(0, cfg.base_reward - cfg.per_step_cost * steps);
}

// ---------------------------------------------------------------------------
// Punishment plan

PunishmentPlan::PunishmentPlan(std::vector<PlanNode> nodes, Cents theta, TargetPoint target)
    : nodes_(std::move(nodes)), theta_(theta), target_(std::move(target)) {
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
    const PlanNode& n = nodes_[i];
    if (n.owner != Owner::kLeader) continue;
    index_.try_emplace({n.at.sdc, n.at.human, n.at.round}, i);
  }
}

PunishmentPlan PunishmentPlan::from_policy(const BridgeTree& bt, const LeaderPolicy& policy,
                                           Cents theta, TargetPoint target) {
  const GameTree& t = bt.tree;
  std::vector<PlanNode> nodes;
  std::unordered_map<NodeId, std::uint32_t> slot;
  std::set<std::tuple<Pos, Pos, int>> covered;
  // Breadth first, so the index prefers nodes near the root.
  auto close = [&](NodeId from, const LeaderPolicy& pol) {
    if (!slot.try_emplace(from, static_cast<std::uint32_t>(nodes.size())).second) return;
    nodes.emplace_back();
    std::deque<NodeId> queue{from};
    while (!queue.empty()) {
      NodeId id = queue.front();
      queue.pop_front();
      const Node& n = t.node(id);
      PlanNode pn;
      pn.at = bt.info[id];
      pn.owner = n.owner;
      if (n.is_leaf()) {
        pn.payoff = *n.reward;
      } else {
        const std::vector<Rational>* probs = nullptr;
        if (n.owner == Owner::kLeader) {
          auto it = pol.probs.find(id);
          if (it == pol.probs.end())
            throw std::logic_error("punishment policy does not cover node " + n.id);
          probs = &it->second;
          covered.insert({pn.at.sdc, pn.at.human, pn.at.round});
        }
        for (std::size_t i = 0; i < n.children.size(); ++i) {
          Rational p = probs ? (*probs)[i] : Rational(0);
          if (probs && p == 0) continue;
          NodeId c = n.children[i].child;
          auto [it, fresh] = slot.try_emplace(c, static_cast<std::uint32_t>(nodes.size()));
          if (fresh) {
            nodes.emplace_back();
            queue.push_back(c);
          }
          auto step = label_step(n.children[i].action);
          if (!step) throw std::logic_error("unknown action label " + n.children[i].action);
          pn.edges.push_back({*step, it->second, std::move(p)});
        }
      }
      nodes[slot.at(id)] = std::move(pn);
    }
  };
  close(t.root(), policy);

  // Live timing can produce arrangements the policy never reaches; for those
  // the SDC falls back to the minimax threat from the shallowest such node.
  std::vector<NodeId> extra;
  {
    std::deque<NodeId> queue{t.root()};
    while (!queue.empty()) {
      NodeId id = queue.front();
      queue.pop_front();
      const Node& n = t.node(id);
      if (n.owner == Owner::kLeader) {
        const auto& a = bt.info[id];
        if (covered.insert({a.sdc, a.human, a.round}).second) extra.push_back(id);
      }
      for (const auto& e : n.children) queue.push_back(e.child);
    }
  }
  if (!extra.empty()) {
    std::vector<Cents> minimax = minimax_follower_values(t);
    for (NodeId id : extra) {
      if (slot.count(id)) continue;
      LeaderPolicy threat;
      add_threat_policy(t, minimax, id, threat);
      close(id, threat);
    }
  }
  return PunishmentPlan(std::move(nodes), theta, std::move(target));
}

PunishmentPlan PunishmentPlan::build(const BridgeConfig& cfg) {
  LeaderPolicy policy;
  TargetPoint target;
  BridgeTree bt = build_bridge_tree(cfg);
  {
    SolveOptions opts;
    opts.retain_all = false;
    opts.retain_depth = 12;
    FrontierSolution sol = solve_frontier(bt.tree, opts);
    target = extract_punishment(sol.root(), PunishmentQuery::cap(Rational(cfg.theta)));
    policy = unroll_policy(sol, target);
  }
  return from_policy(bt, policy, cfg.theta, std::move(target));
}

std::optional<std::uint32_t> PunishmentPlan::lookup(Pos sdc, Pos human, int round) const {
  for (int r = std::max(round, 0); r <= 255; ++r) {
    auto it = index_.find({sdc, human, r});
    if (it != index_.end()) return it->second;
  }
  for (int r = std::min(round, 256) - 1; r >= 0; --r) {
    auto it = index_.find({sdc, human, r});
    if (it != index_.end()) return it->second;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Punishing controller

PunishingController::PunishingController(std::shared_ptr<const PunishmentPlan> plan,
                                         const BridgeConfig& cfg)
    : plan_(std::move(plan)),
      track_(Track::from(cfg)),
      ticks_per_step_(cfg.seconds_per_step * 1000 / cfg.tick_ms) {
  if (!plan_ || plan_->nodes().empty()) throw std::invalid_argument("empty punishment plan");
}

void PunishingController::decide(const LiveState& s, std::mt19937_64& rng) {
  Pos sp = track_.abstract(s.sdc_cell);
  Pos hp = track_.abstract(s.human_cell);
  const auto& nodes = plan_->nodes();
  auto matches = [&](std::uint32_t i) {
    const PlanNode& n = nodes[i];
    return n.owner == Owner::kLeader && n.at.sdc == sp && n.at.human == hp;
  };
  std::optional<std::uint32_t> at;
  if (!cursor_) {
    if (matches(plan_->root())) at = plan_->root();
  } else if (nodes[*cursor_].owner == Owner::kFollower) {
    for (const auto& e : nodes[*cursor_].edges)
      if (matches(e.child)) at = e.child;
  }
  if (!at) at = plan_->lookup(sp, hp, round_);
  if (!at) {
    std::ostringstream os;
    os << "live state sdc=" << to_string(sp) << " human=" << to_string(hp) << " round " << round_
       << " has no counterpart in the punishment plan";
    throw std::logic_error(os.str());
  }
  const auto& edges = nodes[*at].edges;
  std::size_t pick = 0;
  bool pure = false;
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (edges[i].prob == 1) {
      pick = i;
      pure = true;
    }
  if (!pure) {
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    pick = edges.size() - 1;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      acc += to_double(edges[i].prob);
      if (u < acc) {
        pick = i;
        break;
      }
    }
    samples_.push_back({s.tick, round_, action_label(Mover::kSdc, edges[pick].step), u});
  }
  step_ = edges[pick].step;
  // Advancing past a car on the bridge is a crash in the abstract game; live
  // play cannot crash, so the threat means holding the bridge.
  if (step_ == Step::kForward && sp == Pos::kOnBridge && hp == Pos::kOnBridge) step_ = Step::kStay;
  if (step_ == Step::kForward) {
    target_ = sp == Pos::kOnBridge ? Pos::kFinish : Pos::kOnBridge;
    if (target_ == Pos::kFinish) finishing_ = true;
  }
  cursor_ = edges[pick].child;
  ++round_;
}

std::vector<std::int64_t> PunishingController::key() const {
  return {started_,     finishing_, round_, next_decision_, step_tick_, static_cast<int>(step_),
          static_cast<int>(target_), cursor_ ? static_cast<std::int64_t>(*cursor_) : -1};
}

Step PunishingController::act(const LiveState& s, std::mt19937_64& rng) {
  if (track_.finished(s.sdc_cell)) return Step::kStay;
  if (finishing_) return Step::kForward;
  if (track_.finished(s.human_cell)) {
    finishing_ = true;
    return Step::kForward;
  }
  if (!started_) {
    if (s.sdc_cell < track_.entrance()) return Step::kForward;
    started_ = true;
    next_decision_ = s.tick;
  }
  if (s.tick >= next_decision_) {
    decide(s, rng);
    next_decision_ = s.tick + ticks_per_step_;
    step_tick_ = s.tick;
    if (finishing_) return Step::kForward;
  }
  switch (step_) {
    case Step::kForward:
      return track_.abstract(s.sdc_cell) < target_ ? Step::kForward : Step::kStay;
    case Step::kBackward:
      return track_.on_bridge(s.sdc_cell) ? Step::kBackward : Step::kStay;
    case Step::kStay:
      // Creep forward once per step, stopping short of the last bridge cell.
      if (track_.on_bridge(s.sdc_cell) && s.tick == step_tick_ &&
          s.sdc_cell + 1 <= track_.finish() - 2)
        return Step::kForward;
      return Step::kStay;
  }
  return Step::kStay;
}

// ---------------------------------------------------------------------------
// Episodes

BullyVerdict detect_bully(const EpisodeRecord& ep, const BridgeConfig& cfg) {
  Track track = Track::from(cfg);
  BullyVerdict v;
  if (ep.start == StartAssignment::kSdcClose && ep.human_finish_s) {
    bool backed_off = false;
    for (const auto& t : ep.ticks)
      if (t.sdc_action == Step::kBackward && track.on_bridge(t.sdc_cell + 1)) backed_off = true;
    bool human_first = !ep.sdc_finish_s || *ep.human_finish_s < *ep.sdc_finish_s;
    if (backed_off && human_first) {
      v.bullied = true;
      v.condition = BullyCondition::kForcedBackoff;
      return v;
    }
  }
  // A punishing SDC that holds a standoff is blocking by its own choice.
  if (ep.mode == Mode::kCooperative && (!ep.sdc_finish_s || *ep.sdc_finish_s > cfg.round_limit_s)) {
    v.bullied = true;
    v.condition = BullyCondition::kBlocked;
  }
  return v;
}

Mode next_mode(Mode, const BullyVerdict& verdict) {
  return verdict.bullied ? Mode::kPunishing : Mode::kCooperative;
}

Episode::Episode(const BridgeConfig& cfg, std::shared_ptr<const PunishmentPlan> plan, Mode mode,
                 StartAssignment start, int index, std::uint64_t seed)
    : cfg_(cfg), track_(Track::from(cfg)), rng_(seed) {
  auto errs = cfg.validate();
  if (!errs.empty()) throw std::invalid_argument("bad bridge config: " + errs.front());
  bool sdc_close = start == StartAssignment::kSdcClose;
  state_.sdc_cell = sdc_close ? cfg.close_start : cfg.far_start;
  state_.human_cell = sdc_close ? cfg.far_start : cfg.close_start;
  state_.mode = mode;
  state_.horn = mode == Mode::kPunishing;
  record_.episode_index = index;
  record_.start = start;
  record_.mode = mode;
  record_.rng_seed = seed;
  if (mode == Mode::kPunishing) punisher_.emplace(std::move(plan), cfg);
}

int Episode::total_ticks() const { return cfg_.round_limit_s * 1000 / cfg_.tick_ms; }

Step Episode::sdc_action() {
  if (punisher_) return punisher_->act(state_, rng_);
  return cautious_policy(state_, track_, right_of_way(record_.start));
}

namespace {

int advance(const Track& track, int p, Step s) {
  if (track.finished(p)) return p;
  if (s == Step::kForward) return p + 1;
  if (s == Step::kBackward) return std::max(0, p - 1);
  return p;
}

}  // namespace

const TickRecord& Episode::step(Step human) {
  if (done_) throw std::logic_error("episode already finished");
  TickRecord rec;
  rec.tick = state_.tick;
  Step sdc = sdc_action();
  int ns = advance(track_, state_.sdc_cell, sdc);
  if (ns == state_.sdc_cell || track_.conflict(ns, state_.human_cell)) {
    sdc = Step::kStay;
    ns = state_.sdc_cell;
  }
  state_.sdc_cell = ns;
  int nh = advance(track_, state_.human_cell, human);
  if (nh != state_.human_cell && track_.conflict(state_.sdc_cell, nh)) rec.human_rejected = true;
  if (nh == state_.human_cell || rec.human_rejected) {
    human = Step::kStay;
    nh = state_.human_cell;
  }
  state_.human_cell = nh;
  if (sdc_finish_tick_ < 0 && track_.finished(state_.sdc_cell)) sdc_finish_tick_ = state_.tick;
  if (human_finish_tick_ < 0 && track_.finished(state_.human_cell))
    human_finish_tick_ = state_.tick;
  state_.horn = horn_signal(state_.mode, state_,
                            being_bullied_now(state_, track_, right_of_way(record_.start)));
  rec.sdc_cell = state_.sdc_cell;
  rec.human_cell = state_.human_cell;
  rec.sdc_action = sdc;
  rec.human_action = human;
  rec.horn = state_.horn;
  ++state_.tick;
  state_.episode_elapsed_s = state_.tick * cfg_.tick_ms / 1000.0;
  record_.ticks.push_back(rec);
  settle();
  return record_.ticks.back();
}

std::vector<std::int64_t> Episode::key() const {
  std::vector<std::int64_t> k{state_.tick, state_.sdc_cell, state_.human_cell, sdc_finish_tick_,
                              human_finish_tick_};
  if (punisher_) {
    auto p = punisher_->key();
    k.insert(k.end(), p.begin(), p.end());
  }
  return k;
}

void Episode::settle() {
  bool both = sdc_finish_tick_ >= 0 && human_finish_tick_ >= 0;
  if (both || state_.tick >= total_ticks()) done_ = true;
}

EpisodeRecord Episode::record() const {
  EpisodeRecord r = record_;
  auto when = [&](int tick) -> std::optional<double> {
    if (tick < 0) return std::nullopt;
    return (tick + 1) * cfg_.tick_ms / 1000.0;
  };
  r.sdc_finish_s = when(sdc_finish_tick_);
  r.human_finish_s = when(human_finish_tick_);
  r.sdc_cents = episode_reward(r.sdc_finish_s, cfg_);
  r.human_cents = episode_reward(r.human_finish_s, cfg_);
  if (punisher_) r.samples = punisher_->samples();
  r.verdict = detect_bully(r, cfg_);
  return r;
}

std::optional<std::string> check_cautious_safety(const BridgeConfig& cfg) {
  Track track = Track::from(cfg);
  int limit = cfg.round_limit_s * 1000 / cfg.tick_ms;
  for (auto start : {StartAssignment::kSdcClose, StartAssignment::kHumanClose}) {
    Mover right = right_of_way(start);
    bool sdc_close = start == StartAssignment::kSdcClose;
    std::set<std::tuple<int, int, int>> seen;
    std::deque<LiveState> queue;
    LiveState s0;
    s0.sdc_cell = sdc_close ? cfg.close_start : cfg.far_start;
    s0.human_cell = sdc_close ? cfg.far_start : cfg.close_start;
    queue.push_back(s0);
    while (!queue.empty()) {
      LiveState s = queue.front();
      queue.pop_front();
      if (s.tick >= limit) continue;
      if (!seen.insert({s.tick, s.sdc_cell, s.human_cell}).second) continue;
      int ns = advance(track, s.sdc_cell, cautious_policy(s, track, right));
      if (track.conflict(ns, s.human_cell)) {
        std::ostringstream os;
        os << "start " << to_string(start) << " tick " << s.tick << ": sdc " << s.sdc_cell
           << " -> " << ns << " meets human at " << s.human_cell;
        return os.str();
      }
      for (Step h : {Step::kForward, Step::kStay, Step::kBackward}) {
        int nh = advance(track, s.human_cell, h);
        if (track.conflict(ns, nh)) nh = s.human_cell;
        LiveState n = s;
        n.sdc_cell = ns;
        n.human_cell = nh;
        ++n.tick;
        queue.push_back(n);
      }
    }
  }
  return std::nullopt;
}

}  // namespace stackel::bridge
