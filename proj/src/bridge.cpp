#include "stackel/bridge.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace stackel::bridge {

const char* to_string(Pos p) {
  switch (p) {
    case Pos::kStart: return "start";
    case Pos::kBefore: return "before-bridge";
    case Pos::kOnBridge: return "on-bridge";
    case Pos::kFinish: return "finish";
  }
  return "?";
}

std::optional<Pos> parse_pos(const std::string& text) {
  for (Pos p : {Pos::kStart, Pos::kBefore, Pos::kOnBridge, Pos::kFinish})
    if (text == to_string(p)) return p;
  return std::nullopt;
}

const char* to_string(Step s) {
  switch (s) {
    case Step::kForward: return "forward";
    case Step::kStay: return "stay";
    case Step::kBackward: return "backward";
  }
  return "?";
}

std::optional<Step> parse_step(const std::string& text) {
  for (Step s : {Step::kForward, Step::kStay, Step::kBackward})
    if (text == to_string(s)) return s;
  return std::nullopt;
}

const char* action_label(Mover who, Step s) {
  switch (s) {
    case Step::kForward: return who == Mover::kSdc ? "advance" : "move";
    case Step::kStay: return "hold";
    case Step::kBackward: return "reverse";
  }
  return "?";
}

std::optional<Step> label_step(const std::string& label) {
  if (label == "advance" || label == "move") return Step::kForward;
  if (label == "hold") return Step::kStay;
  if (label == "reverse") return Step::kBackward;
  return std::nullopt;
}

const char* to_string(StartAssignment s) {
  return s == StartAssignment::kSdcClose ? "sdc-close" : "human-close";
}

const char* to_string(Regime r) {
  switch (r) {
    case Regime::kBlock: return "block";
    case Regime::kBully: return "bully";
    case Regime::kYield: return "yield";
    case Regime::kMixture: return "mixture";
  }
  return "?";
}

std::vector<std::string> BridgeConfig::validate() const {
  std::vector<std::string> errs;
  auto positive = [&](long v, const char* name) {
    if (v <= 0) errs.push_back(std::string(name) + " must be positive");
  };
  positive(horizon_rounds, "horizon_rounds");
  positive(base_reward, "base_reward");
  positive(per_step_cost, "per_step_cost");
  positive(approach_cells, "approach_cells");
  positive(bridge_cells, "bridge_cells");
  positive(tick_ms, "tick_ms");
  if (tick_ms > 0 && (seconds_per_step * 1000) % tick_ms != 0)
    errs.push_back("seconds_per_step must be a whole number of ticks");
  positive(seconds_per_step, "seconds_per_step");
  positive(round_limit_s, "round_limit_s");
  if (theta < 0) errs.push_back("theta must be nonnegative");
  if (theta >= base_reward) errs.push_back("theta must be below base_reward");
  if (horizon_rounds > 250) errs.push_back("horizon_rounds must be at most 250");
  if (sdc_start == Pos::kFinish || human_start == Pos::kFinish)
    errs.push_back("cars cannot start at the finish");
  if (sdc_start == Pos::kOnBridge && human_start == Pos::kOnBridge)
    errs.push_back("cars cannot both start on the bridge");
  if (close_start < 0 || close_start >= approach_cells)
    errs.push_back("close_start must lie on the approach");
  if (far_start < 0 || far_start >= close_start)
    errs.push_back("far_start must lie on the approach behind close_start");
  return errs;
}

Cents finish_payoff(const BridgeConfig& cfg, int round) {
  return std::max<Cents>(0, cfg.base_reward - cfg.per_step_cost * round);
}

Cents unimpeded_payoff(const BridgeConfig& cfg, Pos p, int round) {
  int needed = static_cast<int>(Pos::kFinish) - static_cast<int>(p);
  return finish_payoff(cfg, round + needed);
}

std::string ruleset_description(const BridgeConfig& cfg) {
  std::ostringstream os;
  os << "horizon=" << cfg.horizon_rounds << " rounds (SDC then human each round); start sdc="
     << to_string(cfg.sdc_start) << " human=" << to_string(cfg.human_start)
     << "; moves forward/stay everywhere, backward "
     << (cfg.backward_from_before ? "from before-bridge and on-bridge" : "only off the bridge")
     << "; both cars may stand on the bridge; finishing past a car on the bridge "
     << (cfg.crash_leaves ? "is a crash leaf (0,0)" : "is not allowed")
     << "; leaves when a car finishes (other car finishes unimpeded from the next round), "
        "at a crash, or at the horizon (0,0)";
  return os.str();
}

namespace {

struct Move {
  Step step;
  Pos to;
  bool crash;
};

// Legal moves of a car at `p` with the other car at `q`.
std::vector<Move> moves(const BridgeConfig& cfg, Pos p, Pos q) {
  std::vector<Move> out;
  switch (p) {
    case Pos::kStart:
      out.push_back({Step::kForward, Pos::kBefore, false});
      out.push_back({Step::kStay, p, false});
      break;
    case Pos::kBefore:
      out.push_back({Step::kForward, Pos::kOnBridge, false});
      out.push_back({Step::kStay, p, false});
      if (cfg.backward_from_before) out.push_back({Step::kBackward, Pos::kStart, false});
      break;
    case Pos::kOnBridge:
      if (q != Pos::kOnBridge)
        out.push_back({Step::kForward, Pos::kFinish, false});
      else if (cfg.crash_leaves)
        out.push_back({Step::kForward, Pos::kFinish, true});
      out.push_back({Step::kStay, p, false});
      out.push_back({Step::kBackward, Pos::kBefore, false});
      break;
    case Pos::kFinish:
      break;
  }
  return out;
}

}  // namespace

BridgeTree build_bridge_tree(const BridgeConfig& cfg) {
  auto errs = cfg.validate();
  if (!errs.empty()) throw std::invalid_argument("invalid bridge config: " + errs.front());
  BridgeTree bt;
  std::size_t counter = 0;
  auto add = [&](const AbstractArrangement& a, std::optional<PayoffPair> reward) {
    std::string id = "n" + std::to_string(counter++);
    NodeId n = reward ? bt.tree.add_leaf(std::move(id), *reward)
                      : bt.tree.add_internal(std::move(id), a.to_move == Mover::kSdc
                                                                ? Owner::kLeader
                                                                : Owner::kFollower);
    bt.info.push_back(a);
    return n;
  };
  AbstractArrangement root{cfg.sdc_start, cfg.human_start, Mover::kSdc, 0};
  std::vector<NodeId> stack;
  if (cfg.horizon_rounds == 0) {
    bt.tree.set_root(add(root, PayoffPair{0, 0}));
    return bt;
  }
  NodeId r = add(root, std::nullopt);
  bt.tree.set_root(r);
  stack.push_back(r);
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    AbstractArrangement a = bt.info[id];
    bool sdc = a.to_move == Mover::kSdc;
    Pos me = sdc ? a.sdc : a.human;
    Pos other = sdc ? a.human : a.sdc;
    for (const Move& m : moves(cfg, me, other)) {
      AbstractArrangement b = a;
      if (!m.crash) (sdc ? b.sdc : b.human) = m.to;
      b.to_move = sdc ? Mover::kHuman : Mover::kSdc;
      if (!sdc) ++b.round;
      NodeId child;
      if (m.crash) {
        child = add(b, PayoffPair{0, 0});
      } else if (m.to == Pos::kFinish) {
        Cents mine = finish_payoff(cfg, a.round);
        Cents theirs = unimpeded_payoff(cfg, other, a.round);
        child = add(b, sdc ? PayoffPair{mine, theirs} : PayoffPair{theirs, mine});
      } else if (b.round >= cfg.horizon_rounds) {
        child = add(b, PayoffPair{0, 0});
      } else {
        child = add(b, std::nullopt);
        stack.push_back(child);
      }
      bt.tree.add_edge(id, action_label(sdc ? Mover::kSdc : Mover::kHuman, m.step), child);
    }
  }
  return bt;
}

RegimeReport classify_regime(const BridgeTree& bt, const FrontierSolution& sol,
                             const std::optional<Rational>& theta) {
  RegimeReport rep;
  rep.target = theta ? extract_punishment(sol.root(), PunishmentQuery::cap(*theta))
                     : extract_equilibrium(sol.root());
  rep.policy = unroll_policy(sol, rep.target);
  auto br = best_response(bt.tree, rep.policy);
  const GameTree& t = bt.tree;
  bool mixed = false;
  NodeId id = t.root();
  while (!t.node(id).is_leaf()) {
    const Node& n = t.node(id);
    const Policy& pol = n.owner == Owner::kLeader ? static_cast<const Policy&>(rep.policy)
                                                  : br.policy;
    const auto& probs = pol.probs.at(id);
    std::size_t pick = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] != 0 && probs[i] != 1) mixed = true;
      if (probs[i] > probs[pick]) pick = i;
    }
    if (n.owner == Owner::kLeader && bt.info[id].sdc == Pos::kOnBridge) ++rep.block_steps;
    id = n.children[pick].child;
  }
  const AbstractArrangement& end = bt.info[id];
  if (mixed)
    rep.regime = Regime::kMixture;
  else if (end.human == Pos::kFinish)
    rep.regime = Regime::kYield;
  else if (end.sdc == Pos::kFinish && rep.block_steps <= 1)
    rep.regime = Regime::kBully;
  else
    rep.regime = Regime::kBlock;
  return rep;
}

}  // namespace stackel::bridge
