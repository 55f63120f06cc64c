#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stackel/frontier.hpp"
#include "stackel/game_tree.hpp"

namespace stackel::bridge {

/// Abstract positions of one car.
enum class Pos : std::uint8_t { kStart = 0, kBefore = 1, kOnBridge = 2, kFinish = 3 };

const char* to_string(Pos p);
std::optional<Pos> parse_pos(const std::string& text);

enum class Mover : std::uint8_t { kSdc, kHuman };

/// Move of one car on one turn (abstract round or live tick).
enum class Step : std::uint8_t { kForward, kStay, kBackward };

const char* to_string(Step s);
std::optional<Step> parse_step(const std::string& text);

/// Edge label for a move in the abstract tree. Ties are broken by label
/// order, so the SDC's labels sort forward < stay < backward and the human's
/// sort stay < forward < backward.
const char* action_label(Mover who, Step s);
std::optional<Step> label_step(const std::string& label);

struct AbstractArrangement {
  Pos sdc = Pos::kBefore;
  Pos human = Pos::kBefore;
  Mover to_move = Mover::kSdc;
  std::uint8_t round = 0;
};

/// Which car began closer to the bridge.
enum class StartAssignment : std::uint8_t { kSdcClose, kHumanClose };

const char* to_string(StartAssignment s);

struct BridgeConfig {
  // Abstract game.
  int horizon_rounds = 10;
  Cents base_reward = 13;
  Cents per_step_cost = 1;
  Cents theta = 2;
  Pos sdc_start = Pos::kBefore;
  Pos human_start = Pos::kBefore;
  bool backward_from_before = false;
  // Finishing while the other car is on the bridge ends the game with zero
  // for both; when false the move is not offered.
  bool crash_leaves = true;

  // Live game.
  // Each car drives its own approach (cells 0..approach_cells-1, the last one
  // at the bridge entrance), crosses the shared bridge and finishes when it
  // leaves the bridge. Starts are approach cells.
  int approach_cells = 3;
  int bridge_cells = 4;
  int close_start = 2;
  int far_start = 0;
  int tick_ms = 1000;
  int seconds_per_step = 2;
  int round_limit_s = 26;

  std::vector<std::string> validate() const;
};

/// Abstract tree plus the arrangement behind every node.
struct BridgeTree {
  GameTree tree;
  std::vector<AbstractArrangement> info;
};

/// Alternating tree over abstract arrangements; the SDC (leader) moves first
/// in every round. Leaves: a car finishes, a crash, or the horizon.
BridgeTree build_bridge_tree(const BridgeConfig& cfg);

/// Payoff to a car that reaches the finish on its move in `round`.
Cents finish_payoff(const BridgeConfig& cfg, int round);

/// Payoff to a car left at `p` when the other car finished in `round`; it
/// moves unimpeded from the next round on.
Cents unimpeded_payoff(const BridgeConfig& cfg, Pos p, int round);

std::string ruleset_description(const BridgeConfig& cfg);

enum class Regime : std::uint8_t { kBlock, kBully, kYield, kMixture };

const char* to_string(Regime r);

struct RegimeReport {
  Regime regime = Regime::kMixture;
  // Abstract rounds the SDC holds the bridge before finishing.
  int block_steps = 0;
  TargetPoint target;
  LeaderPolicy policy;
};

/// Classifies the punishment at cap `theta` (nullopt is +inf) by replaying the
/// unrolled policy against the follower's best response from the root.
RegimeReport classify_regime(const BridgeTree& bt, const FrontierSolution& sol,
                             const std::optional<Rational>& theta);

}  // namespace stackel::bridge
