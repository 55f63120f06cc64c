#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "stackel/bridge.hpp"

namespace stackel::bridge {

enum class Mode : std::uint8_t { kCooperative, kPunishing };

const char* to_string(Mode m);
std::optional<Mode> parse_mode(const std::string& text);

/// Cell geometry of the live game. Each car has a progress counter along its
/// own route: approach cells, then the shared bridge, then the finish.
struct Track {
  int approach = 3;
  int bridge = 4;

  static Track from(const BridgeConfig& cfg) { return {cfg.approach_cells, cfg.bridge_cells}; }

  int entrance() const { return approach - 1; }
  int finish() const { return approach + bridge; }
  bool on_bridge(int p) const { return p >= approach && p < finish(); }
  bool finished(int p) const { return p >= finish(); }
  // Shared coordinate; the human drives the other way.
  int sdc_global(int p) const { return p; }
  int human_global(int p) const { return 2 * approach + bridge - 1 - p; }
  // Cars meet or pass each other on the bridge.
  bool conflict(int sdc, int human) const {
    return on_bridge(sdc) && on_bridge(human) && sdc_global(sdc) >= human_global(human);
  }
  Pos abstract(int p) const {
    if (finished(p)) return Pos::kFinish;
    return on_bridge(p) ? Pos::kOnBridge : Pos::kBefore;
  }
};

struct LiveState {
  int sdc_cell = 0;
  int human_cell = 0;
  int tick = 0;
  bool horn = false;
  Mode mode = Mode::kCooperative;
  double episode_elapsed_s = 0.0;
};

/// The car with the right of way: the one that started closer.
inline Mover right_of_way(StartAssignment s) {
  return s == StartAssignment::kSdcClose ? Mover::kSdc : Mover::kHuman;
}

/// Cooperative driving. With the right of way the SDC drives on but backs off
/// the bridge whenever the human is on it; without it the SDC waits at the
/// entrance until the human has crossed.
Step cautious_policy(const LiveState& s, const Track& track, Mover right);

/// True while the SDC has the right of way and the human holds the bridge.
bool being_bullied_now(const LiveState& s, const Track& track, Mover right);

bool horn_signal(Mode mode, const LiveState& s, bool bullied_now);

/// Reward in cents for finishing after `finish_time_s`; nullopt means the car
/// did not finish.
Cents episode_reward(const std::optional<double>& finish_time_s, const BridgeConfig& cfg);

/// Unrolled punishment restricted to the nodes any human can reach against it.
struct PlanNode {
  AbstractArrangement at;
  Owner owner = Owner::kLeaf;
  PayoffPair payoff;  // leaves only
  struct Edge {
    Step step;
    std::uint32_t child;
    Rational prob;  // SDC nodes: probability under the policy
  };
  std::vector<Edge> edges;
};

class PunishmentPlan {
 public:
  PunishmentPlan() = default;
  PunishmentPlan(std::vector<PlanNode> nodes, Cents theta, TargetPoint target);

  /// Solves the abstract game for `cfg` at its cap and keeps the reachable part
  /// of the unrolled policy.
  static PunishmentPlan build(const BridgeConfig& cfg);
  static PunishmentPlan from_policy(const BridgeTree& bt, const LeaderPolicy& policy, Cents theta,
                                    TargetPoint target);

  const std::vector<PlanNode>& nodes() const { return nodes_; }
  std::uint32_t root() const { return 0; }
  Cents theta() const { return theta_; }
  const TargetPoint& target() const { return target_; }

  /// SDC node with this arrangement: the earliest round at or after `round`,
  /// else the latest before it. Nullopt if no SDC node matches.
  std::optional<std::uint32_t> lookup(Pos sdc, Pos human, int round) const;

 private:
  std::vector<PlanNode> nodes_;
  Cents theta_ = 0;
  TargetPoint target_;
  std::map<std::tuple<Pos, Pos, int>, std::uint32_t> index_;
};

struct PolicySample {
  int tick = 0;
  int round = 0;
  std::string action;
  double draw = 0.0;
};

/// Drives the SDC from the plan: approach the entrance, then take one abstract
/// step every `seconds_per_step`, mapping the live arrangement back onto the
/// plan. Holding on the bridge creeps forward while room remains.
class PunishingController {
 public:
  PunishingController(std::shared_ptr<const PunishmentPlan> plan, const BridgeConfig& cfg);

  Step act(const LiveState& s, std::mt19937_64& rng);
  const std::vector<PolicySample>& samples() const { return samples_; }
  /// Internal state, for deduplicating search states.
  std::vector<std::int64_t> key() const;

 private:
  void decide(const LiveState& s, std::mt19937_64& rng);

  std::shared_ptr<const PunishmentPlan> plan_;
  Track track_;
  int ticks_per_step_ = 2;
  bool started_ = false;
  bool finishing_ = false;
  int round_ = 0;
  int next_decision_ = 0;
  int step_tick_ = 0;
  Step step_ = Step::kStay;
  Pos target_ = Pos::kOnBridge;
  std::optional<std::uint32_t> cursor_;
  std::vector<PolicySample> samples_;
};

struct TickRecord {
  int tick = 0;
  int sdc_cell = 0;
  int human_cell = 0;
  Step sdc_action = Step::kStay;
  Step human_action = Step::kStay;
  bool human_rejected = false;
  bool horn = false;
};

enum class BullyCondition : std::uint8_t { kForcedBackoff, kBlocked };

const char* to_string(BullyCondition c);

struct BullyVerdict {
  bool bullied = false;
  std::optional<BullyCondition> condition;
};

struct EpisodeRecord {
  int episode_index = 0;
  StartAssignment start = StartAssignment::kSdcClose;
  Mode mode = Mode::kCooperative;
  std::uint64_t rng_seed = 0;
  std::vector<TickRecord> ticks;
  std::optional<double> sdc_finish_s;
  std::optional<double> human_finish_s;
  Cents sdc_cents = 0;
  Cents human_cents = 0;
  BullyVerdict verdict;
  std::vector<PolicySample> samples;
};

/// Bullying: (1) the SDC had the right of way, was forced to back off the
/// bridge and the human finished first; (2) the cooperative SDC did not finish
/// in time.
BullyVerdict detect_bully(const EpisodeRecord& ep, const BridgeConfig& cfg);

Mode next_mode(Mode prev, const BullyVerdict& verdict);

/// One live round. The SDC moves first each tick; a move that would meet or
/// pass the other car on the bridge is not carried out.
class Episode {
 public:
  Episode(const BridgeConfig& cfg, std::shared_ptr<const PunishmentPlan> plan, Mode mode,
          StartAssignment start, int index, std::uint64_t seed);

  bool done() const { return done_; }
  const LiveState& state() const { return state_; }
  const BridgeConfig& config() const { return cfg_; }
  const Track& track() const { return track_; }
  StartAssignment start() const { return record_.start; }
  int total_ticks() const;

  const TickRecord& step(Step human);
  /// Everything that determines the rest of the episode apart from the RNG.
  std::vector<std::int64_t> key() const;
  /// Finished record with rewards and verdict; valid once done().
  EpisodeRecord record() const;

 private:
  Step sdc_action();
  void settle();

  BridgeConfig cfg_;
  Track track_;
  LiveState state_;
  EpisodeRecord record_;
  std::optional<PunishingController> punisher_;
  std::mt19937_64 rng_;
  bool done_ = false;
  int sdc_finish_tick_ = -1;
  int human_finish_tick_ = -1;
};

/// Exhaustive check that the cautious SDC never makes a move that meets or
/// passes the human, over every human action sequence and both starts.
/// Returns a description of the first violation.
std::optional<std::string> check_cautious_safety(const BridgeConfig& cfg);

}  // namespace stackel::bridge
