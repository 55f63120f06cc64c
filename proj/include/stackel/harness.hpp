#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "stackel/live.hpp"

namespace stackel::harness {

using bridge::BridgeConfig;
using bridge::Episode;
using bridge::EpisodeRecord;
using bridge::Mode;
using bridge::PunishmentPlan;
using bridge::Step;

/// Scripted stand-in for a participant. Models see only what a driver sees:
/// positions, the horn and which car started closer.
class HumanModel {
 public:
  virtual ~HumanModel() = default;
  virtual std::string name() const = 0;
  virtual void begin_episode(const Episode& ep) { (void)ep; }
  virtual Step act(const Episode& ep) = 0;
  virtual void end_episode(const EpisodeRecord& rec) { (void)rec; }
  virtual std::unique_ptr<HumanModel> clone() const = 0;
};

/// always-bully | always-fair | adaptive:N | scripted:ACTIONS | best-response.
/// ACTIONS is a string over F (forward), S (stay) and B (backward) replayed
/// once per episode; after it runs out the model stays.
std::unique_ptr<HumanModel> make_human_model(const std::string& spec);

/// Right-of-way driving: go when the human started closer, otherwise wait at
/// the entrance until the SDC has crossed. A horn at the start of a round is
/// taken as the SDC claiming the bridge.
Step fair_step(const Episode& ep, bool horn_at_start);

enum class Group : std::uint8_t { kControl, kExperimental };

const char* to_string(Group g);

struct SessionRecord {
  std::string human;
  Group group = Group::kControl;
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> episodes;

  int bully_count() const;
};

EpisodeRecord run_episode(HumanModel& human, Mode mode, const BridgeConfig& cfg,
                          std::shared_ptr<const PunishmentPlan> plan, bridge::StartAssignment start,
                          int index, std::uint64_t seed);

/// Even episodes start the SDC close, odd ones the human. The control group
/// stays cooperative; the experimental group punishes the round after a
/// bully verdict.
SessionRecord run_session(HumanModel& human, Group group, int episodes, const BridgeConfig& cfg,
                          std::shared_ptr<const PunishmentPlan> plan, std::uint64_t seed);

/// Fraction of sessions with more than k bully events, for k = 1..max, over
/// sessions with at least one event.
struct PersistenceCurve {
  std::vector<double> fraction;  // fraction[k - 1]

  double at(int k) const;
};

PersistenceCurve bully_persistence(const std::vector<int>& bully_counts);

/// Rows {bullied once, bullied more}, columns {control, experimental}.
struct ContingencyTable {
  std::array<std::array<std::int64_t, 2>, 2> n{};
};

ContingencyTable tabulate(const std::vector<int>& control_counts,
                          const std::vector<int>& experimental_counts);

/// Two-tailed Fisher exact test: the total probability of the tables with the
/// observed margins that are no more probable than the observed one.
double fisher_exact(const ContingencyTable& t);

}  // namespace stackel::harness
