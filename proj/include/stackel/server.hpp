#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "stackel/live.hpp"

namespace stackel::server {

/// Server-side state of one participant's run of episodes. All game logic
/// lives here; the network layer only moves messages. Outgoing messages are
/// returned as encoded frames.
class Session {
 public:
  Session(std::string id, const bridge::BridgeConfig& cfg,
          std::shared_ptr<const bridge::PunishmentPlan> plan, std::uint64_t seed, int episodes,
          std::filesystem::path dir);

  /// Rebuilds a session from its directory; resumes at the next episode.
  static std::unique_ptr<Session> restore(const std::string& id, const std::filesystem::path& dir,
                                          std::shared_ptr<const bridge::PunishmentPlan> plan);

  const std::string& id() const { return id_; }
  const bridge::BridgeConfig& config() const { return cfg_; }
  bool in_episode() const { return episode_.has_value(); }
  bool finished() const { return next_index_ >= episodes_ && !episode_; }
  int current_tick() const { return episode_ ? episode_->state().tick : -1; }
  int episode_index() const { return episode_ ? index_ : next_index_; }

  std::string joined_message() const;
  /// Starts the next episode and returns its opening state, or the
  /// session_end frame when every episode has been played.
  std::vector<std::string> start_episode();
  /// Last write wins; consumed by the next tick. Inputs for other episodes
  /// are dropped.
  void latch(int episode, bridge::Step action);
  /// Advances one tick. At the end of an episode the log line is written
  /// before episode_end is returned.
  std::vector<std::string> tick();

  const std::vector<bridge::EpisodeRecord>& log() const { return log_; }

 private:
  std::string state_message() const;

  std::string id_;
  bridge::BridgeConfig cfg_;
  std::shared_ptr<const bridge::PunishmentPlan> plan_;
  std::uint64_t seed_;
  int episodes_;
  std::filesystem::path dir_;
  std::mt19937_64 seeds_;
  bridge::Mode mode_ = bridge::Mode::kCooperative;
  int next_index_ = 0;
  int index_ = 0;
  Cents cumulative_ = 0;
  std::optional<bridge::Episode> episode_;
  bridge::Step latched_ = bridge::Step::kStay;
  std::vector<bridge::EpisodeRecord> log_;
  bool ended_ = false;
};

struct ServerOptions {
  std::string address = "0.0.0.0";
  unsigned short port = 0;
  bridge::BridgeConfig config;
  std::shared_ptr<const bridge::PunishmentPlan> plan;
  std::filesystem::path out_dir = "server-logs";
  std::filesystem::path static_dir;
  std::uint64_t seed = 0;
  int episodes = 20;
  std::size_t max_sessions = 64;
  // Wall-clock tick length in ms; 0 uses config.tick_ms.
  int wall_tick_ms = 0;
  // Advance as soon as input for the current tick arrives instead of on the
  // clock; used for replaying transcripts.
  bool lockstep = false;
};

/// HTTP and websocket front end: GET /healthz, static files at /, and the
/// game protocol on websocket upgrades of any path.
class GameServer {
 public:
  explicit GameServer(ServerOptions opts);
  ~GameServer();
  GameServer(const GameServer&) = delete;
  GameServer& operator=(const GameServer&) = delete;

  unsigned short port() const;
  /// Serves until stop().
  void run();
  /// Safe to call from any thread.
  void stop();

  struct Impl;

 private:
  std::shared_ptr<Impl> impl_;
};

}  // namespace stackel::server
