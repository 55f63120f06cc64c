#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stackel/frontier.hpp"
#include "stackel/game_tree.hpp"
#include "stackel/harness.hpp"
#include "stackel/live.hpp"

namespace stackel::io {

/// Malformed input. The message names the line, field or node at fault.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

/// {"root": id, "nodes": [{"id", "owner", "children": {action: id}, "reward": [l, f]}]}
GameTree parse_tree(const std::string& text);
GameTree import_tree(const std::filesystem::path& path);
/// Nodes in index order, one per line; parse_tree(tree_to_json(t)) rebuilds t.
std::string tree_to_json(const GameTree& tree);

struct NamedFrontier {
  std::string node_id;
  const Frontier* frontier;
};

/// kind,node_id,leader_lo,follower_lo,leader_hi,follower_hi in dollars. Rows
/// follow the given node order, points before segments.
std::string frontier_csv(const std::vector<NamedFrontier>& frontiers);

/// Policy file: cap, target and the leader's action probabilities by node id.
std::string policy_to_json(const GameTree& tree, const LeaderPolicy& policy,
                           const std::optional<Rational>& theta, const TargetPoint& target);
LeaderPolicy parse_policy(const GameTree& tree, const std::string& text);

bridge::BridgeConfig parse_bridge_config(const std::string& text);
std::string bridge_config_to_json(const bridge::BridgeConfig& cfg);

std::string plan_to_json(const bridge::PunishmentPlan& plan);
bridge::PunishmentPlan parse_plan(const std::string& text);

struct SessionInfo {
  std::string session_id;
  std::string group;
  std::string human;
};

/// One line, no trailing newline.
std::string episode_to_json(const bridge::EpisodeRecord& ep, const SessionInfo& session);
bridge::EpisodeRecord parse_episode(const std::string& line, SessionInfo* session = nullptr);

std::string episodes_jsonl(const harness::SessionRecord& s, const std::string& session_id);

struct LoggedSession {
  SessionInfo info;
  std::vector<bridge::EpisodeRecord> episodes;
  int bully_count() const;
};

/// Every episodes.jsonl below `dir`, in path order.
std::vector<LoggedSession> load_sessions(const std::filesystem::path& dir);

}  // namespace stackel::io
