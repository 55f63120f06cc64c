#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include "stackel/frontier.hpp"
#include "stackel/game_tree.hpp"

namespace stackel {

enum class OracleMethod : std::uint8_t { kPureEnumeration, kGrid };

struct OracleResult {
  Rational best_leader_value;
  Rational follower_value;
  LeaderPolicy witness_policy;
  OracleMethod method = OracleMethod::kPureEnumeration;
};

class OracleBudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OracleLimits {
  std::size_t max_leader_nodes_pure = 12;
  std::size_t max_pure_policies = 4'000'000;
  std::size_t max_leader_nodes_grid = 6;
  std::size_t max_branching_grid = 3;
  std::size_t max_grid_work = 20'000'000;
};

/// Best deterministic leader policy with follower value <= theta (nullopt is
/// +inf). Throws InfeasibleCap when no pure policy qualifies.
OracleResult enumerate_pure_leader(const GameTree& tree, const std::optional<Rational>& theta,
                                   const OracleLimits& limits = {});

/// Outcomes reachable under leader policies whose probabilities are multiples
/// of `step` (a unit fraction), computed once and queried per cap. Values are
/// kept as integers scaled by step^-k, k the number of leader nodes.
class GridOracle {
 public:
  GridOracle(const GameTree& tree, const Rational& step, const OracleLimits& limits = {});
  ~GridOracle();
  GridOracle(GridOracle&&) noexcept;

  OracleResult query(const std::optional<Rational>& theta) const;
  std::size_t outcome_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Best grid leader policy; a lower bound on the true optimum.
OracleResult grid_search_leader(const GameTree& tree, const Rational& step,
                                const std::optional<Rational>& theta,
                                const OracleLimits& limits = {});

/// True iff the follower's best response to `policy` yields exactly the
/// expected pair.
bool verify_point(const GameTree& tree, const LeaderPolicy& policy, const TargetPoint& expected);

}  // namespace stackel
