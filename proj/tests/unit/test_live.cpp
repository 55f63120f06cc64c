#include "fixtures.hpp"
#include "plan_fixture.hpp"
#include "stackel/harness.hpp"
#include "stackel/live.hpp"

using namespace stackel;
using namespace stackel::bridge;

namespace {

LiveState at(int sdc, int human, Mode mode = Mode::kCooperative) {
  LiveState s;
  s.sdc_cell = sdc;
  s.human_cell = human;
  s.mode = mode;
  return s;
}

EpisodeRecord play(const std::string& human, Mode mode, StartAssignment start,
                   std::uint64_t seed = 1) {
  auto model = harness::make_human_model(human);
  return harness::run_episode(*model, mode, BridgeConfig{},
                              mode == Mode::kPunishing ? test::default_plan() : nullptr, start, 0,
                              seed);
}

// Tiny hand-made plan: the SDC enters or waits with equal probability, then
// holds.
std::shared_ptr<const PunishmentPlan> coin_plan() {
  std::vector<PlanNode> nodes(4);
  nodes[0].at = {Pos::kBefore, Pos::kBefore, Mover::kSdc, 0};
  nodes[0].owner = Owner::kLeader;
  nodes[0].edges = {{Step::kForward, 1, make_rational(1, 2)}, {Step::kStay, 2, make_rational(1, 2)}};
  nodes[1].at = {Pos::kOnBridge, Pos::kBefore, Mover::kHuman, 0};
  nodes[1].owner = Owner::kFollower;
  nodes[2].at = {Pos::kBefore, Pos::kBefore, Mover::kHuman, 0};
  nodes[2].owner = Owner::kFollower;
  nodes[3].at = {Pos::kOnBridge, Pos::kBefore, Mover::kSdc, 1};
  nodes[3].owner = Owner::kLeader;
  nodes[3].edges = {{Step::kStay, 3, Rational(1)}};
  return std::make_shared<const PunishmentPlan>(std::move(nodes), 2, TargetPoint{});
}

}  // namespace

TEST_CASE("track geometry") {
  Track t;
  CHECK(t.entrance() == 2);
  CHECK(t.finish() == 7);
  CHECK_FALSE(t.on_bridge(2));
  CHECK(t.on_bridge(3));
  CHECK(t.on_bridge(6));
  CHECK(t.finished(7));
  // Shared cells run 3..6 for the SDC; human cell 5 is shared cell 4.
  CHECK(t.human_global(5) == 4);
  CHECK_FALSE(t.conflict(3, 5));
  CHECK(t.conflict(4, 5));
  CHECK(t.conflict(5, 5));
  CHECK(t.conflict(6, 6));
  CHECK_FALSE(t.conflict(6, 2));
  CHECK(t.abstract(1) == Pos::kBefore);
  CHECK(t.abstract(4) == Pos::kOnBridge);
  CHECK(t.abstract(7) == Pos::kFinish);
}

TEST_CASE("cautious policy") {
  Track t;
  // With the right of way it drives on, and backs off when the human enters.
  CHECK(cautious_policy(at(2, 0), t, Mover::kSdc) == Step::kForward);
  CHECK(cautious_policy(at(4, 3), t, Mover::kSdc) == Step::kBackward);
  CHECK(cautious_policy(at(2, 4), t, Mover::kSdc) == Step::kStay);
  // Without it, it waits at the entrance until the human has crossed.
  CHECK(cautious_policy(at(0, 2), t, Mover::kHuman) == Step::kForward);
  CHECK(cautious_policy(at(2, 6), t, Mover::kHuman) == Step::kStay);
  CHECK(cautious_policy(at(2, 7), t, Mover::kHuman) == Step::kForward);
  CHECK(cautious_policy(at(7, 2), t, Mover::kSdc) == Step::kStay);
}

TEST_CASE("cautious policy is safe against every human") {
  CHECK_FALSE(check_cautious_safety(BridgeConfig{}).has_value());
  BridgeConfig longer;
  longer.approach_cells = 5;
  longer.bridge_cells = 6;
  longer.close_start = 4;
  longer.far_start = 1;
  CHECK_FALSE(check_cautious_safety(longer).has_value());
}

TEST_CASE("rewards, horn and mode switching") {
  BridgeConfig cfg;
  CHECK(episode_reward(0.0, cfg) == 13);
  CHECK(episode_reward(2.0, cfg) == 12);
  CHECK(episode_reward(5.0, cfg) == 11);
  CHECK(episode_reward(26.0, cfg) == 0);
  CHECK(episode_reward(std::nullopt, cfg) == 0);
  CHECK(horn_signal(Mode::kPunishing, at(0, 0), false));
  CHECK(horn_signal(Mode::kCooperative, at(0, 0), true));
  CHECK_FALSE(horn_signal(Mode::kCooperative, at(0, 0), false));
  BullyVerdict yes{true, BullyCondition::kForcedBackoff};
  CHECK(next_mode(Mode::kCooperative, yes) == Mode::kPunishing);
  CHECK(next_mode(Mode::kPunishing, BullyVerdict{}) == Mode::kCooperative);
  CHECK(parse_mode(to_string(Mode::kPunishing)) == Mode::kPunishing);
}

TEST_CASE("bully detection") {
  BridgeConfig cfg;
  EpisodeRecord ep;
  ep.start = StartAssignment::kSdcClose;
  ep.ticks = {{0, 4, 2, Step::kForward, Step::kForward, false, false},
              {1, 3, 3, Step::kBackward, Step::kForward, false, true}};
  ep.human_finish_s = 7.0;
  ep.sdc_finish_s = 12.0;
  auto v = detect_bully(ep, cfg);
  CHECK(v.bullied);
  CHECK(v.condition == BullyCondition::kForcedBackoff);

  // No right of way, no forced backoff.
  ep.start = StartAssignment::kHumanClose;
  CHECK_FALSE(detect_bully(ep, cfg).bullied);

  // The SDC never finished while cooperating.
  ep.sdc_finish_s.reset();
  v = detect_bully(ep, cfg);
  CHECK(v.bullied);
  CHECK(v.condition == BullyCondition::kBlocked);

  // A punishing SDC holding a standoff blocks itself.
  ep.mode = Mode::kPunishing;
  CHECK_FALSE(detect_bully(ep, cfg).bullied);
}

TEST_CASE("cooperative episodes") {
  SUBCASE("fair human with the right of way crosses first") {
    auto ep = play("always-fair", Mode::kCooperative, StartAssignment::kHumanClose);
    REQUIRE(ep.human_finish_s);
    REQUIRE(ep.sdc_finish_s);
    CHECK(*ep.human_finish_s < *ep.sdc_finish_s);
    CHECK_FALSE(ep.verdict.bullied);
    CHECK(ep.human_cents == 11);
  }
  SUBCASE("fair human without it waits") {
    auto ep = play("always-fair", Mode::kCooperative, StartAssignment::kSdcClose);
    CHECK(*ep.sdc_finish_s < *ep.human_finish_s);
    CHECK_FALSE(ep.verdict.bullied);
  }
  SUBCASE("bully forces the SDC off the bridge") {
    auto ep = play("always-bully", Mode::kCooperative, StartAssignment::kSdcClose);
    CHECK(ep.verdict.bullied);
    CHECK(ep.verdict.condition == BullyCondition::kForcedBackoff);
    bool honked = false;
    for (const auto& t : ep.ticks) honked = honked || t.horn;
    CHECK(honked);
  }
  SUBCASE("records are consistent") {
    auto ep = play("always-bully", Mode::kCooperative, StartAssignment::kSdcClose);
    for (std::size_t i = 0; i < ep.ticks.size(); ++i) CHECK(ep.ticks[i].tick == static_cast<int>(i));
    CHECK(ep.human_cents == episode_reward(ep.human_finish_s, BridgeConfig{}));
    CHECK(ep.sdc_cents == episode_reward(ep.sdc_finish_s, BridgeConfig{}));
  }
}

TEST_CASE("episodes end and refuse further steps") {
  Episode ep(BridgeConfig{}, nullptr, Mode::kCooperative, StartAssignment::kSdcClose, 0, 1);
  int n = 0;
  while (!ep.done()) {
    ep.step(Step::kStay);
    ++n;
  }
  CHECK(n == ep.total_ticks());
  CHECK_THROWS_AS(ep.step(Step::kStay), std::logic_error);
  auto rec = ep.record();
  CHECK_FALSE(rec.human_finish_s.has_value());
  CHECK(rec.human_cents == 0);
  CHECK_FALSE(rec.verdict.bullied);
  CHECK_THROWS_AS(Episode(BridgeConfig{}, nullptr, Mode::kPunishing, StartAssignment::kSdcClose, 0, 1),
                  std::invalid_argument);
}

TEST_CASE("punishing episodes cap the human at theta") {
  auto plan = test::default_plan();
  CHECK(plan->theta() == 2);
  CHECK(plan->target().follower == 2);
  for (auto start : {StartAssignment::kSdcClose, StartAssignment::kHumanClose})
    for (std::string h : {"always-bully", "always-fair", "best-response", "adaptive:1", "scripted:FFFFBBSSFFFFFFF"}) {
      CAPTURE(h);
      CAPTURE(to_string(start));
      auto ep = play(h, Mode::kPunishing, start);
      CHECK(ep.human_cents <= 2);
      for (const auto& t : ep.ticks) CHECK(t.horn);
      CHECK_FALSE(ep.verdict.bullied);
    }
}

TEST_CASE("compliant human against the punishment") {
  auto ep = play("always-fair", Mode::kPunishing, StartAssignment::kSdcClose);
  // The SDC enters at once, holds and creeps for the blocking steps, then
  // leaves.
  REQUIRE(ep.sdc_finish_s);
  CHECK(*ep.sdc_finish_s >= 18.0);
  int on_bridge = 0;
  Track t;
  for (const auto& r : ep.ticks) on_bridge += t.on_bridge(r.sdc_cell) ? 1 : 0;
  CHECK(on_bridge >= 18);
}

TEST_CASE("plan lookup falls back across rounds") {
  auto plan = test::default_plan();
  CHECK(plan->lookup(Pos::kBefore, Pos::kBefore, 0) == plan->root());
  CHECK(plan->lookup(Pos::kBefore, Pos::kOnBridge, 0).has_value());
  CHECK(plan->lookup(Pos::kOnBridge, Pos::kOnBridge, 200).has_value());
  CHECK_FALSE(plan->lookup(Pos::kFinish, Pos::kBefore, 3).has_value());
}

TEST_CASE("mixed plans sample once per decision with the episode seed") {
  auto plan = coin_plan();
  BridgeConfig cfg;
  auto run = [&](std::uint64_t seed) {
    Episode ep(cfg, plan, Mode::kPunishing, StartAssignment::kSdcClose, 0, seed);
    while (!ep.done()) ep.step(Step::kStay);
    return ep.record();
  };
  auto a = run(11), b = run(11);
  REQUIRE(a.samples.size() == 1);
  CHECK(a.samples[0].round == 0);
  CHECK(a.samples[0].draw == b.samples[0].draw);
  CHECK(a.samples[0].action == b.samples[0].action);
  int entered = 0;
  for (std::uint64_t s = 0; s < 40; ++s) {
    auto r = run(s);
    entered += r.samples[0].action == action_label(Mover::kSdc, Step::kForward) ? 1 : 0;
  }
  CHECK(entered > 5);
  CHECK(entered < 35);
}
