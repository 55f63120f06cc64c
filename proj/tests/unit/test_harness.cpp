#include <cmath>

#include "fixtures.hpp"
#include "plan_fixture.hpp"
#include "stackel/harness.hpp"

using namespace stackel;
using namespace stackel::harness;

namespace {

SessionRecord session(const std::string& human, Group group, std::uint64_t seed = 3) {
  auto model = make_human_model(human);
  return run_session(*model, group, 20, BridgeConfig{},
                     group == Group::kExperimental ? test::default_plan() : nullptr, seed);
}

ContingencyTable table(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
  ContingencyTable t;
  t.n = {{{a, b}, {c, d}}};
  return t;
}

// Direct summation in floating point, independent of the exact version.
double fisher_direct(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
  auto lchoose = [](double n, double k) {
    return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1);
  };
  double r1 = a + b, r2 = c + d, c1 = a + c;
  auto p = [&](double x) { return std::exp(lchoose(r1, x) + lchoose(r2, c1 - x) - lchoose(r1 + r2, c1)); };
  double obs = p(a), sum = 0;
  for (double x = std::max(0.0, c1 - r2); x <= std::min(r1, c1); ++x)
    if (p(x) <= obs * (1 + 1e-9)) sum += p(x);
  return sum;
}

}  // namespace

TEST_CASE("human model specs") {
  CHECK(make_human_model("always-bully")->name() == "always-bully");
  CHECK(make_human_model("adaptive:3")->name() == "adaptive:3");
  CHECK(make_human_model("scripted:FFSB")->name() == "scripted:FFSB");
  CHECK(make_human_model("best-response")->name() == "best-response");
  CHECK_THROWS_AS(make_human_model("adaptive:"), std::invalid_argument);
  CHECK_THROWS_AS(make_human_model("adaptive:x"), std::invalid_argument);
  CHECK_THROWS_AS(make_human_model("scripted:FX"), std::invalid_argument);
  CHECK_THROWS_AS(make_human_model("sometimes"), std::invalid_argument);
}

TEST_CASE("scripted models replay their list every episode") {
  auto s = session("scripted:SSSSFFFFFFFF", Group::kControl);
  for (const auto& ep : s.episodes) {
    REQUIRE(ep.ticks.size() >= 4);
    for (int i = 0; i < 4; ++i) CHECK(ep.ticks[static_cast<std::size_t>(i)].human_action == Step::kStay);
  }
}

TEST_CASE("control sessions never punish") {
  auto s = session("always-bully", Group::kControl);
  CHECK(s.episodes.size() == 20);
  for (const auto& ep : s.episodes) CHECK(ep.mode == Mode::kCooperative);
  // Every round where the SDC has the right of way is exploited.
  CHECK(s.bully_count() == 10);
  for (std::size_t i = 0; i < s.episodes.size(); ++i)
    CHECK(s.episodes[i].start ==
          (i % 2 == 0 ? bridge::StartAssignment::kSdcClose : bridge::StartAssignment::kHumanClose));
}

TEST_CASE("fair humans are never flagged") {
  for (auto g : {Group::kControl, Group::kExperimental}) {
    auto s = session("always-fair", g);
    CHECK(s.bully_count() == 0);
    for (const auto& ep : s.episodes) CHECK(ep.mode == Mode::kCooperative);
  }
}

TEST_CASE("tit-for-tat against adaptive and persistent bullies") {
  for (int n = 1; n <= 3; ++n) {
    auto s = session("adaptive:" + std::to_string(n), Group::kExperimental);
    CHECK(s.bully_count() == n);
  }
  auto s = session("always-bully", Group::kExperimental);
  for (std::size_t i = 1; i < s.episodes.size(); ++i) {
    const auto& ep = s.episodes[i];
    CHECK((ep.mode == Mode::kPunishing) == s.episodes[i - 1].verdict.bullied);
    if (ep.mode == Mode::kPunishing) CHECK(ep.human_cents <= 2);
  }
}

TEST_CASE("sessions are deterministic in the seed") {
  auto a = session("best-response", Group::kExperimental, 9);
  auto b = session("best-response", Group::kExperimental, 9);
  REQUIRE(a.episodes.size() == b.episodes.size());
  for (std::size_t i = 0; i < a.episodes.size(); ++i) {
    CHECK(a.episodes[i].rng_seed == b.episodes[i].rng_seed);
    CHECK(a.episodes[i].human_cents == b.episodes[i].human_cents);
    CHECK(a.episodes[i].ticks.size() == b.episodes[i].ticks.size());
  }
}

TEST_CASE("bully persistence") {
  auto c = bully_persistence({3});
  CHECK(c.at(1) == 1.0);
  CHECK(c.at(2) == 1.0);
  CHECK(c.at(3) == 0.0);
  CHECK_THROWS_AS(bully_persistence({0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(bully_persistence({}), std::invalid_argument);
  auto m = bully_persistence({0, 1, 1, 4, 10, 2});
  CHECK(m.fraction.size() == 10);
  for (std::size_t k = 1; k < m.fraction.size(); ++k) CHECK(m.fraction[k] <= m.fraction[k - 1]);
  CHECK(m.at(1) == doctest::Approx(3.0 / 5));
}

TEST_CASE("fisher exact test") {
  ContingencyTable paper = table(0, 14, 16, 17);
  double p = fisher_exact(paper);
  CHECK(p >= 0.0013);
  CHECK(p <= 0.0019);
  CHECK(fisher_exact(table(5, 5, 5, 5)) == 1.0);
  CHECK(fisher_exact(table(10, 0, 0, 10)) ==
        doctest::Approx(fisher_direct(10, 0, 0, 10)).epsilon(1e-9));
  CHECK(p == doctest::Approx(fisher_direct(0, 14, 16, 17)).epsilon(1e-9));
  // Swapping both rows and columns is the same table.
  CHECK(fisher_exact(table(17, 16, 14, 0)) == p);
  CHECK_THROWS_AS(fisher_exact(table(0, 0, 3, 4)), std::invalid_argument);
  CHECK_THROWS_AS(fisher_exact(table(0, 2, 0, 4)), std::invalid_argument);
}

TEST_CASE("tabulation skips sessions without bullying") {
  auto t = tabulate({0, 1, 5, 2}, {1, 1, 0, 3});
  CHECK(t.n[0][0] == 1);
  CHECK(t.n[1][0] == 2);
  CHECK(t.n[0][1] == 2);
  CHECK(t.n[1][1] == 1);
}
