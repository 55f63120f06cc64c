#include "stackel/harness.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <stdexcept>

namespace stackel::harness {

using bridge::Mover;
using bridge::StartAssignment;

Step fair_step(const Episode& ep, bool horn_at_start) {
  const auto& s = ep.state();
  const auto& track = ep.track();
  if (track.finished(s.human_cell)) return Step::kStay;
  bool right = bridge::right_of_way(ep.start()) == Mover::kHuman && !horn_at_start;
  if (right || track.finished(s.sdc_cell)) return Step::kForward;
  if (track.on_bridge(s.human_cell)) return track.on_bridge(s.sdc_cell) ? Step::kBackward : Step::kForward;
  return s.human_cell < track.entrance() ? Step::kForward : Step::kStay;
}

namespace {

class AlwaysBully : public HumanModel {
 public:
  std::string name() const override { return "always-bully"; }
  Step act(const Episode&) override { return Step::kForward; }
  std::unique_ptr<HumanModel> clone() const override { return std::make_unique<AlwaysBully>(*this); }
};

class AlwaysFair : public HumanModel {
 public:
  std::string name() const override { return "always-fair"; }
  void begin_episode(const Episode& ep) override { horn_ = ep.state().horn; }
  Step act(const Episode& ep) override { return fair_step(ep, horn_); }
  std::unique_ptr<HumanModel> clone() const override { return std::make_unique<AlwaysFair>(*this); }

 private:
  bool horn_ = false;
};

// Bullies until it has sat through `threshold` punishing rounds, which it
// recognizes by the horn sounding as a round starts.
class Adaptive : public HumanModel {
 public:
  explicit Adaptive(int threshold) : threshold_(threshold) {}
  std::string name() const override { return "adaptive:" + std::to_string(threshold_); }
  void begin_episode(const Episode& ep) override {
    horn_ = ep.state().horn;
    if (horn_) ++punished_;
  }
  Step act(const Episode& ep) override {
    return punished_ >= threshold_ ? fair_step(ep, horn_) : Step::kForward;
  }
  std::unique_ptr<HumanModel> clone() const override { return std::make_unique<Adaptive>(*this); }

 private:
  int threshold_;
  int punished_ = 0;
  bool horn_ = false;
};

class Scripted : public HumanModel {
 public:
  explicit Scripted(std::string actions) : actions_(std::move(actions)) {}
  std::string name() const override { return "scripted:" + actions_; }
  void begin_episode(const Episode&) override { next_ = 0; }
  Step act(const Episode&) override {
    if (next_ >= actions_.size()) return Step::kStay;
    char c = actions_[next_++];
    return c == 'F' ? Step::kForward : c == 'B' ? Step::kBackward : Step::kStay;
  }
  std::unique_ptr<HumanModel> clone() const override { return std::make_unique<Scripted>(*this); }

 private:
  std::string actions_;
  std::size_t next_ = 0;
};

// Plans each round by searching every action sequence against the SDC's
// controller, keeping the highest payoff and, among those, the first found.
class BestResponse : public HumanModel {
 public:
  std::string name() const override { return "best-response"; }
  void begin_episode(const Episode& ep) override {
    plan_ = search(ep);
    next_ = 0;
  }
  Step act(const Episode&) override { return next_ < plan_.size() ? plan_[next_++] : Step::kStay; }
  std::unique_ptr<HumanModel> clone() const override { return std::make_unique<BestResponse>(*this); }

 private:
  struct Branch {
    Episode ep;
    std::vector<Step> history;
  };

  static std::vector<Step> search(const Episode& start) {
    std::vector<Branch> layer{{start, {}}};
    Cents best = -1;
    std::vector<Step> best_history;
    while (!layer.empty()) {
      std::map<std::vector<std::int64_t>, Branch> next;
      for (const auto& b : layer)
        for (Step h : {Step::kForward, Step::kStay, Step::kBackward}) {
          Branch c = b;
          c.ep.step(h);
          c.history.push_back(h);
          if (c.ep.done()) {
            Cents v = c.ep.record().human_cents;
            if (v > best) {
              best = v;
              best_history = c.history;
            }
          } else {
            next.try_emplace(c.ep.key(), std::move(c));
          }
        }
      layer.clear();
      for (auto& [k, b] : next) layer.push_back(std::move(b));
    }
    return best_history;
  }

  std::vector<Step> plan_;
  std::size_t next_ = 0;
};

}  // namespace

std::unique_ptr<HumanModel> make_human_model(const std::string& spec) {
  if (spec == "always-bully") return std::make_unique<AlwaysBully>();
  if (spec == "always-fair") return std::make_unique<AlwaysFair>();
  if (spec == "best-response") return std::make_unique<BestResponse>();
  if (spec.rfind("adaptive:", 0) == 0) {
    std::string n = spec.substr(9);
    if (n.empty() || !std::all_of(n.begin(), n.end(), [](char c) { return c >= '0' && c <= '9'; }))
      throw std::invalid_argument("adaptive threshold must be a nonnegative integer: " + spec);
    return std::make_unique<Adaptive>(std::stoi(n));
  }
  if (spec.rfind("scripted:", 0) == 0) {
    std::string a = spec.substr(9);
    if (a.find_first_not_of("FSB") != std::string::npos)
      throw std::invalid_argument("scripted actions must be F, S or B: " + spec);
    return std::make_unique<Scripted>(a);
  }
  throw std::invalid_argument("unknown human model: " + spec);
}

const char* to_string(Group g) { return g == Group::kControl ? "control" : "experimental"; }

int SessionRecord::bully_count() const {
  return static_cast<int>(std::count_if(episodes.begin(), episodes.end(),
                                        [](const EpisodeRecord& e) { return e.verdict.bullied; }));
}

EpisodeRecord run_episode(HumanModel& human, Mode mode, const BridgeConfig& cfg,
                          std::shared_ptr<const PunishmentPlan> plan, StartAssignment start,
                          int index, std::uint64_t seed) {
  if (mode == Mode::kPunishing && !plan)
    throw std::invalid_argument("punishing mode needs a solved punishment plan");
  Episode ep(cfg, std::move(plan), mode, start, index, seed);
  human.begin_episode(ep);
  while (!ep.done()) ep.step(human.act(ep));
  EpisodeRecord rec = ep.record();
  human.end_episode(rec);
  return rec;
}

SessionRecord run_session(HumanModel& human, Group group, int episodes, const BridgeConfig& cfg,
                          std::shared_ptr<const PunishmentPlan> plan, std::uint64_t seed) {
  SessionRecord s;
  s.human = human.name();
  s.group = group;
  s.seed = seed;
  std::mt19937_64 seeds(seed);
  Mode mode = Mode::kCooperative;
  for (int i = 0; i < episodes; ++i) {
    auto start = i % 2 == 0 ? StartAssignment::kSdcClose : StartAssignment::kHumanClose;
    s.episodes.push_back(run_episode(human, mode, cfg, plan, start, i, seeds()));
    if (group == Group::kExperimental) mode = bridge::next_mode(mode, s.episodes.back().verdict);
  }
  return s;
}

double PersistenceCurve::at(int k) const {
  if (k < 1) return 1.0;
  return k <= static_cast<int>(fraction.size()) ? fraction[k - 1] : 0.0;
}

PersistenceCurve bully_persistence(const std::vector<int>& bully_counts) {
  std::vector<int> kept;
  for (int c : bully_counts)
    if (c > 0) kept.push_back(c);
  if (kept.empty()) throw std::invalid_argument("no session has a bully event");
  int top = *std::max_element(kept.begin(), kept.end());
  PersistenceCurve curve;
  for (int k = 1; k <= top; ++k) {
    auto more = std::count_if(kept.begin(), kept.end(), [k](int c) { return c > k; });
    curve.fraction.push_back(static_cast<double>(more) / static_cast<double>(kept.size()));
  }
  return curve;
}

ContingencyTable tabulate(const std::vector<int>& control_counts,
                          const std::vector<int>& experimental_counts) {
  ContingencyTable t;
  auto fill = [&](const std::vector<int>& counts, int col) {
    for (int c : counts) {
      if (c == 1) ++t.n[0][col];
      if (c > 1) ++t.n[1][col];
    }
  };
  fill(control_counts, 0);
  fill(experimental_counts, 1);
  return t;
}

namespace {

Rational binomial(std::int64_t n, std::int64_t k) {
  Rational r(1);
  for (std::int64_t i = 1; i <= k; ++i) r = r * Rational(n - k + i) / Rational(i);
  return r;
}

}  // namespace

double fisher_exact(const ContingencyTable& t) {
  std::int64_t a = t.n[0][0], b = t.n[0][1], c = t.n[1][0], d = t.n[1][1];
  if (a < 0 || b < 0 || c < 0 || d < 0) throw std::invalid_argument("negative count");
  std::int64_t r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d, n = r1 + r2;
  if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) throw std::invalid_argument("degenerate margins");
  Rational total = binomial(n, c1);
  auto prob = [&](std::int64_t x) { return binomial(r1, x) * binomial(r2, c1 - x) / total; };
  Rational observed = prob(a);
  Rational p(0);
  for (std::int64_t x = std::max<std::int64_t>(0, c1 - r2); x <= std::min(r1, c1); ++x) {
    Rational q = prob(x);
    if (q <= observed) p += q;
  }
  return std::min(1.0, to_double(p));
}

}  // namespace stackel::harness
