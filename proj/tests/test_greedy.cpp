#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ssim/greedy.hpp"

using namespace ssim;

namespace {

constexpr Age X = kExpired;
const CorrelationParams P{};

std::vector<std::size_t> actions_of(const std::string& digits, std::size_t reps) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < reps; ++r)
    for (char c : digits) out.push_back(static_cast<std::size_t>(c - '1'));
  return out;
}

ScheduleTrace run(const Layout& l, std::size_t steps, const CorrelationParams& p = P,
                  bool no_repeat = true) {
  const MdpModel m(l, p, no_repeat);
  const GainEvaluator ev(l, p, QuadratureConfig::defaults(p));
  return simulate(m, MdpState::initial(l.size()), steps, ev, greedy_policy(m, ev));
}

}  // namespace

TEST_CASE("greedy step") {
  const QuadratureConfig q = QuadratureConfig::defaults(P);
  SUBCASE("equilateral above twice the slot distance: [2,1,3] activates node 3") {
    const MdpModel m(Layout::equilateral(100), P);
    const GainEvaluator ev(m.layout, P, q);
    const Decision d = greedy_step({AoIState{2, 1, 3}, 1}, m, ev);
    CHECK(d.action == 2);
    CHECK_FALSE(d.degenerate);
  }
  SUBCASE("the just-activated node is not chosen when repeats are allowed") {
    const MdpModel m(Layout::isosceles(120, 90), P, false);
    const GainEvaluator ev(m.layout, P, q);
    for (const AoIState& s : {AoIState{0, 2, 1}, AoIState{1, 0, X}, AoIState{3, 2, 0}}) {
      std::size_t fresh = 0;
      while (s[fresh] != 0) ++fresh;
      CHECK(greedy_step({s, std::nullopt}, m, ev).action != fresh);
    }
  }
  SUBCASE("mirrored two-node state is degenerate") {
    const MdpModel m(Layout({{0, 0}, {100, 0}}), P);
    const GainEvaluator ev(m.layout, P, q);
    const Decision d = greedy_step(MdpState::initial(2), m, ev);
    CHECK(d.degenerate);
    CHECK(d.action == 0);
  }
}

TEST_CASE("simulation") {
  SUBCASE("first step earns the full normalized reward") {
    const ScheduleTrace t = run(Layout::isosceles(100, 88), 4);
    CHECK(t.rewards[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.states[0] == MdpState::initial(3));
  }
  SUBCASE("one step") {
    const ScheduleTrace t = run(Layout::equilateral(100), 1);
    CHECK(t.size() == 1);
    CHECK(t.states.size() == 1);
    CHECK(t.gains.size() == 1);
  }
  SUBCASE("equilateral settles into the three-cycle") {
    const ScheduleTrace t = run(Layout::equilateral(100), 30);
    const PeriodicSchedule p = detect_cycle(t);
    CHECK(p.label() == "123");
    for (double f : p.activation_fractions) CHECK(f == doctest::Approx(1.0 / 3));
    CHECK(p.stddev_reward() < 1e-4);
    for (std::size_t i = t.size() - 6; i + 1 < t.size(); ++i)
      CHECK(t.actions[i + 1] == (t.actions[i] + 1) % 3);
  }
  SUBCASE("chosen gains are positive unless degenerate") {
    const ScheduleTrace t = run(Layout::isosceles(150, 88), 40);
    for (std::size_t i = 0; i < t.size(); ++i)
      if (!t.degenerate[i]) CHECK(t.gains[i].value > 0.0);
  }
  SUBCASE("no repeats emerge without the rule") {
    const ScheduleTrace t = run(Layout::isosceles(90, 88), 40, P, false);
    for (std::size_t i = 3; i + 1 < t.size(); ++i) CHECK(t.actions[i] != t.actions[i + 1]);
  }
  SUBCASE("decisions are invariant under joint rescaling") {
    const double f = 2.0;
    CorrelationParams p2 = P;
    p2.lambda_d = P.lambda_d * f;
    const Layout a = Layout::isosceles(130, 88);
    const Layout b = Layout::isosceles(130 / f, 88 / f);
    CHECK(run(a, 30).actions == run(b, 30, p2).actions);
  }
}

TEST_CASE("cycle detection on action sequences") {
  SUBCASE("123") {
    const auto p = detect_cycle(actions_of("123", 8), 3);
    CHECK(p.periodic);
    CHECK(p.label() == "123");
    for (double f : p.activation_fractions) CHECK(f == doctest::Approx(1.0 / 3));
  }
  SUBCASE("1213") {
    const auto p = detect_cycle(actions_of("1213", 8), 3);
    CHECK(p.label() == "1213");
    CHECK(p.activation_fractions[0] == doctest::Approx(0.5));
  }
  SUBCASE("23") {
    const auto p = detect_cycle(actions_of("23", 10), 3);
    CHECK(p.label() == "23");
    CHECK(p.activation_fractions[0] == 0.0);
  }
  SUBCASE("rotation normalization") {
    CHECK(detect_cycle(actions_of("231", 8), 3).label() == "123");
    CHECK(normalize_rotation({2, 0, 1}) == std::vector<std::size_t>{0, 1, 2});
    CHECK(cycle_label({0, 1, 0, 2}, 3) == "1213");
  }
  SUBCASE("preperiod is skipped") {
    auto a = actions_of("3", 1);
    const auto tail = actions_of("12", 10);
    a.insert(a.end(), tail.begin(), tail.end());
    const auto p = detect_cycle(a, 3);
    CHECK(p.label() == "12");
    CHECK(p.preperiod == 1);
  }
  SUBCASE("too short to confirm a period") {
    const auto p = detect_cycle(actions_of("1213", 2), 3);
    CHECK_FALSE(p.periodic);
    CHECK(p.label() == "aperiodic");
  }
  SUBCASE("fractions sum to one") {
    const auto p = detect_cycle(actions_of("12321323", 5), 3);
    CHECK(std::accumulate(p.activation_fractions.begin(), p.activation_fractions.end(), 0.0) ==
          doctest::Approx(1.0));
  }
}

TEST_CASE("state-based cycle detection aligns rewards with the cycle") {
  const ScheduleTrace t = run(Layout::isosceles(70, 88), 64);
  const PeriodicSchedule p = detect_cycle(t);
  REQUIRE(p.periodic);
  CHECK(p.label() == "1213");
  REQUIRE(p.cycle_rewards.size() == p.cycle.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.cycle.size(); ++i) sum += t.rewards[p.preperiod + i];
  CHECK(p.mean_reward() == doctest::Approx(sum / static_cast<double>(p.cycle.size())));
}
