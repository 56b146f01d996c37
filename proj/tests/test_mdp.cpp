#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ssim/mdp.hpp"

using namespace ssim;

namespace {

constexpr Age X = kExpired;
const CorrelationParams P{};

// Independent cap oracle: brute force over both assignments of {1, 2}.
Age cap_oracle(std::size_t i, const Layout& l) {
  const double unit = P.unit_distance();
  std::vector<std::size_t> o;
  for (std::size_t j = 0; j < 3; ++j)
    if (j != i) o.push_back(j);
  const int kj = static_cast<int>(std::floor(l.distance(i, o[0]) / unit));
  const int kk = static_cast<int>(std::floor(l.distance(i, o[1]) / unit));
  return std::max(std::min(kj + 1, kk + 2), std::min(kj + 2, kk + 1));
}

Layout random_layout(std::mt19937_64& rng, double extent) {
  std::uniform_real_distribution<double> u(0.0, extent);
  for (;;) {
    Layout l({{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}});
    if (l.min_pair_distance() > 1.0) return l;
  }
}

}  // namespace

TEST_CASE("slot distances and caps") {
  SUBCASE("equilateral 100 has K = 3 and cap 4") {
    const MdpModel m(Layout::equilateral(100), P);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(m.cap[i] == 4);
      for (std::size_t j = 0; j < 3; ++j) CHECK(m.k[i][j] == (i == j ? 0 : 3));
    }
  }
  SUBCASE("K = 0 to both neighbours gives cap 1") {
    const MdpModel m(Layout::equilateral(20), P);
    for (std::size_t i = 0; i < 3; ++i) CHECK(m.cap[i] == 1);
  }
  SUBCASE("caps match the two-assignment formula on random layouts") {
    std::mt19937_64 rng(1);
    for (int k = 0; k < 200; ++k) {
      const Layout l = random_layout(rng, 400);
      const MdpModel m(l, P);
      for (std::size_t i = 0; i < 3; ++i) CHECK(m.cap[i] == cap_oracle(i, l));
    }
  }
  SUBCASE("enlarging distances never lowers a cap") {
    std::mt19937_64 rng(2);
    for (int k = 0; k < 50; ++k) {
      const Layout l = random_layout(rng, 300);
      std::vector<Point> big;
      for (const auto& p : l.positions()) big.push_back({p.x * 1.3, p.y * 1.3});
      const MdpModel a(l, P), b(Layout(big), P);
      for (std::size_t i = 0; i < 3; ++i) CHECK(b.cap[i] >= a.cap[i]);
    }
  }
  SUBCASE("generalized cap for four nodes") {
    const MdpModel m(Layout({{0, 0}, {100, 0}, {0, 100}, {100, 100}}), P);
    CHECK(m.nodes() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(m.cap[i] >= 1);
  }
}

TEST_CASE("transitions") {
  const MdpModel m(Layout::equilateral(100), P);  // caps 4
  SUBCASE("rule application") {
    const AoIState next = transition(AoIState{X, 2, 1}, 0, m);
    CHECK(next == AoIState{1, 3, 2});
  }
  SUBCASE("acted node always has age 1") {
    for (std::size_t a = 0; a < 3; ++a) CHECK(transition(AoIState{3, X, 2}, a, m)[a] == 1);
  }
  SUBCASE("a node at its cap expires") {
    const AoIState next = transition(AoIState{4, 1, 2}, 2, m);
    CHECK(next == AoIState{X, 2, 1});
  }
  SUBCASE("repeated action violates the contract") {
    const MdpState s{AoIState{2, 1, 3}, 1};
    CHECK_FALSE(is_legal(s, 1, m));
    CHECK_THROWS_AS(transition(s, 1, m), ContractError);
    CHECK_THROWS_AS(transition(AoIState{2, 1, 3}, 1, m), ContractError);
  }
  SUBCASE("deterministic") {
    const MdpState s{AoIState{3, 2, 1}, 2};
    CHECK(transition(s, 0, m) == transition(s, 0, m));
  }
  SUBCASE("repeats allowed when the rule is off") {
    const MdpModel free(Layout::equilateral(100), P, false);
    CHECK(transition(AoIState{2, 1, 3}, 1, free) == AoIState{3, 1, 4});
  }
}

TEST_CASE("state enumeration") {
  SUBCASE("finite and consistent") {
    const MdpModel m(Layout::equilateral(100), P);
    const StateSpace sp = enumerate_states(m);
    CHECK(sp.size() > 0);
    CHECK(sp.states[0] == MdpState::initial(3));
    for (std::size_t s = 0; s < sp.size(); ++s) {
      CHECK(sp.find(sp.states[s]) == s);
      for (std::size_t a = 0; a < 3; ++a) {
        if (sp.next[s][a] < 0) {
          CHECK_FALSE(is_legal(sp.states[s], a, m));
          continue;
        }
        CHECK(sp.states[static_cast<std::size_t>(sp.next[s][a])] ==
              transition(sp.states[s], a, m));
      }
    }
  }
  SUBCASE("the last action is the node with age 1") {
    const StateSpace sp = enumerate_states(MdpModel(Layout::isosceles(150, 88), P));
    for (const auto& s : sp.states) {
      if (!s.last) continue;
      CHECK(s.aoi[*s.last] == 1);
    }
  }
  SUBCASE("closed form is reported next to the BFS count") {
    const MdpModel m(Layout::equilateral(40), P);  // K = 1 for all pairs
    const StateSpace sp = enumerate_states(m);
    const auto cf = closed_form_state_count(m);
    REQUIRE(cf);
    MESSAGE("equilateral K=1: BFS " << sp.size() << ", closed form " << *cf);
    CHECK(*cf > 0);
  }
  SUBCASE("nested layouts never shrink the reachable set") {
    std::size_t prev = 0;
    for (double side : {20.0, 40.0, 70.0, 100.0, 160.0}) {
      const std::size_t n = enumerate_states(MdpModel(Layout::equilateral(side), P)).size();
      CHECK(n >= prev);
      prev = n;
    }
  }
  SUBCASE("closed form needs three nodes") {
    CHECK_FALSE(closed_form_state_count(MdpModel(Layout({{0, 0}, {50, 0}}), P)));
  }
}

TEST_CASE("rewards") {
  const MdpModel m(Layout::isosceles(120, 88), P);
  const GainEvaluator ev(m.layout, P, QuadratureConfig::defaults(P));
  CHECK(reward(AoIState{X, X, X}, 0, ev) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(reward(AoIState{0, 2, 1}, 0, ev)) < 1e-3);
  const StateSpace sp = enumerate_states(m);
  const RewardTable rt(sp, m, ev);
  for (std::size_t s = 0; s < sp.size(); ++s)
    for (std::size_t a = 0; a < 3; ++a) {
      if (sp.next[s][a] < 0) {
        CHECK(std::isnan(rt.at(s, a)));
        continue;
      }
      CHECK(rt.at(s, a) >= 0.0);
      CHECK(rt.at(s, a) <= 1.0);
    }
  std::ostringstream os;
  write_state_space_csv(os, sp, m, rt);
  CHECK(os.str().rfind("state,last,action,legal,next_state,reward\n", 0) == 0);
}

TEST_CASE("data past the cap carries no information") {
  // Before expiry, a node one slot past its cap must be dominated everywhere
  // by the fresher readings, so re-reading it adds nothing.
  std::mt19937_64 rng(4);
  const QuadratureConfig q = QuadratureConfig::defaults(P);
  std::size_t checked = 0;
  for (int k = 0; k < 6; ++k) {
    const Layout l = random_layout(rng, 250);
    const MdpModel m(l, P);
    const GainEvaluator ev(l, P, q);
    const StateSpace sp = enumerate_states(m);
    for (std::size_t s = 0; s < sp.size(); ++s)
      for (std::size_t a = 0; a < 3; ++a) {
        if (sp.next[s][a] < 0) continue;
        std::vector<Age> raw(3);
        for (std::size_t i = 0; i < 3; ++i) {
          const Age cur = sp.states[s].aoi[i];
          raw[i] = i == a ? 1 : (cur == X ? X : cur + 1);
        }
        for (std::size_t i = 0; i < 3; ++i)
          if (raw[i] != X && raw[i] == m.cap[i] + 1) {
            CHECK(ev.residual_contribution(AoIState(raw), i).value <= q.tol);
            ++checked;
          }
      }
  }
  CHECK(checked > 0);
}
