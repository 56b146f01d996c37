#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ssim/sweep.hpp"

using namespace ssim;

namespace {

SweepSpec iso_spec(Range d, Range h) {
  SweepSpec s;
  s.coord1 = d;
  s.coord2 = h;
  s.quad = QuadratureConfig::defaults(s.params);
  return s;
}

// Relabels 2 <-> 3 and rotation-normalizes a cycle string.
std::string mirrored(const std::string& label) {
  std::vector<std::size_t> c;
  for (char ch : label) c.push_back(ch == '2' ? 2u : ch == '3' ? 1u : 0u);
  return cycle_label(normalize_rotation(c), 3);
}

}  // namespace

TEST_CASE("ranges and enums") {
  CHECK(Range{5, 20, 5}.values() == std::vector<double>{5, 10, 15, 20});
  CHECK(Range{5, 5, 1}.values() == std::vector<double>{5});
  SweepSpec bad = iso_spec({5, 20, 0}, {5, 20, 5});
  CHECK_THROWS(bad.validate());
  CHECK(parse_sweep_mode(to_string(SweepMode::general)) == SweepMode::general);
  CHECK(parse_mechanism("longterm") == Mechanism::longterm);
  CHECK_THROWS(parse_mechanism("random"));
  for (auto eq : {BoundaryEq::s3_vs_s1_at_213, BoundaryEq::s1_vs_s2_at_321,
                  BoundaryEq::s2_vs_s1_at_inf21, BoundaryEq::s3_vs_s2_at_132})
    CHECK(parse_boundary(to_string(eq)) == eq);
  CHECK(boundary_state(BoundaryEq::s2_vs_s1_at_inf21).to_string() == "[inf,2,1]");
}

TEST_CASE("labels and families") {
  CHECK(canonical_label({0, 2, 1}, 3, SweepMode::isosceles) == "123");
  CHECK(canonical_label({0, 2, 1}, 3, SweepMode::general) == "132");
  CHECK(canonical_label({2, 0, 1, 0}, 3, SweepMode::isosceles) == "1213");
  CHECK(schedule_family({0.5, 0.25, 0.25}) == "1213");
  CHECK(schedule_family({1.0 / 3, 1.0 / 3, 1.0 / 3}) == "123");
  CHECK(schedule_family({0.0, 0.5, 0.5}) == "23");
  CHECK(schedule_family({0.25, 0.375, 0.375}) == "reduced");
  CHECK(schedule_family({0.6, 0.2, 0.2}) == "other");
}

TEST_CASE("general-mode traversal region") {
  SweepSpec s;
  s.mode = SweepMode::general;
  s.longest = 220;
  CHECK(s.layout_at(100, 100));
  CHECK_FALSE(s.layout_at(150, 50));  // beyond the half-region
  CHECK_FALSE(s.layout_at(10, 200));  // farther than the longest edge from s3
  CHECK_FALSE(s.layout_at(50, 0));
}

TEST_CASE("phase map cells") {
  SUBCASE("equilateral cell alternates") {
    const double h = 100 * std::sqrt(3.0) / 2;
    const SweepSpec s = iso_spec({100, 100, 5}, {h, h, 5});
    const PhaseMap m = run_sweep(s);
    REQUIRE(m.cells.size() == 1);
    CHECK(m.cells[0].label == "123");
    CHECK(m.cells[0].family == "123");
  }
  SUBCASE("sub-minimum layouts are degenerate") {
    SweepSpec s = iso_spec({20, 20, 5}, {15, 15, 5});
    const PhaseCell c = evaluate_layout(s, *s.layout_at(20, 15));
    CHECK(c.subminimal);
    CHECK(c.degenerate);
    CHECK(c.label == "degenerate");
    CHECK(c.flags().find("degenerate") != std::string::npos);
  }
  SUBCASE("parallel sweep is deterministic") {
    SweepSpec s = iso_spec({70, 160, 30}, {88, 88, 5});
    s.threads = 2;
    const PhaseMap a = run_sweep(s);
    s.threads = 1;
    const PhaseMap b = run_sweep(s);
    REQUIRE(a.cells.size() == b.cells.size());
    for (std::size_t k = 0; k < a.cells.size(); ++k) {
      CHECK(a.cells[k].label == b.cells[k].label);
      CHECK(a.cells[k].mean_gain == b.cells[k].mean_gain);
    }
  }
  SUBCASE("csv columns") {
    const PhaseMap m = run_sweep(iso_spec({100, 100, 5}, {88, 88, 5}));
    std::ostringstream os;
    write_phase_csv(os, m);
    CHECK(os.str().rfind("coord1,coord2,class,mean_gain,stddev_gain,flags", 0) == 0);
  }
}

TEST_CASE("mirrored general layouts give relabelled cycles") {
  SweepSpec s;
  s.mode = SweepMode::general;
  s.quad = QuadratureConfig::defaults(s.params);
  for (auto [x, y] : {std::pair{60.0, 90.0}, {90.0, 140.0}, {40.0, 60.0}}) {
    const Layout a = Layout::general(220, x, y);
    const Layout b({{220 - x, y}, {0, 0}, {220, 0}});
    const PhaseCell ca = evaluate_layout(s, a);
    const PhaseCell cb = evaluate_layout(s, b);
    CAPTURE(x);
    CAPTURE(y);
    CHECK(ca.cycle == mirrored(cb.cycle));
  }
}

TEST_CASE("boundary bisection") {
  const SweepSpec s = iso_spec({60, 100, 5}, {88, 88, 5});
  SUBCASE("no sign change is a bracket error") {
    CHECK_THROWS_AS(boundary_bisect(BoundaryEq::s3_vs_s1_at_213, s, Axis::coord1, 88, 100, 120, 1),
                    BracketError);
  }
  SUBCASE("root separates the simulated classes") {
    const BisectResult r =
        boundary_bisect(BoundaryEq::s3_vs_s1_at_213, s, Axis::coord1, 88, 75, 90, 0.25);
    const PhaseCell lo = evaluate_layout(s, Layout::isosceles(std::floor(r.root) - 1, 88));
    const PhaseCell hi = evaluate_layout(s, Layout::isosceles(std::ceil(r.root) + 1, 88));
    CHECK(lo.family == "1213");
    CHECK(hi.family == "123");
    CHECK(r.width <= 0.25);
  }
  SUBCASE("halving the tolerance moves the root by less than the old tolerance") {
    const double tol = 1.0;
    const BisectResult a =
        boundary_bisect(BoundaryEq::s3_vs_s1_at_213, s, Axis::coord1, 88, 75, 90, tol);
    const BisectResult b =
        boundary_bisect(BoundaryEq::s3_vs_s1_at_213, s, Axis::coord1, 88, 75, 90, tol / 2);
    CHECK(std::abs(a.root - b.root) < tol);
  }
}

TEST_CASE("bracket discovery and mechanism comparison") {
  SweepSpec s = iso_spec({75, 90, 5}, {88, 88, 5});
  const PhaseMap g = run_sweep(s);
  const auto seeds = discover_brackets(g);
  bool found = false;
  for (const auto& b : seeds)
    if (b.eq == BoundaryEq::s3_vs_s1_at_213) {
      found = true;
      const BisectResult r = boundary_bisect(b.eq, s, b.axis, b.fixed, b.lo, b.hi, 0.5);
      CHECK(r.root >= b.lo);
      CHECK(r.root <= b.hi);
    }
  CHECK(found);

  s.mechanism = Mechanism::longterm;
  const PhaseMap l = run_sweep(s);
  const MechanismReport rep = compare_mechanisms(g, l);
  CHECK(rep.compared == g.cells.size());
  for (const auto& c : rep.cells) {
    if (c.agree) CHECK(c.greedy_label == c.longterm_label);
    CHECK(c.longterm_mean >= c.greedy_mean - 1e-3);
  }
  std::ostringstream os;
  write_comparison_csv(os, rep);
  CHECK_FALSE(os.str().empty());
}

TEST_CASE("bracket discovery bridges degenerate cells") {
  const SweepSpec s = iso_spec({160, 170, 5}, {88, 88, 5});
  const PhaseMap m = run_sweep(s);
  REQUIRE(m.cells.size() == 3);
  CHECK(m.cells[1].degenerate);
  const auto seeds = discover_brackets(m);
  REQUIRE(seeds.size() == 1);
  CHECK(seeds[0].eq == BoundaryEq::s2_vs_s1_at_inf21);
  CHECK(seeds[0].lo == 160);
  CHECK(seeds[0].hi == 170);
  const BisectResult r = boundary_bisect(seeds[0].eq, s, seeds[0].axis, 88, 160, 170, 0.25);
  CHECK(r.root > 160);
  CHECK(r.root < 170);
}
