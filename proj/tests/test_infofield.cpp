#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ssim/infofield.hpp"

using namespace ssim;

namespace {

constexpr Age X = kExpired;
const CorrelationParams P{};

// Independent midpoint sum of the pointwise gain on a grid four times finer
// than the quadrature's base cell, over the same truncation disk.
double brute_gain(std::size_t cand, const Layout& layout, const AoIState& st,
                  const QuadratureConfig& quad) {
  const double h = quad.cell / 4.0;
  const double radius = truncation_radius(P, quad.trunc_eps);
  const long m = static_cast<long>(std::ceil(radius / h));
  const Point c = layout[cand];
  double sum = 0.0;
  for (long i = -m; i < m; ++i)
    for (long j = -m; j < m; ++j) {
      const double dx = (i + 0.5) * h, dy = (j + 0.5) * h;
      if (std::hypot(dx, dy) > radius) continue;
      sum += info_gain_at({c.x + dx, c.y + dy}, cand, layout, st, P, h / 2.0).value;
    }
  return sum * h * h;
}

AoIState random_state(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> a(1, 6);
  std::vector<Age> ages(n);
  for (auto& v : ages) {
    const int k = a(rng);
    v = k == 6 ? X : k;
  }
  if (a(rng) <= 2) ages[static_cast<std::size_t>(a(rng)) % n] = 0;
  return AoIState(ages);
}

Layout random_layout(std::mt19937_64& rng, double extent = 300.0) {
  std::uniform_real_distribution<double> u(0.0, extent);
  for (;;) {
    std::vector<Point> pts{{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}};
    Layout l(pts);
    if (l.min_pair_distance() > 5.0) return l;
  }
}

}  // namespace

TEST_CASE("layout validation") {
  CHECK_THROWS(Layout({{0, 0}}));
  CHECK_THROWS(Layout({{0, 0}, {0, 0}}));
  CHECK_THROWS(Layout({{0, 0}, {NAN, 1}}));
  const Layout iso = Layout::isosceles(100, 88);
  CHECK(iso[0].y == 88.0);
  CHECK(iso.distance(1, 2) == doctest::Approx(100.0));
  const Layout eq = Layout::equilateral(100);
  CHECK(eq.distance(0, 1) == doctest::Approx(100.0));
  CHECK(eq.distance(1, 2) == doctest::Approx(100.0));
  CHECK(eq.distance(0, 2) == doctest::Approx(100.0));
  const Layout g = Layout::general(220, 50, 60);
  CHECK(g.max_pair_distance() == doctest::Approx(220.0));
}

TEST_CASE("most relevant node") {
  const Layout l = Layout::equilateral(100);
  SUBCASE("equal ages pick the nearest node") {
    const Point p{l[2].x - 10, l[2].y + 3};
    auto r = most_relevant(p, l, {2, 2, 2}, P);
    REQUIRE(r);
    CHECK(r->node == 2);
  }
  SUBCASE("at s2 with ages [1,2,1]") {
    // s2 costs 0.6; s1 and s3 cost 1.0 + 0.3.
    auto r = most_relevant(l[1], l, {1, 2, 1}, P);
    REQUIRE(r);
    CHECK(r->node == 1);
    CHECK(r->age == 2);
  }
  SUBCASE("a single live node wins everywhere") {
    auto r = most_relevant({1000, -400}, l, {X, 3, X}, P);
    REQUIRE(r);
    CHECK(r->node == 1);
  }
  SUBCASE("no prior data") { CHECK_FALSE(most_relevant({0, 0}, l, {X, X, X}, P)); }
  SUBCASE("ties go to the lowest index") {
    const Layout two({{0, 0}, {100, 0}});
    auto r = most_relevant({50, 7}, two, {1, 1}, P);
    REQUIRE(r);
    CHECK(r->node == 0);
  }
}

TEST_CASE("point information") {
  const Layout two({{0, 0}, {500, 0}});
  CHECK(point_info({3, 4}, two, {X, X}, P).value == 0.0);
  // distance 1/lambda_d from the only fresh node: -1/2 ln(1 - e^-2)
  CHECK(point_info({100, 0}, two, {0, X}, P).value ==
        doctest::Approx(0.0727067289344295284863240750497).epsilon(1e-12));
  double prev = INFINITY;
  for (Age a = 0; a < 6; ++a) {
    const double v = point_info({40, 30}, two, {a, X}, P).value;
    CHECK(v < prev);
    prev = v;
  }
  const PointValue at_node = point_info({0, 0}, two, {0, X}, P, 2.5);
  CHECK(at_node.capped);
  CHECK(std::isfinite(at_node.value));
}

TEST_CASE("pointwise gain") {
  const Layout l = Layout::equilateral(100);
  SUBCASE("at the candidate position the gain is positive and capped") {
    const PointValue g = info_gain_at(l[1], 1, l, {1, 3, 2}, P, 2.5);
    CHECK(g.value > 0.0);
    CHECK(g.capped);
  }
  SUBCASE("re-reading the fresh most-relevant node adds nothing") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-400, 400);
    for (int k = 0; k < 500; ++k) {
      const Point p{u(rng), u(rng)};
      const AoIState st{0, 1, 2};
      auto r = most_relevant(p, l, st, P);
      if (r->node == 0) CHECK(info_gain_at(p, 0, l, st, P).value == 0.0);
    }
  }
  SUBCASE("deep inside a fresher node's region the gain is zero") {
    // Node 1 is fresh; a point next to node 1 prefers its data over a new
    // reading of node 3 one hundred units away.
    const Point p{l[0].x + 1, l[0].y - 1};
    CHECK(info_gain_at(p, 2, l, {0, 1, 2}, P).value == 0.0);
  }
  SUBCASE("gain equals the clamped information increase") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-400, 400);
    for (int k = 0; k < 2000; ++k) {
      const Point p{u(rng), u(rng)};
      const AoIState before = random_state(rng, 3);
      const std::size_t cand = static_cast<std::size_t>(k % 3);
      std::vector<Age> after_ages(before.ages().begin(), before.ages().end());
      for (auto& a : after_ages)
        if (a == 0) a = 1;
      after_ages[cand] = 0;
      const double pre = point_info(p, l, before, P, 0.5).value;
      const double post = point_info(p, l, AoIState(after_ages), P, 0.5).value;
      const double g = info_gain_at(p, cand, l, before, P, 0.5).value;
      CHECK(g >= 0.0);
      CHECK(g >= post - pre - 1e-12);
    }
  }
}

TEST_CASE("truncation radius bounds a fresh node's information") {
  const double r = truncation_radius(P, 1e-6);
  CHECK(point_info({r, 0}, Layout({{0, 0}, {1e6, 0}}), {0, X}, P).value ==
        doctest::Approx(1e-6).epsilon(1e-6));
  CHECK(point_info({r * 1.01, 0}, Layout({{0, 0}, {1e6, 0}}), {0, X}, P).value < 1e-6);
}

TEST_CASE("first activation gain matches the closed-form plane integral") {
  // Integral over the plane of -1/2 ln(1 - e^{-2 lambda_d r}) is pi zeta(3) / (4 lambda_d^2).
  const double zeta3 = 1.2020569031595942854;
  const double exact = std::numbers::pi * zeta3 / (4.0 * P.lambda_d * P.lambda_d);
  const QuadratureConfig q = QuadratureConfig::defaults(P);
  const GainResult g = total_gain(0, Layout::equilateral(100), {X, X, X}, P, q);
  CHECK(std::abs(g.value - exact) < 3 * q.tol);
}

TEST_CASE("total gain of the just-activated node is zero") {
  const QuadratureConfig q = QuadratureConfig::defaults(P);
  GainEvaluator ev(Layout::isosceles(120, 90), P, q);
  CHECK(ev.gain({2, 0, 1}, 1).value < q.tol);
  CHECK(ev.gain({0, 3, X}, 0).value < q.tol);
}

TEST_CASE("mirrored two-node states give equal gains") {
  const QuadratureConfig q = QuadratureConfig::defaults(P);
  GainEvaluator ev(Layout({{0, 0}, {100, 0}}), P, q);
  for (auto [a, b] : {std::pair<Age, Age>{1, 2}, {2, X}, {1, 3}}) {
    const double g0 = ev.gain(AoIState{a, b}, 0).value;
    const double g1 = ev.gain(AoIState{b, a}, 1).value;
    CHECK(std::abs(g0 - g1) <= 2 * q.tol);
  }
}

TEST_CASE("two close nodes: either activation after [inf,1] gains the same") {
  const QuadratureConfig q = QuadratureConfig::defaults(P);
  for (double d : {5.0, 15.0, 25.0}) {
    GainEvaluator ev(Layout({{0, 0}, {d, 0}}), P, q);
    const GainResult g0 = ev.gain({X, 1}, 0);
    const GainResult g1 = ev.gain({X, 1}, 1);
    CHECK(std::abs(g0.value - g1.value) <= 2 * q.tol);
  }
}

TEST_CASE("total gain agrees with a brute-force Riemann sum") {
  std::mt19937_64 rng(11);
  const QuadratureConfig q = QuadratureConfig::defaults(P);
  for (int k = 0; k < 20; ++k) {
    const Layout l = random_layout(rng);
    const AoIState st = random_state(rng, 3);
    const std::size_t cand = static_cast<std::size_t>(k % 3);
    const double fast = total_gain(cand, l, st, P, q).value;
    const double slow = brute_gain(cand, l, st, q);
    CAPTURE(st.to_string());
    CHECK(fast >= 0.0);
    CHECK(std::abs(fast - slow) <= std::max(3 * q.tol, 0.01 * std::abs(slow)));
  }
}

TEST_CASE("argmax over candidates ignores the logarithm base") {
  std::mt19937_64 rng(13);
  const QuadratureConfig q = QuadratureConfig::defaults(P);
  for (int k = 0; k < 5; ++k) {
    GainEvaluator ev(random_layout(rng), P, q);
    const AoIState st = random_state(rng, 3);
    std::size_t a = 0, b = 0;
    for (std::size_t c = 1; c < 3; ++c) {
      if (ev.gain(st, c).value > ev.gain(st, a).value) a = c;
      if (ev.gain(st, c).value / std::log(2.0) > ev.gain(st, b).value / std::log(2.0)) b = c;
    }
    CHECK(a == b);
  }
}

TEST_CASE("gains are memoized") {
  GainEvaluator ev(Layout::equilateral(100), P, QuadratureConfig::defaults(P));
  const auto a = ev.gain({2, 1, 3}, 2);
  const auto b = ev.gain({2, 1, 3}, 2);
  CHECK(a.value == b.value);
  CHECK(ev.cached_gains() == 1);
}

TEST_CASE("region classification") {
  SUBCASE("equal ages give Voronoi cells") {
    const Layout l = Layout::equilateral(100);
    CHECK(classify_region({l[0].x, l[0].y + 5}, l, {2, 2, 2}, P).node == 0u);
    CHECK(classify_region({l[2].x + 5, l[2].y}, l, {2, 2, 2}, P).node == 2u);
  }
  SUBCASE("bisector point with equal ages is flagged") {
    const Layout two({{0, 0}, {100, 0}});
    const RegionLabel r = classify_region({50, 20}, two, {1, 1}, P);
    CHECK(r.boundary);
    CHECK(r.node == 0u);
  }
  SUBCASE("all expired has no region") {
    CHECK_FALSE(classify_region({0, 0}, Layout::equilateral(50), {X, X, X}, P).node);
  }
  SUBCASE("agrees with the argmin on random samples") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-200, 500);
    std::size_t mismatches = 0;
    for (int k = 0; k < 10000; ++k) {
      const Layout l = random_layout(rng);
      const AoIState st = random_state(rng, 3);
      const Point p{u(rng), u(rng)};
      const RegionLabel r = classify_region(p, l, st, P);
      const auto m = most_relevant(p, l, st, P);
      if (r.node.has_value() != m.has_value() || (m && *r.node != m->node)) ++mismatches;
    }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("boundary curve existence") {
  auto exists = [](const std::vector<PairCurve>& v, std::size_t i, std::size_t j) {
    for (const auto& c : v)
      if (c.i == i && c.j == j) return c.exists;
    FAIL("pair not reported");
    return false;
  };
  // (lambda_t/lambda_d) dt = 30
  const auto small = curve_existence(Layout::equilateral(30), {1, 3, 2}, P);
  CHECK_FALSE(exists(small, 0, 1));  // gap 2 needs d > 60
  const auto same = curve_existence(Layout::equilateral(30), {2, 2, 2}, P);
  CHECK(exists(same, 0, 1));
  const auto wide = curve_existence(Layout::equilateral(100), {1, 2, 3}, P);
  CHECK(exists(wide, 0, 1));
  const auto dead = curve_existence(Layout::equilateral(100), {X, 2, 3}, P);
  CHECK_FALSE(exists(dead, 0, 1));
}

TEST_CASE("plane integral self-test") {
  const double half_pi = std::numbers::pi / 2;
  CHECK(std::abs(validate_plane_integral().value - half_pi) < 1e-3);

  QuadratureConfig coarse = QuadratureConfig::plane_selftest();
  coarse.tol = 1e9;
  QuadratureConfig fine = coarse;
  fine.cell = coarse.cell / 2;
  CHECK(std::abs(validate_plane_integral(fine).value - half_pi) <
        std::abs(validate_plane_integral(coarse).value - half_pi));

  QuadratureConfig tight = QuadratureConfig::plane_selftest();
  tight.tol = 1e-5;
  tight.max_levels = 16;
  CHECK(std::abs(validate_plane_integral(tight).value - half_pi) < 1e-4);
}

TEST_CASE("field dump") {
  std::ostringstream os;
  write_field_csv(os, Layout::equilateral(100), {1, 2, 3}, P, -100, 100, -100, 100, 50);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "x,y,info,region_label");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 25);
}
