#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "ssim/aoi_state.hpp"
#include "ssim/correlation.hpp"
#include "ssim/quadrature.hpp"

namespace ssim {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point a, Point b);

// Node positions. Node i is reported to users as label i+1.
class Layout {
 public:
  Layout() = default;
  explicit Layout(std::vector<Point> positions);  // N >= 2, finite, pairwise distinct

  std::size_t size() const { return pos_.size(); }
  const Point& operator[](std::size_t i) const { return pos_[i]; }
  const std::vector<Point>& positions() const { return pos_; }
  double distance(std::size_t i, std::size_t j) const;
  double min_pair_distance() const;
  double max_pair_distance() const;

  // Apex s1 at (0, h), base s2 = (-d/2, 0), s3 = (d/2, 0).
  static Layout isosceles(double base, double height);
  // s2 = (0, 0), s3 = (longest, 0), s1 = (x, y).
  static Layout general(double longest, double x, double y);
  static Layout equilateral(double side);

 private:
  std::vector<Point> pos_;
};

struct Relevant {
  std::size_t node;
  Age age;
};

// argmin over non-expired nodes of lambda_d*|p - p_i| + lambda_t*age_i*dt,
// lowest index on ties. nullopt when every node is expired (no prior data).
std::optional<Relevant> most_relevant(Point p, const Layout& layout, const AoIState& state,
                                      const CorrelationParams& params);

struct PointValue {
  double value = 0.0;
  bool capped = false;  // distance to a fresh source was clamped to cap_distance
};

// Residual information at p. Distances below cap_distance are raised to it
// when the source is fresh (age 0).
PointValue point_info(Point p, const Layout& layout, const AoIState& state,
                      const CorrelationParams& params, double cap_distance);
PointValue point_info(Point p, const Layout& layout, const AoIState& state,
                      const CorrelationParams& params);

// Nonnegative increase of information at p from a fresh reading of candidate.
PointValue info_gain_at(Point p, std::size_t candidate, const Layout& layout,
                        const AoIState& state, const CorrelationParams& params,
                        double cap_distance);
PointValue info_gain_at(Point p, std::size_t candidate, const Layout& layout,
                        const AoIState& state, const CorrelationParams& params);

// Radius beyond which a single fresh node's information is below trunc_eps.
double truncation_radius(const CorrelationParams& params, double trunc_eps);

// Plane integrals of the gain field. Grids are centred on the candidate with
// the candidate on a cell corner, so every state sees the same sample points
// for a given candidate and level. Levels 0 and 1 are precomputed; gains are
// memoized per (state, candidate). Safe to share between threads.
class GainEvaluator {
 public:
  GainEvaluator(Layout layout, CorrelationParams params, QuadratureConfig quad);
  ~GainEvaluator();
  GainEvaluator(const GainEvaluator&) = delete;
  GainEvaluator& operator=(const GainEvaluator&) = delete;

  const Layout& layout() const { return layout_; }
  const CorrelationParams& params() const { return params_; }
  const QuadratureConfig& quad() const { return quad_; }

  GainResult gain(const AoIState& state, std::size_t candidate) const;

  // Gain of a first activation with no prior data, evaluated at a given
  // refinement level (identical for all candidates).
  double first_activation_gain(int level) const;

  // Integral of the information node `node` would still add if its current
  // reading (age taken from `state`) were re-read with the others as prior.
  // Zero exactly when that reading is dominated everywhere.
  GainResult residual_contribution(const AoIState& state, std::size_t node) const;

  std::size_t cached_gains() const;

 private:
  struct Grid;
  const Grid& grid(std::size_t candidate, int level) const;
  LevelSum level_sum(const AoIState& state, std::size_t candidate, int level, bool residual) const;
  GainResult integrate(const AoIState& state, std::size_t candidate, bool residual) const;

  Layout layout_;
  CorrelationParams params_;
  QuadratureConfig quad_;
  double radius_;
  std::vector<std::unique_ptr<Grid>> grids_;  // [candidate * 2 + level], levels 0 and 1
  struct Key {
    AoIState state;
    std::size_t candidate;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      return AoIStateHash{}(k.state) * 31u + k.candidate;
    }
  };
  mutable std::mutex mu_;
  mutable std::unordered_map<Key, GainResult, KeyHash> memo_;
  mutable std::unordered_map<int, double> first_gain_;
};

// One-off convenience wrapper; prefer a shared GainEvaluator in loops.
GainResult total_gain(std::size_t candidate, const Layout& layout, const AoIState& state,
                      const CorrelationParams& params, const QuadratureConfig& quad);

struct RegionLabel {
  std::optional<std::size_t> node;  // nullopt when all nodes are expired
  bool boundary = false;            // p lies on a region boundary (tie)
};

// Region membership through the pairwise inequalities
// |p - p_i| - |p - p_j| < (lambda_t/lambda_d) * (age_j - age_i) * dt.
RegionLabel classify_region(Point p, const Layout& layout, const AoIState& state,
                            const CorrelationParams& params);

struct PairCurve {
  std::size_t i;
  std::size_t j;
  bool exists;
};

// Whether the boundary curve between each pair's regions exists:
// d_ij > (lambda_t/lambda_d) * |age_i - age_j| * dt. Pairs involving an
// expired node report false.
std::vector<PairCurve> curve_existence(const Layout& layout, const AoIState& state,
                                       const CorrelationParams& params);

// Integral of -1/2 ln(1 - rho^2) over the unit disk in correlation
// coordinates (exact value pi/2), used as a self-test of the quadrature.
GainResult validate_plane_integral(const QuadratureConfig& quad = QuadratureConfig::plane_selftest());

// CSV rows x,y,info,region_label over a rectangle (label 1-based, 0 = none).
void write_field_csv(std::ostream& os, const Layout& layout, const AoIState& state,
                     const CorrelationParams& params, double x0, double x1, double y0, double y1,
                     double step);

}  // namespace ssim
