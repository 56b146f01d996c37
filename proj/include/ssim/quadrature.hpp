#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

#include "ssim/correlation.hpp"

namespace ssim {

// Integration settings for plane integrals. `cell` is the coarsest grid
// spacing; each refinement level halves it.
struct QuadratureConfig {
  double cell = 5.0;
  double tol = 10.0;
  double trunc_eps = 1e-6;
  int max_levels = 4;  // finest level index allowed (level 0 = cell)

  void validate() const;

  // cell = 0.05/lambda_d, tol = 1e-3/lambda_d^2, trunc_eps = 1e-6.
  static QuadratureConfig defaults(const CorrelationParams& params);
  // Settings for the unit-disk self-test in correlation coordinates.
  static QuadratureConfig plane_selftest();
};

struct GainResult {
  double value = 0.0;
  double err_estimate = 0.0;
  std::size_t cells_evaluated = 0;
  int level = 0;  // finest level used
};

// Thrown when the error estimate is still above tol at max_levels.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, GainResult best)
      : std::runtime_error(what), best_(best) {}
  const GainResult& best() const { return best_; }

 private:
  GainResult best_;
};

struct LevelSum {
  double value;
  std::size_t cells;
};

// Evaluates level 0 and 1, then keeps halving until the Richardson estimate
// |S_l - S_{l-1}| / (2^order - 1) drops to tol. Returns the finest sum.
GainResult refine_until(const std::function<LevelSum(int level)>& level_sum, double tol,
                        int max_levels, int order);

// Midpoint rule on [x0,x1]x[y0,y1] with nx0 x ny0 cells at level 0. When
// refine_y is false only the x spacing is halved per level.
GainResult integrate_rect(const std::function<double(double, double)>& f, double x0, double x1,
                          double y0, double y1, std::size_t nx0, std::size_t ny0, double tol,
                          int max_levels, int order, bool refine_y = true);

}  // namespace ssim
