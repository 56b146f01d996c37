#include "ssim/quadrature.hpp"

#include <cmath>

namespace ssim {

void QuadratureConfig::validate() const {
  if (!(cell > 0.0) || !std::isfinite(cell)) throw std::invalid_argument("quadrature: cell must be > 0");
  if (!(tol > 0.0) || !std::isfinite(tol)) throw std::invalid_argument("quadrature: tol must be > 0");
  if (!(trunc_eps > 0.0) || !(trunc_eps < 1.0))
    throw std::invalid_argument("quadrature: trunc_eps must be in (0, 1)");
  if (max_levels < 1) throw std::invalid_argument("quadrature: max_levels must be >= 1");
}

QuadratureConfig QuadratureConfig::defaults(const CorrelationParams& params) {
  params.validate();
  QuadratureConfig q;
  q.cell = 0.05 / params.lambda_d;
  q.tol = 1e-3 / (params.lambda_d * params.lambda_d);
  q.trunc_eps = 1e-6;
  q.max_levels = 4;
  return q;
}

QuadratureConfig QuadratureConfig::plane_selftest() {
  QuadratureConfig q;
  q.cell = 0.01;
  q.tol = 5e-4;
  q.trunc_eps = 1e-6;
  q.max_levels = 12;
  return q;
}

GainResult refine_until(const std::function<LevelSum(int)>& level_sum, double tol, int max_levels,
                        int order) {
  const double denom = std::ldexp(1.0, order) - 1.0;
  LevelSum prev = level_sum(0);
  std::size_t cells = prev.cells;
  GainResult out;
  for (int level = 1; level <= max_levels; ++level) {
    LevelSum cur = level_sum(level);
    cells += cur.cells;
    out.value = cur.value;
    out.err_estimate = std::abs(cur.value - prev.value) / denom;
    out.cells_evaluated = cells;
    out.level = level;
    if (out.err_estimate <= tol) return out;
    prev = cur;
  }
  throw QuadratureError("quadrature did not reach tol " + std::to_string(tol) +
                            " (estimate " + std::to_string(out.err_estimate) + ")",
                        out);
}

GainResult integrate_rect(const std::function<double(double, double)>& f, double x0, double x1,
                          double y0, double y1, std::size_t nx0, std::size_t ny0, double tol,
                          int max_levels, int order, bool refine_y) {
  if (!(x1 > x0) || !(y1 > y0) || nx0 == 0 || ny0 == 0)
    throw std::invalid_argument("integrate_rect: empty domain");
  auto level_sum = [&](int level) {
    const std::size_t nx = nx0 << level;
    const std::size_t ny = refine_y ? (ny0 << level) : ny0;
    const double hx = (x1 - x0) / static_cast<double>(nx);
    const double hy = (y1 - y0) / static_cast<double>(ny);
    double total = 0.0;
    for (std::size_t j = 0; j < ny; ++j) {
      const double y = y0 + (static_cast<double>(j) + 0.5) * hy;
      double row = 0.0;
      for (std::size_t i = 0; i < nx; ++i) row += f(x0 + (static_cast<double>(i) + 0.5) * hx, y);
      total += row;
    }
    return LevelSum{total * hx * hy, nx * ny};
  };
  return refine_until(level_sum, tol, max_levels, order);
}

}  // namespace ssim
