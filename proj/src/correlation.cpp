#include "ssim/correlation.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ssim {

void CorrelationParams::validate() const {
  if (!(lambda_d > 0.0) || !std::isfinite(lambda_d))
    throw std::invalid_argument("lambda_d must be positive, got " + std::to_string(lambda_d));
  if (!(lambda_t > 0.0) || !std::isfinite(lambda_t))
    throw std::invalid_argument("lambda_t must be positive, got " + std::to_string(lambda_t));
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw std::invalid_argument("dt must be positive, got " + std::to_string(dt));
}

double rho(double distance, double time_diff, const CorrelationParams& params) {
  if (!(distance >= 0.0)) throw std::invalid_argument("rho: distance must be >= 0");
  if (!(time_diff >= 0.0)) throw std::invalid_argument("rho: time difference must be >= 0");
  return std::exp(-params.lambda_d * distance - params.lambda_t * time_diff);
}

double point_mutual_info(double rho) {
  if (!(rho >= 0.0)) throw std::invalid_argument("point_mutual_info: rho must be >= 0");
  if (rho >= 1.0) throw SingularityError("point_mutual_info: rho >= 1 carries infinite information");
  return -0.5 * std::log1p(-rho * rho);
}

double info_from_exponent(double s) {
  if (s <= 0.0) return std::numeric_limits<double>::infinity();
  return -0.5 * std::log1p(-std::exp(-2.0 * s));
}

}  // namespace ssim
