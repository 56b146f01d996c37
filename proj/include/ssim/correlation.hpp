#pragma once

#include <stdexcept>

namespace ssim {

// Separable exponential correlation rho(d, t) = exp(-lambda_d*d - lambda_t*t).
// All information values in this library are in nats.
struct CorrelationParams {
  double lambda_d = 0.01;  // 1/length
  double lambda_t = 0.3;   // 1/time
  double dt = 1.0;         // decision interval

  void validate() const;

  // Distance whose spatial decay equals one decision interval of temporal
  // decay: (lambda_t / lambda_d) * dt.
  double unit_distance() const { return lambda_t / lambda_d * dt; }
};

// Raised for rho >= 1, where the pointwise information diverges.
class SingularityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

double rho(double distance, double time_diff, const CorrelationParams& params);

// -1/2 ln(1 - rho^2). Throws std::invalid_argument for rho < 0 and
// SingularityError for rho >= 1.
double point_mutual_info(double rho);

// Same quantity written in terms of the exponent s = lambda_d*d + lambda_t*t,
// i.e. -1/2 log1p(-exp(-2 s)). Accurate for both small and large s;
// returns +inf at s == 0.
double info_from_exponent(double s);

}  // namespace ssim
