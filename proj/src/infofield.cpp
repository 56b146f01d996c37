#include "ssim/infofield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

namespace ssim {

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

Layout::Layout(std::vector<Point> positions) : pos_(std::move(positions)) {
  if (pos_.size() < 2) throw std::invalid_argument("Layout: need at least 2 nodes");
  for (const auto& p : pos_)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw std::invalid_argument("Layout: non-finite position");
  for (std::size_t i = 0; i < pos_.size(); ++i)
    for (std::size_t j = i + 1; j < pos_.size(); ++j)
      if (pos_[i].x == pos_[j].x && pos_[i].y == pos_[j].y)
        throw std::invalid_argument("Layout: nodes " + std::to_string(i + 1) + " and " +
                                    std::to_string(j + 1) + " coincide");
}

double Layout::distance(std::size_t i, std::size_t j) const {
  return ssim::distance(pos_.at(i), pos_.at(j));
}

double Layout::min_pair_distance() const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t j = i + 1; j < size(); ++j) m = std::min(m, distance(i, j));
  return m;
}

double Layout::max_pair_distance() const {
  double m = 0.0;
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t j = i + 1; j < size(); ++j) m = std::max(m, distance(i, j));
  return m;
}

Layout Layout::isosceles(double base, double height) {
  if (!(base > 0.0) || !(height > 0.0))
    throw std::invalid_argument("Layout::isosceles: base and height must be > 0");
  return Layout({{0.0, height}, {-base / 2.0, 0.0}, {base / 2.0, 0.0}});
}

Layout Layout::general(double longest, double x, double y) {
  if (!(longest > 0.0)) throw std::invalid_argument("Layout::general: longest must be > 0");
  return Layout({{x, y}, {0.0, 0.0}, {longest, 0.0}});
}

Layout Layout::equilateral(double side) {
  return isosceles(side, side * std::sqrt(3.0) / 2.0);
}

std::optional<Relevant> most_relevant(Point p, const Layout& layout, const AoIState& state,
                                      const CorrelationParams& params) {
  if (state.size() != layout.size())
    throw std::invalid_argument("most_relevant: state size does not match layout");
  std::optional<Relevant> best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (state.expired(i)) continue;
    const double cost = params.lambda_d * distance(p, layout[i]) +
                        params.lambda_t * static_cast<double>(state[i]) * params.dt;
    if (!best || cost < best_cost) {
      best = Relevant{i, state[i]};
      best_cost = cost;
    }
  }
  return best;
}

namespace {

double default_cap(const CorrelationParams& params) {
  return QuadratureConfig::defaults(params).cell / 2.0;
}

// Exponent lambda_d*r + lambda_t*age*dt with the cap applied to fresh sources.
double source_exponent(double r, Age age, const CorrelationParams& params, double cap,
                       bool& capped) {
  if (age == 0 && r < cap) {
    r = cap;
    capped = true;
  }
  return params.lambda_d * r + params.lambda_t * static_cast<double>(age) * params.dt;
}

}  // namespace

PointValue point_info(Point p, const Layout& layout, const AoIState& state,
                      const CorrelationParams& params, double cap_distance) {
  auto rel = most_relevant(p, layout, state, params);
  if (!rel) return {};
  PointValue out;
  const double s =
      source_exponent(distance(p, layout[rel->node]), rel->age, params, cap_distance, out.capped);
  out.value = info_from_exponent(s);
  return out;
}

PointValue point_info(Point p, const Layout& layout, const AoIState& state,
                      const CorrelationParams& params) {
  return point_info(p, layout, state, params, default_cap(params));
}

PointValue info_gain_at(Point p, std::size_t candidate, const Layout& layout,
                        const AoIState& state, const CorrelationParams& params,
                        double cap_distance) {
  if (candidate >= layout.size()) throw std::out_of_range("info_gain_at: candidate out of range");
  PointValue out;
  const double s_new =
      source_exponent(distance(p, layout[candidate]), 0, params, cap_distance, out.capped);
  const double after = info_from_exponent(s_new);
  const PointValue before = point_info(p, layout, state, params, cap_distance);
  out.capped = out.capped || before.capped;
  out.value = std::max(0.0, after - before.value);
  return out;
}

PointValue info_gain_at(Point p, std::size_t candidate, const Layout& layout,
                        const AoIState& state, const CorrelationParams& params) {
  return info_gain_at(p, candidate, layout, state, params, default_cap(params));
}

double truncation_radius(const CorrelationParams& params, double trunc_eps) {
  params.validate();
  if (!(trunc_eps > 0.0)) throw std::invalid_argument("truncation_radius: trunc_eps must be > 0");
  // -1/2 ln(1 - e^{-2 lambda_d R}) = eps  <=>  e^{-2 lambda_d R} = 1 - e^{-2 eps}
  return -std::log(-std::expm1(-2.0 * trunc_eps)) / (2.0 * params.lambda_d);
}

// Sample points of one candidate's grid at one level: per point the squared
// spatial correlation e^{-2 lambda_d r_j} to every node and log(1 - e_c).
struct GainEvaluator::Grid {
  double h = 0.0;
  std::size_t nodes = 0;
  std::vector<double> corr;     // [k * nodes + j]
  std::vector<double> log_num;  // [k]
};

namespace {

// Visits midpoints of the candidate-centred grid inside the truncation disk.
// f(dx, dy, r_candidate) with offsets relative to the candidate.
template <class F>
void for_each_point(double h, double radius, F&& f) {
  const long m = static_cast<long>(std::ceil(radius / h));
  for (long iy = -m; iy < m; ++iy) {
    const double dy = (static_cast<double>(iy) + 0.5) * h;
    for (long ix = -m; ix < m; ++ix) {
      const double dx = (static_cast<double>(ix) + 0.5) * h;
      const double r = std::hypot(dx, dy);
      if (r > radius) continue;
      f(dx, dy, r);
    }
  }
}

}  // namespace

GainEvaluator::GainEvaluator(Layout layout, CorrelationParams params, QuadratureConfig quad)
    : layout_(std::move(layout)), params_(params), quad_(quad) {
  params_.validate();
  quad_.validate();
  radius_ = truncation_radius(params_, quad_.trunc_eps);
  const std::size_t n = layout_.size();
  grids_.resize(n * 2);
  for (std::size_t c = 0; c < n; ++c) {
    for (int level = 0; level < 2; ++level) {
      auto g = std::make_unique<Grid>();
      g->h = std::ldexp(quad_.cell, -level);
      g->nodes = n;
      const double cap = g->h / 2.0;
      for_each_point(g->h, radius_, [&](double dx, double dy, double rc) {
        for (std::size_t j = 0; j < n; ++j) {
          double r = j == c ? rc
                            : std::hypot(dx + (layout_[c].x - layout_[j].x),
                                         dy + (layout_[c].y - layout_[j].y));
          g->corr.push_back(std::exp(-2.0 * params_.lambda_d * r));
        }
        g->log_num.push_back(std::log1p(-std::exp(-2.0 * params_.lambda_d * std::max(rc, cap))));
      });
      grids_[c * 2 + static_cast<std::size_t>(level)] = std::move(g);
    }
  }
}

GainEvaluator::~GainEvaluator() = default;

const GainEvaluator::Grid& GainEvaluator::grid(std::size_t candidate, int level) const {
  return *grids_[candidate * 2 + static_cast<std::size_t>(level)];
}

LevelSum GainEvaluator::level_sum(const AoIState& state, std::size_t candidate, int level,
                                  bool residual) const {
  const std::size_t n = layout_.size();
  std::vector<double> decay(n, 0.0);  // e^{-2 lambda_t age dt}, 0 for expired
  for (std::size_t j = 0; j < n; ++j)
    if (!state.expired(j))
      decay[j] = std::exp(-2.0 * params_.lambda_t * static_cast<double>(state[j]) * params_.dt);
  const double cand_decay = decay[candidate];
  if (residual) decay[candidate] = 0.0;

  double total = 0.0;
  std::size_t count = 0;
  auto accumulate = [&](const double* corr, double log_num) {
    double prior = 0.0;
    for (std::size_t j = 0; j < n; ++j) prior = std::max(prior, corr[j] * decay[j]);
    const double num = residual ? std::log1p(-corr[candidate] * cand_decay) : log_num;
    const double g = 0.5 * (std::log1p(-prior) - num);
    if (g > 0.0) total += g;
    ++count;
  };

  double h;
  if (level < 2) {
    const Grid& g = grid(candidate, level);
    h = g.h;
    const std::size_t pts = g.log_num.size();
    for (std::size_t k = 0; k < pts; ++k) accumulate(&g.corr[k * n], g.log_num[k]);
  } else {
    h = std::ldexp(quad_.cell, -level);
    const double cap = h / 2.0;
    std::vector<double> corr(n);
    const Point c = layout_[candidate];
    for_each_point(h, radius_, [&](double dx, double dy, double rc) {
      for (std::size_t j = 0; j < n; ++j) {
        double r = j == candidate
                       ? rc
                       : std::hypot(dx + (c.x - layout_[j].x), dy + (c.y - layout_[j].y));
        corr[j] = std::exp(-2.0 * params_.lambda_d * r);
      }
      accumulate(corr.data(),
                 std::log1p(-std::exp(-2.0 * params_.lambda_d * std::max(rc, cap))));
    });
  }
  return {total * h * h, count};
}

GainResult GainEvaluator::integrate(const AoIState& state, std::size_t candidate,
                                    bool residual) const {
  if (candidate >= layout_.size()) throw std::out_of_range("gain: candidate out of range");
  if (state.size() != layout_.size())
    throw std::invalid_argument("gain: state size does not match layout");
  return refine_until(
      [&](int level) { return level_sum(state, candidate, level, residual); }, quad_.tol,
      quad_.max_levels, 2);
}

GainResult GainEvaluator::gain(const AoIState& state, std::size_t candidate) const {
  Key key{state, candidate};
  {
    std::lock_guard lock(mu_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  GainResult r = integrate(state, candidate, false);
  std::lock_guard lock(mu_);
  memo_.emplace(std::move(key), r);
  return r;
}

double GainEvaluator::first_activation_gain(int level) const {
  {
    std::lock_guard lock(mu_);
    if (auto it = first_gain_.find(level); it != first_gain_.end()) return it->second;
  }
  const double v = level_sum(AoIState::all_expired(layout_.size()), 0, level, false).value;
  std::lock_guard lock(mu_);
  first_gain_.emplace(level, v);
  return v;
}

GainResult GainEvaluator::residual_contribution(const AoIState& state, std::size_t node) const {
  if (node < state.size() && state.expired(node)) return {};
  return integrate(state, node, true);
}

std::size_t GainEvaluator::cached_gains() const {
  std::lock_guard lock(mu_);
  return memo_.size();
}

GainResult total_gain(std::size_t candidate, const Layout& layout, const AoIState& state,
                      const CorrelationParams& params, const QuadratureConfig& quad) {
  GainEvaluator ev(layout, params, quad);
  return ev.gain(state, candidate);
}

RegionLabel classify_region(Point p, const Layout& layout, const AoIState& state,
                            const CorrelationParams& params) {
  if (state.size() != layout.size())
    throw std::invalid_argument("classify_region: state size does not match layout");
  const std::size_t n = layout.size();
  const double unit = params.unit_distance();
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = distance(p, layout[i]);

  // Does i beat j at p?  Strict for j < i (earlier index wins ties).
  auto beats = [&](std::size_t i, std::size_t j, bool& tie) {
    if (state.expired(j)) return true;
    const double lhs = r[i] - r[j];
    const double rhs = unit * (static_cast<double>(state[j]) - static_cast<double>(state[i]));
    const double scale = std::max({r[i], r[j], std::abs(rhs), unit});
    if (std::abs(lhs - rhs) <= 1e-9 * scale) tie = true;
    return j < i ? lhs < rhs : lhs <= rhs;
  };

  RegionLabel out;
  for (std::size_t i = 0; i < n; ++i) {
    if (state.expired(i)) continue;
    bool wins = true;
    bool tie = false;
    for (std::size_t j = 0; j < n && wins; ++j)
      if (j != i) wins = beats(i, j, tie);
    if (wins) {
      out.node = i;
      out.boundary = tie;
      return out;
    }
  }
  return out;
}

std::vector<PairCurve> curve_existence(const Layout& layout, const AoIState& state,
                                       const CorrelationParams& params) {
  if (state.size() != layout.size())
    throw std::invalid_argument("curve_existence: state size does not match layout");
  std::vector<PairCurve> out;
  for (std::size_t i = 0; i < layout.size(); ++i)
    for (std::size_t j = i + 1; j < layout.size(); ++j) {
      bool exists = false;
      if (!state.expired(i) && !state.expired(j)) {
        const double gap = std::abs(static_cast<double>(state[i]) - static_cast<double>(state[j]));
        exists = layout.distance(i, j) > params.unit_distance() * gap;
      }
      out.push_back({i, j, exists});
    }
  return out;
}

GainResult validate_plane_integral(const QuadratureConfig& quad) {
  quad.validate();
  if (quad.cell > 0.5) throw std::invalid_argument("validate_plane_integral: cell must be <= 0.5");
  const auto nr = static_cast<std::size_t>(std::llround(1.0 / quad.cell));
  // Integrand in polar correlation coordinates is independent of the angle,
  // so only the radial direction is refined. The log singularity at rho = 1
  // limits the midpoint rule to first order.
  auto f = [](double r, double) { return -0.5 * std::log1p(-r * r) * r; };
  return integrate_rect(f, 0.0, 1.0, 0.0, 2.0 * std::numbers::pi, nr, 8, quad.tol,
                        quad.max_levels, 1, false);
}

void write_field_csv(std::ostream& os, const Layout& layout, const AoIState& state,
                     const CorrelationParams& params, double x0, double x1, double y0, double y1,
                     double step) {
  if (!(step > 0.0) || !(x1 >= x0) || !(y1 >= y0))
    throw std::invalid_argument("write_field_csv: bad bounds or step");
  os << "x,y,info,region_label\n";
  const auto nx = static_cast<long>(std::floor((x1 - x0) / step + 1e-9));
  const auto ny = static_cast<long>(std::floor((y1 - y0) / step + 1e-9));
  for (long iy = 0; iy <= ny; ++iy)
    for (long ix = 0; ix <= nx; ++ix) {
      const Point p{x0 + static_cast<double>(ix) * step, y0 + static_cast<double>(iy) * step};
      const auto info = point_info(p, layout, state, params);
      const auto label = classify_region(p, layout, state, params);
      os << p.x << ',' << p.y << ',' << info.value << ','
         << (label.node ? *label.node + 1 : 0) << '\n';
    }
}

}  // namespace ssim
