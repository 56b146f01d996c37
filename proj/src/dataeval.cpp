#include "ssim/dataeval.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "ssim/greedy.hpp"
#include "ssim/mdp.hpp"

namespace ssim {

GridSeries::GridSeries(std::size_t nt_, std::size_t nx_, std::size_t ny_, double spacing_,
                       double dt_)
    : nt(nt_), nx(nx_), ny(ny_), spacing(spacing_), dt(dt_), values(nt_ * nx_ * ny_, 0.0),
      mask(nx_ * ny_, 1) {
  if (!(spacing > 0.0) || !(dt > 0.0)) throw std::invalid_argument("GridSeries: spacing and dt must be > 0");
}

std::size_t GridSeries::valid_cells() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  char* end = nullptr;
  v = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(v);
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "nan" || s == "NaN" || s == "NA" || s == "na";
}

// Smallest gap of the sorted unique values; all gaps must be integer
// multiples of it. Returns 0 for a single value.
double uniform_step(const std::vector<double>& v, const char* axis, std::size_t& bad_index) {
  bad_index = v.size();
  if (v.size() < 2) return 0.0;
  double step = v[1] - v[0];
  for (std::size_t i = 2; i < v.size(); ++i) step = std::min(step, v[i] - v[i - 1]);
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double ratio = (v[i] - v[0]) / step;
    if (std::abs(ratio - std::round(ratio)) > 1e-6) {
      bad_index = i;
      (void)axis;
      return step;
    }
  }
  return step;
}

}  // namespace

GridSeries load_grid_long_csv(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!trim(line).empty()) break;
  }
  {
    auto h = split(line);
    for (auto& f : h) std::transform(f.begin(), f.end(), f.begin(), ::tolower);
    if (h != std::vector<std::string>{"t", "x", "y", "value"})
      throw LoadError("grid csv line " + std::to_string(lineno) +
                      ": expected header 't,x,y,value', got '" + trim(line) + "'");
  }
  struct Row {
    double t, x, y, v;
    bool missing;
    std::size_t line;
  };
  std::vector<Row> rows;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    if (f.size() != 4)
      throw LoadError("grid csv line " + std::to_string(lineno) + ": expected 4 fields, got " +
                      std::to_string(f.size()));
    Row r{};
    r.line = lineno;
    if (!parse_double(f[0], r.t) || !parse_double(f[1], r.x) || !parse_double(f[2], r.y))
      throw LoadError("grid csv line " + std::to_string(lineno) + ": non-numeric t, x or y");
    r.missing = is_missing(f[3]);
    if (!r.missing && !parse_double(f[3], r.v))
      throw LoadError("grid csv line " + std::to_string(lineno) + ": bad value '" + f[3] + "'");
    rows.push_back(r);
  }
  if (rows.empty()) throw LoadError("grid csv: no data rows");

  auto uniq = [&](auto get) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(get(r));
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  const auto ts = uniq([](const Row& r) { return r.t; });
  const auto xs = uniq([](const Row& r) { return r.x; });
  const auto ys = uniq([](const Row& r) { return r.y; });
  std::size_t bad = 0;
  auto check = [&](const std::vector<double>& v, const char* axis, double (*get)(const Row&)) {
    const double step = uniform_step(v, axis, bad);
    if (bad < v.size()) {
      const double offending = v[bad];
      std::size_t where = 0;
      for (const auto& r : rows)
        if (get(r) == offending) {
          where = r.line;
          break;
        }
      throw LoadError("grid csv line " + std::to_string(where) + ": " + axis + " = " +
                      std::to_string(offending) + " is off the uniform grid (step " +
                      std::to_string(step) + ")");
    }
    return step;
  };
  const double dt = check(ts, "t", [](const Row& r) { return r.t; });
  double sx = check(xs, "x", [](const Row& r) { return r.x; });
  double sy = check(ys, "y", [](const Row& r) { return r.y; });
  if (sx == 0.0) sx = sy;
  if (sy == 0.0) sy = sx;
  if (sx == 0.0) sx = sy = 1.0;
  if (std::abs(sx - sy) > 1e-9 * std::max(sx, sy))
    throw LoadError("grid csv: x spacing " + std::to_string(sx) + " differs from y spacing " +
                    std::to_string(sy));
  auto index = [](double v, double v0, double step) {
    return static_cast<std::size_t>(std::llround((v - v0) / step));
  };
  const std::size_t nt = ts.size() < 2 ? 1 : index(ts.back(), ts.front(), dt) + 1;
  const std::size_t nx = index(xs.back(), xs.front(), sx) + 1;
  const std::size_t ny = index(ys.back(), ys.front(), sy) + 1;
  GridSeries g(nt, nx, ny, sx, dt > 0.0 ? dt : 1.0);
  std::vector<std::size_t> seen(nt * nx * ny, 0);
  std::vector<std::uint8_t> present(nt * nx * ny, 0);
  for (const auto& r : rows) {
    const std::size_t t = dt > 0.0 ? index(r.t, ts.front(), dt) : 0;
    const std::size_t ix = index(r.x, xs.front(), sx);
    const std::size_t iy = index(r.y, ys.front(), sy);
    const std::size_t k = (t * nx + ix) * ny + iy;
    if (seen[k])
      throw LoadError("grid csv line " + std::to_string(r.line) + ": duplicate (t,x,y) also on line " +
                      std::to_string(seen[k]));
    seen[k] = r.line;
    if (!r.missing) {
      g.values[k] = r.v;
      present[k] = 1;
    }
  }
  for (std::size_t ix = 0; ix < nx; ++ix)
    for (std::size_t iy = 0; iy < ny; ++iy) {
      bool ok = true;
      for (std::size_t t = 0; t < nt && ok; ++t) ok = present[(t * nx + ix) * ny + iy] != 0;
      g.mask[ix * ny + iy] = ok ? 1 : 0;
      if (!ok)
        for (std::size_t t = 0; t < nt; ++t) g.values[(t * nx + ix) * ny + iy] = 0.0;
    }
  return g;
}

GridSeries load_grid_dense(std::istream& is, double spacing, double dt) {
  std::vector<std::vector<std::vector<std::string>>> frames(1);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) {
      if (!frames.back().empty()) frames.emplace_back();
      continue;
    }
    frames.back().push_back(split(line));
  }
  if (frames.back().empty()) frames.pop_back();
  if (frames.empty()) throw LoadError("dense grid: no data");
  const std::size_t ny = frames[0].size();
  const std::size_t nx = frames[0][0].size();
  GridSeries g(frames.size(), nx, ny, spacing, dt);
  std::vector<std::uint8_t> ok(nx * ny, 1);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].size() != ny)
      throw LoadError("dense grid: frame " + std::to_string(t) + " has " +
                      std::to_string(frames[t].size()) + " rows, expected " + std::to_string(ny));
    for (std::size_t iy = 0; iy < ny; ++iy) {
      const auto& row = frames[t][iy];
      if (row.size() != nx)
        throw LoadError("dense grid: frame " + std::to_string(t) + " row " + std::to_string(iy) +
                        " has " + std::to_string(row.size()) + " columns, expected " +
                        std::to_string(nx));
      for (std::size_t ix = 0; ix < nx; ++ix) {
        double v = 0.0;
        if (is_missing(row[ix])) {
          ok[ix * ny + iy] = 0;
        } else if (!parse_double(row[ix], v)) {
          throw LoadError("dense grid: frame " + std::to_string(t) + " row " + std::to_string(iy) +
                          ": bad value '" + row[ix] + "'");
        }
        g.at(t, ix, iy) = v;
      }
    }
  }
  g.mask = ok;
  return g;
}

GridSeries load_grid(const std::filesystem::path& path, const GridLoadOptions& options) {
  namespace fs = std::filesystem;
  if (options.format == GridFormat::dense && fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw LoadError("dense grid: no files in " + path.string());
    std::stringstream joined;
    for (const auto& f : files) {
      std::ifstream in(f);
      if (!in) throw LoadError("cannot open " + f.string());
      joined << in.rdbuf() << "\n\n";
    }
    return load_grid_dense(joined, options.spacing, options.dt);
  }
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  return options.format == GridFormat::long_csv ? load_grid_long_csv(in)
                                                : load_grid_dense(in, options.spacing, options.dt);
}

void write_grid_long_csv(std::ostream& os, const GridSeries& g) {
  os << "t,x,y,value\n";
  os.precision(17);
  for (std::size_t t = 0; t < g.nt; ++t)
    for (std::size_t ix = 0; ix < g.nx; ++ix)
      for (std::size_t iy = 0; iy < g.ny; ++iy) {
        os << static_cast<double>(t) * g.dt << ',' << static_cast<double>(ix) * g.spacing << ','
           << static_cast<double>(iy) * g.spacing << ',';
        if (g.valid(ix, iy)) os << g.at(t, ix, iy);
        os << '\n';
      }
}

GridSeries downsample(const GridSeries& s, std::size_t step) {
  if (step < 1) throw std::invalid_argument("downsample: step must be >= 1");
  const std::size_t nx = (s.nx + step - 1) / step;
  const std::size_t ny = (s.ny + step - 1) / step;
  GridSeries out(s.nt, nx, ny, s.spacing * static_cast<double>(step), s.dt);
  for (std::size_t ix = 0; ix < nx; ++ix)
    for (std::size_t iy = 0; iy < ny; ++iy) {
      out.mask[ix * ny + iy] = s.mask[(ix * step) * s.ny + iy * step];
      for (std::size_t t = 0; t < s.nt; ++t) out.at(t, ix, iy) = s.at(t, ix * step, iy * step);
    }
  return out;
}

GridSeries synth_field(double lambda_d, double lambda_t, const SynthOptions& o) {
  if (!(lambda_d > 0.0) || !(lambda_t > 0.0))
    throw std::invalid_argument("synth_field: rates must be > 0");
  if (o.nx == 0 || o.ny == 0 || o.nt == 0) throw std::invalid_argument("synth_field: empty grid");
  const std::size_t n = o.nx * o.ny;
  if (n > o.max_cells)
    throw ResourceError("synth_field: " + std::to_string(n) + " cells exceeds the dense limit of " +
                        std::to_string(o.max_cells));
  Eigen::MatrixXd cov(n, n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      const double dx = static_cast<double>(a / o.ny) - static_cast<double>(b / o.ny);
      const double dy = static_cast<double>(a % o.ny) - static_cast<double>(b % o.ny);
      cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          std::exp(-lambda_d * o.spacing * std::hypot(dx, dy));
    }
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw std::runtime_error("synth_field: Cholesky failed");
  const Eigen::MatrixXd l = llt.matrixL();
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&] {
    Eigen::VectorXd z(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    return Eigen::VectorXd(l * z);
  };
  const double phi = std::exp(-lambda_t * o.dt);
  const double innov = std::sqrt(-std::expm1(-2.0 * lambda_t * o.dt));
  GridSeries g(o.nt, o.nx, o.ny, o.spacing, o.dt);
  Eigen::VectorXd x = draw();
  for (std::size_t t = 0; t < o.nt; ++t) {
    if (t > 0) x = phi * x + innov * draw();
    for (std::size_t k = 0; k < n; ++k) g.values[t * n + k] = x(static_cast<Eigen::Index>(k));
  }
  return g;
}

namespace {

struct Standardized {
  std::vector<std::size_t> ix, iy;
  std::vector<std::vector<double>> z;  // per cell, length nt
};

Standardized standardize(const GridSeries& s) {
  Standardized out;
  bool any_variation = false;
  for (std::size_t ix = 0; ix < s.nx; ++ix)
    for (std::size_t iy = 0; iy < s.ny; ++iy) {
      if (!s.valid(ix, iy)) continue;
      std::vector<double> v(s.nt);
      double mean = 0.0;
      for (std::size_t t = 0; t < s.nt; ++t) mean += (v[t] = s.at(t, ix, iy));
      mean /= static_cast<double>(s.nt);
      double var = 0.0;
      for (double& x : v) {
        x -= mean;
        var += x * x;
      }
      var /= static_cast<double>(s.nt);
      if (!(var > 1e-300)) continue;
      any_variation = true;
      const double inv = 1.0 / std::sqrt(var);
      for (double& x : v) x *= inv;
      out.ix.push_back(ix);
      out.iy.push_back(iy);
      out.z.push_back(std::move(v));
    }
  if (!any_variation)
    throw std::domain_error("fit_params: field is constant in time, correlation undefined");
  return out;
}

double pearson(const double* a, const double* b, std::size_t n) {
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

struct RateFit {
  double rate = 0.0;
  double r2 = 0.0;
  std::size_t used = 0;
};

// Bins sorted by lag; uses the leading run of bins with rho > min_rho. With
// first_bin_only the rate is the moment estimate -ln(rho_1)/lag_1 and the
// remaining bins only enter the reported r2.
RateFit fit_rate(std::vector<CorrelationBin>& bins, std::size_t min_pairs, double min_rho,
                 bool first_bin_only) {
  double swxy = 0.0, swxx = 0.0;
  RateFit f;
  for (auto& b : bins) {
    if (b.lag <= 0.0 || b.pairs < min_pairs) continue;
    if (!(b.rho > min_rho)) break;
    b.used = true;
    const double y = -std::log(b.rho);
    const double w = b.rho * b.rho;
    swxy += w * b.lag * y;
    swxx += w * b.lag * b.lag;
    ++f.used;
  }
  if (f.used == 0 || swxx <= 0.0) return f;
  f.rate = swxy / swxx;
  if (first_bin_only)
    for (const auto& b : bins)
      if (b.used) {
        f.rate = -std::log(b.rho) / b.lag;
        break;
      }
  double sw = 0.0, swy = 0.0;
  for (const auto& b : bins)
    if (b.used) {
      sw += b.rho * b.rho;
      swy += b.rho * b.rho * -std::log(b.rho);
    }
  const double ybar = swy / sw;
  double ss_res = 0.0, ss_tot = 0.0;
  for (const auto& b : bins)
    if (b.used) {
      const double w = b.rho * b.rho, y = -std::log(b.rho);
      ss_res += w * (y - f.rate * b.lag) * (y - f.rate * b.lag);
      ss_tot += w * (y - ybar) * (y - ybar);
    }
  f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

}  // namespace

FitResult fit_params(const GridSeries& series, const FitOptions& opt) {
  if (series.nt < 3) throw std::invalid_argument("fit_params: need at least 3 time steps");
  const Standardized st = standardize(series);
  const std::size_t n = st.z.size();
  const std::size_t nt = series.nt;
  FitResult r;
  r.estimator =
      "pearson per pair (time-standardized); bins by exact grid distance and time lag; "
      "lambda_d: weighted LS through origin on -ln(rho), weights rho^2; lambda_t: -ln(rho) at "
      "lag 1; leading bins with rho > " +
      std::to_string(opt.min_rho) + ", >= " + std::to_string(opt.min_pairs) + " pairs per bin";

  // Equal-time correlation by squared cell offset.
  std::map<long, std::pair<double, std::size_t>> sp;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      const long dx = static_cast<long>(st.ix[a]) - static_cast<long>(st.ix[b]);
      const long dy = static_cast<long>(st.iy[a]) - static_cast<long>(st.iy[b]);
      const double* za = st.z[a].data();
      const double* zb = st.z[b].data();
      double s = 0.0;
      for (std::size_t t = 0; t < nt; ++t) s += za[t] * zb[t];
      auto& bin = sp[dx * dx + dy * dy];
      bin.first += s / static_cast<double>(nt);
      ++bin.second;
    }
  for (const auto& [k2, acc] : sp)
    r.spatial.push_back({std::sqrt(static_cast<double>(k2)) * series.spacing,
                         acc.first / static_cast<double>(acc.second), acc.second, false});

  for (std::size_t lag = 1; lag <= opt.max_time_lag && lag + 2 < nt; ++lag) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += pearson(st.z[c].data(), st.z[c].data() + lag, nt - lag);
    r.temporal.push_back({static_cast<double>(lag) * series.dt, s / static_cast<double>(n),
                          n * (nt - lag), false});
  }

  const RateFit fd = fit_rate(r.spatial, opt.min_pairs, opt.min_rho, false);
  const RateFit ft = fit_rate(r.temporal, opt.min_pairs, opt.min_rho, true);
  r.lambda_d = fd.rate;
  r.lambda_t = ft.rate;
  r.spatial_r2 = fd.r2;
  r.temporal_r2 = ft.r2;
  if (fd.used < 2) {
    r.failure = "fewer than 2 usable spatial correlation bins";
  } else if (ft.used < 2) {
    r.failure = "fewer than 2 usable temporal correlation bins";
  } else if (!(fd.rate > 0.0) || !(ft.rate > 0.0)) {
    r.failure = "non-positive fitted rate";
  }
  r.ok = r.failure.empty();
  if (!r.ok) return r;

  // Joint bins: nonzero distance and nonzero lag, compared to the product model.
  std::vector<long> keys;
  for (const auto& [k2, acc] : sp)
    if (acc.second >= opt.min_pairs && keys.size() < opt.joint_distance_bins) keys.push_back(k2);
  double ss = 0.0;
  std::size_t cnt = 0;
  for (std::size_t lag = 1; lag <= opt.joint_time_lags && lag + 2 < nt; ++lag) {
    std::map<long, std::pair<double, std::size_t>> jb;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b) continue;
        const long dx = static_cast<long>(st.ix[a]) - static_cast<long>(st.ix[b]);
        const long dy = static_cast<long>(st.iy[a]) - static_cast<long>(st.iy[b]);
        const long k2 = dx * dx + dy * dy;
        if (!std::binary_search(keys.begin(), keys.end(), k2)) continue;
        const double* za = st.z[a].data();
        const double* zb = st.z[b].data() + lag;
        double s = 0.0;
        for (std::size_t t = 0; t + lag < nt; ++t) s += za[t] * zb[t];
        auto& bin = jb[k2];
        bin.first += s / static_cast<double>(nt - lag);
        ++bin.second;
      }
    for (const auto& [k2, acc] : jb) {
      SeparabilityBin b;
      b.distance = std::sqrt(static_cast<double>(k2)) * series.spacing;
      b.time_lag = static_cast<double>(lag) * series.dt;
      b.empirical = acc.first / static_cast<double>(acc.second);
      b.model = std::exp(-r.lambda_d * b.distance - r.lambda_t * b.time_lag);
      b.pairs = acc.second;
      const double res = b.empirical - b.model;
      ss += res * res;
      ++cnt;
      r.separability_max = std::max(r.separability_max, std::abs(res));
      r.separability.push_back(b);
    }
  }
  r.separability_rms = cnt ? std::sqrt(ss / static_cast<double>(cnt)) : 0.0;
  return r;
}

std::string to_string(CoverageMode m) {
  return m == CoverageMode::full_circle ? "full_circle" : "union_circles";
}

CoverageMode parse_coverage(const std::string& s) {
  if (s == "full_circle" || s == "circle") return CoverageMode::full_circle;
  if (s == "union_circles" || s == "union") return CoverageMode::union_circles;
  throw std::invalid_argument("unknown coverage mode '" + s + "' (full_circle|union_circles)");
}

std::string to_string(EvalPolicy p) {
  switch (p) {
    case EvalPolicy::ideal: return "ideal";
    case EvalPolicy::greedy: return "greedy";
    case EvalPolicy::longterm: return "longterm";
    case EvalPolicy::uniform: return "uniform";
  }
  return "?";
}

namespace {

using Cell = std::pair<std::size_t, std::size_t>;

Cell node_cell(const GridSeries& s, const Point& p, std::size_t node) {
  const double fx = p.x / s.spacing, fy = p.y / s.spacing;
  const double rx = std::round(fx), ry = std::round(fy);
  if (std::abs(fx - rx) > 1e-6 || std::abs(fy - ry) > 1e-6 || rx < 0 || ry < 0 ||
      rx >= static_cast<double>(s.nx) || ry >= static_cast<double>(s.ny))
    throw std::invalid_argument("node " + std::to_string(node + 1) + " at (" +
                                std::to_string(p.x) + ", " + std::to_string(p.y) +
                                ") is not on a grid cell");
  const Cell c{static_cast<std::size_t>(rx), static_cast<std::size_t>(ry)};
  if (!s.valid(c.first, c.second))
    throw std::invalid_argument("node " + std::to_string(node + 1) + " sits on a masked cell");
  return c;
}

Point cell_point(const GridSeries& s, const Cell& c) {
  return {static_cast<double>(c.first) * s.spacing, static_cast<double>(c.second) * s.spacing};
}

Point grid_center(const GridSeries& s) {
  return {static_cast<double>((s.nx - 1) / 2) * s.spacing,
          static_cast<double>((s.ny - 1) / 2) * s.spacing};
}

// Tracks readings and ages along a schedule and scores estimates.
class Scorer {
 public:
  Scorer(const GridSeries& s, const Layout& layout, const CorrelationParams& params,
         std::vector<Cell> covered)
      : s_(s), layout_(layout), params_(params), covered_(std::move(covered)) {
    for (std::size_t i = 0; i < layout.size(); ++i) nodes_.push_back(node_cell(s, layout[i], i));
    for (const auto& c : covered_) {
      std::vector<double> d;
      const Point p = cell_point(s, c);
      for (std::size_t i = 0; i < layout.size(); ++i)
        d.push_back(params.lambda_d * distance(p, layout[i]));
      spatial_.push_back(std::move(d));
    }
    reading_.assign(layout.size(), 0.0);
  }

  // Sum of absolute errors at time t if `action` is activated in `state`.
  double error_if(const AoIState& state, std::size_t action, std::size_t t) const {
    double total = 0.0;
    const std::size_t n = layout_.size();
    for (std::size_t k = 0; k < covered_.size(); ++k) {
      std::size_t best = n;
      double best_cost = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const Age age = i == action ? 0 : state[i];
        if (age == kExpired) continue;
        const double cost =
            spatial_[k][i] + params_.lambda_t * static_cast<double>(age) * params_.dt;
        if (best == n || cost < best_cost) {
          best = i;
          best_cost = cost;
        }
      }
      const double est = best == action ? s_.at(t, nodes_[action].first, nodes_[action].second)
                                        : reading_[best];
      total += std::abs(est - s_.at(t, covered_[k].first, covered_[k].second));
    }
    return total;
  }

  void activate(std::size_t action, std::size_t t) {
    reading_[action] = s_.at(t, nodes_[action].first, nodes_[action].second);
  }

  std::size_t covered() const { return covered_.size(); }

 private:
  const GridSeries& s_;
  const Layout& layout_;
  const CorrelationParams& params_;
  std::vector<Cell> covered_;
  std::vector<Cell> nodes_;
  std::vector<std::vector<double>> spatial_;
  std::vector<double> reading_;
};

struct Window {
  std::size_t start, end;
};

Window window_of(const GridSeries& s, const EvalOptions& o) {
  if (o.start >= s.nt) throw std::invalid_argument("evaluate: start beyond series end");
  const std::size_t end = o.steps ? std::min(s.nt, o.start + *o.steps) : s.nt;
  if (end <= o.start) throw std::invalid_argument("evaluate: empty time window");
  return {o.start, end};
}

template <class Choose>
double run_schedule(const MdpModel& model, Scorer& scorer, Window w,
                    Choose&& choose) {
  MdpState state = MdpState::initial(model.nodes());
  double total = 0.0;
  for (std::size_t t = w.start; t < w.end; ++t) {
    const std::size_t a = choose(state, t);
    total += scorer.error_if(state.aoi, a, t);
    scorer.activate(a, t);
    state = transition(state, a, model);
  }
  return total / static_cast<double>((w.end - w.start) * scorer.covered());
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> coverage_cells(const GridSeries& s,
                                                                 const Layout& layout,
                                                                 const CorrelationParams& params,
                                                                 const EvalOptions& o) {
  std::vector<Cell> out;
  if (o.coverage == CoverageMode::full_circle) {
    const Point c = o.center.value_or(grid_center(s));
    const double r = o.circle_radius_cells * s.spacing;
    for (std::size_t ix = 0; ix < s.nx; ++ix)
      for (std::size_t iy = 0; iy < s.ny; ++iy)
        if (s.valid(ix, iy) && distance(cell_point(s, {ix, iy}), c) <= r * (1.0 + 1e-12))
          out.emplace_back(ix, iy);
  } else {
    std::vector<double> radius;
    if (o.union_radius) {
      radius.assign(layout.size(), *o.union_radius);
    } else {
      const MdpModel model(layout, params);
      for (std::size_t i = 0; i < layout.size(); ++i)
        radius.push_back(params.unit_distance() * static_cast<double>(model.cap[i]));
    }
    for (std::size_t ix = 0; ix < s.nx; ++ix)
      for (std::size_t iy = 0; iy < s.ny; ++iy) {
        if (!s.valid(ix, iy)) continue;
        const Point p = cell_point(s, {ix, iy});
        for (std::size_t i = 0; i < layout.size(); ++i)
          if (distance(p, layout[i]) <= radius[i] * (1.0 + 1e-12)) {
            out.emplace_back(ix, iy);
            break;
          }
      }
  }
  if (out.empty()) throw std::invalid_argument("coverage region contains no valid cells");
  return out;
}

double schedule_mae(const GridSeries& s, const Layout& layout, const CorrelationParams& params,
                    const EvalOptions& o, const std::vector<std::size_t>& actions) {
  const MdpModel model(layout, params);
  Scorer scorer(s, layout, params, coverage_cells(s, layout, params, o));
  Window w = window_of(s, o);
  if (actions.size() < w.end - w.start)
    throw std::invalid_argument("schedule_mae: fewer actions than time steps");
  return run_schedule(model, scorer, w,
                      [&](const MdpState&, std::size_t t) { return actions[t - w.start]; });
}

PolicyEvalReport evaluate_policies(const GridSeries& s, const std::vector<Layout>& layouts,
                                   const CorrelationParams& params, const EvalOptions& o) {
  params.validate();
  const Window w = window_of(s, o);
  const QuadratureConfig quad = o.quad_from_params ? QuadratureConfig::defaults(params) : o.quad;
  PolicyEvalReport report;
  report.coverage = o.coverage;
  report.aggregate.assign(4, 0.0);
  for (std::size_t li = 0; li < layouts.size(); ++li) {
    const Layout& layout = layouts[li];
    const MdpModel model(layout, params);
    const auto covered = coverage_cells(s, layout, params, o);
    LayoutEval ev;
    ev.layout_id = li;
    ev.covered_cells = covered.size();
    ev.mae.assign(4, 0.0);

    const GainEvaluator gains(layout, params, quad);
    const auto gpol = greedy_policy(model, gains);
    const auto space = enumerate_states(model);
    const RewardTable rewards(space, model, gains);
    const QTable q = train(space, rewards, o.train);
    const auto lpol = q_policy(q, space);
    ev.cycle_greedy = detect_cycle(simulate(model, MdpState::initial(model.nodes()), 64, gains, gpol)).label();
    ev.cycle_longterm = extract_policy(q, space, model, gains).schedule.label();

    {
      Scorer sc(s, layout, params, covered);
      ev.mae[static_cast<std::size_t>(EvalPolicy::ideal)] =
          run_schedule(model, sc, w, [&](const MdpState& st, std::size_t t) {
            std::size_t best = model.nodes();
            double best_err = 0.0;
            for (auto a : legal_actions(st, model)) {
              const double e = sc.error_if(st.aoi, a, t);
              if (best == model.nodes() || e < best_err) {
                best = a;
                best_err = e;
              }
            }
            return best;
          });
    }
    {
      Scorer sc(s, layout, params, covered);
      ev.mae[static_cast<std::size_t>(EvalPolicy::greedy)] = run_schedule(
          model, sc, w, [&](const MdpState& st, std::size_t) { return gpol(st).action; });
    }
    {
      Scorer sc(s, layout, params, covered);
      ev.mae[static_cast<std::size_t>(EvalPolicy::longterm)] = run_schedule(
          model, sc, w, [&](const MdpState& st, std::size_t) { return lpol(st).action; });
    }
    {
      Scorer sc(s, layout, params, covered);
      std::size_t k = 0;
      ev.mae[static_cast<std::size_t>(EvalPolicy::uniform)] = run_schedule(
          model, sc, w, [&](const MdpState&, std::size_t) { return k++ % model.nodes(); });
    }
    for (std::size_t p = 0; p < 4; ++p) report.aggregate[p] += ev.mae[p];
    report.layouts.push_back(std::move(ev));
  }
  if (!layouts.empty())
    for (double& a : report.aggregate) a /= static_cast<double>(layouts.size());
  return report;
}

std::vector<Layout> traversal_layouts(const GridSeries& s, Point center, double longest,
                                      std::size_t step_cells) {
  if (!(longest > 0.0) || step_cells == 0)
    throw std::invalid_argument("traversal_layouts: longest and step must be > 0");
  // The equilateral reference triangle on this edge has its centroid at `center`.
  // The edge row is snapped to the grid.
  const double base_y =
      center.y - std::round(longest * std::sqrt(3.0) / 6.0 / s.spacing) * s.spacing;
  const Point s2{center.x - longest / 2.0, base_y};
  const Point s3{center.x + longest / 2.0, base_y};
  const double step = static_cast<double>(step_cells) * s.spacing;
  std::vector<Layout> out;
  for (double x = step; x <= longest / 2.0 + 1e-9; x += step)
    for (double y = step; y <= longest + 1e-9; y += step) {
      if ((longest - x) * (longest - x) + y * y > longest * longest * (1.0 + 1e-12)) break;
      Layout l({{s2.x + x, s2.y + y}, s2, s3});
      for (std::size_t i = 0; i < 3; ++i) node_cell(s, l[i], i);
      out.push_back(std::move(l));
    }
  return out;
}

void write_eval_csv(std::ostream& os, const PolicyEvalReport& report) {
  os << "layout_id,policy,coverage_mode,mae\n";
  os.precision(10);
  for (const auto& l : report.layouts)
    for (auto p : {EvalPolicy::ideal, EvalPolicy::greedy, EvalPolicy::longterm, EvalPolicy::uniform})
      os << l.layout_id << ',' << to_string(p) << ',' << to_string(report.coverage) << ','
         << l.mae[static_cast<std::size_t>(p)] << '\n';
}

}  // namespace ssim
