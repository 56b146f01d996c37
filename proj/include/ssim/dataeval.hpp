#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssim/correlation.hpp"
#include "ssim/infofield.hpp"
#include "ssim/qlearning.hpp"
#include "ssim/quadrature.hpp"

namespace ssim {

// Dense (time, x, y) series on a uniform square grid. Cell (ix, iy) sits at
// (ix * spacing, iy * spacing). A spatial cell is valid only if it has a value
// at every time step.
struct GridSeries {
  std::size_t nt = 0, nx = 0, ny = 0;
  double spacing = 1.0;
  double dt = 1.0;
  std::vector<double> values;        // [(t * nx + ix) * ny + iy]
  std::vector<std::uint8_t> mask;    // [ix * ny + iy], 1 = valid

  GridSeries() = default;
  GridSeries(std::size_t nt, std::size_t nx, std::size_t ny, double spacing, double dt);

  double& at(std::size_t t, std::size_t ix, std::size_t iy) { return values[(t * nx + ix) * ny + iy]; }
  double at(std::size_t t, std::size_t ix, std::size_t iy) const {
    return values[(t * nx + ix) * ny + iy];
  }
  bool valid(std::size_t ix, std::size_t iy) const { return mask[ix * ny + iy] != 0; }
  std::size_t valid_cells() const;
};

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GridFormat {
  long_csv,  // header t,x,y,value; one row per observation
  dense,     // one matrix per time step (rows = y, columns = x); a directory of
             // files sorted by name, or one file with blank-line separated blocks
};

struct GridLoadOptions {
  GridFormat format = GridFormat::long_csv;
  double spacing = 1.0;  // dense format only
  double dt = 1.0;       // dense format only
};

GridSeries load_grid(const std::filesystem::path& path, const GridLoadOptions& options = {});
GridSeries load_grid_long_csv(std::istream& is);
GridSeries load_grid_dense(std::istream& is, double spacing, double dt);

void write_grid_long_csv(std::ostream& os, const GridSeries& series);

// Keeps every step-th cell along x and y.
GridSeries downsample(const GridSeries& series, std::size_t step = 3);

class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SynthOptions {
  std::size_t nx = 20, ny = 20, nt = 500;
  double spacing = 50.0;
  double dt = 1.0;
  std::uint64_t seed = 1;
  std::size_t max_cells = 1500;
};

// Zero-mean unit-variance Gaussian field with covariance
// exp(-lambda_d*d - lambda_t*|t|): spatial factor by Cholesky, time by AR(1).
GridSeries synth_field(double lambda_d, double lambda_t, const SynthOptions& options);

struct CorrelationBin {
  double lag = 0.0;  // distance or time lag
  double rho = 0.0;  // mean Pearson correlation
  std::size_t pairs = 0;
  bool used = false;  // entered the rate fit
};

struct SeparabilityBin {
  double distance = 0.0;
  double time_lag = 0.0;
  double empirical = 0.0;
  double model = 0.0;
  std::size_t pairs = 0;
};

struct FitOptions {
  std::size_t min_pairs = 30;
  double min_rho = 0.05;
  std::size_t max_time_lag = 30;
  std::size_t joint_time_lags = 3;
  std::size_t joint_distance_bins = 8;
};

struct FitResult {
  double lambda_d = 0.0;
  double lambda_t = 0.0;
  double spatial_r2 = 0.0;
  double temporal_r2 = 0.0;
  bool ok = false;
  std::string failure;  // reason when !ok
  std::vector<CorrelationBin> spatial;
  std::vector<CorrelationBin> temporal;
  std::vector<SeparabilityBin> separability;
  double separability_rms = 0.0;
  double separability_max = 0.0;
  std::string estimator;  // description of the fit, for metadata
};

// Pearson correlation against distance at equal times and against lag at
// equal positions. lambda_d is a weighted least-squares fit through the origin
// of -ln(rho) over the leading bins with rho above min_rho (weights rho^2);
// lambda_t is the lag-1 moment estimate, which has the smallest variance for
// an AR(1)-like series. r2 values score the full leading run of bins.
FitResult fit_params(const GridSeries& series, const FitOptions& options = {});

enum class CoverageMode { full_circle, union_circles };
std::string to_string(CoverageMode m);
CoverageMode parse_coverage(const std::string& s);

enum class EvalPolicy { ideal, greedy, longterm, uniform };
std::string to_string(EvalPolicy p);

struct EvalOptions {
  CoverageMode coverage = CoverageMode::full_circle;
  std::optional<Point> center;      // default: grid centre
  double circle_radius_cells = 10.0;
  std::optional<double> union_radius;  // default per node: unit_distance * max_aoi
  QuadratureConfig quad = QuadratureConfig::defaults(CorrelationParams{});
  bool quad_from_params = true;     // rescale quad defaults to the fitted params
  TrainConfig train;
  std::size_t start = 0;            // first time step of the evaluation window
  std::optional<std::size_t> steps; // default: through the end of the series
};

struct LayoutEval {
  std::size_t layout_id = 0;
  std::vector<double> mae;  // indexed by EvalPolicy
  std::size_t covered_cells = 0;
  std::string cycle_greedy;
  std::string cycle_longterm;
};

struct PolicyEvalReport {
  CoverageMode coverage = CoverageMode::full_circle;
  std::vector<LayoutEval> layouts;
  std::vector<double> aggregate;  // mean MAE per policy over layouts
};

// Covered cells for a layout under a coverage mode.
std::vector<std::pair<std::size_t, std::size_t>> coverage_cells(const GridSeries& series,
                                                                 const Layout& layout,
                                                                 const CorrelationParams& params,
                                                                 const EvalOptions& options);

// Mean absolute error of the most-relevant-node estimate over the coverage
// region for an explicit action sequence (one action per step).
double schedule_mae(const GridSeries& series, const Layout& layout,
                    const CorrelationParams& params, const EvalOptions& options,
                    const std::vector<std::size_t>& actions);

PolicyEvalReport evaluate_policies(const GridSeries& series, const std::vector<Layout>& layouts,
                                   const CorrelationParams& params, const EvalOptions& options);

// Node 2 and 3 on a horizontal line, `longest` apart, placed so the
// equilateral triangle on that edge is centred on `center`; node 1
// on grid points of the half-region x in (0, longest/2], |s1 s3| <= longest,
// y > 0 (relative to node 2), every `step_cells` cells.
std::vector<Layout> traversal_layouts(const GridSeries& series, Point center, double longest,
                                      std::size_t step_cells);

void write_eval_csv(std::ostream& os, const PolicyEvalReport& report);

}  // namespace ssim
