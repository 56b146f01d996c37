#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssim/correlation.hpp"
#include "ssim/dataeval.hpp"
#include "ssim/infofield.hpp"
#include "ssim/qlearning.hpp"
#include "ssim/quadrature.hpp"
#include "ssim/sweep.hpp"

namespace ssim::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfig = 2,
  kNumeric = 3,   // tolerance breach, non-convergence, singular or bracket errors
  kPartial = 4,   // some cells or rows failed; artifacts still written
  kIo = 5,
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LayoutSpec {
  std::string type = "equilateral";  // equilateral | isosceles | general | points
  double side = 100.0;
  double base = 100.0, height = 88.0;
  double longest = 220.0, x = 110.0, y = 100.0;
  std::vector<Point> points;

  Layout build() const;
};

struct FieldDump {
  double step = 10.0;
  double margin = 200.0;
};

struct BoundarySpec {
  std::string equation = "213:s3-s1";
  std::string axis = "coord1";
  double fixed = 88.0;
  double lo = 60.0, hi = 100.0;
  double tol = 0.5;
};

struct EvalSpec {
  std::optional<std::filesystem::path> data;  // synthetic field when absent
  std::string format = "long_csv";
  double spacing = 1.0;  // dense format
  std::size_t downsample = 1;
  bool fit = true;       // false: use the configured params
  std::string coverage = "full_circle";
  double circle_radius_cells = 10.0;
  std::optional<double> union_radius;
  std::optional<Point> center;
  double longest = 100.0;
  std::size_t traverse_step_cells = 2;
  std::size_t start = 0;
  std::optional<std::size_t> steps;
};

// Grid used by `synth` and by `eval` without a data file: large enough for a
// radius-10 evaluation disk with spacing 10.
inline SynthOptions default_cli_grid() {
  SynthOptions o;
  o.nx = o.ny = 35;
  o.spacing = 10.0;
  return o;
}

// Resolved configuration: defaults, then the JSON file, then flags.
struct RunConfig {
  CorrelationParams params;
  LayoutSpec layout;
  bool layout_given = false;  // greedy and qlearn require an explicit layout
  QuadratureConfig quad;
  TrainConfig train;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::filesystem::path out = "out";
  bool quiet = false;
  bool no_repeat = true;
  std::size_t horizon = 64;
  std::size_t validate_samples = 10000;
  FieldDump field;
  bool dump_field = false;
  std::optional<std::filesystem::path> qtable_in;
  bool dump_states = true;
  SweepSpec sweep;
  BoundarySpec boundary;
  EvalSpec eval;
  SynthOptions synth = default_cli_grid();

  // Canonical JSON of every resolved setting; hashed into the metadata.
  std::string canonical_json() const;
};

// Parses a JSON document into a config. Unknown keys, wrong types and missing
// referenced files raise ConfigError.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);

int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace ssim::cli
