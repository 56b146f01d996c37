#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ssim/correlation.hpp"
#include "ssim/greedy.hpp"
#include "ssim/infofield.hpp"
#include "ssim/qlearning.hpp"
#include "ssim/quadrature.hpp"

namespace ssim {

enum class SweepMode { isosceles, general };
enum class Mechanism { greedy, longterm };

std::string to_string(SweepMode m);
std::string to_string(Mechanism m);
SweepMode parse_sweep_mode(const std::string& s);
Mechanism parse_mechanism(const std::string& s);

struct Range {
  double min = 0.0;
  double max = 0.0;
  double step = 1.0;
  std::vector<double> values() const;  // min, min+step, ... <= max (+1e-9 slack)
};

// Isosceles: coord1 = base d, coord2 = apex height h.
// General: s2 = (0,0), s3 = (longest,0), node 1 at (coord1, coord2) restricted
// to x in (0, longest/2] and |s1 s3| <= longest.
struct SweepSpec {
  SweepMode mode = SweepMode::isosceles;
  Mechanism mechanism = Mechanism::greedy;
  CorrelationParams params;
  QuadratureConfig quad = QuadratureConfig::defaults(CorrelationParams{});
  TrainConfig train;
  Range coord1{5.0, 200.0, 5.0};
  Range coord2{5.0, 200.0, 5.0};
  double longest = 220.0;
  std::size_t horizon = 64;
  bool no_repeat = true;
  unsigned threads = 1;

  void validate() const;
  // nullopt when the coordinates do not describe a layout of this mode.
  std::optional<Layout> layout_at(double c1, double c2) const;
};

struct PhaseCell {
  double coord1 = 0.0;
  double coord2 = 0.0;
  bool inside = true;       // false: coordinates outside the traversal region
  std::string label;        // normalized cycle, or degenerate/aperiodic/failed/outside
  std::string cycle;        // normalized cycle even when the cell is degenerate
  std::string family;       // 1213, 123, reduced, 23, other (isosceles); cycle label otherwise
  std::vector<double> fractions;
  double mean_gain = 0.0;
  double stddev_gain = 0.0;
  bool degenerate = false;
  bool aperiodic = false;
  bool subminimal = false;  // some pair is no farther apart than one slot distance
  bool unconverged = false;
  bool failed = false;
  std::string error;

  std::string flags() const;  // '|'-joined flag names, empty when none
};

struct PhaseMap {
  SweepSpec spec;
  std::vector<double> c1;
  std::vector<double> c2;
  std::vector<PhaseCell> cells;  // row-major: index = i2 * c1.size() + i1

  const PhaseCell& at(std::size_t i1, std::size_t i2) const { return cells[i2 * c1.size() + i1]; }
  std::size_t failures() const;
};

// Runs one mechanism on one layout. Failures are recorded, not thrown.
PhaseCell evaluate_layout(const SweepSpec& spec, const Layout& layout);

PhaseMap run_sweep(const SweepSpec& spec);

// Cycle label canonical under rotation, and in isosceles mode also under the
// mirror swap of nodes 2 and 3.
std::string canonical_label(const std::vector<std::size_t>& cycle, std::size_t nodes,
                            SweepMode mode);
// Isosceles families: 1213 (node-1 share 1/2), 123 (equal thirds), reduced
// (0 < node-1 share < 1/3), 23 (node 1 never active), other.
std::string schedule_family(const std::vector<double>& fractions);

// Gain-difference boundary equations; each is positive on the side of the
// second-named class.
enum class BoundaryEq {
  s3_vs_s1_at_213,   // info_[2,1,3](s3) - info_[2,1,3](s1): 1213 | 123
  s1_vs_s2_at_321,   // info_[3,2,1](s1) - info_[3,2,1](s2): reduced | 123
  s2_vs_s1_at_inf21, // info_[inf,2,1](s2) - info_[inf,2,1](s1): reduced | 23
  s3_vs_s2_at_132,   // info_[1,3,2](s3) - info_[1,3,2](s2): 3132-type | 123 (general layouts)
};

std::string to_string(BoundaryEq eq);
BoundaryEq parse_boundary(const std::string& s);
AoIState boundary_state(BoundaryEq eq);

double boundary_value(BoundaryEq eq, const Layout& layout, const CorrelationParams& params,
                      const QuadratureConfig& quad);

class BracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Which coordinate varies during bisection; the other is held at `fixed`.
enum class Axis { coord1, coord2 };

struct BisectResult {
  double root = 0.0;
  double width = 0.0;
  std::size_t iterations = 0;
  bool non_monotone = false;  // interior samples of the bracket are not monotone
};

BisectResult boundary_bisect(BoundaryEq eq, const SweepSpec& spec, Axis axis, double fixed,
                             double lo, double hi, double tol, std::size_t monotone_samples = 8);

struct BracketSeed {
  BoundaryEq eq;
  Axis axis;
  double fixed;
  double lo;
  double hi;
  std::string from_label;
  std::string to_label;
};

// Neighbouring cells along coord1 whose families change between a pair that
// one boundary equation separates. Runs of degenerate cells in between are
// bridged.
std::vector<BracketSeed> discover_brackets(const PhaseMap& map);

struct CellComparison {
  double coord1 = 0.0;
  double coord2 = 0.0;
  bool comparable = false;  // both cells evaluated without failure
  bool agree = false;
  std::string greedy_label;
  std::string longterm_label;
  double greedy_mean = 0.0, greedy_stddev = 0.0;
  double longterm_mean = 0.0, longterm_stddev = 0.0;
};

struct MechanismReport {
  std::vector<CellComparison> cells;
  std::size_t compared = 0;
  std::size_t agreeing = 0;
  std::size_t mean_not_lower = 0;      // long-term mean >= greedy mean - tol
  std::size_t differing_stddev_not_lower = 0;
  std::size_t differing = 0;
  double mean_advantage_on_differing = 0.0;  // average relative long-term advantage
  double max_mean_advantage = 0.0;           // relative, over all cells
};

MechanismReport compare_mechanisms(const PhaseMap& greedy, const PhaseMap& longterm,
                                   double tol = 1e-3);

void write_phase_csv(std::ostream& os, const PhaseMap& map);
void write_comparison_csv(std::ostream& os, const MechanismReport& report);

}  // namespace ssim
