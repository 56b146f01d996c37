#include "ssim/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "ssim/mdp.hpp"

namespace ssim {

std::string to_string(SweepMode m) { return m == SweepMode::isosceles ? "isosceles" : "general"; }
std::string to_string(Mechanism m) { return m == Mechanism::greedy ? "greedy" : "longterm"; }

SweepMode parse_sweep_mode(const std::string& s) {
  if (s == "isosceles") return SweepMode::isosceles;
  if (s == "general") return SweepMode::general;
  throw std::invalid_argument("unknown sweep mode '" + s + "' (isosceles|general)");
}

Mechanism parse_mechanism(const std::string& s) {
  if (s == "greedy") return Mechanism::greedy;
  if (s == "longterm") return Mechanism::longterm;
  throw std::invalid_argument("unknown mechanism '" + s + "' (greedy|longterm)");
}

std::vector<double> Range::values() const {
  if (!(step > 0.0)) throw std::invalid_argument("range: step must be > 0");
  if (!(max >= min)) throw std::invalid_argument("range: max < min");
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double v = min + static_cast<double>(i) * step;
    if (v > max + 1e-9 * std::max(1.0, std::abs(max))) break;
    out.push_back(v);
  }
  return out;
}

void SweepSpec::validate() const {
  params.validate();
  quad.validate();
  train.validate();
  coord1.values();
  coord2.values();
  if (mode == SweepMode::isosceles && !(coord1.min > 0.0 && coord2.min > 0.0))
    throw std::invalid_argument("sweep: isosceles ranges must be positive");
  if (mode == SweepMode::general && !(longest > 0.0))
    throw std::invalid_argument("sweep: longest must be > 0");
  if (horizon < 8) throw std::invalid_argument("sweep: horizon must be >= 8");
  if (threads == 0) throw std::invalid_argument("sweep: threads must be >= 1");
}

std::optional<Layout> SweepSpec::layout_at(double c1, double c2) const {
  if (mode == SweepMode::isosceles) {
    if (!(c1 > 0.0) || !(c2 > 0.0)) return std::nullopt;
    return Layout::isosceles(c1, c2);
  }
  if (!(c1 > 0.0) || c1 > longest / 2.0 + 1e-9 || !(c2 > 0.0)) return std::nullopt;
  const double dx = longest - c1;
  if (dx * dx + c2 * c2 > longest * longest * (1.0 + 1e-12)) return std::nullopt;
  return Layout::general(longest, c1, c2);
}

std::string PhaseCell::flags() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '|';
    out += name;
  };
  add(!inside, "outside");
  add(degenerate, "degenerate");
  add(aperiodic, "aperiodic");
  add(subminimal, "subminimal");
  add(unconverged, "unconverged");
  add(failed, "failed");
  return out;
}

std::size_t PhaseMap::failures() const {
  return static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(), [](const PhaseCell& c) { return c.failed; }));
}

std::string canonical_label(const std::vector<std::size_t>& cycle, std::size_t nodes,
                            SweepMode mode) {
  auto best = normalize_rotation(cycle);
  if (mode == SweepMode::isosceles && nodes == 3) {
    auto mirrored = cycle;
    for (auto& a : mirrored)
      if (a == 1)
        a = 2;
      else if (a == 2)
        a = 1;
    best = std::min(best, normalize_rotation(mirrored));
  }
  return cycle_label(best, nodes);
}

namespace {

bool near(double a, double b) { return std::abs(a - b) < 1e-9; }

std::string family_of(const std::vector<double>& f, SweepMode mode) {
  if (f.size() != 3) return "other";
  if (near(f[0], 0.5) && near(f[1], 0.25) && near(f[2], 0.25)) return "1213";
  if (near(f[0], 1.0 / 3) && near(f[1], 1.0 / 3) && near(f[2], 1.0 / 3)) return "123";
  if (mode == SweepMode::general && near(f[2], 0.5) && near(f[0], 0.25) && near(f[1], 0.25))
    return "3132";
  if (near(f[0], 0.0) && f[1] > 0.0 && f[2] > 0.0) return "23";
  if (f[0] > 0.0 && f[0] < 1.0 / 3 - 1e-9) return "reduced";
  return "other";
}

}  // namespace

std::string schedule_family(const std::vector<double>& fractions) {
  return family_of(fractions, SweepMode::isosceles);
}

PhaseCell evaluate_layout(const SweepSpec& spec, const Layout& layout) {
  PhaseCell cell;
  try {
    const MdpModel model(layout, spec.params, spec.no_repeat);
    const GainEvaluator ev(layout, spec.params, spec.quad);
    cell.subminimal = layout.min_pair_distance() <= spec.params.unit_distance();
    PeriodicSchedule sched;
    if (spec.mechanism == Mechanism::greedy) {
      const auto trace = simulate(model, MdpState::initial(model.nodes()), spec.horizon, ev,
                                  greedy_policy(model, ev));
      sched = detect_cycle(trace);
    } else {
      const auto space = enumerate_states(model);
      const RewardTable rewards(space, model, ev);
      const QTable q = train(space, rewards, spec.train);
      const auto extracted = extract_policy(q, space, model, ev, spec.horizon);
      sched = extracted.schedule;
      cell.unconverged = extracted.unconverged;
    }
    cell.aperiodic = !sched.periodic;
    cell.degenerate = sched.degenerate;
    cell.fractions = sched.activation_fractions;
    cell.mean_gain = sched.mean_reward();
    cell.stddev_gain = sched.stddev_reward();
    if (cell.aperiodic) {
      cell.label = "aperiodic";
      cell.family = "aperiodic";
    } else {
      cell.cycle = canonical_label(sched.cycle, model.nodes(), spec.mode);
      cell.label = cell.degenerate ? "degenerate" : cell.cycle;
      cell.family = cell.degenerate ? "degenerate" : family_of(sched.activation_fractions, spec.mode);
    }
  } catch (const std::exception& e) {
    cell.failed = true;
    cell.label = "failed";
    cell.family = "failed";
    cell.error = e.what();
  }
  return cell;
}

PhaseMap run_sweep(const SweepSpec& spec) {
  spec.validate();
  PhaseMap map;
  map.spec = spec;
  map.c1 = spec.coord1.values();
  map.c2 = spec.coord2.values();
  map.cells.resize(map.c1.size() * map.c2.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < map.cells.size(); k = next++) {
      const double c1 = map.c1[k % map.c1.size()];
      const double c2 = map.c2[k / map.c1.size()];
      PhaseCell cell;
      if (auto layout = spec.layout_at(c1, c2)) {
        cell = evaluate_layout(spec, *layout);
      } else {
        cell.inside = false;
        cell.label = "outside";
        cell.family = "outside";
      }
      cell.coord1 = c1;
      cell.coord2 = c2;
      map.cells[k] = std::move(cell);
    }
  };
  const unsigned n = std::min<unsigned>(spec.threads, static_cast<unsigned>(map.cells.size()));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return map;
}

std::string to_string(BoundaryEq eq) {
  switch (eq) {
    case BoundaryEq::s3_vs_s1_at_213: return "213:s3-s1";
    case BoundaryEq::s1_vs_s2_at_321: return "321:s1-s2";
    case BoundaryEq::s2_vs_s1_at_inf21: return "inf21:s2-s1";
    case BoundaryEq::s3_vs_s2_at_132: return "132:s3-s2";
  }
  return "?";
}

BoundaryEq parse_boundary(const std::string& s) {
  for (auto eq : {BoundaryEq::s3_vs_s1_at_213, BoundaryEq::s1_vs_s2_at_321,
                  BoundaryEq::s2_vs_s1_at_inf21, BoundaryEq::s3_vs_s2_at_132})
    if (s == to_string(eq)) return eq;
  throw std::invalid_argument("unknown boundary '" + s +
                              "' (213:s3-s1 | 321:s1-s2 | inf21:s2-s1 | 132:s3-s2)");
}

AoIState boundary_state(BoundaryEq eq) {
  switch (eq) {
    case BoundaryEq::s3_vs_s1_at_213: return {2, 1, 3};
    case BoundaryEq::s1_vs_s2_at_321: return {3, 2, 1};
    case BoundaryEq::s2_vs_s1_at_inf21: return {kExpired, 2, 1};
    case BoundaryEq::s3_vs_s2_at_132: return {1, 3, 2};
  }
  throw std::logic_error("boundary_state");
}

double boundary_value(BoundaryEq eq, const Layout& layout, const CorrelationParams& params,
                      const QuadratureConfig& quad) {
  if (layout.size() != 3) throw std::invalid_argument("boundary equations need three nodes");
  const GainEvaluator ev(layout, params, quad);
  const AoIState s = boundary_state(eq);
  switch (eq) {
    case BoundaryEq::s3_vs_s1_at_213: return ev.gain(s, 2).value - ev.gain(s, 0).value;
    case BoundaryEq::s1_vs_s2_at_321: return ev.gain(s, 0).value - ev.gain(s, 1).value;
    case BoundaryEq::s2_vs_s1_at_inf21: return ev.gain(s, 1).value - ev.gain(s, 0).value;
    case BoundaryEq::s3_vs_s2_at_132: return ev.gain(s, 2).value - ev.gain(s, 1).value;
  }
  throw std::logic_error("boundary_value");
}

BisectResult boundary_bisect(BoundaryEq eq, const SweepSpec& spec, Axis axis, double fixed,
                             double lo, double hi, double tol, std::size_t monotone_samples) {
  if (!(tol > 0.0)) throw std::invalid_argument("boundary_bisect: tol must be > 0");
  if (lo > hi) std::swap(lo, hi);
  auto f = [&](double v) {
    const double c1 = axis == Axis::coord1 ? v : fixed;
    const double c2 = axis == Axis::coord1 ? fixed : v;
    auto layout = spec.layout_at(c1, c2);
    if (!layout)
      throw BracketError("boundary_bisect: (" + std::to_string(c1) + ", " + std::to_string(c2) +
                         ") is outside the traversal region");
    return boundary_value(eq, *layout, spec.params, spec.quad);
  };
  double flo = f(lo);
  const double fhi = f(hi);
  if ((flo > 0.0 && fhi > 0.0) || (flo < 0.0 && fhi < 0.0))
    throw BracketError("boundary_bisect: no sign change of " + to_string(eq) + " on [" +
                       std::to_string(lo) + ", " + std::to_string(hi) + "] (" +
                       std::to_string(flo) + ", " + std::to_string(fhi) + ")");
  BisectResult out;
  if (monotone_samples > 0) {
    double prev = flo;
    int dir = 0;
    for (std::size_t k = 1; k <= monotone_samples + 1; ++k) {
      const double v = k == monotone_samples + 1
                           ? fhi
                           : f(lo + (hi - lo) * static_cast<double>(k) /
                                        static_cast<double>(monotone_samples + 1));
      const int d = v > prev ? 1 : (v < prev ? -1 : 0);
      if (d != 0 && dir != 0 && d != dir) out.non_monotone = true;
      if (d != 0) dir = d;
      prev = v;
    }
  }
  if (flo == 0.0) return {lo, 0.0, 0, out.non_monotone};
  if (fhi == 0.0) return {hi, 0.0, 0, out.non_monotone};
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    ++out.iterations;
    if (fm == 0.0) {
      lo = hi = mid;
      break;
    }
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  out.root = 0.5 * (lo + hi);
  out.width = hi - lo;
  return out;
}

std::vector<BracketSeed> discover_brackets(const PhaseMap& map) {
  auto eq_for = [](const std::string& a, const std::string& b) -> std::optional<BoundaryEq> {
    auto is = [&](const char* x, const char* y) { return (a == x && b == y) || (a == y && b == x); };
    if (is("1213", "123")) return BoundaryEq::s3_vs_s1_at_213;
    if (is("123", "reduced")) return BoundaryEq::s1_vs_s2_at_321;
    if (is("reduced", "23")) return BoundaryEq::s2_vs_s1_at_inf21;
    if (is("3132", "123")) return BoundaryEq::s3_vs_s2_at_132;
    return std::nullopt;
  };
  std::vector<BracketSeed> out;
  for (std::size_t i2 = 0; i2 < map.c2.size(); ++i2)
    for (std::size_t i1 = 0; i1 + 1 < map.c1.size(); ++i1) {
      const auto& a = map.at(i1, i2);
      if (!a.inside || a.failed || a.degenerate) continue;
      // Degenerate cells sit on ties near a boundary; bracket across them.
      std::size_t j = i1 + 1;
      while (j + 1 < map.c1.size() && map.at(j, i2).inside && !map.at(j, i2).failed &&
             map.at(j, i2).degenerate)
        ++j;
      const auto& b = map.at(j, i2);
      if (!b.inside || b.failed || b.degenerate) continue;
      if (auto eq = eq_for(a.family, b.family))
        out.push_back({*eq, Axis::coord1, map.c2[i2], a.coord1, b.coord1, a.family, b.family});
    }
  return out;
}

MechanismReport compare_mechanisms(const PhaseMap& greedy, const PhaseMap& longterm, double tol) {
  if (greedy.cells.size() != longterm.cells.size() || greedy.c1 != longterm.c1 ||
      greedy.c2 != longterm.c2)
    throw std::invalid_argument("compare_mechanisms: phase maps use different grids");
  MechanismReport r;
  double adv_sum = 0.0;
  for (std::size_t k = 0; k < greedy.cells.size(); ++k) {
    const auto& g = greedy.cells[k];
    const auto& l = longterm.cells[k];
    CellComparison c;
    c.coord1 = g.coord1;
    c.coord2 = g.coord2;
    c.greedy_label = g.label;
    c.longterm_label = l.label;
    c.comparable = g.inside && l.inside && !g.failed && !l.failed && !g.aperiodic && !l.aperiodic;
    c.greedy_mean = g.mean_gain;
    c.greedy_stddev = g.stddev_gain;
    c.longterm_mean = l.mean_gain;
    c.longterm_stddev = l.stddev_gain;
    if (c.comparable) {
      c.agree = g.cycle == l.cycle;
      ++r.compared;
      if (c.agree) ++r.agreeing;
      if (l.mean_gain >= g.mean_gain - tol) ++r.mean_not_lower;
      const double adv = g.mean_gain > 0.0 ? (l.mean_gain - g.mean_gain) / g.mean_gain : 0.0;
      r.max_mean_advantage = std::max(r.max_mean_advantage, adv);
      if (!c.agree) {
        ++r.differing;
        adv_sum += adv;
        if (l.stddev_gain >= g.stddev_gain - tol) ++r.differing_stddev_not_lower;
      }
    }
    r.cells.push_back(c);
  }
  if (r.differing) r.mean_advantage_on_differing = adv_sum / static_cast<double>(r.differing);
  return r;
}

void write_phase_csv(std::ostream& os, const PhaseMap& map) {
  os << "coord1,coord2,class,mean_gain,stddev_gain,flags,family,cycle\n";
  os.precision(10);
  for (const auto& c : map.cells)
    os << c.coord1 << ',' << c.coord2 << ',' << c.label << ',' << c.mean_gain << ','
       << c.stddev_gain << ',' << c.flags() << ',' << c.family << ',' << c.cycle << '\n';
}

void write_comparison_csv(std::ostream& os, const MechanismReport& report) {
  os << "coord1,coord2,comparable,agree,greedy_class,longterm_class,greedy_mean,greedy_stddev,"
        "longterm_mean,longterm_stddev\n";
  os.precision(10);
  for (const auto& c : report.cells)
    os << c.coord1 << ',' << c.coord2 << ',' << c.comparable << ',' << c.agree << ','
       << c.greedy_label << ',' << c.longterm_label << ',' << c.greedy_mean << ','
       << c.greedy_stddev << ',' << c.longterm_mean << ',' << c.longterm_stddev << '\n';
}

}  // namespace ssim
