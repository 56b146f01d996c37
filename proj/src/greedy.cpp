#include "ssim/greedy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace ssim {

Decision greedy_step(const MdpState& state, const MdpModel& model,
                     const GainEvaluator& evaluator) {
  const auto actions = legal_actions(state, model);
  if (actions.empty()) throw std::logic_error("greedy_step: no legal action");
  std::vector<GainResult> g;
  g.reserve(actions.size());
  for (auto a : actions) g.push_back(evaluator.gain(state.aoi, a));
  std::size_t best = 0;
  for (std::size_t t = 1; t < g.size(); ++t)
    if (g[t].value > g[best].value) best = t;
  Decision d;
  std::size_t ties = 0;
  bool chosen = false;
  for (std::size_t t = 0; t < g.size(); ++t) {
    const double slack = 2.0 * (g[best].err_estimate + g[t].err_estimate) +
                         1e-12 * std::abs(g[best].value);
    if (g[best].value - g[t].value <= slack) {
      ++ties;
      if (!chosen) {
        d.action = actions[t];
        chosen = true;
      }
    }
  }
  d.degenerate = ties > 1;
  return d;
}

Policy greedy_policy(const MdpModel& model, const GainEvaluator& evaluator) {
  return [&model, &evaluator](const MdpState& s) { return greedy_step(s, model, evaluator); };
}

ScheduleTrace simulate(const MdpModel& model, const MdpState& initial, std::size_t steps,
                       const GainEvaluator& evaluator, const Policy& policy) {
  if (steps < 1) throw std::invalid_argument("simulate: steps must be >= 1");
  ScheduleTrace tr;
  tr.nodes = model.nodes();
  MdpState s = initial;
  for (std::size_t t = 0; t < steps; ++t) {
    const Decision d = policy(s);
    const GainResult g = evaluator.gain(s.aoi, d.action);
    tr.states.push_back(s);
    tr.actions.push_back(d.action);
    tr.gains.push_back(g);
    tr.rewards.push_back(g.value / evaluator.first_activation_gain(g.level));
    tr.degenerate.push_back(d.degenerate);
    s = transition(s, d.action, model);
  }
  return tr;
}

std::vector<std::size_t> normalize_rotation(const std::vector<std::size_t>& cycle) {
  if (cycle.empty()) return cycle;
  std::vector<std::size_t> best = cycle;
  std::vector<std::size_t> rot = cycle;
  for (std::size_t r = 1; r < cycle.size(); ++r) {
    std::rotate(rot.begin(), rot.begin() + 1, rot.end());
    if (rot < best) best = rot;
  }
  return best;
}

std::string cycle_label(const std::vector<std::size_t>& cycle, std::size_t nodes) {
  std::string out;
  for (std::size_t t = 0; t < cycle.size(); ++t) {
    if (nodes > 9 && t) out += '-';
    out += std::to_string(cycle[t] + 1);
  }
  return out;
}

std::string PeriodicSchedule::label() const {
  return periodic ? cycle_label(cycle, activation_fractions.size()) : std::string("aperiodic");
}

double PeriodicSchedule::mean_reward() const {
  if (cycle_rewards.empty()) return 0.0;
  double s = 0.0;
  for (double r : cycle_rewards) s += r;
  return s / static_cast<double>(cycle_rewards.size());
}

double PeriodicSchedule::stddev_reward() const {
  if (cycle_rewards.empty()) return 0.0;
  const double m = mean_reward();
  double s = 0.0;
  for (double r : cycle_rewards) s += (r - m) * (r - m);
  return std::sqrt(s / static_cast<double>(cycle_rewards.size()));
}

namespace {

// Smallest p dividing the window's structure: window[t] == window[t + p].
std::size_t minimal_period(const std::vector<std::size_t>& w) {
  for (std::size_t p = 1; p < w.size(); ++p) {
    if (w.size() % p) continue;
    bool ok = true;
    for (std::size_t t = 0; t + p < w.size() && ok; ++t) ok = w[t] == w[t + p];
    if (ok) return p;
  }
  return w.size();
}

void fill(PeriodicSchedule& out, const std::vector<std::size_t>& actions,
          const std::vector<double>* rewards, const std::vector<bool>* degenerate,
          std::size_t start, std::size_t period, std::size_t nodes, std::size_t reward_span = 0) {
  out.periodic = true;
  out.preperiod = start;
  std::vector<std::size_t> cyc(actions.begin() + static_cast<long>(start),
                               actions.begin() + static_cast<long>(start + period));
  // Align rewards with the normalized rotation.
  std::size_t shift = 0;
  const auto norm = normalize_rotation(cyc);
  for (std::size_t r = 0; r < period; ++r) {
    bool eq = true;
    for (std::size_t t = 0; t < period && eq; ++t) eq = cyc[(r + t) % period] == norm[t];
    if (eq) {
      shift = r;
      break;
    }
  }
  out.cycle = norm;
  out.activation_fractions.assign(nodes, 0.0);
  for (auto a : norm) out.activation_fractions[a] += 1.0 / static_cast<double>(period);
  out.cycle_rewards.clear();
  if (rewards) {
    const std::size_t span = reward_span ? reward_span : period;
    for (std::size_t t = 0; t < span; ++t)
      out.cycle_rewards.push_back((*rewards)[start + (shift + t) % span]);
  }
  out.degenerate = false;
  if (degenerate)
    for (std::size_t t = 0; t < period; ++t) out.degenerate = out.degenerate || (*degenerate)[start + t];
}

}  // namespace

PeriodicSchedule detect_cycle(const std::vector<std::size_t>& actions, std::size_t nodes,
                              std::size_t min_repeats) {
  PeriodicSchedule out;
  out.activation_fractions.assign(nodes, 0.0);
  const std::size_t n = actions.size();
  if (min_repeats < 2) min_repeats = 2;
  for (std::size_t p = 1; p * min_repeats <= n; ++p) {
    // Walk back from the end while the p-shift matches.
    std::size_t start = n - p;
    while (start > 0 && actions[start - 1] == actions[start - 1 + p]) --start;
    if (n - start >= min_repeats * p) {
      fill(out, actions, nullptr, nullptr, start, p, nodes);
      return out;
    }
  }
  return out;
}

PeriodicSchedule detect_cycle(const ScheduleTrace& trace, std::size_t min_repeats) {
  if (trace.states.size() != trace.actions.size())
    return detect_cycle(trace.actions, trace.nodes, min_repeats);
  std::unordered_map<MdpState, std::size_t, MdpStateHash> seen;
  for (std::size_t t = 0; t < trace.states.size(); ++t) {
    auto [it, inserted] = seen.emplace(trace.states[t], t);
    if (inserted) continue;
    const std::size_t start = it->second;
    const std::vector<std::size_t> window(trace.actions.begin() + static_cast<long>(start),
                                          trace.actions.begin() + static_cast<long>(t));
    const std::size_t p = minimal_period(window);
    PeriodicSchedule out;
    fill(out, trace.actions, &trace.rewards, &trace.degenerate, start, p, trace.nodes, t - start);
    out.degenerate = false;
    for (std::size_t u = start; u < t; ++u) out.degenerate = out.degenerate || trace.degenerate[u];
    return out;
  }
  PeriodicSchedule out;
  out.activation_fractions.assign(trace.nodes, 0.0);
  return out;
}

}  // namespace ssim
