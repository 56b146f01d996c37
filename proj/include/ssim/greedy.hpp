#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ssim/infofield.hpp"
#include "ssim/mdp.hpp"

namespace ssim {

struct Decision {
  std::size_t action = 0;
  bool degenerate = false;  // another legal action tied within the quadrature error
};

using Policy = std::function<Decision(const MdpState&)>;

// Argmax of total gain over legal candidates. Gains within
// 2 * (err_best + err_i) of the best count as tied; the lowest index wins and
// the decision is flagged degenerate.
Decision greedy_step(const MdpState& state, const MdpModel& model, const GainEvaluator& evaluator);
Policy greedy_policy(const MdpModel& model, const GainEvaluator& evaluator);

struct ScheduleTrace {
  std::size_t nodes = 0;
  std::vector<MdpState> states;  // state before each action
  std::vector<std::size_t> actions;
  std::vector<GainResult> gains;
  std::vector<double> rewards;  // normalized gains
  std::vector<bool> degenerate;

  std::size_t size() const { return actions.size(); }
};

// Applies the policy and the AoI transition `steps` times.
ScheduleTrace simulate(const MdpModel& model, const MdpState& initial, std::size_t steps,
                       const GainEvaluator& evaluator, const Policy& policy);

struct PeriodicSchedule {
  bool periodic = false;       // false: no repetition found within the trace
  bool degenerate = false;     // a tied decision occurs inside the cycle
  std::vector<std::size_t> cycle;   // rotation-normalized
  std::size_t preperiod = 0;
  std::vector<double> activation_fractions;  // per node
  std::vector<double> cycle_rewards;         // aligned with `cycle`

  // "1213" (1-based labels; dash-separated beyond 9 nodes) or "aperiodic".
  std::string label() const;
  double mean_reward() const;
  double stddev_reward() const;  // population standard deviation over the cycle
};

// Smallest period and preperiod of the action sequence. When the trace holds
// states, the first repeated state fixes the cycle exactly (the policy is a
// function of state). Otherwise a period p is accepted only if the periodic
// tail spans at least min_repeats * p actions.
PeriodicSchedule detect_cycle(const ScheduleTrace& trace, std::size_t min_repeats = 3);

// Action-only variant with the min_repeats rule.
PeriodicSchedule detect_cycle(const std::vector<std::size_t>& actions, std::size_t nodes,
                              std::size_t min_repeats = 3);

std::vector<std::size_t> normalize_rotation(const std::vector<std::size_t>& cycle);
std::string cycle_label(const std::vector<std::size_t>& cycle, std::size_t nodes);

}  // namespace ssim
