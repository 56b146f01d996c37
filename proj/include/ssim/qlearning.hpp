#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ssim/greedy.hpp"
#include "ssim/mdp.hpp"

namespace ssim {

struct TrainConfig {
  double alpha = 0.1;
  double gamma = 0.9;
  double epsilon0 = 1.0;
  double epsilon_decay = 0.999;  // multiplicative, per episode
  double epsilon_floor = 0.05;
  std::size_t steps_per_episode = 64;
  std::size_t max_episodes = 1000000;
  // Stop once the max Bellman residual over all legal pairs is below this.
  double threshold = 1e-6;
  std::size_t check_every = 10;  // episodes between residual checks
  std::uint64_t seed = 1;
  // Start episodes from uniformly drawn reachable states instead of all-expired.
  bool exploring_starts = true;

  void validate() const;
};

// Q values over a state space. Entries exist for legal pairs only (illegal
// ones hold NaN).
struct QTable {
  std::vector<std::vector<double>> q;
  std::vector<std::vector<std::uint64_t>> visits;
  bool converged = false;
  std::size_t episodes = 0;
  double residual = 0.0;

  // Highest-valued legal action, lowest index among exact ties.
  std::size_t best_action(std::size_t state) const;
  double best_value(std::size_t state) const;
};

QTable make_qtable(const StateSpace& space);

QTable train(const StateSpace& space, const RewardTable& rewards, const TrainConfig& config);

// max over legal (s, a) of |Q(s,a) - (R(s,a) + gamma * max_a' Q(s',a'))|.
double bellman_residual(const QTable& table, const StateSpace& space, const RewardTable& rewards,
                        double gamma);

// Optimal Q by value iteration; sweeps until the largest change is below tol.
QTable value_iteration(const StateSpace& space, const RewardTable& rewards, double gamma,
                       double tol = 1e-12, std::size_t max_sweeps = 100000);

// Greedy-on-Q policy. Decisions whose runner-up is within tie_tol are flagged
// degenerate.
Policy q_policy(const QTable& table, const StateSpace& space, double tie_tol = 1e-9);

struct PolicyComparison {
  std::size_t states = 0;
  std::size_t identical = 0;        // same greedy action
  std::size_t tie_equivalent = 0;   // differ, but both within tie_tol of the optimum
  std::size_t mismatched = 0;
};

// Compares greedy actions of `candidate` against the `reference` Q values.
PolicyComparison compare_policies(const QTable& reference, const QTable& candidate,
                                  const StateSpace& space, double tie_tol);

// Greedy-on-Q schedule simulated from all-expired and cycle-detected.
struct ExtractedPolicy {
  PeriodicSchedule schedule;
  bool unconverged = false;
};
ExtractedPolicy extract_policy(const QTable& table, const StateSpace& space,
                               const MdpModel& model, const GainEvaluator& evaluator,
                               std::size_t horizon = 64);

struct LongRunStats {
  double mean = 0.0;
  double stddev = 0.0;
  PeriodicSchedule schedule;
};

// Exact cycle mean and population stddev of normalized per-step gain.
LongRunStats longrun_average(const Policy& policy, const MdpModel& model,
                             const GainEvaluator& evaluator, std::size_t horizon = 64);

// CSV rows state,last,action,value,visits for legal pairs.
void write_qtable_csv(std::ostream& os, const QTable& table, const StateSpace& space);
// Reads a table written by write_qtable_csv; every legal pair must be present.
QTable read_qtable_csv(std::istream& is, const StateSpace& space);

}  // namespace ssim
