#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ssim/aoi_state.hpp"
#include "ssim/correlation.hpp"
#include "ssim/infofield.hpp"

namespace ssim {

// K_ij = floor(d_ij / ((lambda_t/lambda_d) * dt)): slots until node i's data
// is out-dated by a fresh reading of node j at its own position.
std::vector<std::vector<int>> slot_distance_matrix(const Layout& layout,
                                                   const CorrelationParams& params);

// Age cap of node i: max over assignments of the distinct ages 1..N-1 to the
// other nodes of min_j (K_ij + age_j). For three nodes this is the max over
// the two assignments of {1, 2}.
Age max_aoi(std::size_t node, const std::vector<std::vector<int>>& k);

struct MdpModel {
  MdpModel(Layout layout, CorrelationParams params, bool no_repeat = true);

  std::size_t nodes() const { return layout.size(); }

  Layout layout;
  CorrelationParams params;
  std::vector<std::vector<int>> k;
  std::vector<Age> cap;
  bool no_repeat = true;
};

// AoI vector plus the previous action. The previous action is the node with
// age 1, so the pair carries no extra information when the no-repeat rule is
// on; it is kept explicit so legality checks never depend on that identity.
struct MdpState {
  AoIState aoi;
  std::optional<std::size_t> last;

  static MdpState initial(std::size_t nodes) { return {AoIState::all_expired(nodes), {}}; }
  std::string to_string() const;
  bool operator==(const MdpState&) const = default;
  auto operator<=>(const MdpState&) const = default;
};

struct MdpStateHash {
  std::size_t operator()(const MdpState& s) const noexcept;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

bool is_legal(const MdpState& state, std::size_t action, const MdpModel& model);
std::vector<std::size_t> legal_actions(const MdpState& state, const MdpModel& model);

// Acted node -> 0, all ages +1, ages above the node's cap -> expired.
// Throws ContractError on a repeated action under the no-repeat rule.
MdpState transition(const MdpState& state, std::size_t action, const MdpModel& model);
AoIState transition(const AoIState& state, std::size_t action, const MdpModel& model);

struct StateSpace {
  std::vector<MdpState> states;                           // BFS order, [0] = initial
  std::unordered_map<MdpState, std::size_t, MdpStateHash> index;
  std::vector<std::vector<long>> next;                    // [s][a], -1 when illegal

  std::size_t size() const { return states.size(); }
  std::size_t find(const MdpState& s) const;  // throws std::out_of_range
};

// Reachable states from all-expired under the model's action rule.
StateSpace enumerate_states(const MdpModel& model);

// Closed-form state count for three nodes:
// sum_i {1 + sum_{m=2}^{cap_i} [u(K_ij-(m-1)) u(K_ik-(m-2)) + u(K_ij-(m-2)) u(K_ik-(m-1))]}.
// nullopt for other node counts.
std::optional<long> closed_form_state_count(const MdpModel& model);

// Normalized reward: gain(state, action) / gain(all expired, node 1), both at
// the same quadrature level so the ratio never exceeds 1 by discretization.
double reward(const AoIState& state, std::size_t action, const GainEvaluator& evaluator);

// Rewards of every legal (state, action) pair in a state space.
class RewardTable {
 public:
  RewardTable(const StateSpace& space, const MdpModel& model, const GainEvaluator& evaluator);
  double at(std::size_t state, std::size_t action) const { return r_[state][action]; }
  std::size_t states() const { return r_.size(); }

 private:
  std::vector<std::vector<double>> r_;  // NaN for illegal pairs
};

// CSV rows state,last,action,legal,next_state,reward.
void write_state_space_csv(std::ostream& os, const StateSpace& space, const MdpModel& model,
                           const RewardTable& rewards);

}  // namespace ssim
