#include "ssim/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <ostream>

namespace ssim {

std::vector<std::vector<int>> slot_distance_matrix(const Layout& layout,
                                                   const CorrelationParams& params) {
  params.validate();
  const std::size_t n = layout.size();
  std::vector<std::vector<int>> k(n, std::vector<int>(n, 0));
  const double unit = params.unit_distance();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = std::floor(layout.distance(i, j) / unit);
      if (v > 1e6) throw std::invalid_argument("slot_distance_matrix: nodes too far apart");
      k[i][j] = k[j][i] = static_cast<int>(v);
    }
  return k;
}

Age max_aoi(std::size_t node, const std::vector<std::vector<int>>& k) {
  const std::size_t n = k.size();
  if (node >= n) throw std::out_of_range("max_aoi: node out of range");
  std::vector<std::size_t> others;
  for (std::size_t j = 0; j < n; ++j)
    if (j != node) others.push_back(j);
  std::vector<int> ages(others.size());
  std::iota(ages.begin(), ages.end(), 1);
  int best = 0;
  do {
    int m = std::numeric_limits<int>::max();
    for (std::size_t t = 0; t < others.size(); ++t) m = std::min(m, k[node][others[t]] + ages[t]);
    best = std::max(best, m);
  } while (std::next_permutation(ages.begin(), ages.end()));
  return best;
}

MdpModel::MdpModel(Layout layout_in, CorrelationParams params_in, bool no_repeat_in)
    : layout(std::move(layout_in)), params(params_in), no_repeat(no_repeat_in) {
  params.validate();
  k = slot_distance_matrix(layout, params);
  for (std::size_t i = 0; i < layout.size(); ++i) cap.push_back(max_aoi(i, k));
}

std::string MdpState::to_string() const {
  return aoi.to_string() + "|" + (last ? std::to_string(*last + 1) : std::string("-"));
}

std::size_t MdpStateHash::operator()(const MdpState& s) const noexcept {
  return AoIStateHash{}(s.aoi) * 131u + (s.last ? *s.last + 1 : 0);
}

bool is_legal(const MdpState& state, std::size_t action, const MdpModel& model) {
  if (action >= model.nodes()) return false;
  return !(model.no_repeat && state.last && *state.last == action);
}

std::vector<std::size_t> legal_actions(const MdpState& state, const MdpModel& model) {
  std::vector<std::size_t> out;
  for (std::size_t a = 0; a < model.nodes(); ++a)
    if (is_legal(state, a, model)) out.push_back(a);
  return out;
}

namespace {

AoIState advance(const AoIState& s, std::size_t action, const MdpModel& model) {
  if (s.size() != model.nodes()) throw std::invalid_argument("transition: state size mismatch");
  std::vector<Age> ages(s.ages().begin(), s.ages().end());
  ages[action] = 0;
  for (std::size_t i = 0; i < ages.size(); ++i) {
    if (ages[i] == kExpired) continue;
    ages[i] += 1;
    if (ages[i] > model.cap[i]) ages[i] = kExpired;
  }
  return AoIState(std::move(ages));
}

}  // namespace

MdpState transition(const MdpState& state, std::size_t action, const MdpModel& model) {
  if (action >= model.nodes()) throw std::out_of_range("transition: action out of range");
  if (!is_legal(state, action, model))
    throw ContractError("transition: node " + std::to_string(action + 1) +
                        " activated twice in a row");
  return {advance(state.aoi, action, model), action};
}

AoIState transition(const AoIState& state, std::size_t action, const MdpModel& model) {
  if (action >= model.nodes()) throw std::out_of_range("transition: action out of range");
  if (model.no_repeat && state[action] == 1)
    throw ContractError("transition: node " + std::to_string(action + 1) +
                        " activated twice in a row");
  return advance(state, action, model);
}

std::size_t StateSpace::find(const MdpState& s) const {
  auto it = index.find(s);
  if (it == index.end()) throw std::out_of_range("state not in state space: " + s.to_string());
  return it->second;
}

StateSpace enumerate_states(const MdpModel& model) {
  StateSpace sp;
  const std::size_t n = model.nodes();
  auto add = [&](const MdpState& s) {
    auto [it, inserted] = sp.index.emplace(s, sp.states.size());
    if (inserted) {
      sp.states.push_back(s);
      sp.next.emplace_back(n, -1);
    }
    return it->second;
  };
  add(MdpState::initial(n));
  for (std::size_t cur = 0; cur < sp.states.size(); ++cur) {
    for (std::size_t a = 0; a < n; ++a) {
      if (!is_legal(sp.states[cur], a, model)) continue;
      const MdpState nxt = transition(sp.states[cur], a, model);
      const auto idx = add(nxt);
      sp.next[cur][a] = static_cast<long>(idx);
    }
  }
  return sp;
}

std::optional<long> closed_form_state_count(const MdpModel& model) {
  if (model.nodes() != 3) return std::nullopt;
  auto u = [](int x) { return x >= 0 ? 1L : 0L; };
  long total = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t j = (i + 1) % 3;
    const std::size_t kk = (i + 2) % 3;
    const std::size_t lo = std::min(j, kk), hi = std::max(j, kk);
    long part = 1;
    for (int m = 2; m <= model.cap[i]; ++m)
      part += u(model.k[i][lo] - (m - 1)) * u(model.k[i][hi] - (m - 2)) +
              u(model.k[i][lo] - (m - 2)) * u(model.k[i][hi] - (m - 1));
    total += part;
  }
  return total;
}

double reward(const AoIState& state, std::size_t action, const GainEvaluator& evaluator) {
  const GainResult g = evaluator.gain(state, action);
  const double denom = evaluator.first_activation_gain(g.level);
  return denom > 0.0 ? g.value / denom : 0.0;
}

RewardTable::RewardTable(const StateSpace& space, const MdpModel& model,
                         const GainEvaluator& evaluator) {
  const std::size_t n = model.nodes();
  r_.assign(space.size(), std::vector<double>(n, std::numeric_limits<double>::quiet_NaN()));
  for (std::size_t s = 0; s < space.size(); ++s)
    for (std::size_t a = 0; a < n; ++a)
      if (space.next[s][a] >= 0) r_[s][a] = reward(space.states[s].aoi, a, evaluator);
}

void write_state_space_csv(std::ostream& os, const StateSpace& space, const MdpModel& model,
                           const RewardTable& rewards) {
  os << "state,last,action,legal,next_state,reward\n";
  for (std::size_t s = 0; s < space.size(); ++s) {
    const auto& st = space.states[s];
    for (std::size_t a = 0; a < model.nodes(); ++a) {
      const long nx = space.next[s][a];
      os << '"' << st.aoi.to_string() << "\"," << (st.last ? std::to_string(*st.last + 1) : "-")
         << ',' << a + 1 << ',' << (nx >= 0 ? 1 : 0) << ',';
      if (nx >= 0)
        os << '"' << space.states[static_cast<std::size_t>(nx)].aoi.to_string() << "\","
           << rewards.at(s, a);
      else
        os << ',';
      os << '\n';
    }
  }
}

}  // namespace ssim
