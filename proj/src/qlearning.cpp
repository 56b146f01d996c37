#include "ssim/qlearning.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ssim {

void TrainConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("train: alpha must be in (0, 1]");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("train: gamma must be in [0, 1)");
  if (!(epsilon0 >= 0.0 && epsilon0 <= 1.0) || !(epsilon_floor >= 0.0 && epsilon_floor <= 1.0))
    throw std::invalid_argument("train: epsilon must be in [0, 1]");
  if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0))
    throw std::invalid_argument("train: epsilon_decay must be in (0, 1]");
  if (steps_per_episode == 0 || max_episodes == 0 || check_every == 0)
    throw std::invalid_argument("train: episode budget must be positive");
  if (!(threshold > 0.0)) throw std::invalid_argument("train: threshold must be > 0");
}

std::size_t QTable::best_action(std::size_t state) const {
  const auto& row = q.at(state);
  std::size_t best = row.size();
  for (std::size_t a = 0; a < row.size(); ++a) {
    if (std::isnan(row[a])) continue;
    if (best == row.size() || row[a] > row[best]) best = a;
  }
  if (best == row.size()) throw std::logic_error("QTable: state without legal action");
  return best;
}

double QTable::best_value(std::size_t state) const { return q[state][best_action(state)]; }

QTable make_qtable(const StateSpace& space) {
  QTable t;
  for (std::size_t s = 0; s < space.size(); ++s) {
    std::vector<double> row(space.next[s].size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t a = 0; a < row.size(); ++a)
      if (space.next[s][a] >= 0) row[a] = 0.0;
    t.q.push_back(std::move(row));
    t.visits.emplace_back(space.next[s].size(), 0);
  }
  return t;
}

double bellman_residual(const QTable& table, const StateSpace& space, const RewardTable& rewards,
                        double gamma) {
  double worst = 0.0;
  for (std::size_t s = 0; s < space.size(); ++s)
    for (std::size_t a = 0; a < space.next[s].size(); ++a) {
      const long nx = space.next[s][a];
      if (nx < 0) continue;
      const double target =
          rewards.at(s, a) + gamma * table.best_value(static_cast<std::size_t>(nx));
      worst = std::max(worst, std::abs(table.q[s][a] - target));
    }
  return worst;
}

QTable train(const StateSpace& space, const RewardTable& rewards, const TrainConfig& config) {
  config.validate();
  if (space.size() == 0) throw std::invalid_argument("train: empty state space");
  QTable t = make_qtable(space);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_state(0, space.size() - 1);
  double eps = config.epsilon0;
  std::vector<std::size_t> legal;
  for (std::size_t ep = 1; ep <= config.max_episodes; ++ep) {
    std::size_t s = config.exploring_starts ? pick_state(rng) : 0;
    for (std::size_t step = 0; step < config.steps_per_episode; ++step) {
      legal.clear();
      for (std::size_t a = 0; a < space.next[s].size(); ++a)
        if (space.next[s][a] >= 0) legal.push_back(a);
      std::size_t a;
      if (unit(rng) < eps) {
        a = legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)];
      } else {
        a = t.best_action(s);
      }
      const auto nx = static_cast<std::size_t>(space.next[s][a]);
      const double target = rewards.at(s, a) + config.gamma * t.best_value(nx);
      t.q[s][a] += config.alpha * (target - t.q[s][a]);
      ++t.visits[s][a];
      s = nx;
    }
    eps = std::max(config.epsilon_floor, eps * config.epsilon_decay);
    t.episodes = ep;
    if (ep % config.check_every == 0 || ep == config.max_episodes) {
      t.residual = bellman_residual(t, space, rewards, config.gamma);
      if (t.residual < config.threshold) {
        t.converged = true;
        break;
      }
    }
  }
  return t;
}

QTable value_iteration(const StateSpace& space, const RewardTable& rewards, double gamma,
                       double tol, std::size_t max_sweeps) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("value_iteration: gamma must be in [0, 1)");
  QTable t = make_qtable(space);
  for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
    std::vector<double> v(space.size());
    for (std::size_t s = 0; s < space.size(); ++s) v[s] = t.best_value(s);
    double change = 0.0;
    for (std::size_t s = 0; s < space.size(); ++s)
      for (std::size_t a = 0; a < space.next[s].size(); ++a) {
        const long nx = space.next[s][a];
        if (nx < 0) continue;
        const double nq = rewards.at(s, a) + gamma * v[static_cast<std::size_t>(nx)];
        change = std::max(change, std::abs(nq - t.q[s][a]));
        t.q[s][a] = nq;
      }
    t.episodes = sweep;
    if (change < tol) {
      t.converged = true;
      break;
    }
  }
  t.residual = bellman_residual(t, space, rewards, gamma);
  return t;
}

Policy q_policy(const QTable& table, const StateSpace& space, double tie_tol) {
  return [&table, &space, tie_tol](const MdpState& s) {
    const std::size_t idx = space.find(s);
    Decision d;
    d.action = table.best_action(idx);
    const double best = table.q[idx][d.action];
    for (std::size_t a = 0; a < table.q[idx].size(); ++a)
      if (a != d.action && !std::isnan(table.q[idx][a]) && best - table.q[idx][a] <= tie_tol)
        d.degenerate = true;
    return d;
  };
}

PolicyComparison compare_policies(const QTable& reference, const QTable& candidate,
                                  const StateSpace& space, double tie_tol) {
  PolicyComparison c;
  c.states = space.size();
  for (std::size_t s = 0; s < space.size(); ++s) {
    const std::size_t ra = reference.best_action(s);
    const std::size_t ca = candidate.best_action(s);
    if (ra == ca)
      ++c.identical;
    else if (reference.q[s][ra] - reference.q[s][ca] <= tie_tol)
      ++c.tie_equivalent;
    else
      ++c.mismatched;
  }
  return c;
}

ExtractedPolicy extract_policy(const QTable& table, const StateSpace& space,
                               const MdpModel& model, const GainEvaluator& evaluator,
                               std::size_t horizon) {
  ExtractedPolicy out;
  const auto policy = q_policy(table, space);
  const auto trace = simulate(model, MdpState::initial(model.nodes()), horizon, evaluator, policy);
  out.schedule = detect_cycle(trace);
  out.unconverged = !table.converged;
  return out;
}

LongRunStats longrun_average(const Policy& policy, const MdpModel& model,
                             const GainEvaluator& evaluator, std::size_t horizon) {
  LongRunStats out;
  const auto trace = simulate(model, MdpState::initial(model.nodes()), horizon, evaluator, policy);
  out.schedule = detect_cycle(trace);
  out.mean = out.schedule.mean_reward();
  out.stddev = out.schedule.stddev_reward();
  return out;
}

void write_qtable_csv(std::ostream& os, const QTable& table, const StateSpace& space) {
  os << "state,last,action,value,visits\n";
  os.precision(17);
  for (std::size_t s = 0; s < space.size(); ++s) {
    const auto& st = space.states[s];
    for (std::size_t a = 0; a < table.q[s].size(); ++a) {
      if (std::isnan(table.q[s][a])) continue;
      os << '"' << st.aoi.to_string() << "\"," << (st.last ? std::to_string(*st.last + 1) : "-")
         << ',' << a + 1 << ',' << table.q[s][a] << ',' << table.visits[s][a] << '\n';
    }
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

QTable read_qtable_csv(std::istream& is, const StateSpace& space) {
  QTable t = make_qtable(space);
  std::vector<std::vector<bool>> seen(space.size());
  for (std::size_t s = 0; s < space.size(); ++s) seen[s].assign(space.next[s].size(), false);
  std::string line;
  if (!std::getline(is, line) || line.rfind("state,last,action,value", 0) != 0)
    throw std::runtime_error("qtable csv: missing header");
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    auto fail = [&](const std::string& why) {
      throw std::runtime_error("qtable csv line " + std::to_string(lineno) + ": " + why);
    };
    if (f.size() < 4) fail("expected state,last,action,value[,visits]");
    MdpState st;
    try {
      st.aoi = AoIState::parse(f[0]);
      if (f[1] != "-") st.last = std::stoul(f[1]) - 1;
    } catch (const std::exception& e) {
      fail(e.what());
    }
    auto it = space.index.find(st);
    if (it == space.index.end()) fail("state " + st.to_string() + " not reachable in this model");
    std::size_t a = 0;
    double v = 0.0;
    try {
      a = std::stoul(f[2]) - 1;
      v = std::stod(f[3]);
    } catch (const std::exception&) {
      fail("bad action or value");
    }
    const std::size_t s = it->second;
    if (a >= space.next[s].size() || space.next[s][a] < 0) fail("illegal action");
    if (seen[s][a]) fail("duplicate entry");
    seen[s][a] = true;
    t.q[s][a] = v;
    if (f.size() >= 5 && !f[4].empty()) t.visits[s][a] = std::stoull(f[4]);
  }
  for (std::size_t s = 0; s < space.size(); ++s)
    for (std::size_t a = 0; a < seen[s].size(); ++a)
      if (space.next[s][a] >= 0 && !seen[s][a])
        throw std::runtime_error("qtable csv: missing entry for " + space.states[s].to_string() +
                                 " action " + std::to_string(a + 1));
  return t;
}

}  // namespace ssim
