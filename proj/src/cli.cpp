#include "ssim/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "ssim/artifacts.hpp"
#include "ssim/greedy.hpp"
#include "ssim/mdp.hpp"

namespace ssim::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& dst, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

void read_range(const json& j, const char* key, Range& r, const std::string& where) {
  if (!j.contains(key)) return;
  const std::string w = where + "." + key;
  check_keys(j[key], {"min", "max", "step"}, w);
  read(j[key], "min", r.min, w);
  read(j[key], "max", r.max, w);
  read(j[key], "step", r.step, w);
}

std::optional<Point> read_point(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) return std::nullopt;
  const auto& v = j[key];
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(where + "." + key + ": expected [x, y]");
  return Point{v[0].get<double>(), v[1].get<double>()};
}

json point_json(Point p) { return json::array({p.x, p.y}); }

template <class F>
void as_config_error(const std::string& what, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(what.empty() ? std::string(e.what()) : what + ": " + e.what());
  }
}

}  // namespace

Layout LayoutSpec::build() const {
  if (type == "equilateral") return Layout::equilateral(side);
  if (type == "isosceles") return Layout::isosceles(base, height);
  if (type == "general") return Layout::general(longest, x, y);
  if (type == "points") return Layout(points);
  throw ConfigError("layout.type: unknown '" + type + "'");
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"params", "layout", "quadrature", "train", "seed", "threads", "out", "no_repeat",
                 "horizon", "validate", "greedy", "qlearn", "sweep", "boundary", "eval", "synth"},
             "config");
  RunConfig c;
  if (j.contains("params")) {
    check_keys(j["params"], {"lambda_d", "lambda_t", "dt"}, "params");
    read(j["params"], "lambda_d", c.params.lambda_d, "params");
    read(j["params"], "lambda_t", c.params.lambda_t, "params");
    read(j["params"], "dt", c.params.dt, "params");
  }
  as_config_error("params", [&] { c.params.validate(); });

  c.quad = QuadratureConfig::defaults(c.params);
  if (j.contains("quadrature")) {
    const auto& q = j["quadrature"];
    check_keys(q, {"cell", "tol", "trunc_eps", "max_levels"}, "quadrature");
    read(q, "cell", c.quad.cell, "quadrature");
    read(q, "tol", c.quad.tol, "quadrature");
    read(q, "trunc_eps", c.quad.trunc_eps, "quadrature");
    read(q, "max_levels", c.quad.max_levels, "quadrature");
  }

  if (j.contains("layout")) {
    const auto& l = j["layout"];
    check_keys(l, {"type", "side", "base", "height", "longest", "x", "y", "points"}, "layout");
    if (!l.contains("type")) throw ConfigError("layout: missing key 'type'");
    read(l, "type", c.layout.type, "layout");
    auto require = [&](std::initializer_list<const char*> keys) {
      for (const char* k : keys)
        if (!l.contains(k))
          throw ConfigError("layout: type '" + c.layout.type + "' needs key '" + k + "'");
    };
    if (c.layout.type == "equilateral") require({"side"});
    if (c.layout.type == "isosceles") require({"base", "height"});
    if (c.layout.type == "general") require({"longest", "x", "y"});
    if (c.layout.type == "points") require({"points"});
    c.layout_given = true;
    read(l, "side", c.layout.side, "layout");
    read(l, "base", c.layout.base, "layout");
    read(l, "height", c.layout.height, "layout");
    read(l, "longest", c.layout.longest, "layout");
    read(l, "x", c.layout.x, "layout");
    read(l, "y", c.layout.y, "layout");
    if (l.contains("points")) {
      if (!l["points"].is_array()) throw ConfigError("layout.points: expected an array");
      for (const auto& p : l["points"]) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
          throw ConfigError("layout.points: expected [[x, y], ...]");
        c.layout.points.push_back({p[0].get<double>(), p[1].get<double>()});
      }
    }
    as_config_error("layout", [&] { (void)c.layout.build(); });
  }

  read(j, "seed", c.seed, "config");
  read(j, "threads", c.threads, "config");
  if (j.contains("out")) c.out = j["out"].get<std::string>();
  read(j, "no_repeat", c.no_repeat, "config");
  read(j, "horizon", c.horizon, "config");

  if (j.contains("train")) {
    const auto& t = j["train"];
    check_keys(t, {"alpha", "gamma", "epsilon0", "epsilon_decay", "epsilon_floor",
                   "steps_per_episode", "max_episodes", "threshold", "check_every",
                   "exploring_starts"},
               "train");
    read(t, "alpha", c.train.alpha, "train");
    read(t, "gamma", c.train.gamma, "train");
    read(t, "epsilon0", c.train.epsilon0, "train");
    read(t, "epsilon_decay", c.train.epsilon_decay, "train");
    read(t, "epsilon_floor", c.train.epsilon_floor, "train");
    read(t, "steps_per_episode", c.train.steps_per_episode, "train");
    read(t, "max_episodes", c.train.max_episodes, "train");
    read(t, "threshold", c.train.threshold, "train");
    read(t, "check_every", c.train.check_every, "train");
    read(t, "exploring_starts", c.train.exploring_starts, "train");
  }

  if (j.contains("validate")) {
    check_keys(j["validate"], {"samples"}, "validate");
    read(j["validate"], "samples", c.validate_samples, "validate");
  }
  if (j.contains("greedy")) {
    const auto& g = j["greedy"];
    check_keys(g, {"dump_field", "field_step", "field_margin"}, "greedy");
    read(g, "dump_field", c.dump_field, "greedy");
    read(g, "field_step", c.field.step, "greedy");
    read(g, "field_margin", c.field.margin, "greedy");
  }
  if (j.contains("qlearn")) {
    const auto& q = j["qlearn"];
    check_keys(q, {"qtable_in", "dump_states"}, "qlearn");
    if (q.contains("qtable_in")) c.qtable_in = q["qtable_in"].get<std::string>();
    read(q, "dump_states", c.dump_states, "qlearn");
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    check_keys(s, {"mode", "mechanism", "coord1", "coord2", "longest"}, "sweep");
    std::string mode = to_string(c.sweep.mode), mech = to_string(c.sweep.mechanism);
    read(s, "mode", mode, "sweep");
    read(s, "mechanism", mech, "sweep");
    as_config_error("sweep", [&] {
      c.sweep.mode = parse_sweep_mode(mode);
      c.sweep.mechanism = parse_mechanism(mech);
    });
    read_range(s, "coord1", c.sweep.coord1, "sweep");
    read_range(s, "coord2", c.sweep.coord2, "sweep");
    read(s, "longest", c.sweep.longest, "sweep");
  }
  if (j.contains("boundary")) {
    const auto& b = j["boundary"];
    check_keys(b, {"equation", "axis", "fixed", "lo", "hi", "tol"}, "boundary");
    read(b, "equation", c.boundary.equation, "boundary");
    read(b, "axis", c.boundary.axis, "boundary");
    read(b, "fixed", c.boundary.fixed, "boundary");
    read(b, "lo", c.boundary.lo, "boundary");
    read(b, "hi", c.boundary.hi, "boundary");
    read(b, "tol", c.boundary.tol, "boundary");
    as_config_error("boundary.equation", [&] { (void)parse_boundary(c.boundary.equation); });
    if (c.boundary.axis != "coord1" && c.boundary.axis != "coord2")
      throw ConfigError("boundary.axis: expected coord1 or coord2");
    if (!(c.boundary.tol > 0.0)) throw ConfigError("boundary.tol: must be > 0");
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    check_keys(e, {"data", "format", "spacing", "downsample", "fit", "coverage",
                   "circle_radius_cells", "union_radius", "center", "longest",
                   "traverse_step_cells", "start", "steps"},
               "eval");
    if (e.contains("data")) c.eval.data = e["data"].get<std::string>();
    read(e, "format", c.eval.format, "eval");
    read(e, "spacing", c.eval.spacing, "eval");
    read(e, "downsample", c.eval.downsample, "eval");
    read(e, "fit", c.eval.fit, "eval");
    read(e, "coverage", c.eval.coverage, "eval");
    read(e, "circle_radius_cells", c.eval.circle_radius_cells, "eval");
    if (e.contains("union_radius")) c.eval.union_radius = e["union_radius"].get<double>();
    c.eval.center = read_point(e, "center", "eval");
    read(e, "longest", c.eval.longest, "eval");
    read(e, "traverse_step_cells", c.eval.traverse_step_cells, "eval");
    read(e, "start", c.eval.start, "eval");
    if (e.contains("steps")) c.eval.steps = e["steps"].get<std::size_t>();
    as_config_error("eval.coverage", [&] { (void)parse_coverage(c.eval.coverage); });
    if (c.eval.format != "long_csv" && c.eval.format != "dense")
      throw ConfigError("eval.format: expected long_csv or dense");
    if (c.eval.downsample == 0) throw ConfigError("eval.downsample: must be >= 1");
    if (c.eval.data && !fs::exists(*c.eval.data))
      throw ConfigError("eval.data: file not found: " + c.eval.data->string());
  }
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    check_keys(s, {"nx", "ny", "nt", "spacing"}, "synth");
    read(s, "nx", c.synth.nx, "synth");
    read(s, "ny", c.synth.ny, "synth");
    read(s, "nt", c.synth.nt, "synth");
    read(s, "spacing", c.synth.spacing, "synth");
  }
  if (c.qtable_in && !fs::exists(*c.qtable_in))
    throw ConfigError("qlearn.qtable_in: file not found: " + c.qtable_in->string());
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string RunConfig::canonical_json() const {
  json j;
  j["params"] = {{"lambda_d", params.lambda_d}, {"lambda_t", params.lambda_t}, {"dt", params.dt}};
  json l = {{"type", layout.type}};
  if (layout.type == "equilateral") l["side"] = layout.side;
  if (layout.type == "isosceles") l["base"] = layout.base, l["height"] = layout.height;
  if (layout.type == "general")
    l["longest"] = layout.longest, l["x"] = layout.x, l["y"] = layout.y;
  if (layout.type == "points") {
    l["points"] = json::array();
    for (auto p : layout.points) l["points"].push_back(point_json(p));
  }
  j["layout"] = l;
  j["quadrature"] = {{"cell", quad.cell}, {"tol", quad.tol}, {"trunc_eps", quad.trunc_eps},
                     {"max_levels", quad.max_levels}};
  j["train"] = {{"alpha", train.alpha},
                {"gamma", train.gamma},
                {"epsilon0", train.epsilon0},
                {"epsilon_decay", train.epsilon_decay},
                {"epsilon_floor", train.epsilon_floor},
                {"steps_per_episode", train.steps_per_episode},
                {"max_episodes", train.max_episodes},
                {"threshold", train.threshold},
                {"check_every", train.check_every},
                {"exploring_starts", train.exploring_starts}};
  j["seed"] = seed;
  j["no_repeat"] = no_repeat;
  j["horizon"] = horizon;
  j["validate"] = {{"samples", validate_samples}};
  j["greedy"] = {{"dump_field", dump_field}, {"field_step", field.step},
                 {"field_margin", field.margin}};
  j["qlearn"] = {{"dump_states", dump_states}};
  if (qtable_in) j["qlearn"]["qtable_in"] = qtable_in->string();
  auto range = [](const Range& r) { return json{{"min", r.min}, {"max", r.max}, {"step", r.step}}; };
  j["sweep"] = {{"mode", to_string(sweep.mode)},
                {"mechanism", to_string(sweep.mechanism)},
                {"coord1", range(sweep.coord1)},
                {"coord2", range(sweep.coord2)},
                {"longest", sweep.longest}};
  j["boundary"] = {{"equation", boundary.equation}, {"axis", boundary.axis},
                   {"fixed", boundary.fixed},       {"lo", boundary.lo},
                   {"hi", boundary.hi},             {"tol", boundary.tol}};
  json e = {{"format", eval.format},
            {"spacing", eval.spacing},
            {"downsample", eval.downsample},
            {"fit", eval.fit},
            {"coverage", eval.coverage},
            {"circle_radius_cells", eval.circle_radius_cells},
            {"longest", eval.longest},
            {"traverse_step_cells", eval.traverse_step_cells},
            {"start", eval.start}};
  if (eval.data) e["data"] = eval.data->string();
  if (eval.union_radius) e["union_radius"] = *eval.union_radius;
  if (eval.center) e["center"] = point_json(*eval.center);
  if (eval.steps) e["steps"] = *eval.steps;
  j["eval"] = e;
  j["synth"] = {{"nx", synth.nx}, {"ny", synth.ny}, {"nt", synth.nt}, {"spacing", synth.spacing}};
  return j.dump();
}

namespace {

struct Context {
  RunConfig cfg;
  std::string command;
  std::ostream& out;
  std::ostream& err;

  void say(const std::string& s) const {
    if (!cfg.quiet) out << s << '\n';
  }

  Metadata meta() const {
    Metadata m;
    m.set("tool", "ssim");
    m.set("version", kToolVersion);
    m.set("command", command);
    const std::string canon = cfg.canonical_json();
    m.set("config_hash", hex64(fnv1a64(canon)));
    m.set("seed", std::to_string(cfg.seed));
    m.set("lambda_d", cfg.params.lambda_d);
    m.set("lambda_t", cfg.params.lambda_t);
    m.set("dt", cfg.params.dt);
    m.set("config", canon);
    return m;
  }

  void emit(const std::string& name, const std::string& content, const Metadata& m) const {
    const auto p = write_artifact(cfg.out, name, content, m);
    say("wrote " + p.string());
  }
};

std::string fmt(double v, int prec = 10) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

std::string trace_csv(const ScheduleTrace& t) {
  std::ostringstream os;
  os.precision(12);
  os << "step,state,action,gain,gain_err,reward,degenerate\n";
  for (std::size_t i = 0; i < t.size(); ++i)
    os << i << ',' << t.states[i].aoi.to_string() << ',' << t.actions[i] + 1 << ','
       << t.gains[i].value << ',' << t.gains[i].err_estimate << ',' << t.rewards[i] << ','
       << (t.degenerate[i] ? 1 : 0) << '\n';
  return os.str();
}

std::string cycle_csv(const PeriodicSchedule& p, std::size_t nodes) {
  std::ostringstream os;
  os.precision(12);
  os << "label,period,preperiod,periodic,degenerate,mean_reward,stddev_reward";
  for (std::size_t i = 0; i < nodes; ++i) os << ",fraction_" << i + 1;
  os << '\n'
     << p.label() << ',' << p.cycle.size() << ',' << p.preperiod << ',' << (p.periodic ? 1 : 0)
     << ',' << (p.degenerate ? 1 : 0) << ',' << p.mean_reward() << ',' << p.stddev_reward();
  for (std::size_t i = 0; i < nodes; ++i)
    os << ',' << (i < p.activation_fractions.size() ? p.activation_fractions[i] : 0.0);
  os << '\n';
  return os.str();
}

std::string field_csv(const Layout& layout, const AoIState& state, const RunConfig& c) {
  double x0 = layout[0].x, x1 = x0, y0 = layout[0].y, y1 = y0;
  for (const auto& p : layout.positions()) {
    x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
  }
  std::ostringstream os;
  write_field_csv(os, layout, state, c.params, x0 - c.field.margin, x1 + c.field.margin,
                  y0 - c.field.margin, y1 + c.field.margin, c.field.step);
  return os.str();
}

int cmd_validate(const Context& ctx) {
  const auto& c = ctx.cfg;
  const GainResult r = validate_plane_integral();
  const double target = std::numbers::pi / 2.0;
  const double abs_err = std::abs(r.value - target);

  // Region labels against the argmin of the correlation exponent.
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> u(-300.0, 300.0);
  std::uniform_int_distribution<int> age(0, 6);
  std::size_t mismatches = 0;
  const Layout layout = c.layout.build();
  for (std::size_t k = 0; k < c.validate_samples; ++k) {
    std::vector<Age> ages(layout.size());
    for (auto& a : ages) {
      const int v = age(rng);
      a = v == 6 ? kExpired : v + 1;
    }
    if (age(rng) < 3) ages[static_cast<std::size_t>(age(rng)) % ages.size()] = 0;
    const AoIState st(ages);
    const Point p{u(rng), u(rng)};
    const RegionLabel lab = classify_region(p, layout, st, c.params);
    const auto rel = most_relevant(p, layout, st, c.params);
    if (lab.boundary) continue;
    if (lab.node.has_value() != rel.has_value() || (rel && *lab.node != rel->node)) ++mismatches;
  }
  const bool pass = abs_err <= 1e-3 && mismatches == 0;

  std::ostringstream os;
  os << "check,value,threshold,pass\n"
     << "plane_integral," << fmt(r.value, 12) << ',' << fmt(target, 12) << ','
     << (abs_err <= 1e-3 ? 1 : 0) << '\n'
     << "plane_integral_abs_error," << fmt(abs_err) << ",0.001," << (abs_err <= 1e-3 ? 1 : 0)
     << '\n'
     << "region_mismatches," << mismatches << ",0," << (mismatches == 0 ? 1 : 0) << '\n';
  Metadata m = ctx.meta();
  m.set("selftest_level", std::to_string(r.level));
  m.set("selftest_err_estimate", r.err_estimate);
  ctx.emit("validate.csv", os.str(), m);
  ctx.say("plane integral " + fmt(r.value, 10) + "  |I - pi/2| = " + fmt(abs_err, 3) +
          "  region mismatches " + std::to_string(mismatches) + "/" +
          std::to_string(c.validate_samples) + (pass ? "  PASS" : "  FAIL"));
  return pass ? kOk : kNumeric;
}

void require_layout(const RunConfig& c) {
  if (!c.layout_given) throw ConfigError("missing 'layout' key");
}

int cmd_greedy(const Context& ctx) {
  const auto& c = ctx.cfg;
  require_layout(c);
  const MdpModel model(c.layout.build(), c.params, c.no_repeat);
  const GainEvaluator ev(model.layout, c.params, c.quad);
  const ScheduleTrace t =
      simulate(model, MdpState::initial(model.nodes()), c.horizon, ev, greedy_policy(model, ev));
  const PeriodicSchedule p = detect_cycle(t);
  Metadata m = ctx.meta();
  m.set("mechanism", "greedy");
  ctx.emit("trace.csv", trace_csv(t), m);
  ctx.emit("cycle.csv", cycle_csv(p, model.nodes()), m);
  if (c.dump_field) {
    const AoIState st = p.periodic ? t.states[p.preperiod].aoi : t.states.back().aoi;
    Metadata fm = m;
    fm.set("state", st.to_string());
    ctx.emit("field.csv", field_csv(model.layout, st, c), fm);
  }
  ctx.say("greedy cycle " + p.label() + (p.degenerate ? " (degenerate)" : ""));
  return p.periodic ? kOk : kNumeric;
}

int cmd_qlearn(const Context& ctx) {
  const auto& c = ctx.cfg;
  require_layout(c);
  const MdpModel model(c.layout.build(), c.params, c.no_repeat);
  const GainEvaluator ev(model.layout, c.params, c.quad);
  const StateSpace space = enumerate_states(model);
  const RewardTable rewards(space, model, ev);
  QTable q;
  if (c.qtable_in) {
    std::ifstream is(*c.qtable_in);
    q = read_qtable_csv(is, space);
    q.residual = bellman_residual(q, space, rewards, c.train.gamma);
    q.converged = q.residual < c.train.threshold;
  } else {
    q = train(space, rewards, c.train);
  }
  const ExtractedPolicy ex = extract_policy(q, space, model, ev, c.horizon);
  const ScheduleTrace t = simulate(model, MdpState::initial(model.nodes()), c.horizon, ev,
                                   q_policy(q, space));
  Metadata m = ctx.meta();
  m.set("mechanism", "longterm");
  m.set("states", std::to_string(space.size()));
  m.set("converged", q.converged ? "1" : "0");
  m.set("episodes", std::to_string(q.episodes));
  m.set("bellman_residual", q.residual);
  if (c.qtable_in) m.set("qtable_in", c.qtable_in->string());
  std::ostringstream qs;
  write_qtable_csv(qs, q, space);
  ctx.emit("qtable.csv", qs.str(), m);
  if (c.dump_states) {
    std::ostringstream ss;
    write_state_space_csv(ss, space, model, rewards);
    ctx.emit("states.csv", ss.str(), m);
  }
  ctx.emit("trace.csv", trace_csv(t), m);
  ctx.emit("cycle.csv", cycle_csv(ex.schedule, model.nodes()), m);
  ctx.say("long-term cycle " + ex.schedule.label() + "  states " + std::to_string(space.size()) +
          "  episodes " + std::to_string(q.episodes) + "  residual " + fmt(q.residual, 3));
  if (!q.converged) {
    ctx.err << "warning: Q-learning did not converge (residual " << q.residual << ")\n";
    return kNumeric;
  }
  return kOk;
}

SweepSpec sweep_spec(const RunConfig& c) {
  SweepSpec s = c.sweep;
  s.params = c.params;
  s.quad = c.quad;
  s.train = c.train;
  s.horizon = c.horizon;
  s.no_repeat = c.no_repeat;
  s.threads = c.threads;
  return s;
}

int cmd_sweep(const Context& ctx) {
  const SweepSpec spec = sweep_spec(ctx.cfg);
  spec.validate();
  const PhaseMap map = run_sweep(spec);
  std::ostringstream os;
  write_phase_csv(os, map);
  Metadata m = ctx.meta();
  m.set("mechanism", to_string(spec.mechanism));
  m.set("mode", to_string(spec.mode));
  m.set("cells", std::to_string(map.cells.size()));
  m.set("failures", std::to_string(map.failures()));
  ctx.emit("phase.csv", os.str(), m);
  ctx.say("sweep " + std::to_string(map.cells.size()) + " cells, " +
          std::to_string(map.failures()) + " failed");
  return map.failures() ? kPartial : kOk;
}

int cmd_boundary(const Context& ctx) {
  const auto& b = ctx.cfg.boundary;
  const SweepSpec spec = sweep_spec(ctx.cfg);
  const BoundaryEq eq = parse_boundary(b.equation);
  const Axis axis = b.axis == "coord1" ? Axis::coord1 : Axis::coord2;
  const BisectResult r = boundary_bisect(eq, spec, axis, b.fixed, b.lo, b.hi, b.tol);
  std::ostringstream os;
  os.precision(12);
  os << "equation,axis,fixed,lo,hi,root,width,iterations,non_monotone\n"
     << to_string(eq) << ',' << b.axis << ',' << b.fixed << ',' << b.lo << ',' << b.hi << ','
     << r.root << ',' << r.width << ',' << r.iterations << ',' << (r.non_monotone ? 1 : 0) << '\n';
  Metadata m = ctx.meta();
  m.set("mode", to_string(spec.mode));
  ctx.emit("boundary.csv", os.str(), m);
  ctx.say("boundary " + to_string(eq) + " root " + fmt(r.root, 8) + " +- " + fmt(r.width / 2, 3) +
          (r.non_monotone ? " (non-monotone bracket)" : ""));
  return kOk;
}

GridSeries synth_series(const RunConfig& c) {
  SynthOptions o = c.synth;
  o.seed = c.seed;
  o.dt = c.params.dt;
  return synth_field(c.params.lambda_d, c.params.lambda_t, o);
}

int cmd_eval(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto& e = c.eval;
  GridSeries series;
  if (e.data) {
    GridLoadOptions lo;
    lo.format = e.format == "dense" ? GridFormat::dense : GridFormat::long_csv;
    lo.spacing = e.spacing;
    lo.dt = c.params.dt;
    series = load_grid(*e.data, lo);
  } else {
    series = synth_series(c);
  }
  if (e.downsample > 1) series = downsample(series, e.downsample);

  Metadata m = ctx.meta();
  m.set("data", e.data ? e.data->string() : std::string("synthetic"));
  CorrelationParams params = c.params;
  if (e.fit) {
    const FitResult f = fit_params(series);
    m.set("fit_estimator", f.estimator);
    m.set("fit_ok", f.ok ? "1" : "0");
    if (!f.ok) {
      ctx.err << "error: parameter fit failed: " << f.failure << '\n';
      return kNumeric;
    }
    params.lambda_d = f.lambda_d;
    params.lambda_t = f.lambda_t;
    m.set("fit_lambda_d", f.lambda_d);
    m.set("fit_lambda_t", f.lambda_t);
    m.set("fit_spatial_r2", f.spatial_r2);
    m.set("fit_temporal_r2", f.temporal_r2);
    m.set("separability_rms", f.separability_rms);
    ctx.say("fitted lambda_d " + fmt(f.lambda_d, 5) + "  lambda_t " + fmt(f.lambda_t, 5));
  }

  EvalOptions o;
  o.coverage = parse_coverage(e.coverage);
  o.circle_radius_cells = e.circle_radius_cells;
  o.union_radius = e.union_radius;
  o.train = c.train;
  o.start = e.start;
  o.steps = e.steps;
  const Point center = e.center.value_or(
      Point{static_cast<double>((series.nx - 1) / 2) * series.spacing,
            static_cast<double>((series.ny - 1) / 2) * series.spacing});
  o.center = center;
  const auto layouts = traversal_layouts(series, center, e.longest, e.traverse_step_cells);
  if (layouts.empty()) throw ConfigError("eval: traversal produced no layouts");
  const PolicyEvalReport rep = evaluate_policies(series, layouts, params, o);
  std::ostringstream os;
  write_eval_csv(os, rep);
  m.set("coverage", to_string(rep.coverage));
  m.set("layouts", std::to_string(layouts.size()));
  ctx.emit("eval.csv", os.str(), m);
  std::ostringstream lay;
  lay.precision(12);
  lay << "layout_id,x1,y1,x2,y2,x3,y3,cycle_greedy,cycle_longterm,covered_cells\n";
  for (std::size_t i = 0; i < layouts.size(); ++i) {
    lay << i;
    for (const auto& p : layouts[i].positions()) lay << ',' << p.x << ',' << p.y;
    lay << ',' << rep.layouts[i].cycle_greedy << ',' << rep.layouts[i].cycle_longterm << ','
        << rep.layouts[i].covered_cells << '\n';
  }
  ctx.emit("layouts.csv", lay.str(), m);
  std::ostringstream s;
  for (auto p : {EvalPolicy::ideal, EvalPolicy::greedy, EvalPolicy::longterm, EvalPolicy::uniform})
    s << to_string(p) << ' ' << fmt(rep.aggregate[static_cast<std::size_t>(p)], 6) << "  ";
  ctx.say("aggregate MAE  " + s.str());
  return kOk;
}

int cmd_synth(const Context& ctx) {
  const GridSeries g = synth_series(ctx.cfg);
  std::ostringstream os;
  write_grid_long_csv(os, g);
  Metadata m = ctx.meta();
  m.set("nx", std::to_string(g.nx));
  m.set("ny", std::to_string(g.ny));
  m.set("nt", std::to_string(g.nt));
  m.set("spacing", g.spacing);
  ctx.emit("grid.csv", os.str(), m);
  return kOk;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sensor scheduling by spatiotemporal information gain"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "random seed (training, synthetic data, validation samples)");
  app.add_option("--threads", threads, "worker threads for sweeps")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", quiet, "suppress progress output");

  app.add_subcommand("validate", "quadrature self-test and region consistency");
  auto* greedy = app.add_subcommand("greedy", "single-step greedy schedule");
  bool dump_field = false;
  greedy->add_flag("--dump-field", dump_field, "also write the information field at the cycle start");
  auto* qlearn = app.add_subcommand("qlearn", "long-term schedule by tabular Q-learning");
  std::string qtable_in;
  qlearn->add_option("--qtable-in", qtable_in, "load a Q-table instead of training")
      ->check(CLI::ExistingFile);
  app.add_subcommand("sweep", "phase map over layouts");
  app.add_subcommand("boundary", "bisect a class-boundary equation");
  app.add_subcommand("eval", "four-policy MAE comparison on gridded data");
  app.add_subcommand("synth", "write a synthetic separable field");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
    else cfg.quad = QuadratureConfig::defaults(cfg.params);
    if (!out_dir.empty()) cfg.out = out_dir;
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    cfg.quiet = quiet;
    if (dump_field) cfg.dump_field = true;
    if (!qtable_in.empty()) cfg.qtable_in = qtable_in;
    cfg.train.seed = cfg.seed;
    cfg.synth.seed = cfg.seed;
    as_config_error("", [&] { cfg.quad.validate(); });
    as_config_error("", [&] { cfg.train.validate(); });
    if (command == "sweep") as_config_error("", [&] { sweep_spec(cfg).validate(); });
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  }

  Context ctx{cfg, command, out, err};
  try {
    if (command == "validate") return cmd_validate(ctx);
    if (command == "greedy") return cmd_greedy(ctx);
    if (command == "qlearn") return cmd_qlearn(ctx);
    if (command == "sweep") return cmd_sweep(ctx);
    if (command == "boundary") return cmd_boundary(ctx);
    if (command == "eval") return cmd_eval(ctx);
    if (command == "synth") return cmd_synth(ctx);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const BracketError& e) {
    err << "bracket error: " << e.what() << '\n';
    return kNumeric;
  } catch (const QuadratureError& e) {
    err << "quadrature error: " << e.what() << '\n';
    return kNumeric;
  } catch (const SingularityError& e) {
    err << "singular correlation: " << e.what() << '\n';
    return kNumeric;
  } catch (const LoadError& e) {
    err << "load error: " << e.what() << '\n';
    return kIo;
  } catch (const ResourceError& e) {
    err << "resource error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    err << command << " failed: " << e.what() << '\n';
    return kNumeric;
  }
  return kUsage;
}

}  // namespace ssim::cli
