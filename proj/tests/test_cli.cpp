#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ssim/cli.hpp"

using namespace ssim;
using namespace ssim::cli;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "ssim");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(SSIM_TEST_TMP) / "cli" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string meta_value(const fs::path& meta, const std::string& key) {
  std::istringstream is(slurp(meta));
  std::string line;
  while (std::getline(is, line))
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  return {};
}

// First column value of the first data row.
std::string first_field(const fs::path& csv) {
  std::istringstream is(slurp(csv));
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  return row.substr(0, row.find(','));
}

std::size_t lines(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("config parsing") {
  CHECK_THROWS_AS(parse_config(R"({"bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"params": {"lambda_x": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"layout": {"side": 100}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"layout": {"type": "isosceles", "base": 100}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"params": {"lambda_d": -1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"eval": {"data": "/nonexistent/grid.csv"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);

  const RunConfig c = parse_config(
      R"({"params": {"lambda_d": 0.02}, "layout": {"type": "isosceles", "base": 70, "height": 88},
          "seed": 7})");
  CHECK(c.params.lambda_d == 0.02);
  CHECK(c.quad.cell == doctest::Approx(0.05 / 0.02));
  CHECK(c.layout_given);
  CHECK(c.seed == 7);
  CHECK(c.canonical_json() == parse_config(c.canonical_json()).canonical_json());
}

TEST_CASE("config errors map to exit 2") {
  const fs::path d = scratch("cfgerr");
  const auto neg = write_file(d / "neg.json", R"({"quadrature": {"tol": -1}})");
  CHECK(invoke({"--config", neg.string(), "--out", (d / "o").string(), "validate"}).code == kConfig);
  const auto nolayout = write_file(d / "nolayout.json", "{}");
  CHECK(invoke({"--config", nolayout.string(), "--out", (d / "o").string(), "greedy"}).code ==
        kConfig);
  CHECK(invoke({"--config", (d / "missing.json").string(), "validate"}).code == kUsage);
  CHECK(invoke({}).code == kUsage);
}

TEST_CASE("validate writes artifacts with metadata") {
  const fs::path d = scratch("validate");
  const fs::path out = d / "o";
  const auto cfg = write_file(d / "c.json", R"({"validate": {"samples": 2000}})");
  const Run r = invoke({"--config", cfg.string(), "--out", out.string(), "--seed", "5", "--quiet",
                        "validate"});
  REQUIRE(r.code == kOk);
  CHECK(r.out.empty());
  REQUIRE(fs::exists(out / "validate.csv"));
  REQUIRE(fs::exists(out / "validate.csv.meta"));
  CHECK(meta_value(out / "validate.csv.meta", "seed") == "5");
  CHECK(meta_value(out / "validate.csv.meta", "config_hash").size() == 16);
  CHECK(meta_value(out / "validate.csv.meta", "command") == "validate");
  for (const auto& e : fs::directory_iterator(out))
    CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
}

TEST_CASE("greedy subcommand") {
  const fs::path d = scratch("greedy");
  SUBCASE("equilateral") {
    const auto cfg = write_file(d / "c.json", R"({"layout": {"type": "equilateral", "side": 100}})");
    const Run r = invoke({"--config", cfg.string(), "--out", (d / "eq").string(), "greedy",
                          "--dump-field"});
    REQUIRE(r.code == kOk);
    CHECK(first_field(d / "eq" / "cycle.csv") == "123");
    CHECK(fs::exists(d / "eq" / "trace.csv"));
    CHECK(fs::exists(d / "eq" / "field.csv"));
  }
  SUBCASE("small-base isosceles") {
    const auto cfg =
        write_file(d / "c.json", R"({"layout": {"type": "isosceles", "base": 70, "height": 88}})");
    const Run r = invoke({"--config", cfg.string(), "--out", (d / "iso").string(), "greedy"});
    REQUIRE(r.code == kOk);
    CHECK(first_field(d / "iso" / "cycle.csv") == "1213");
  }
}

TEST_CASE("config hash follows the resolved settings") {
  const fs::path d = scratch("hash");
  const auto cfg = write_file(d / "c.json", R"({"layout": {"type": "equilateral", "side": 100}})");
  REQUIRE(invoke({"--config", cfg.string(), "--out", (d / "a").string(), "greedy"}).code == kOk);
  REQUIRE(invoke({"--config", cfg.string(), "--out", (d / "b").string(), "greedy"}).code == kOk);
  REQUIRE(invoke({"--config", cfg.string(), "--out", (d / "c").string(), "--seed", "9", "greedy"})
              .code == kOk);
  const auto h = [&](const char* sub) { return meta_value(d / sub / "trace.csv.meta", "config_hash"); };
  CHECK(h("a") == h("b"));
  CHECK(h("a") != h("c"));
  CHECK(slurp(d / "a" / "trace.csv") == slurp(d / "b" / "trace.csv"));
}

TEST_CASE("qlearn with a saved table") {
  const fs::path d = scratch("qlearn");
  const auto cfg = write_file(d / "c.json", R"({"layout": {"type": "equilateral", "side": 100}})");
  REQUIRE(invoke({"--config", cfg.string(), "--out", (d / "a").string(), "qlearn"}).code == kOk);
  CHECK(first_field(d / "a" / "cycle.csv") == "123");
  const Run r = invoke({"--config", cfg.string(), "--out", (d / "b").string(), "qlearn",
                        "--qtable-in", (d / "a" / "qtable.csv").string()});
  REQUIRE(r.code == kOk);
  CHECK(slurp(d / "a" / "qtable.csv") == slurp(d / "b" / "qtable.csv"));
  CHECK(slurp(d / "a" / "cycle.csv") == slurp(d / "b" / "cycle.csv"));
}

TEST_CASE("boundary subcommand") {
  const fs::path d = scratch("boundary");
  const auto bad = write_file(
      d / "bad.json", R"({"boundary": {"equation": "213:s3-s1", "lo": 100, "hi": 120, "tol": 1}})");
  CHECK(invoke({"--config", bad.string(), "--out", (d / "x").string(), "boundary"}).code ==
        kNumeric);
  const auto good = write_file(
      d / "good.json", R"({"boundary": {"equation": "213:s3-s1", "lo": 62, "hi": 100, "tol": 0.25}})");
  REQUIRE(invoke({"--config", good.string(), "--out", (d / "y").string(), "boundary"}).code == kOk);
  std::istringstream is(slurp(d / "y" / "boundary.csv"));
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  std::vector<std::string> f;
  std::stringstream rs(row);
  for (std::string s; std::getline(rs, s, ',');) f.push_back(s);
  REQUIRE(f.size() == 9);
  CHECK(std::stod(f[5]) > 78);
  CHECK(std::stod(f[5]) < 85);
}

TEST_CASE("sweep subcommand") {
  const fs::path d = scratch("sweep");
  const auto cfg = write_file(
      d / "c.json",
      R"({"sweep": {"coord1": {"min": 70, "max": 130, "step": 30}, "coord2": {"min": 88, "max": 88, "step": 5}}})");
  REQUIRE(invoke({"--config", cfg.string(), "--out", d.string(), "--threads", "2", "sweep"}).code ==
          kOk);
  CHECK(lines(d / "phase.csv") == 4);
}

TEST_CASE("synth and eval round trip") {
  const fs::path d = scratch("eval");
  const auto cfg = write_file(d / "c.json", R"({
    "params": {"lambda_t": 0.3},
    "synth": {"nx": 15, "ny": 15, "nt": 60, "spacing": 10},
    "train": {"max_episodes": 300000},
    "eval": {"fit": false, "longest": 60, "circle_radius_cells": 5, "traverse_step_cells": 1}
  })");
  REQUIRE(invoke({"--config", cfg.string(), "--out", (d / "s").string(), "synth"}).code == kOk);
  CHECK(lines(d / "s" / "grid.csv") == 1 + 15 * 15 * 60);

  REQUIRE(invoke({"--config", cfg.string(), "--out", (d / "e").string(), "eval"}).code == kOk);
  const std::size_t layouts = lines(d / "e" / "layouts.csv") - 1;
  CHECK(layouts > 0);
  CHECK(lines(d / "e" / "eval.csv") == 1 + 4 * layouts);

  // Same field read back from disk gives the same table.
  const std::string text = slurp(cfg);
  const auto cfg2 = write_file(
      d / "c2.json", text.substr(0, text.rfind('}')) + R"(, "seed": 1})");
  std::string with_data = slurp(cfg2);
  const std::string key = R"("eval": {)";
  with_data.insert(with_data.find(key) + key.size(),
                   R"("data": ")" + (d / "s" / "grid.csv").string() + R"(", )");
  const auto cfg3 = write_file(d / "c3.json", with_data);
  REQUIRE(invoke({"--config", cfg3.string(), "--out", (d / "f").string(), "eval"}).code == kOk);
  CHECK(slurp(d / "e" / "eval.csv") == slurp(d / "f" / "eval.csv"));
}
