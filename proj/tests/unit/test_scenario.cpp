#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "scenario/scenario.hpp"

using namespace unravel;
using namespace unravel::cli;
using nlohmann::json;

namespace {

json small_spin() {
  return json::parse(R"({
    "name": "small",
    "model": "spin",
    "unraveling": "nonlinear",
    "spin": {"nu": 1.0, "lambda": 1.0, "hbar": 1.0, "psi0": [0.5, 0.8660254037844386]},
    "dt": 1e-3, "t_final": 2.0, "n_trajectories": 200, "base_seed": 3, "output_every": 100,
    "outputs": ["trajectory", "ensemble_mean", "sigma", "collapse_stats", "record"]
  })");
}

json small_free() {
  return json::parse(R"({
    "name": "free",
    "model": "free_particle",
    "unraveling": "linear",
    "mechanical": {"m": 1e-15, "omega": 0.0, "lambda": 1e23, "hbar": 1.054571817e-34, "a0": 0.25e9},
    "dt": 5e-5, "t_final": 0.05, "n_trajectories": 200, "output_every": 10,
    "outputs": ["sigma", "var", "riccati", "trajectory", "ensemble_mean"]
  })");
}

std::vector<std::string> violations_of(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.violations();
  }
  return {};
}

bool mentions(const std::vector<std::string>& v, const std::string& s) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& x) { return x.find(s) != std::string::npos; });
}

}  // namespace

TEST(Config, ValidConfigsParse) {
  ScenarioConfig c = parse_config(small_spin());
  EXPECT_EQ(c.n_steps(), 2000u);
  EXPECT_EQ(c.outputs.size(), 5u);
  EXPECT_EQ(parse_config(c.to_json()).to_json(), c.to_json());
  EXPECT_NO_THROW(parse_config(small_free()));
}

TEST(Config, CollectsEveryViolation) {
  json j = small_spin();
  j["bogus"] = 1;
  j["spin"]["psi0"] = {1.0, 1.0};
  j["dt"] = 3e-3;
  j["t_final"] = 1.0;
  j["outputs"].push_back("riccati");
  j["unraveling"] = {{"xi_R", 0.5}, {"xi_I", 0.0}};
  auto v = violations_of(j);
  EXPECT_TRUE(mentions(v, "bogus: unknown key"));
  EXPECT_TRUE(mentions(v, "not normalized"));
  EXPECT_TRUE(mentions(v, "integer multiple of dt"));
  EXPECT_TRUE(mentions(v, "'riccati' needs a mechanical model"));
  EXPECT_TRUE(mentions(v, "|xi| must be 1"));
  EXPECT_GE(v.size(), 5u);
}

TEST(Config, RequiredFieldsAndModelConstraints) {
  auto v = violations_of(json::object());
  for (const char* k : {"model: required", "dt: required", "t_final: required", "outputs: required"})
    EXPECT_TRUE(mentions(v, k)) << k;
  json f = small_free();
  f["mechanical"]["omega"] = 5.0;
  f["unraveling"] = {{"xi_R", 1.0}, {"xi_I", 0.0}};
  auto w = violations_of(f);
  EXPECT_TRUE(mentions(w, "must be 0 for free_particle"));
  EXPECT_TRUE(mentions(w, "only 'nonlinear' and 'linear'"));
  json r = small_spin();
  r["unraveling"] = "linear";
  EXPECT_TRUE(mentions(violations_of(r), "'record' needs xi_R > 0"));
  json n = small_spin();
  n["n_trajectories"] = 0;
  EXPECT_TRUE(mentions(violations_of(n), "needs n_trajectories >= 1"));
  json e = small_spin();
  e["output_every"] = 300;
  EXPECT_TRUE(mentions(violations_of(e), "output_every: must divide"));
}

TEST(Config, StabilityBudgetSuggestsStep) {
  json j = small_spin();
  j["spin"]["lambda"] = 100.0;
  auto v = violations_of(j);
  ASSERT_TRUE(mentions(v, "suggested dt <= 0.0001"));
}

TEST(Presets, AllParseAndDescribe) {
  auto names = preset_names();
  for (const char* n : {"fig1", "fig2", "fig3", "harmonic", "bell"})
    EXPECT_NE(std::find(names.begin(), names.end(), n), names.end()) << n;
  for (const auto& n : names) {
    ScenarioConfig c = preset(n);
    EXPECT_NO_THROW(parse_config(c.to_json())) << n;
    EXPECT_FALSE(describe(c).empty());
  }
  EXPECT_THROW(preset("nope"), ConfigError);
  EXPECT_FALSE(warnings(preset("fig3")).empty());
  EXPECT_TRUE(warnings(preset("harmonic")).empty());
}

TEST(Csv, BitExactRoundTrip) {
  ScenarioConfig c = parse_config(small_free());
  auto outs = run_scenario(c);
  ASSERT_FALSE(outs.empty());
  for (const auto& s : outs) {
    std::istringstream in(to_csv(s));
    SeriesOutput back = read_csv(in);
    EXPECT_EQ(back.name, s.name);
    EXPECT_EQ(back.kind, s.kind);
    EXPECT_EQ(back.columns, s.columns);
    EXPECT_EQ(back.t, s.t);
    EXPECT_EQ(back.data, s.data);
    EXPECT_EQ(to_csv(back), to_csv(s));
    EXPECT_FALSE(s.metadata.contains("timestamp"));
    EXPECT_EQ(s.metadata.at("version"), kVersion);
  }
}

TEST(Csv, RejectsMalformedInput) {
  std::istringstream none("t,x\n0,1\n");
  EXPECT_ANY_THROW(read_csv(none));
}

TEST(Report, EmptyOutputSetFails) {
  Report r = report({});
  EXPECT_FALSE(r.passed());
  EXPECT_FALSE(r.checks.empty());
}

TEST(Report, SmallRunsPass) {
  for (const json& j : {small_spin(), small_free()}) {
    auto outs = run_scenario(parse_config(j));
    Report r = report(outs);
    EXPECT_TRUE(r.passed()) << r.to_text();
    EXPECT_GT(r.checks.size(), outs.size());
  }
}

TEST(Report, TamperedSeriesFailsANamedCheck) {
  auto outs = run_scenario(parse_config(small_free()));
  auto it = std::find_if(outs.begin(), outs.end(), [](const SeriesOutput& s) { return s.kind == OutputKind::sigma; });
  ASSERT_NE(it, outs.end());
  auto col = std::find(it->columns.begin(), it->columns.end(), "sigma_A") - it->columns.begin();
  it->data[col][5] *= 1.01;
  Report r = report(outs);
  EXPECT_FALSE(r.passed());
  bool named = false;
  for (const auto& c : r.checks)
    if (!c.passed && c.name == "free_sigma: columns reproduce the closed forms") named = true;
  EXPECT_TRUE(named) << r.to_text();
}

TEST(Run, ThreadCountDoesNotChangeOutput) {
  ScenarioConfig c = parse_config(small_spin());
  auto a = run_scenario(c, {1});
  auto b = run_scenario(c, {3});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(to_csv(a[i]), to_csv(b[i]));
}

TEST(Run, SeedChangesTrajectories) {
  json j = small_spin();
  auto a = run_scenario(parse_config(j));
  j["base_seed"] = 4;
  auto b = run_scenario(parse_config(j));
  EXPECT_NE(a[0].data, b[0].data);
}
