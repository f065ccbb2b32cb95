#include "nlrec/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nlrec;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tmpdir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("nlrec_test_" + name);
  std::filesystem::remove_all(p);
  return p.string();
}

json small_recover() {
  return json::parse(R"({
    "data": {"kind": "uos", "n": 6, "k": 2, "dims": [1, 1], "pts_per": 8},
    "sensing": {"kind": "mask", "delta": 0.7},
    "lifting": {"kind": "monomial_kernel", "degree": 2, "offset": 1},
    "trials": 4, "seed": 3
  })");
}

std::string config_error(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

NoiseStep step(double clean, double lifted) {
  NoiseStep s;
  s.resid_clean = clean;
  s.lifted_resid = lifted;
  return s;
}

}  // namespace

TEST(Config, Defaults) {
  ExperimentConfig c = parse_config(json::object());
  EXPECT_EQ(c.data, ExperimentConfig::Data::Uos);
  EXPECT_EQ(c.solver, SolverKind::Rtr2);
  EXPECT_EQ(c.trials, 1);
  EXPECT_DOUBLE_EQ(c.lambda.lambda0, 1e-6);
  EXPECT_DOUBLE_EQ(c.lambda.factor, 10.0);
  EXPECT_TRUE(std::holds_alternative<MonomialKernel>(c.lifting.kind));
}

TEST(Config, ClusterDefaultsToGaussian) {
  ExperimentConfig c = parse_config(json::parse(R"({"data": {"kind": "clusters"}})"));
  EXPECT_TRUE(std::holds_alternative<GaussianKernel>(c.lifting.kind));
  EXPECT_DOUBLE_EQ(std::get<GaussianKernel>(c.lifting.kind).sigma, 2.5);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_NE(config_error(json::parse(R"({"trials": 0})")).find("trials"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"sensing": {"delta": 1.5}})")).find("sensing.delta"),
            std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"data": {"n": "ten"}})")).find("data.n"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"rtr": {"bogus": 1}})")).find("rtr.bogus"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"solver": "newton"})")).find("solver"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"data": {"kind": "uos", "n": 3, "dims": [3, 3]}})")), "");
  EXPECT_NE(config_error(json::parse(R"({"grid": {"param": "colour", "values": [1]}})")), "");
}

TEST(Config, RoundTrip) {
  ExperimentConfig a = parse_config(small_recover());
  json echoed = to_json(a);
  ExperimentConfig b = parse_config(echoed);
  EXPECT_EQ(to_json(b), echoed);
}

TEST(Config, LoadErrors) {
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
  const std::string path = tmpdir("bad.json");
  std::ofstream(path) << "{ not json";
  EXPECT_THROW(load_config(path), ConfigError);
}

TEST(Seeds, DistinctAndStable) {
  EXPECT_EQ(trial_seed(1, 0), trial_seed(1, 0));
  EXPECT_NE(trial_seed(1, 0), trial_seed(1, 1));
  EXPECT_NE(trial_seed(1, 0), trial_seed(2, 0));
}

TEST(Recover, FullyObservedSucceedsAtOnce) {
  json j = small_recover();
  j["sensing"]["delta"] = 1.0;
  for (const char* s : {"rtr2", "altmin1", "altmin2", "simple"}) {
    j["solver"] = s;
    RecoverReport r = run_recover(parse_config(j));
    EXPECT_EQ(r.success_fraction, 1.0) << s;
    for (const auto& t : r.trials) EXPECT_LE(t.iterations, 1) << s;
  }
}

TEST(Recover, ReproducibleBytesAndConsistentSummary) {
  json j = small_recover();
  const std::string a = tmpdir("rep_a"), b = tmpdir("rep_b");
  j["out"] = a;
  run_recover(parse_config(j));
  j["out"] = b;
  run_recover(parse_config(j));
  for (const char* f : {"/trials.csv", "/trace_0.csv", "/trace_3.csv"}) {
    const std::string x = slurp(a + f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, slurp(b + f)) << f;
  }
  json sa = json::parse(slurp(a + "/summary.json")), sb = json::parse(slurp(b + "/summary.json"));
  sa["config"].erase("out");
  sb["config"].erase("out");
  EXPECT_EQ(sa, sb);
  j["jobs"] = 3;
  j["out"] = b;
  run_recover(parse_config(j));
  EXPECT_EQ(slurp(a + "/trials.csv"), slurp(b + "/trials.csv"));

  auto rows = read_csv(a + "/trials.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0][0], "trial");
  EXPECT_EQ(rows[0][4], "success");
  double mean = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) mean += std::stod(rows[i][4]) / 4.0;
  json summary = json::parse(slurp(a + "/summary.json"));
  EXPECT_DOUBLE_EQ(summary["success_fraction"].get<double>(), mean);
  EXPECT_EQ(summary["config"]["trials"], 4);
}

TEST(Phase, EmptyGridWritesHeaderOnly) {
  json j = small_recover();
  j["out"] = tmpdir("empty_grid");
  j["grid"] = {{"param", "pts_per"}, {"values", json::array()}, {"deltas", {0.5, 0.9}}};
  PhaseReport r = run_phase(parse_config(j));
  EXPECT_TRUE(r.fraction.empty());
  EXPECT_EQ(slurp(j["out"].get<std::string>() + "/heatmap.csv"), "pts_per,delta=0.5,delta=0.90000000000000002\n");
}

TEST(Phase, EasyCellsSucceed) {
  json j = small_recover();
  j["trials"] = 3;
  j["grid"] = {{"param", "pts_per"}, {"values", {8, 12}}, {"deltas", {0.95}}};
  PhaseReport r = run_phase(parse_config(j));
  ASSERT_EQ(r.fraction.size(), 2u);
  for (const auto& row : r.fraction) EXPECT_GE(row[0], 2.0 / 3);
}

TEST(NoiseSelection, PlateauRule) {
  // clean residual plateau at indices 2..4; least lifted residual there is index 3
  std::vector<NoiseStep> steps{step(1.0, 0.1), step(0.5, 0.05), step(0.11, 0.3),
                               step(0.10, 0.2), step(0.12, 0.25), step(0.2, 0.01)};
  EXPECT_EQ(select_lambda(steps, 1.5), 3);
  EXPECT_EQ(select_lambda(steps, 1.0), 3);
  EXPECT_EQ(select_lambda(steps, 100.0), 5);
  EXPECT_EQ(select_lambda({}, 1.5), -1);
}

TEST(Noise, NoiselessLimitAndMonotoneClean) {
  json j = json::parse(R"({
    "data": {"kind": "uos", "n": 5, "k": 2, "dims": [1, 1], "pts_per": 10},
    "sensing": {"kind": "dense", "m": 55, "noise_sigma": 0},
    "lambda": {"steps": 10}
  })");
  NoiseReport r = run_noise(parse_config(j), 2);
  ASSERT_EQ(r.steps.size(), 10u);
  EXPECT_EQ(r.noise_norm, 0.0);
  EXPECT_LE(r.steps.back().resid_noisy, 1e-5);
  for (std::size_t i = 1; i < r.steps.size(); ++i)
    EXPECT_LE(r.steps[i].resid_clean, 1.05 * r.steps[i - 1].resid_clean + 1e-12);
}

TEST(Noise, RequiresDenseSensing) {
  EXPECT_THROW(run_noise(parse_config(small_recover()), 1), ConfigError);
}

TEST(RankSweep, UnderestimatedRankFails) {
  json j = small_recover();
  j["trials"] = 2;
  j["rank_offsets"] = {-1, 0};
  RankSweepReport r = run_rank_sweep(parse_config(j));
  ASSERT_EQ(r.fraction.size(), 2u);
  EXPECT_EQ(r.fraction[0], 0.0);
  EXPECT_GE(r.fraction[1], r.fraction[0]);
}

TEST(RankSweep, FullRankCostVanishes) {
  ExperimentConfig cfg = parse_config(small_recover());
  Problem p = make_problem(cfg, 1, cfg.columns());
  EXPECT_LE(std::abs(p.objective.cost(p.start)), 1e-10 * p.objective.lifted_energy(p.start.x));
}

TEST(Config, ShippedExamplesParse) {
  int seen = 0;
  for (const auto& e : std::filesystem::directory_iterator(NLREC_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(e.path().string())) << e.path();
    ++seen;
  }
  EXPECT_GE(seen, 5);
}
