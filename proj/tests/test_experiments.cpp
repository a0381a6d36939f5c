#include <lookdown/experiments.hpp>

#include <gtest/gtest.h>

#include <string>

using namespace lookdown;

namespace {
std::string config_error(const json& cfg) {
  try {
    run_experiment(cfg);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const std::string* file(const ExperimentOutput& out, const std::string& name) {
  for (const auto& [n, text] : out.files)
    if (n == name) return &text;
  return nullptr;
}
}  // namespace

TEST(Config, MinimalRatesConfigUsesDefaults) {
  const auto out = run_experiment(json::parse(R"({"experiment": "rates", "seed": 1, "lambda": {"c": 1.0}})"));
  EXPECT_TRUE(out.report.all_pass());
  const std::string* csv = file(out, "rates.csv");
  ASSERT_NE(csv, nullptr);
  EXPECT_EQ(std::count(csv->begin(), csv->end(), '\n'), 21);
  for (const auto& e : out.report.estimates)
    if (e.name == "r_20") EXPECT_DOUBLE_EQ(e.value, 190.0);
}

TEST(Config, AlphaOutOfRange) {
  const auto msg = config_error(
      json::parse(R"({"experiment": "rates", "seed": 1, "lambda": {"nu": {"kind": "beta", "alpha": 2.5}}})"));
  EXPECT_NE(msg.find("lambda.nu.alpha: alpha must lie in (1,2)"), std::string::npos) << msg;
}

TEST(Config, SeedIsMandatory) {
  const auto msg = config_error(json::parse(R"({"experiment": "rates", "lambda": {"c": 1.0}})"));
  EXPECT_NE(msg.find("seed: missing required key"), std::string::npos) << msg;
}

TEST(Config, UnknownKeysAtAnyDepth) {
  const auto msg = config_error(
      json::parse(R"({"experiment": "rates", "seed": 1, "lambda": {"c": 1.0, "d": 2}, "extra": true})"));
  EXPECT_NE(msg.find("lambda.d: unknown key"), std::string::npos) << msg;
  EXPECT_NE(msg.find("extra: unknown key"), std::string::npos) << msg;
}

TEST(Config, EveryViolationIsListed) {
  const auto msg = config_error(json::parse(
      R"({"experiment": "verify-product-h", "lambda": {"c": -1.0}, "K": 3, "replicas": "many", "tolerances": {"ks_p": 2}})"));
  for (const char* part : {"lambda.c", "K:", "replicas: expected an integer", "tolerances.ks_p", "seed:"})
    EXPECT_NE(msg.find(part), std::string::npos) << part << "\n" << msg;
}

TEST(Config, UnknownExperiment) {
  EXPECT_NE(config_error(json::parse(R"({"experiment": "nope", "seed": 1})")).find("unknown experiment"),
            std::string::npos);
}

TEST(Config, TypeMismatch) {
  const auto msg = config_error(json::parse(R"({"experiment": "rates", "seed": 1, "lambda": {"c": "one"}})"));
  EXPECT_NE(msg.find("lambda.c: expected a number"), std::string::npos) << msg;
}

TEST(Config, HashIgnoresWorkersAndOutput) {
  const json a = json::parse(R"({"experiment": "rates", "seed": 1, "lambda": {"c": 1.0}})");
  json b = a;
  b["workers"] = 7;
  b["out"] = "elsewhere";
  json c = a;
  c["seed"] = 2;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(c));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Config, ChainMustMatchAlphabet) {
  const auto msg = config_error(json::parse(R"({"experiment": "gfv-simulate", "seed": 1, "lambda": {"c": 1.0},
      "mutation": {"kind": "chain", "Q": [[-1, 1], [1, -1]]}, "initial": {"p": [0.2, 0.3, 0.5]}})"));
  EXPECT_NE(msg.find("mutation: rate matrix size"), std::string::npos) << msg;
}

TEST(Experiments, IntertwiningDefaultFamily) {
  const auto out = run_experiment(json::parse(R"({"experiment": "verify-intertwining", "seed": 1})"));
  ASSERT_EQ(out.report.verdicts.size(), 1u);
  EXPECT_TRUE(out.report.all_pass());
  EXPECT_LT(out.report.verdicts[0].statistic, 1e-8);
}

TEST(Experiments, ReportCarriesHashAndStatements) {
  const json cfg = json::parse(R"({"experiment": "verify-intertwining", "seed": 5})");
  const json rep = report_json(run_experiment(cfg));
  EXPECT_EQ(rep["experiment"], "verify-intertwining");
  EXPECT_EQ(rep["config_hash"], config_hash(cfg));
  EXPECT_EQ(rep["seed"], 5);
  EXPECT_EQ(rep["all_pass"], true);
  for (const auto& v : rep["verdicts"]) EXPECT_FALSE(v["statement"].get<std::string>().empty());
}

TEST(Experiments, EveryListedStatementIsNamed) {
  for (const auto& e : experiments()) {
    EXPECT_FALSE(e.name.empty());
    EXPECT_FALSE(e.summary.empty());
  }
}

TEST(Experiments, OutputsIndependentOfWorkers) {
  for (const char* text :
       {R"({"experiment": "gfv-simulate", "seed": 3, "lambda": {"c": 1.0}, "N": 30, "replicas": 5})",
        R"({"experiment": "verify-decomposition", "seed": 4, "N": 50, "replicas": 300})",
        R"({"experiment": "verify-tagged-jumps", "seed": 5, "branching": {"nuY": [[1.0, 1.0]]}, "replicas": 200})"}) {
    json cfg = json::parse(text);
    cfg["workers"] = 1;
    const auto a = run_experiment(cfg);
    cfg["workers"] = 3;
    const auto b = run_experiment(cfg);
    const auto c = run_experiment(cfg);
    EXPECT_EQ(report_json(a).dump(), report_json(b).dump()) << text;
    EXPECT_EQ(report_json(b).dump(), report_json(c).dump()) << text;
    EXPECT_EQ(a.files, b.files) << text;
  }
}

TEST(Experiments, SeedChangesResults) {
  json cfg = json::parse(R"({"experiment": "gfv-simulate", "seed": 3, "lambda": {"c": 1.0}, "N": 30, "replicas": 2})");
  const auto a = run_experiment(cfg);
  cfg["seed"] = 4;
  EXPECT_NE(a.files, run_experiment(cfg).files);
}

TEST(Experiments, ConsistencyExamples) {
  // WF f = x(1-x) at 1/2 gives -1/4; I0+I1 on f = x gives 1/2; constants give 0
  const auto out = run_experiment(json::parse(R"({"experiment": "verify-generators", "seed": 2,
      "lambda": {"c": 1.0}, "consistency": {"samples": 200000}})"));
  int cases = 0;
  for (const auto& v : out.report.verdicts) {
    EXPECT_TRUE(v.pass) << v.check << " " << v.statistic;
    cases += v.statement == "simulators-match-their-generators";
  }
  EXPECT_EQ(cases, 3);
  for (const auto& e : out.report.estimates) {
    if (e.name == "G f=x(1-x) x=0.5 operator") EXPECT_NEAR(e.value, -0.25, 1e-12);
    if (e.name == "I0+I1 f=x x=0.5 operator") EXPECT_NEAR(e.value, 0.5, 1e-12);
    if (e.name == "G0+G1 f=one x=0.5 operator") EXPECT_NEAR(e.value, 0.0, 1e-12);
  }
}

TEST(Experiments, FellerSolverWithoutSimulation) {
  const auto out = run_experiment(json::parse(R"({"experiment": "verify-cbi", "seed": 1,
      "branching": {"sigma2": 1.0}, "simulate": false})"));
  EXPECT_TRUE(out.report.all_pass());
  EXPECT_EQ(out.report.verdicts.size(), 4u);
}
