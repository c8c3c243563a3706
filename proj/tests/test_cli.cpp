#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "passk/cli.hpp"

using namespace passk;
using cli::json;

namespace {

struct CurveRow {
  double rho_hat, w_plus, w_minus;
  std::string algorithm;
  int k, n_minus;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::vector<CurveRow> parse_curves_csv(const std::string& csv) {
  std::stringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "rho_hat,algorithm,k,w_plus,w_minus,n_minus,y_scale");
  std::vector<CurveRow> rows;
  while (std::getline(in, line)) {
    const auto c = split(line);
    rows.push_back({std::stod(c[0]), std::stod(c[3]), std::stod(c[4]), c[1], std::stoi(c[2]), std::stoi(c[5])});
  }
  return rows;
}

std::string curves_csv(const json& config) {
  std::ostringstream out;
  cli::cmd_curves(cli::parse_curves(config), cli::Format::Csv, out);
  return out.str();
}

class TempDir {
 public:
  TempDir() : path_(std::filesystem::temp_directory_path() / ("passk_cli_" + std::to_string(::getpid()))) {
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string file(const std::string& name, const std::string& content = "") const {
    const auto p = (path_ / name).string();
    if (!content.empty()) std::ofstream(p) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kTrainConfig = R"({
  "problems": [
    {"correct_mask": [true, false, false], "initial_logits": [0.0, 0.2, -0.1]},
    {"correct_mask": [0, 1, 1, 0], "initial_logits": [0, 0, 0, 0]}
  ],
  "algorithm": {"id": "grpo_tilde", "k": 2},
  "n": 6, "steps": 30, "learning_rate": 0.5, "seed": 2, "eval_ks": [1, 2]
})";

}  // namespace

TEST(Fmt, SeventeenSignificantDigits) {
  EXPECT_EQ(cli::fmt(0.1), "0.10000000000000001");
  EXPECT_EQ(cli::fmt(1.0), "1");
  EXPECT_EQ(cli::fmt(-2.5e-20), "-2.4999999999999999e-20");
}

TEST(ParseCurves, RejectsBadConfigs) {
  EXPECT_THROW(cli::parse_curves(json{{"n", 16}, {"algorithms", {"grpo"}}, {"colour", "red"}}), ConfigError);
  EXPECT_THROW(cli::parse_curves(json{{"n", 16}, {"algorithms", {"ppo"}}}), ConfigError);
  EXPECT_THROW(cli::parse_curves(json{{"n", 16}, {"algorithms", {"grpo"}}, {"rho_grid_points", 100}}), ConfigError);
  EXPECT_THROW(cli::parse_curves(json{{"n", 4}, {"ks", {5}}, {"algorithms", {"grpo_k"}}}), ConfigError);
  EXPECT_THROW(cli::parse_curves(json{{"n", 4}, {"ks", {0}}, {"algorithms", {"grpo"}}}), ConfigError);
  EXPECT_THROW(cli::parse_curves(json{{"algorithms", {"grpo"}}}), nlohmann::json::exception);
  EXPECT_NO_THROW(cli::parse_curves(json{{"n", 4}, {"ks", {9}}, {"algorithms", {"biased_pow"}}}));
}

TEST(Curves, KOneCoincidesWithGrpo) {
  const auto rows = parse_curves_csv(curves_csv({{"n", 16}, {"ks", {1}}, {"algorithms", {"grpo", "grpo_k", "grpo_tilde"}}}));
  ASSERT_EQ(rows.size(), 45u);
  std::map<double, CurveRow> grpo;
  for (const auto& r : rows) {
    if (r.algorithm == "grpo") grpo[r.rho_hat] = r;
  }
  ASSERT_EQ(grpo.size(), 15u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.w_plus, grpo[r.rho_hat].w_plus) << r.algorithm;
    EXPECT_EQ(r.w_minus, grpo[r.rho_hat].w_minus) << r.algorithm;
  }
}

TEST(Curves, GrpoKHardZero) {
  const auto rows = parse_curves_csv(curves_csv({{"n", 16}, {"ks", {4}}, {"algorithms", {"grpo_k"}}}));
  for (const auto& r : rows) {
    if (r.rho_hat > 1.0 - 3.0 / 16.0) {
      EXPECT_EQ(r.w_plus, 0.0) << r.rho_hat;
      EXPECT_EQ(r.w_minus, 0.0) << r.rho_hat;
    } else {
      EXPECT_GT(r.w_plus, 0.0) << r.rho_hat;
    }
  }
}

TEST(Curves, MixtureEnvelope) {
  const auto rows = parse_curves_csv(curves_csv({{"n", 16}, {"ks", {8}}, {"algorithms", {"mix_direct", "skew_r"}}}));
  std::map<double, CurveRow> skew;
  for (const auto& r : rows) {
    if (r.algorithm == "skew_r") skew[r.rho_hat] = r;
  }
  int checked = 0;
  for (const auto& r : rows) {
    if (r.algorithm != "mix_direct" || r.n_minus >= 8 - 1) continue;
    EXPECT_NEAR(r.w_plus, skew[r.rho_hat].w_plus, 1e-9);
    EXPECT_NEAR(r.w_minus, skew[r.rho_hat].w_minus, 1e-9);
    ++checked;
  }
  EXPECT_EQ(checked, 6);
}

TEST(Curves, JsonlAndLogScaleFlag) {
  std::ostringstream out;
  cli::cmd_curves(cli::parse_curves({{"n", 4}, {"algorithms", {"rloo"}}, {"log_scale", true}}), cli::Format::Jsonl,
                  out);
  std::stringstream in(out.str());
  std::string line;
  int count = 0;
  while (std::getline(in, line)) {
    const auto j = json::parse(line);
    EXPECT_EQ(j["y_scale"], "log");
    EXPECT_EQ(j["algorithm"], "rloo");
    ++count;
  }
  EXPECT_EQ(count, 3);
}

TEST(Surrogates, NormalizedEndsAtOneAndIdentities) {
  std::ostringstream out;
  const auto cfg = cli::parse_surrogates(
      {{"surrogates", {"arcsin_01", "inc_beta_k", "skewr_reg", "entropy_reg", "pass_k"}}, {"ks", {1, 2}},
       {"lambdas", {1.0, 3.0}}, {"grid_points", 101}});
  cli::cmd_surrogates(cfg, cli::Format::Csv, out);
  std::stringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "x,surrogate,k,lambda,value,normalized_value");
  std::map<std::string, std::map<double, double>> series;
  int rows = 0;
  while (std::getline(in, line)) {
    const auto c = split(line);
    const double x = std::stod(c[0]);
    if (x == 1.0) { EXPECT_DOUBLE_EQ(std::stod(c[5]), 1.0) << line; }
    series[c[1] + "/" + c[2] + "/" + c[3]][x] = std::stod(c[4]);
    ++rows;
  }
  // arcsin_01 and skewr_reg once each, inc_beta_k and pass_k per k, entropy per lambda
  EXPECT_EQ(rows, 101 * (1 + 1 + 2 + 2 + 2));
  for (const auto& [x, v] : series["inc_beta_k/1/0"]) EXPECT_NEAR(v, series["arcsin_01/1/0"][x], 1e-12);
  for (const auto& [x, v] : series["inc_beta_k/2/0"]) EXPECT_NEAR(v, series["skewr_reg/1/0"][x], 1e-10);
}

TEST(Surrogates, RhoKAxis) {
  std::ostringstream out;
  cli::cmd_surrogates(cli::parse_surrogates({{"surrogates", {"arcsin_pass_k"}}, {"ks", {4}}, {"x_axis", "rho_k"},
                                             {"grid_points", 5}}),
                      cli::Format::Csv, out);
  std::stringstream in(out.str());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto c = split(line);
    // (2/K) arcsin sqrt(x) directly in rho_K
    EXPECT_NEAR(std::stod(c[4]), 0.5 * std::asin(std::sqrt(std::stod(c[0]))), 1e-12) << line;
  }
  EXPECT_THROW(cli::parse_surrogates({{"surrogates", {"identity"}}, {"x_axis", "theta"}}), ConfigError);
  EXPECT_THROW(cli::parse_surrogates({{"surrogates", {"identity"}}, {"grid", 3}}), ConfigError);
}

TEST(ParseTrain, Validation) {
  const json good = json::parse(kTrainConfig);
  const TrainConfig c = cli::parse_train(good);
  EXPECT_EQ(c.problems.size(), 2u);
  EXPECT_EQ(c.algorithm.id, Algorithm::GrpoTilde);
  EXPECT_EQ(c.algorithm.k, 2);
  EXPECT_EQ(c.problems[1].correct_mask, (std::vector<bool>{false, true, true, false}));

  auto bad = good;
  bad["momentum"] = 0.9;
  EXPECT_THROW(cli::parse_train(bad), ConfigError);
  bad = good;
  bad["algorithm"]["k"] = 7;
  EXPECT_THROW(cli::parse_train(bad), ConfigError);
  bad = good;
  bad["problems"][0]["correct_mask"] = {2, 0, 0};
  EXPECT_THROW(cli::parse_train(bad), ConfigError);
  bad = good;
  bad["problems"][0]["correct_mask"] = {true, true, true};
  EXPECT_THROW(cli::parse_train(bad), ConfigError);
  bad = good;
  bad["seed"] = -1;
  EXPECT_THROW(cli::parse_train(bad), ConfigError);
  bad = good;
  bad["gradient_mode"] = "exact";
  EXPECT_THROW(cli::parse_train(bad), ConfigError);
  auto simple = good;
  simple["algorithm"] = "grpo";
  EXPECT_EQ(cli::parse_train(simple).algorithm.id, Algorithm::Grpo);
}

TEST(Train, StreamsAndSummary) {
  const TrainConfig c = cli::parse_train(json::parse(kTrainConfig));
  std::ostringstream jsonl, summary, csv, summary2;
  cli::cmd_train(c, cli::Format::Jsonl, jsonl, summary);
  cli::cmd_train(c, cli::Format::Csv, csv, summary2);
  EXPECT_EQ(summary.str(), summary2.str());

  std::stringstream in(jsonl.str());
  std::string line;
  int steps = 0;
  while (std::getline(in, line)) {
    const auto j = json::parse(line);
    EXPECT_EQ(j["step"], steps);
    EXPECT_EQ(j["rho"].size(), 2u);
    EXPECT_TRUE(j["rho_k"].contains("2"));
    ++steps;
  }
  EXPECT_EQ(steps, 31);

  std::stringstream cin(csv.str());
  std::getline(cin, line);
  EXPECT_EQ(line,
            "step,mean_rho,mean_rho_k1,mean_rho_k2,degenerate_groups,rho_p0,rho_p1,rho_k1_p0,rho_k1_p1,rho_k2_p0,"
            "rho_k2_p1");
  std::stringstream sin(summary.str());
  std::getline(sin, line);
  EXPECT_EQ(line.rfind("algorithm,k,lambda,n,steps,learning_rate,seed,initial_mean_rho,final_mean_rho", 0), 0u);
  std::getline(sin, line);
  EXPECT_EQ(line.rfind("grpo_tilde,2,1,6,30,0.5,2,", 0), 0u) << line;
}

TEST(Verify, SuiteFilterAndFaultInjection) {
  std::ostringstream out;
  EXPECT_TRUE(cli::cmd_verify(cli::parse_verify({{"suites", {"unbiasedness"}}, {"policies_per_seed", 10}}), out));
  std::stringstream in(out.str());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(json::parse(line)["params"]["suite"], "unbiasedness");
    ++rows;
  }
  EXPECT_GT(rows, 0);

  std::ostringstream faulty;
  EXPECT_FALSE(cli::cmd_verify(cli::parse_verify({{"suites", {"shaping"}}, {"fault_injection", "grpo_minus_sign"}}),
                               faulty));
  EXPECT_THROW(cli::parse_verify({{"suites", {"everything"}}}), ConfigError);
  EXPECT_THROW(cli::parse_verify({{"fault_injection", "other"}}), ConfigError);
  EXPECT_THROW(cli::parse_verify({{"tolerances", {{"exactish", 1.0}}}}), ConfigError);
}

TEST(RunCommand, ExitCodesAndSidecars) {
  TempDir dir;
  std::ostringstream out, side, err;
  const auto train_cfg = dir.file("train.json", kTrainConfig);
  const auto data = dir.file("train.jsonl");
  EXPECT_EQ(cli::run_command("train", train_cfg, data, "", out, side, err), cli::kExitOk) << err.str();
  EXPECT_TRUE(std::filesystem::exists(data + ".summary.csv"));
  EXPECT_TRUE(std::filesystem::exists(data + ".meta.json"));
  EXPECT_EQ(json::parse(slurp(data + ".meta.json"))["command"], "train");

  out.str("");
  EXPECT_EQ(cli::run_command("train", train_cfg, "", "csv", out, side, err), cli::kExitOk);
  EXPECT_EQ(out.str().rfind("step,mean_rho", 0), 0u);
  EXPECT_EQ(side.str().rfind("algorithm,", 0), 0u);

  EXPECT_EQ(cli::run_command("train", dir.file("missing.json"), "", "", out, side, err), cli::kExitConfigError);
  EXPECT_EQ(cli::run_command("train", dir.file("broken.json", "{not json"), "", "", out, side, err),
            cli::kExitConfigError);
  EXPECT_EQ(cli::run_command("curves", dir.file("c.json", R"({"n": 8, "algorithms": ["grpo"], "extra": 1})"), "",
                             "", out, side, err),
            cli::kExitConfigError);
  EXPECT_EQ(cli::run_command("curves", dir.file("c2.json", R"({"n": 8, "algorithms": ["grpo"]})"), "", "xml", out,
                             side, err),
            cli::kExitConfigError);
  EXPECT_EQ(cli::run_command("verify",
                             dir.file("v.json", R"({"suites": ["shaping"], "fault_injection": "grpo_minus_sign"})"),
                             "", "", out, side, err),
            cli::kExitVerificationFailed);
  EXPECT_EQ(cli::run_command("verify", dir.file("v2.json", R"({"suites": ["estimators"]})"), "", "csv", out, side, err),
            cli::kExitConfigError);
}

TEST(RunCommand, RepeatedRunsAreByteIdentical) {
  TempDir dir;
  std::ostringstream side, err;
  const auto cfg = dir.file("train.json", kTrainConfig);
  const auto a = dir.file("a.csv"), b = dir.file("b.csv");
  std::ostringstream out;
  ASSERT_EQ(cli::run_command("train", cfg, a, "csv", out, side, err), 0);
  ASSERT_EQ(cli::run_command("train", cfg, b, "csv", out, side, err), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(slurp(a + ".summary.csv"), slurp(b + ".summary.csv"));
  EXPECT_FALSE(slurp(a).empty());
}
