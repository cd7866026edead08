#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tdlab/experiment.hpp"

using namespace tdlab;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tdlab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliOptions write_config(const Json& cfg, const std::string& name = "config.json") {
    const fs::path p = dir_ / name;
    std::ofstream(p) << cfg.dump();
    CliOptions o;
    o.config_path = p.string();
    o.out_dir = (dir_ / "out").string();
    return o;
  }

  std::string read(const std::string& name) {
    std::ifstream in(dir_ / "out" / name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static Json counterexample(double gamma) {
    return {{"builtin", "counterexample"}, {"epsilon", 0.1}, {"gamma", gamma}};
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

}  // namespace

TEST_F(CliTest, RunCounterExampleHasConstantRatio) {
  const auto o = write_config({{"problem", counterexample(0.5)}, {"solver", {{"T", 20}}}});
  ASSERT_EQ(cmd_run(o, out_, err_), kExitOk) << err_.str();
  const Json doc = Json::parse(read("trajectory.json"));
  EXPECT_EQ(doc["config"]["problem"]["gamma"], 0.5);
  for (const auto& row : doc["rows"]) {
    if (row["ratio"].is_number()) EXPECT_NEAR(row["ratio"].get<double>(), 0.56, 1e-12);
  }
  EXPECT_NE(read("trajectory.csv").find("t,theta_0,distance,ratio,grad_residual"), std::string::npos);
}

TEST_F(CliTest, DivergedRunStillExitsZero) {
  const auto o = write_config({{"problem", counterexample(0.99)}, {"solver", {{"T", 50}}}});
  EXPECT_EQ(cmd_run(o, out_, err_), kExitOk);
  EXPECT_NE(out_.str().find("converged: no"), std::string::npos);
}

TEST_F(CliTest, MissingGammaNamesTheField) {
  const auto o = write_config({{"problem", {{"builtin", "counterexample"}, {"epsilon", 0.1}}}});
  EXPECT_EQ(cmd_run(o, out_, err_), kExitConfig);
  EXPECT_NE(err_.str().find("gamma"), std::string::npos);
}

TEST_F(CliTest, ThetaZeroAtFixedPoint) {
  const auto o = write_config({{"problem", counterexample(0.9)}, {"solver", {{"theta0", {0.0}}}}});
  ASSERT_EQ(cmd_run(o, out_, err_), kExitOk) << err_.str();
  const Json doc = Json::parse(read("trajectory.json"));
  EXPECT_EQ(doc["rows"].size(), 1u);
  EXPECT_TRUE(doc["converged"].get<bool>());
}

TEST_F(CliTest, ExitCodes) {
  CliOptions missing;
  missing.config_path = (dir_ / "absent.json").string();
  EXPECT_EQ(cmd_run(missing, out_, err_), kExitIo);
  std::ofstream(dir_ / "broken.json") << "{ not json";
  CliOptions broken;
  broken.config_path = (dir_ / "broken.json").string();
  EXPECT_EQ(cmd_check(broken, out_, err_), kExitConfig);
  auto two_sources = counterexample(0.5);
  two_sources["P"] = {{1.0}};
  EXPECT_EQ(cmd_run(write_config({{"problem", two_sources}}), out_, err_), kExitConfig);
  auto unwritable = write_config({{"problem", counterexample(0.5)}});
  std::ofstream(dir_ / "file") << "x";
  unwritable.out_dir = (dir_ / "file" / "sub").string();
  EXPECT_EQ(cmd_run(unwritable, out_, err_), kExitIo);
}

TEST_F(CliTest, InlineProblemWithStationaryD) {
  const Json problem = {{"n", 2},
                        {"P", {{0.5, 0.5}, {0.2, 0.8}}},
                        {"R", {1.0, -1.0}},
                        {"gamma", 0.9},
                        {"Phi", {{1.0}, {2.0}}},
                        {"d", "stationary"}};
  const auto o = write_config({{"problem", problem},
                               {"objective", {{"loss", "huber"}, {"delta", 1.0}}},
                               {"solver", {{"T", 2000}}}});
  ASSERT_EQ(cmd_run(o, out_, err_), kExitOk) << err_.str();
  EXPECT_TRUE(Json::parse(read("trajectory.json"))["converged"].get<bool>());
}

TEST_F(CliTest, SweepFindsGammaBoundary) {
  Json gammas = Json::array();
  for (int i = 0; i < 90; ++i) gammas.push_back(0.1 + 0.01 * i);
  const auto o = write_config({{"problem", counterexample(0.5)},
                               {"solver", {{"T", 400}}},
                               {"sweep", {{"epsilon", {0.1, 0.3, 0.5, 0.7, 0.9}}, {"gamma", gammas}}},
                               {"workers", 3}});
  ASSERT_EQ(cmd_sweep(o, out_, err_), kExitOk) << err_.str();
  std::istringstream csv(read("sweep.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("epsilon,gamma,d1,rho,converged,predicted,observed", 0), 0u);
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    std::stringstream ss(line);
    std::string eps, gamma, d1, rho, conv, predicted, observed;
    std::getline(ss, eps, ',');
    std::getline(ss, gamma, ',');
    std::getline(ss, d1, ',');
    std::getline(ss, rho, ',');
    std::getline(ss, conv, ',');
    std::getline(ss, predicted, ',');
    std::getline(ss, observed, ',');
    const double thr = counterexample_gamma_threshold(std::stod(eps));
    const double g = std::stod(gamma);
    if (std::abs(g - thr) < 0.01) continue;
    EXPECT_EQ(observed, g < thr ? "converges" : "diverges") << line;
    EXPECT_EQ(predicted, observed) << line;
  }
  EXPECT_EQ(rows, 450u);
}

TEST_F(CliTest, SweepSingletonAndKAxis) {
  auto o = write_config({{"problem", counterexample(0.5)}, {"sweep", {{"gamma", {0.5}}}}});
  ASSERT_EQ(cmd_sweep(o, out_, err_), kExitOk) << err_.str();
  std::istringstream csv(read("sweep.csv"));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 2u);

  o = write_config({{"problem", counterexample(0.5)}, {"sweep", {{"K", {1, 5}}}}});
  EXPECT_EQ(cmd_sweep(o, out_, err_), kExitConfig);
  o = write_config({{"problem", counterexample(0.5)}, {"sweep", Json::object()}});
  EXPECT_EQ(cmd_sweep(o, out_, err_), kExitConfig);
}

TEST_F(CliTest, SweepOverKHasNonincreasingRatios) {
  const Json problem = {{"n", 3},
                        {"P", {{0.2, 0.5, 0.3}, {0.4, 0.4, 0.2}, {0.1, 0.1, 0.8}}},
                        {"R", {1.0, 0.0, -1.0}},
                        {"gamma", 0.5},
                        {"Phi", {{1.0, 0.0}, {0.3, 1.0}, {0.5, -2.0}}},
                        {"d", {0.3, 0.3, 0.4}}};
  const auto o = write_config({{"problem", problem},
                               {"solver", {{"algorithm", "gradient"}, {"T", 50}}},
                               {"sweep", {{"K", {1, 5, 20}}}}});
  ASSERT_EQ(cmd_sweep(o, out_, err_), kExitOk) << err_.str();
  std::istringstream csv(read("sweep.csv"));
  std::string line;
  std::getline(csv, line);
  double prev = 1e300;
  while (std::getline(csv, line)) {
    const double ratio = std::stod(line.substr(line.rfind(',') + 1));
    EXPECT_LE(ratio, prev + 1e-12);
    prev = ratio;
  }
}

TEST_F(CliTest, CheckReportsHypothesis) {
  auto o = write_config({{"problem", counterexample(0.5)}});
  ASSERT_EQ(cmd_check(o, out_, err_), kExitOk) << err_.str();
  EXPECT_NE(out_.str().find("hypothesis holds"), std::string::npos);
  const Json doc = Json::parse(read("check.json"));
  EXPECT_NEAR(doc["analytic"]["eta"].get<double>(), 0.56, 1e-12);

  out_.str("");
  o = write_config({{"problem", counterexample(0.95)}});
  ASSERT_EQ(cmd_check(o, out_, err_), kExitOk);
  EXPECT_NE(out_.str().find("hypothesis fails"), std::string::npos);
  EXPECT_NEAR(Json::parse(read("check.json"))["analytic"]["eta"].get<double>(), 1.064, 1e-12);
}

TEST_F(CliTest, CheckControlProblem) {
  const Json control = {{"d", {0.5, 0.5}},
                        {"policy", {{0.5, 0.5}, {1.0, 0.0}}},
                        {"reward", {0.0, 1.0}},
                        {"P", {{0.5, 0.5}, {0.0, 1.0}}},
                        {"gamma", 0.5},
                        {"features", {{{1.0}, {0.5}}, {{0.2}, {1.0}}}}};
  const auto o = write_config({{"problem", {{"control", control}}},
                               {"objective", {{"loss", "control"}, {"greedify", "softmax"}, {"tau", 0.5}}}});
  ASSERT_EQ(cmd_check(o, out_, err_), kExitOk) << err_.str();
  EXPECT_NE(out_.str().find("control Lipschitz bound"), std::string::npos);
  ASSERT_EQ(cmd_run(o, out_, err_), kExitOk) << err_.str();
}

TEST_F(CliTest, SafedistReportsThreshold) {
  const auto o = write_config({{"problem", counterexample(0.95)}, {"safedist", {{"trials", 200}}}});
  ASSERT_EQ(cmd_safedist(o, out_, err_), kExitOk) << err_.str();
  const Json doc = Json::parse(read("safedist.json"));
  EXPECT_TRUE(doc["found_convergent"].get<bool>());
  const auto best = doc["best_d"];
  EXPECT_LT(best[0].get<double>(), doc["d1_threshold"].get<double>());
}

TEST_F(CliTest, EchoedConfigReproducesOutputs) {
  auto o = write_config({{"problem", counterexample(0.7)},
                         {"objective", {{"loss", "logcosh"}, {"scale", 0.5}, {"ridge", 0.1}}},
                         {"seed", 9}});
  ASSERT_EQ(cmd_run(o, out_, err_), kExitOk) << err_.str();
  const std::string first_csv = read("trajectory.csv");
  const Json echo = Json::parse(read("trajectory.json"))["config"];
  auto again = write_config(echo, "echo.json");
  again.out_dir.reset();
  ASSERT_EQ(cmd_run(again, out_, err_), kExitOk) << err_.str();
  EXPECT_EQ(read("trajectory.csv"), first_csv);
}
