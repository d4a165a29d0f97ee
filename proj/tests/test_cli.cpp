// Drives the dpdd executable end to end.

#include <sys/wait.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("dpdd-cli-" + std::string(info->name()) + "-" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliResult run(const std::string& args) {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = "SOURCE_DATE_EPOCH=1700000000 '" DPDD_CLI_PATH "' " + args + " >'" + out.string() +
                            "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

  std::string path(const std::string& name) const { return "'" + (dir_ / name).string() + "'"; }

  fs::path dir_;
};

// Stationary OU path with exact transitions, written as a one-column CSV.
std::string ou_csv(int n, double step, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  const double a = std::exp(-step), sd = 0.7 / std::sqrt(2.0);
  double x = sd * z(rng);
  std::ostringstream s;
  s.precision(17);
  s << "x\n";
  for (int i = 0; i < n; ++i) {
    s << x << '\n';
    x = a * x + sd * std::sqrt(1 - a * a) * z(rng);
  }
  return s.str();
}

}  // namespace

TEST_F(Cli, Version) {
  const CliResult r = run("version");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("dpdd ", 0), 0u);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("fit").code, 2);
}

TEST_F(Cli, UnknownScenarioNamesTheField) {
  write("bad.json", R"({"scenarios": ["ar1", {"kind": "garch"}]})");
  const CliResult r = run("simulate --config " + path("bad.json") + " --output-dir " + path("out"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/scenarios/1/kind"), std::string::npos) << r.err;
  write("typo.json", R"({"n_exps": 3})");
  const CliResult t = run("simulate --config " + path("typo.json") + " --output-dir " + path("out"));
  EXPECT_EQ(t.code, 2);
  EXPECT_NE(t.err.find("/n_exps"), std::string::npos) << t.err;
}

TEST_F(Cli, SimulateIsByteIdentical) {
  write("cfg.json", R"({"n_exp": 2, "scenarios": [{"kind": "ar1", "n_paths": 60}, {"kind": "ou2d", "n_paths": 40}],
                        "methods": ["dpdd", "war", "sw_dpdd"]})");
  const std::string args = "simulate --config " + path("cfg.json") + " --seed 7 --output-dir " + path("out");
  ASSERT_EQ(run(args).code, 0);
  const std::string csv = slurp(dir_ / "out/results.csv"), summary = slurp(dir_ / "out/summary.json"),
                    manifest = slurp(dir_ / "out/manifest.json");
  ASSERT_EQ(run(args + " --threads 2").code, 0);
  EXPECT_EQ(slurp(dir_ / "out/results.csv"), csv);
  EXPECT_EQ(slurp(dir_ / "out/summary.json"), summary);
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(slurp(dir_ / "out/manifest.json"), manifest);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2 * 3);
  const auto m = nlohmann::json::parse(manifest);
  EXPECT_EQ(m["seed"], 7);
  EXPECT_EQ(m["timestamp"], "2023-11-14T22:13:20Z");
}

TEST_F(Cli, FitAndForecast) {
  write("traj.csv", ou_csv(20000, 0.1, 5));
  const std::string fit = "fit --input " + path("traj.csv") + " --dt 0.1 --degree 4 --output-dir " + path("model");
  const CliResult r = run(fit);
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string model = slurp(dir_ / "model/model.json");
  ASSERT_EQ(run(fit).code, 0);
  EXPECT_EQ(slurp(dir_ / "model/model.json"), model);

  // Leading nontrivial rate near the analytic -1.
  const auto j = nlohmann::json::parse(model);
  ASSERT_FALSE(j["modes"].empty());
  EXPECT_NEAR(j["modes"][0]["rate"][0].get<double>(), -1.0, 0.1);

  write("now.csv", ou_csv(2000, 0.1, 6));
  const std::string fc = "forecast --model " + path("model/model.json") + " --samples " + path("now.csv") +
                         " --horizon 0 --output-dir " + path("fc");
  const CliResult f = run(fc);
  ASSERT_EQ(f.code, 0) << f.err;
  const auto meta = nlohmann::json::parse(slurp(dir_ / "fc/forecast_meta.json"));
  EXPECT_NEAR(meta["total_mass"].get<double>(), 1.0, 1e-6);
  const std::string density = slurp(dir_ / "fc/forecast.csv");
  ASSERT_EQ(run(fc).code, 0);
  EXPECT_EQ(slurp(dir_ / "fc/forecast.csv"), density);

  write("two.csv", "1,2\n3,4\n");
  EXPECT_EQ(run("forecast --model " + path("model/model.json") + " --samples " + path("two.csv") +
                " --output-dir " + path("fc2"))
                .code,
            2);
}

TEST_F(Cli, FitRejectsSinglePoint) {
  write("one.csv", "0.5\n");
  const CliResult r = run("fit --input " + path("one.csv") + " --output-dir " + path("m"));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("need >= 2 points"), std::string::npos) << r.err;
}

TEST_F(Cli, HousingSynthetic) {
  write("h.json", R"({"synthetic": {"metros": 60, "months": 40}})");
  const std::string args = "housing --synthetic --config " + path("h.json") + " --seed 3 --output-dir " + path("h");
  const CliResult r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string monthly = slurp(dir_ / "h/housing_monthly.csv");
  EXPECT_NE(monthly.find(",dpdd,"), std::string::npos);
  EXPECT_NE(monthly.find(",war,"), std::string::npos);
  EXPECT_NE(monthly.find(",persistence,"), std::string::npos);
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(slurp(dir_ / "h/housing_monthly.csv"), monthly);
}

TEST_F(Cli, HousingWithoutTestMonths) {
  const CliResult r = run("housing --input '" DPDD_TEST_DATA_DIR "/metro_toy.csv' --split 2030-01 --output-dir " + path("h"));
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(dir_ / "h"));
}
