#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "frameloc/runner.hpp"

using namespace frameloc;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarioDir = FRAMELOC_SCENARIO_DIR;
const std::string kCli = FRAMELOC_CLI_PATH;

class CliRunner : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("frameloc_") + info->name() + "_" +
                                        std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  // Shell exit status of the CLI.
  static int cli(const std::string& args) {
    const int raw = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  }

  fs::path write(const std::string& name, const Json& doc) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << doc.dump(2);
    return p;
  }

  RunConfig config(const fs::path& scenario, const std::string& out) {
    RunConfig c;
    c.scenario_path = scenario;
    c.out_dir = dir_ / out;
    return c;
  }

  fs::path dir_;
};

Json short_finite() {
  std::ifstream in(kScenarioDir / "fig3_finite.json");
  Json d = Json::parse(in);
  d["integration"]["t_end"] = 0.05;
  d["integration"]["dt"] = 1e-3;
  d["integration"]["stride"] = 5;
  return d;
}

}  // namespace

TEST_F(CliRunner, WritesArtifacts) {
  std::ostringstream err;
  auto cfg = config(write("s.json", short_finite()), "out");
  cfg.full_state = true;
  ASSERT_EQ(run_and_emit(cfg, err), kExitOk) << err.str();
  for (const char* f : {"trace.csv", "oracle.json", "summary.json", "full_state.csv"})
    EXPECT_TRUE(fs::exists(cfg.out_dir / f)) << f;

  const std::string trace = slurp(cfg.out_dir / "trace.csv");
  const std::string header = trace.substr(0, trace.find('\n'));
  EXPECT_EQ(header,
            "t,orient_err_1,orient_err_2,orient_err_3,orient_err_4,"
            "pos_err_1_2,pos_err_1_4,pos_err_2_3,pos_err_3_4,V");
  EXPECT_EQ(trace.find('\r'), std::string::npos);
  std::size_t lines = 0;
  for (char c : trace) lines += c == '\n';
  EXPECT_EQ(lines, 1u + 50u / 5u + 1u);

  const Json oracle = Json::parse(slurp(cfg.out_dir / "oracle.json"));
  EXPECT_EQ(oracle["S_c"][3], Json::array({0.0, 0.0, 0.0, 1.0}));
  EXPECT_TRUE(oracle["well_posed"].get<bool>());

  const Json summary = Json::parse(slurp(cfg.out_dir / "summary.json"));
  EXPECT_EQ(summary["law"], "finite");
  EXPECT_EQ(summary["n"], 4);
  EXPECT_NEAR(summary["lambda2"].get<double>(), 2.0, 1e-12);
}

TEST_F(CliRunner, FloatsRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 2.5e-17, -1e300, 123456789.123456789}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST_F(CliRunner, DeterministicBytes) {
  std::ostringstream err;
  const auto scenario = write("s.json", short_finite());
  auto a = config(scenario, "a");
  auto b = config(scenario, "b");
  ASSERT_EQ(run_and_emit(a, err), kExitOk);
  ASSERT_EQ(run_and_emit(b, err), kExitOk);
  for (const char* f : {"trace.csv", "oracle.json"})
    EXPECT_EQ(slurp(a.out_dir / f), slurp(b.out_dir / f)) << f;
}

TEST_F(CliRunner, OverridesApply) {
  Scenario s = load_scenario(kScenarioDir / "fig3_finite.json");
  RunConfig c;
  c.law = "asymptotic";
  c.dt = 0.01;
  c.t_end = 2.0;
  c.seed = 99;
  c.stride = 3;
  c.mode = ReconstructionMode::FullGsop;
  const Scenario o = apply_overrides(s, c);
  EXPECT_FALSE(is_finite_time(o.law));
  EXPECT_EQ(o.dt, 0.01);
  EXPECT_EQ(o.t_end, 2.0);
  EXPECT_EQ(o.seed, 99u);
  EXPECT_EQ(o.stride, 3u);
  EXPECT_EQ(o.mode, ReconstructionMode::FullGsop);

  RunConfig bad;
  bad.alpha = 0.5;
  EXPECT_THROW((void)apply_overrides(o, bad), ValidationError);
  bad = {};
  bad.dt = -1.0;
  EXPECT_THROW((void)apply_overrides(s, bad), ValidationError);
  bad = {};
  bad.alpha = 2.0;
  EXPECT_THROW((void)apply_overrides(s, bad), ValidationError);
  RunConfig ok;
  ok.alpha = 0.3;
  EXPECT_EQ(std::get<FiniteTimeLaw>(apply_overrides(s, ok).law).alpha, 0.3);
}

TEST_F(CliRunner, InvalidConfigExitCode) {
  Json d = short_finite();
  d["integration"]["dt"] = 0;
  std::ostringstream err;
  EXPECT_EQ(run_and_emit(config(write("bad.json", d), "o"), err), kExitInvalidConfig);
  EXPECT_NE(err.str().find("integration.dt"), std::string::npos);

  std::ofstream(dir_ / "broken.json") << "{ \"graph\": ";
  err.str("");
  EXPECT_EQ(run_and_emit(config(dir_ / "broken.json", "o"), err), kExitInvalidConfig);
  EXPECT_NE(err.str().find("line"), std::string::npos);
}

TEST_F(CliRunner, PreconditionExitCode) {
  Json d = short_finite();
  d["graph"]["directed"] = true;
  d["graph"]["edges"] = Json::parse("[[1, 2], [2, 3], [3, 4], [4, 1]]");
  std::ostringstream err;
  EXPECT_EQ(run_and_emit(config(write("directed.json", d), "o"), err), kExitPrecondition);
  EXPECT_NE(err.str().find("connected undirected"), std::string::npos);

  d["law"] = {{"name", "asymptotic"}};
  d["graph"]["edges"] = Json::parse("[[1, 2], [3, 4]]");
  err.str("");
  EXPECT_EQ(run_and_emit(config(write("forest.json", d), "o"), err), kExitPrecondition);
  EXPECT_NE(err.str().find("spanning tree"), std::string::npos);
}

TEST_F(CliRunner, BundledScenariosMeetTheirTargets) {
  std::ostringstream err;
  auto a = config(kScenarioDir / "fig2_asymptotic.json", "fig2");
  ASSERT_EQ(run_and_emit(a, err), kExitOk) << err.str();
  const Json s2 = Json::parse(slurp(a.out_dir / "summary.json"));
  EXPECT_EQ(s2["final_time"], 10.0);
  EXPECT_LT(s2["final_max_orientation_error"].get<double>(), 1e-3);
  EXPECT_LT(s2["final_max_position_error"].get<double>(), 1e-3);
  EXPECT_TRUE(s2["observed_settling_time"].is_null());

  auto b = config(kScenarioDir / "fig3_finite.json", "fig3");
  ASSERT_EQ(run_and_emit(b, err), kExitOk) << err.str();
  const Json s3 = Json::parse(slurp(b.out_dir / "summary.json"));
  EXPECT_LE(s3["observed_settling_time"].get<double>(), s3["settling_bound"].get<double>());
  EXPECT_TRUE(s3["stays_settled"].get<bool>());
  EXPECT_LT(s3["final_max_orientation_error"].get<double>(), 1e-6);

  const std::string table =
      report({a.out_dir / "summary.json", b.out_dir / "summary.json"});
  std::istringstream rows(table);
  std::string header, rule, row2, row3;
  std::getline(rows, header);
  std::getline(rows, rule);
  std::getline(rows, row2);
  std::getline(rows, row3);
  EXPECT_NE(header.find("settled_at"), std::string::npos);
  EXPECT_NE(row2.find("asymptotic"), std::string::npos);
  EXPECT_NE(row2.find("w1=("), std::string::npos);
  EXPECT_NE(row3.find("finite"), std::string::npos);
  EXPECT_NE(row3.find("lambda2=2"), std::string::npos);
  // The asymptotic row has no settling time; the finite row has one.
  EXPECT_NE(row2.find("—"), std::string::npos);
  EXPECT_EQ(row3.find("—"), std::string::npos);
  std::string extra;
  EXPECT_FALSE(std::getline(rows, extra));
}

TEST_F(CliRunner, ReportSingleRowAndErrors) {
  std::ostringstream err;
  auto a = config(write("s.json", short_finite()), "one");
  ASSERT_EQ(run_and_emit(a, err), kExitOk);
  const std::string table = report({a.out_dir / "summary.json"});
  std::size_t lines = 0;
  for (char c : table) lines += c == '\n';
  EXPECT_EQ(lines, 3u);
  EXPECT_THROW((void)report({}), InvalidArgument);
  try {
    (void)report({dir_ / "missing.json"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("missing.json"), std::string::npos);
  }
}

TEST_F(CliRunner, CommandLineInterface) {
  const auto scenario = write("s.json", short_finite());
  const auto out = dir_ / "cli";
  EXPECT_EQ(cli("run --config " + scenario.string() + " --out " + out.string() +
                " --alpha 0.4 --mode full --full-state"),
            0);
  EXPECT_TRUE(fs::exists(out / "full_state.csv"));
  const Json summary = Json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(summary["alpha"], 0.4);
  EXPECT_EQ(summary["reconstruction"], "full");

  EXPECT_EQ(cli("report " + (out / "summary.json").string()), 0);
  EXPECT_NE(cli("report"), 0);
  EXPECT_NE(cli("report " + (dir_ / "nope.json").string()), 0);
  EXPECT_NE(cli(""), 0);
  EXPECT_EQ(cli("run --config " + scenario.string() + " --out " + out.string() + " --dt 0"), 2);
  EXPECT_EQ(cli("run --config " + scenario.string() + " --out " + out.string() +
                " --law asymptotic --alpha 0.5"),
            2);
  EXPECT_EQ(cli("run --config " + (dir_ / "nope.json").string()), 2);
  EXPECT_NE(cli("run --config " + scenario.string() + " --law sideways"), 0);
}
