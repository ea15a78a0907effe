#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "phihilfer/cli.hpp"

using namespace phihilfer;
namespace fs = std::filesystem;

namespace {

const std::string kSource = PHIHILFER_SOURCE_DIR;
const std::string kBinary = PHIHILFER_CLI_BINARY;

std::string config(const std::string& name) { return kSource + "/configs/" + name + ".json"; }
std::string fixture(const std::string& name) { return kSource + "/tests/fixtures/" + name + ".json"; }

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("phihilfer_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

int run(const std::function<int()>& f) {
  std::ostringstream err;
  return cli::run_command(f, err);
}

int run_binary(const std::string& args) {
  const int status = std::system((kBinary + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(CliSolve, HomogeneousCsvHasConstantWeightedValue) {
  TempDir dir;
  const auto out = dir.file("h.csv");
  std::ostringstream log;
  ASSERT_EQ(cli::cmd_solve(config("homogeneous"), out, log), cli::kSuccess);
  const auto rows = read_csv(slurp(out));
  ASSERT_EQ(rows[0], (std::vector<std::string>{"subinterval_index", "t", "phi_t", "weighted_value", "raw_value"}));
  const double w0 = 1.0 / std::tgamma(0.75);
  EXPECT_EQ(rows[1][4], "");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][0] != "0") break;
    EXPECT_NEAR(std::stod(rows[i][3]), w0, 1e-14);
  }
  EXPECT_EQ(rows.back()[0], "2");
  const auto summary = Json::parse(slurp(out + ".summary.json"));
  EXPECT_TRUE(summary["apriori_dominates"].get<bool>());
}

TEST(CliSolve, ExampleSummary) {
  TempDir dir;
  const auto out = dir.file("ex.csv");
  std::ostringstream log;
  ASSERT_EQ(cli::cmd_solve(config("example"), out, log), cli::kSuccess);
  const auto s = Json::parse(slurp(out + ".summary.json"));
  EXPECT_TRUE(s["apriori_dominates"].get<bool>());
  EXPECT_LT(s["residual"].get<double>(), 1e-2);
  EXPECT_GT(s["iterations"].get<int>(), 1);
  const auto rows = read_csv(slurp(out));
  EXPECT_EQ(rows.size(), 2u + 2 * 256);
  for (const auto& r : rows) EXPECT_EQ(r.size(), 5u);
}

TEST(CliSolve, CsvIsByteIdenticalAcrossRuns) {
  TempDir dir;
  std::ostringstream log;
  ASSERT_EQ(cli::cmd_solve(config("hadamard_power"), dir.file("a.csv"), log), 0);
  ASSERT_EQ(cli::cmd_solve(config("hadamard_power"), dir.file("b.csv"), log), 0);
  EXPECT_EQ(slurp(dir.file("a.csv")), slurp(dir.file("b.csv")));
  ASSERT_EQ(cli::cmd_verify(config("hadamard_power"), "uh", dir.file("c.csv"), log), 0);
  ASSERT_EQ(cli::cmd_verify(config("hadamard_power"), "uh", dir.file("d.csv"), log), 0);
  EXPECT_EQ(slurp(dir.file("c.csv")), slurp(dir.file("d.csv")));
  EXPECT_EQ(slurp(dir.file("a.csv")).find('\r'), std::string::npos);
}

TEST(CliExitCodes, OneFixturePerCode) {
  TempDir dir;
  std::ostringstream log;
  EXPECT_EQ(run([&] { return cli::cmd_solve(config("example"), dir.file("ok.csv"), log); }), 0);
  EXPECT_EQ(run([&] { return cli::cmd_solve(fixture("missing_order"), dir.file("x.csv"), log); }), 2);
  EXPECT_EQ(run([&] { return cli::cmd_solve(fixture("sin_phi"), dir.file("x.csv"), log); }), 3);
  EXPECT_EQ(run([&] { return cli::cmd_solve(fixture("bad_expression"), dir.file("x.csv"), log); }), 3);
  EXPECT_EQ(run([&] { return cli::cmd_solve(fixture("nonconvergent"), dir.file("x.csv"), log); }), 4);
  EXPECT_EQ(run([&] { return cli::cmd_solve(fixture("no_such_file"), dir.file("x.csv"), log); }), 5);
  EXPECT_EQ(run([&] { return cli::cmd_solve(config("example"), dir.file("missing/dir/x.csv"), log); }), 5);
  EXPECT_EQ(run([&] { return cli::cmd_verify(fixture("corrupted_bounds"), "uh", dir.file("x.csv"), log); }), 6);
  EXPECT_EQ(run([&] { return cli::cmd_verify(config("linear_caputo"), "uh", dir.file("x.csv"), log); }), 2);
  EXPECT_EQ(run([&] { return cli::cmd_convergence(config("homogeneous"), 2, dir.file("x.csv"), log); }), 2);
}

TEST(CliExitCodes, SinPhiMessageMentionsMonotonicity) {
  std::ostringstream err;
  std::ostringstream log;
  EXPECT_EQ(cli::run_command([&] { return cli::cmd_solve(fixture("sin_phi"), "", log); }, err), 3);
  EXPECT_NE(err.str().find("increasing"), std::string::npos) << err.str();
}

TEST(CliExitCodes, ProcessExitStatus) {
  TempDir dir;
  EXPECT_EQ(run_binary("solve --config " + config("homogeneous") + " --out " + dir.file("p.csv")), 0);
  EXPECT_EQ(run_binary("solve --config " + fixture("missing_order")), 2);
  EXPECT_EQ(run_binary("solve --config " + fixture("sin_phi")), 3);
  EXPECT_EQ(run_binary("solve --config " + fixture("nonconvergent")), 4);
  EXPECT_EQ(run_binary("solve --config " + fixture("no_such_file")), 5);
  EXPECT_EQ(run_binary("verify --mode uh --config " + fixture("corrupted_bounds")), 6);
  EXPECT_EQ(run_binary("verify --mode sideways --config " + config("example")), 2);
  EXPECT_EQ(run_binary("frobnicate"), 2);
}

TEST(CliVerify, ZeroEpsilonPasses) {
  TempDir dir;
  std::ostringstream log;
  ASSERT_EQ(cli::cmd_verify(config("homogeneous"), "uh", dir.file("v.csv"), log), 0);
  const auto rows = read_csv(slurp(dir.file("v.csv")));
  ASSERT_EQ(rows[0], (std::vector<std::string>{"t", "empirical", "theoretical", "margin"}));
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(std::stod(rows[i][1]), 0.0);
}

TEST(CliVerify, ExampleModes) {
  TempDir dir;
  std::ostringstream log;
  for (const char* mode : {"uh", "uhr", "ic", "data"}) {
    EXPECT_EQ(cli::cmd_verify(config("example"), mode, dir.file("v.csv"), log), 0) << mode;
    const auto s = Json::parse(slurp(dir.file("v.csv.summary.json")));
    EXPECT_EQ(s["check"], mode);
    EXPECT_TRUE(s["pass"].get<bool>()) << mode;
  }
}

TEST(CliBounds, EmptyProductAndAdvisory) {
  std::ostringstream out;
  ASSERT_EQ(cli::cmd_bounds(config("linear_caputo"), out), 0);
  const double E = mittag_leffler(0.6, 1.0);
  EXPECT_NE(out.str().find("A_factor         " + cli::fmt(E)), std::string::npos) << out.str();
  EXPECT_NE(out.str().find("lipschitz: sampled estimate within"), std::string::npos);

  TempDir dir;
  auto d = Json::parse(slurp(config("linear_caputo")));
  d["rhs"] = "3*u";
  d.erase("oracle");
  const auto path = dir.file("steep.json");
  std::ofstream(path) << d.dump();
  std::ostringstream steep;
  EXPECT_EQ(cli::cmd_bounds(path, steep), 0);
  EXPECT_NE(steep.str().find("advisory:"), std::string::npos) << steep.str();
}

TEST(CliBounds, ExampleConstant) {
  std::ostringstream out;
  ASSERT_EQ(cli::cmd_bounds(config("example"), out), 0);
  const double sigma = 0.85;
  const double E = mittag_leffler(0.7, 1.0);
  const double A = (1 + E / std::tgamma(sigma)) * E;
  const double C = A * (1 / std::tgamma(sigma) + 1 / std::tgamma(1.7));
  EXPECT_NE(out.str().find("C_uh             " + cli::fmt(C)), std::string::npos) << out.str();
  EXPECT_NE(out.str().find("lambda_theta"), std::string::npos);
}

TEST(CliConvergence, HomogeneousAndLinear) {
  auto h = cli::convergence_study(load_config(config("homogeneous")), 3);
  for (const auto& lv : h) EXPECT_LT(lv.true_error, 1e-13);
  auto l = cli::convergence_study(load_config(config("linear_caputo")), 3);
  ASSERT_EQ(l.size(), 3u);
  EXPECT_GE(std::log2(l[1].true_error / l[2].true_error), 1.0);
  EXPECT_GE(l[2].order, 1.0);
}

TEST(CliConvergence, LinearOracleRequiresLinearRhs) {
  TempDir dir;
  auto d = Json::parse(slurp(config("linear_caputo")));
  d["rhs"] = "-u + 1";
  const auto path = dir.file("nonlinear.json");
  std::ofstream(path) << d.dump();
  std::ostringstream log;
  EXPECT_EQ(run([&] { return cli::cmd_convergence(path, 3, "", log); }), 2);
}
