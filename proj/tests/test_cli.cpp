#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "walkline/cli.hpp"

using namespace walkline;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("walkline_cli_" + name)).string();
}

}  // namespace

TEST(Cli, Rw2SosPowerTail) {
  const Result r = run_cli({"translate", "rw2sos", "--preset", "power-tail", "--delta", "1.2", "--gamma", "0", "--M", "512"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_NEAR(j["sos"]["V"][0].get<double>(), -1.8931471805599453, 1e-12);
  EXPECT_EQ(j["sos"]["cutoff"], 512);
}

TEST(Cli, Rw2SosPresetCallSyntax) {
  const Result a = run_cli({"translate", "rw2sos", "--preset", "power-tail(1.2,0)", "--M", "64"});
  const Result b = run_cli({"translate", "rw2sos", "--preset", "power-tail", "--delta", "1.2", "--M", "64"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(json::parse(a.out)["sos"], json::parse(b.out)["sos"]);
}

TEST(Cli, Rw2SosMetropolisAndGeneral) {
  const Result m = run_cli({"translate", "rw2sos", "--preset", "log-potential", "--delta", "1", "--M", "20"});
  ASSERT_EQ(m.code, 0) << m.err;
  EXPECT_NEAR(json::parse(m.out)["sos"]["W_diag"][1].get<double>(), std::log(3.0), 1e-15);
  const Result g = run_cli({"translate", "rw2sos", "--preset", "geometric-step", "--J", "1", "--M", "12"});
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_TRUE(json::parse(g.out)["sos"].contains("W_band"));
}

TEST(Cli, Rw2SosFromKernelFile) {
  const std::string path = temp_path("kernel.json");
  write_text_file(path, kernel_to_json(metropolis_reflect_kernel(log_potential(1.0, 10))).dump());
  const Result r = run_cli({"translate", "rw2sos", "--input", path});
  std::remove(path.c_str());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["sos"]["cutoff"], 10);
}

TEST(Cli, Sos2RwAutoGivesConstantRatio) {
  const Result r = run_cli({"translate", "sos2rw", "--preset", "square-well", "--v0", "-1", "--lambda", "auto"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  const WalkKernel k = kernel_from_json(j["kernel"]);
  for (std::size_t x = 1; x < 50; ++x) EXPECT_NEAR(k.prob(x, x - 1) / k.prob(x, x + 1), M_E - 1.0, 1e-9) << x;
  EXPECT_NEAR(j["rho"].get<double>(), 1.0368532363994881773, 1e-12);
}

TEST(Cli, Sos2RwRho1PositivityFailure) {
  const Result r = run_cli({"translate", "sos2rw", "--preset", "square-well", "--v0", "-2", "--lambda", "rho1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("X=1"), std::string::npos) << r.err;
}

TEST(Cli, Sos2RwRho1FirstAnsatz) {
  const Result r = run_cli({"translate", "sos2rw", "--preset", "square-well", "--v0", "-0.3", "--lambda", "rho1", "--M", "100"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_NEAR(j["a"][0].get<double>(), 2.0 * std::exp(-0.3), 1e-15);
}

TEST(Cli, ConfigErrorsExitThree) {
  EXPECT_EQ(run_cli({"translate", "rw2sos", "--preset", "no-such-preset"}).code, 3);
  EXPECT_EQ(run_cli({"translate", "rw2sos", "--input", "/nonexistent/kernel.json"}).code, 3);
  EXPECT_EQ(run_cli({"sample", "--bogus-flag"}).code, 3);
  EXPECT_EQ(run_cli({"scan", "--preset", "double-step", "--v0", "-2:0", "--v1", "0"}).code, 3);
  EXPECT_EQ(run_cli({"verify", "--only", "no-such-criterion"}).code, 3);
  EXPECT_EQ(run_cli({"translate", "sos2rw", "--preset", "square-well", "--v0", "-1", "--lambda", "soon"}).code, 3);
  EXPECT_EQ(run_cli({"--config", "/nonexistent/config.json", "fig1"}).code, 3);
  EXPECT_EQ(run_cli({}).code, 3);
}

TEST(Cli, HelpExitsZero) {
  const Result r = run_cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("translate"), std::string::npos);
}

TEST(Cli, Fig1WallValues) {
  const Result r = run_cli({"fig1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 42u);  // header plus X = 0..40
  EXPECT_EQ(rows[0], (std::vector<std::string>{"X", "V_1.2", "V_0.5", "V_-0.2", "V_-1.2"}));
  const double deltas[] = {1.2, 0.5, -0.2, -1.2};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(std::stod(rows[1][i + 1]), -(std::log(2.0) + deltas[i]), 1e-14);
  // delta = 1.2 tail positive and decreasing
  for (std::size_t x = 2; x < 41; ++x) {
    EXPECT_GT(std::stod(rows[x + 1][1]), 0.0);
    EXPECT_LT(std::stod(rows[x + 1][1]), std::stod(rows[x][1]));
  }
}

TEST(Cli, ScanDoubleStepGrid) {
  const Result r = run_cli({"scan", "--preset", "double-step", "--v0", "-2:0:5", "--v1", "-1:1:5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 26u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"v0", "v1", "closed_form_regime", "numeric_regime", "growth_ratio",
                                               "agreement"}));
  EXPECT_EQ(rows[1][0], "-2");
  EXPECT_EQ(rows[1][1], "-1");
}

TEST(Cli, ScanJobsDoNotChangeOutput) {
  const std::vector<std::string> base{"scan", "--preset", "square-well", "--v0", "-2:0:4", "--N-list", "100,400", "--M", "600"};
  auto with_jobs = base;
  with_jobs.insert(with_jobs.end(), {"--jobs", "3"});
  const Result a = run_cli(base), b = run_cli(with_jobs);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, SampleIsDeterministic) {
  const std::vector<std::string> args{"sample", "--preset", "power-tail", "--delta", "0.5", "--N", "8", "--samples", "500", "--seed", "42"};
  const Result a = run_cli(args), b = run_cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto rows = parse_csv(a.out);
  EXPECT_EQ(rows.size(), 1u + 500u * 9u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"n", "x_n", "sample_id"}));
  auto other = args;
  other.back() = "43";
  EXPECT_NE(run_cli(other).out, a.out);
}

TEST(Cli, SampleMatchesEnumeration) {
  const std::string path = temp_path("samples.csv");
  const Result r = run_cli({"sample", "--preset", "power-tail", "--delta", "0.5", "--N", "8", "--samples", "1000000",
                            "--seed", "42", "--out", path});
  ASSERT_EQ(r.code, 0) << r.err;
  std::map<std::vector<int>, double> counts;
  {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    std::vector<int> cur;
    while (std::getline(in, line)) {
      const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
      const int n = std::stoi(line.substr(0, c1));
      if (n == 0) cur.clear();
      cur.push_back(std::stoi(line.substr(c1 + 1, c2 - c1 - 1)));
      if (n == 8) counts[cur] += 1.0;
    }
  }
  std::remove(path.c_str());
  // the sampler's default cutoff for N = 8 is M = 8
  const WalkKernel k = kernel_from_phi(power_tail_coupling(0.5, 0.0, 8));
  const auto paths = enumerate_bridges(8, std::vector<int>{-1, 1}, 8);
  const auto p = bridge_probabilities(TransferMatrix(k), paths);
  double tv = 0.0, total = 0.0;
  for (const auto& [path_x, c] : counts) total += c;
  EXPECT_EQ(total, 1e6);
  for (std::size_t i = 0; i < paths.size(); ++i) tv += std::abs(counts[paths[i].x] / total - p[i]);
  EXPECT_LT(0.5 * tv, 0.005);
}

TEST(Cli, MarginalSumsToOne) {
  const Result r = run_cli({"marginal", "--preset", "square-well", "--v0", "-1", "--N", "40", "--n", "20", "--M", "40"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = parse_csv(r.out);
  double s = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) s += std::stod(rows[i][1]);
  EXPECT_NEAR(s, 1.0, 1e-14);
  EXPECT_EQ(run_cli({"marginal", "--preset", "square-well", "--v0", "-1", "--N", "4", "--n", "5"}).code, 3);
}

TEST(Cli, VerifyOnlyEquivalence) {
  const Result r = run_cli({"verify", "--only", "equivalence", "--N", "10"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("1/1 criteria passed"), std::string::npos) << r.out;
}

TEST(Cli, VerifyCatchesSignFault) {
  const Result r = run_cli({"verify", "--only", "equivalence", "--inject-fault", "sign-v"});
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("0/1 criteria passed"), std::string::npos) << r.out;
}

TEST(Cli, DumpConfigRoundTrip) {
  const Result r = run_cli({"scan", "--preset", "double-step", "--v0", "-2:0:5", "--v1", "0.1", "--N-list", "100,400",
                            "--M", "800", "--jobs", "2", "--tol-rho", "1e-7", "--dump-config"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json dumped = json::parse(r.out);
  EXPECT_EQ(dumped["command"], "scan");
  EXPECT_EQ(dumped["tolerances"]["rho"], 1e-7);
  const std::string path = temp_path("config.json");
  write_text_file(path, r.out);
  const Result again = run_cli({"--config", path, "--dump-config"});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(json::parse(again.out), dumped);
  // flags override the file
  const Result over = run_cli({"--config", path, "--M", "900", "--dump-config"});
  std::remove(path.c_str());
  EXPECT_EQ(json::parse(over.out)["M"], 900);
  EXPECT_EQ(json::parse(over.out)["jobs"], 2);
}

TEST(Cli, BinaryEntryPoint) {
  const std::string cmd = std::string(WALKLINE_CLI_PATH) + " fig1 --xmax 3 --deltas 1.2 > /dev/null 2>&1";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  const std::string bad = std::string(WALKLINE_CLI_PATH) + " translate sos2rw --preset square-well --v0 -2 --lambda rho1 > /dev/null 2>&1";
  const int status = std::system(bad.c_str());
  EXPECT_EQ(WEXITSTATUS(status), 2);
}
