#include <gtest/gtest.h>
#include <openssl/evp.h>
#include <sys/wait.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <numbers>
#include <sstream>

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw std::runtime_error("missing column " + name);
  }
  std::vector<double> column(const std::string& name) const {
    std::vector<double> out;
    const auto c = col(name);
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

Table read_csv(const fs::path& p) {
  std::stringstream ss(slurp(p));
  Table t;
  std::string line;
  std::getline(ss, line);
  t.header = split(line);
  while (std::getline(ss, line)) {
    std::vector<double> r;
    for (const auto& c : split(line)) r.push_back(std::strtod(c.c_str(), nullptr));
    t.rows.push_back(r);
  }
  return t;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << (md[i] >> 4) << (md[i] & 15);
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sqswap_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args, const fs::path& out = {}) {
    const fs::path o = out.empty() ? dir_ : out;
    const std::string cmd = std::string(SQSWAP_CLI_PATH) + " " + args + " --out " + o.string() + " > " +
                            (dir_ / "stdout.txt").string() + " 2> " + (dir_ / "stderr.txt").string();
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GainScanRowsAndManifest) {
  ASSERT_EQ(run("gain-scan --n 10 --points 5"), 0);
  const auto t = read_csv(dir_ / "gain_scan.csv");
  ASSERT_EQ(t.rows.size(), 5u);
  for (const char* c : {"tau_over_tauref", "gain_exact", "gain_analytic", "bandwidth"}) EXPECT_NO_THROW(t.col(c));
  EXPECT_NEAR(t.column("gain_exact")[0], 1.0, 1e-9);
  EXPECT_NEAR(t.column("tau_over_tauref")[4], 2.0, 1e-15);

  const auto text = slurp(dir_ / "gain_scan.csv");
  EXPECT_EQ(text.find('\r'), std::string::npos);
  const auto m = nlohmann::json::parse(slurp(dir_ / "gain_scan.manifest.json"));
  EXPECT_EQ(m["subcommand"], "gain-scan");
  EXPECT_EQ(m["parameters"]["n"], 10);
  ASSERT_EQ(m["outputs"].size(), 1u);
  EXPECT_EQ(m["outputs"][0]["file"], "gain_scan.csv");
  EXPECT_EQ(m["outputs"][0]["sha256"], sha256_hex(text));
}

TEST_F(Cli, RerunsAreByteIdentical) {
  const auto a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(run("estimate --n 12 --shots 3000 --sigma 0.1 --seed 5 --records", a), 0);
  ASSERT_EQ(run("estimate --n 12 --shots 3000 --sigma 0.1 --seed 5 --records --threads 1", b), 0);
  for (const char* f : {"estimate.csv", "estimate_histogram.csv", "estimate_records.csv", "estimate.manifest.json",
                        "estimate_histogram.manifest.json", "estimate_records.manifest.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_EQ(read_csv(a / "estimate_records.csv").rows.size(), 3000u);
}

TEST_F(Cli, EstimateSqlVariance) {
  ASSERT_EQ(run("estimate --n 100 --sigma 0 --tau 0"), 0);
  const auto t = read_csv(dir_ / "estimate.csv");
  EXPECT_NEAR(t.column("var_diff")[0] / 0.04, 1.0, 0.05);
  const auto h = read_csv(dir_ / "estimate_histogram.csv");
  EXPECT_EQ(h.rows.size(), 64u * 64u);
  double total = 0;
  for (double c : h.column("count")) total += c;
  EXPECT_EQ(total, 100000.0);
}

TEST_F(Cli, ClockCoherentMatchesSql) {
  ASSERT_EQ(run("clock --n 100 --coherent --shots 20000 --times 1e-3,1e-2,0.05"), 0);
  const auto t = read_csv(dir_ / "clock.csv");
  ASSERT_EQ(t.rows.size(), 3u);
  for (double r : t.column("ratio_to_sql")) EXPECT_NEAR(r, 1.0, 0.10);
}

TEST_F(Cli, AverageGainSmallWindow) {
  ASSERT_EQ(run("avg-gain --n 40 --tau 0.02 --lambda 0.01,0.3"), 0);
  const auto t = read_csv(dir_ / "avg_gain.csv");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_NEAR(t.column("average_gain")[0] / t.column("gain_midfringe")[0], 1.0, 1e-3);
}

TEST_F(Cli, MsScanGridProperties) {
  const int p = 32;
  const double tref = 1.2 * std::pow(20.0, -2.0 / 3.0);
  ASSERT_EQ(run("ms-scan --n 40 --tau " + std::to_string(0.1 * tref) + " --points " + std::to_string(p)), 0);
  const auto t = read_csv(dir_ / "ms_scan.csv");
  ASSERT_EQ(t.rows.size(), static_cast<std::size_t>(p * p));
  const auto g = t.column("gain");
  // (nu, phi) ~ (nu + pi, phi + pi/2): p/4 steps in nu, p/2 steps in phi; nu wraps at 4pi, phi does not
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p / 2; ++j) {
      const int i2 = (i + p / 4) % p, j2 = j + p / 2;
      EXPECT_NEAR(g[i * p + j], g[i2 * p + j2], 1e-9 * g[i * p + j]);
    }
  }

  // maximum dominates the value at the optimal constants
  ASSERT_EQ(run("bandwidth --n 40 --tau " + std::to_string(0.1 * tref), dir_ / "bw"), 0);
  const double at_const = read_csv(dir_ / "bw" / "bandwidth.csv").column("gain_midfringe")[0];
  const auto best = std::max_element(g.begin(), g.end()) - g.begin();
  EXPECT_GE(g[best], at_const - 1e-3);

  // ridge: maximizing nu within one grid step of the analytic minimum line
  const double nu = t.column("nu")[best], phi = t.column("phi_ms")[best];
  const double r = 40 * 0.1 * tref / 4;
  const double A = std::expm1(2 * r), B = -std::expm1(-2 * r);
  double d = phi - kPi / 2;
  const double k = std::floor((d + 7 * kPi / 8) / (kPi / 2));
  d -= k * kPi / 2;
  const double ridge = (21.0 / 8 * kPi * A + 25.0 / 8 * kPi * B - (0.75 * A + 0.5 * B) * d) / (1.125 * A + 1.25 * B) +
                       k * kPi;
  EXPECT_LE(std::abs(std::remainder(nu - ridge, 4 * kPi)), 4 * kPi / p + 1e-12);
}

TEST_F(Cli, OptimizeSmallSqueezing) {
  ASSERT_EQ(run("optimize --n 20 --tau 0.05 --free nu_E,phi_MS"), 0);
  const auto t = read_csv(dir_ / "optimize.csv");
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_GT(t.column("gain_at_opt")[0], 1.0);
}

TEST_F(Cli, TatCurveExceedsOne) {
  ASSERT_EQ(run("gain-scan --n 20 --generator tat --points 4 --tau-max 1"), 0);
  const auto g = read_csv(dir_ / "gain_scan.csv").column("gain_exact");
  EXPECT_GT(*std::max_element(g.begin(), g.end()), 1.0);
}

TEST_F(Cli, SeparableCurveCappedNearTwo) {
  ASSERT_EQ(run("gain-scan --n 40 --msep --points 9"), 0);
  const auto g = read_csv(dir_ / "gain_scan.csv").column("gain_exact");
  const double best = *std::max_element(g.begin(), g.end());
  EXPECT_GT(best, 1.0);
  EXPECT_LT(best, 2.0);
}

TEST_F(Cli, ConfigPrecedence) {
  {
    std::ofstream f(dir_ / "cfg.json");
    f << R"({"n": 20, "tau": 0.05, "lambda": [0.1, 0.2]})";
  }
  ASSERT_EQ(run("avg-gain --config " + (dir_ / "cfg.json").string() + " --n 30"), 0);
  const auto m = nlohmann::json::parse(slurp(dir_ / "avg_gain.manifest.json"));
  EXPECT_EQ(m["parameters"]["n"], 30);
  EXPECT_EQ(m["parameters"]["tau"], 0.05);
  EXPECT_EQ(read_csv(dir_ / "avg_gain.csv").rows.size(), 2u);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("no-such-command"), 2);
  EXPECT_EQ(run("gain-scan --n 0"), 2);
  EXPECT_EQ(run("gain-scan --generator xyz"), 2);
  EXPECT_EQ(run("bandwidth --resolution 8"), 2);
  {
    std::ofstream f(dir_ / "bad.json");
    f << R"({"nope": 1})";
  }
  EXPECT_EQ(run("bandwidth --config " + (dir_ / "bad.json").string()), 2);
  // compute errors: odd N for the separable reference, basis cap
  EXPECT_EQ(run("gain-scan --n 11 --msep --points 2"), 3);
  EXPECT_EQ(run("bandwidth --n 100000"), 3);
}
