// Batch driver: one subcommand per experiment, CSV out plus a JSON manifest per CSV.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "sqswap/sqswap.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace sqswap;

namespace {

constexpr const char* kVersion = "1.0.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- formatting

template <class T>
std::string fmt(const T& v) {
  if constexpr (std::is_floating_point_v<T>) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
    return {buf, r.ptr};
  } else if constexpr (std::is_integral_v<T>) {
    return std::to_string(v);
  } else {
    return std::string(v);
  }
}

double db(double g) { return 10 * std::log10(g); }

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : cols_(header.size()) { line(header); }

  template <class... T>
  void row(const T&... v) {
    if (sizeof...(v) != cols_) throw std::logic_error("csv row width");
    std::vector<std::string> cells{fmt(v)...};
    line(cells);
  }
  const std::string& text() const { return text_; }

 private:
  void line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }
  std::size_t cols_;
  std::string text_;
};

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) out += hex[md[i] >> 4], out += hex[md[i] & 15];
  return out;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

// ---------------------------------------------------------------- settings

struct Settings {
  int n = 100;
  double tau = 0.0;
  double tau_rel = std::numeric_limits<double>::quiet_NaN();
  double nu = 11 * kPi / 4;
  double theta_ms = kPi / 2;
  double phi_ms = -kPi / 8;
  std::string generator = "oat";
  bool msep = false;
  double tau_a = 0.0;
  double tau_b = 0.0;
  std::size_t shots = 100000;
  std::uint64_t seed = 42;
  int threads = 0;
  std::string out = ".";
  int points = 40;
  double tau_max = 2.0;  // gain-scan range, units of tau_ref
  bool fixed = false;    // gain-scan: keep --nu/--phi-ms instead of optimizing
  int grid = 24;
  int resolution = 64;
  double sigma = 0.0;
  std::vector<double> lambda{0.1};
  int nodes = 101;
  bool coherent = false;
  std::vector<double> times{1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 0.05};
  double gamma = 1.0;
  double t_tot = 1.0;
  double omega0 = 1.0;
  std::vector<std::string> free{"nu_E", "phi_MS"};
  std::size_t budget = 20000;
  int bins = 64;
  bool records = false;
};

/// Options registered with CLI11 plus JSON setters keyed by flag name.
class Registry {
 public:
  explicit Registry(CLI::App& app) : app_(app) {}

  template <class T>
  void option(const std::string& name, T& var, const std::string& desc) {
    auto* o = app_.add_option("--" + name, var, desc)->capture_default_str();
    if constexpr (!std::is_same_v<T, std::string> && std::ranges::range<T>) o->delimiter(',');
    opts_[name] = o;
    setters_[name] = [&var](const json& j) { var = j.get<T>(); };
  }
  void flag(const std::string& name, bool& var, const std::string& desc) {
    opts_[name] = app_.add_flag("--" + name, var, desc);
    setters_[name] = [&var](const json& j) { var = j.get<bool>(); };
  }

  /// Fills every option not given on the command line from the config file.
  void apply_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot open config file " + path);
    json j;
    try {
      j = json::parse(f);
    } catch (const json::exception& e) {
      throw UsageError(std::string("config file: ") + e.what());
    }
    if (!j.is_object()) throw UsageError("config file must hold a flat JSON object");
    for (const auto& [key, value] : j.items()) {
      auto it = setters_.find(key);
      if (it == setters_.end()) throw UsageError("config file: unknown key '" + key + "'");
      if (opts_.at(key)->count() > 0) continue;
      try {
        it->second(value);
      } catch (const json::exception&) {
        throw UsageError("config file: bad value for '" + key + "'");
      }
    }
  }

 private:
  CLI::App& app_;
  std::map<std::string, CLI::Option*> opts_;
  std::map<std::string, std::function<void(const json&)>> setters_;
};

json settings_json(const Settings& s) {
  return json{{"n", s.n},
              {"tau", s.tau},
              {"tau_rel", s.tau_rel},
              {"nu", s.nu},
              {"theta_ms", s.theta_ms},
              {"phi_ms", s.phi_ms},
              {"generator", s.generator},
              {"msep", s.msep},
              {"tau_a", s.tau_a},
              {"tau_b", s.tau_b},
              {"shots", s.shots},
              {"seed", s.seed},
              {"points", s.points},
              {"tau_max", s.tau_max},
              {"fixed", s.fixed},
              {"grid", s.grid},
              {"resolution", s.resolution},
              {"sigma", s.sigma},
              {"lambda", s.lambda},
              {"nodes", s.nodes},
              {"coherent", s.coherent},
              {"times", s.times},
              {"gamma", s.gamma},
              {"t_tot", s.t_tot},
              {"omega0", s.omega0},
              {"free", s.free},
              {"budget", s.budget},
              {"bins", s.bins},
              {"records", s.records}};
}

void emit(const Settings& s, const std::string& cmd, const std::string& stem, const Csv& csv) {
  const fs::path dir(s.out);
  fs::create_directories(dir);
  const fs::path csv_path = dir / (stem + ".csv");
  write_file(csv_path, csv.text());
  json m;
  m["subcommand"] = cmd;
  m["version"] = kVersion;
  m["seed"] = s.seed;
  m["parameters"] = settings_json(s);
  m["outputs"] = json::array({json{{"file", csv_path.filename().string()}, {"sha256", sha256_hex(csv.text())}}});
  write_file(dir / (stem + ".manifest.json"), m.dump(2) + "\n");
  std::cout << csv_path.string() << "\n";
}

Generator generator_of(const Settings& s) {
  try {
    return parse_generator(s.generator);
  } catch (const Error&) {
    throw UsageError("--generator must be oat or tat");
  }
}

ProtocolConfig protocol_of(const Settings& s) {
  ProtocolConfig c;
  c.n_atoms = s.n;
  c.generator = generator_of(s);
  c.tau_E = std::isnan(s.tau_rel) ? s.tau : s.tau_rel * tau_ref(s.n, c.generator);
  c.nu_E = s.nu;
  c.theta_MS = s.theta_ms;
  c.phi_MS = s.phi_ms;
  c.tau_S_A = s.tau_a;
  c.tau_S_B = s.tau_b;
  return c;
}

void check(bool ok, const std::string& msg) {
  if (!ok) throw UsageError(msg);
}

void validate(const Settings& s) {
  check(s.n >= 1, "--n must be >= 1");
  check(s.points >= 1, "--points must be >= 1");
  check(s.shots >= 1, "--shots must be >= 1");
  check(s.threads >= 0, "--threads must be >= 0");
  check(s.sigma >= 0, "--sigma must be >= 0");
  check(s.tau_max > 0, "--tau-max must be > 0");
  check(s.grid >= 2, "--grid must be >= 2");
  check(s.resolution >= 32, "--resolution must be >= 32");
  check(s.bins >= 1, "--bins must be >= 1");
  check(!s.times.empty(), "--times must not be empty");
  for (double l : s.lambda) check(l > 0 && l <= kPi / 2, "--lambda must lie in (0, pi/2]");
  for (double t : s.times) check(t > 0, "--times must be > 0");
  generator_of(s);
}

std::vector<Param> free_params(const Settings& s) {
  static const std::map<std::string, Param> names = {
      {"nu_E", Param::nu_E}, {"phi_MS", Param::phi_MS}, {"theta_MS", Param::theta_MS}, {"tau_E", Param::tau_E}};
  std::vector<Param> out;
  for (const auto& f : s.free) {
    auto it = names.find(f);
    check(it != names.end(), "--free accepts nu_E, phi_MS, theta_MS, tau_E");
    out.push_back(it->second);
  }
  return out;
}

// ---------------------------------------------------------------- subcommands

void cmd_gain_scan(const Settings& s) {
  const Generator g = generator_of(s);
  const double tref = tau_ref(s.n, g);
  Csv csv({"tau_over_tauref", "tau", "gain_exact", "gain_exact_db", "gain_analytic", "gain_analytic_db", "bandwidth",
           "nu", "phi_ms"});
  std::unique_ptr<ProtocolEvaluator> ev;
  if (!s.msep && !s.fixed) ev = std::make_unique<ProtocolEvaluator>(s.n, g);
  for (int i = 0; i < s.points; ++i) {
    const double f = s.points == 1 ? 0.0 : s.tau_max * i / (s.points - 1);
    ProtocolConfig c = protocol_of(s);
    c.tau_E = f * tref;
    double gain = 0, bw = 0;
    if (s.msep) {
      c.tau_S_A = c.tau_E;
      c.tau_S_B = s.tau_b;
      c.theta_MS = 0;
      c.nu_E = best_pair_rotation(PairEnsemble(s.n, SplitStatistics::binomial, g, c.tau_S_A));
      const auto sep = run_separable_detail(c);
      gain = sep.report.gain;
      const double sql = sep.report.sql;
      bw = bandwidth_of([&](double a, double b) { return sql / (sep.A.phase_variance(a) + sep.B.phase_variance(b)); },
                        s.resolution);
    } else {
      if (!s.fixed && c.tau_E > 0) {
        const auto o = optimize_protocol(c, {Param::nu_E, Param::phi_MS}, {s.budget, s.grid, 1}, ev.get());
        c.nu_E = o.nu_opt, c.phi_MS = o.phi_ms_opt;
      }
      const auto m = InputMoments::from_state(prepare_input_state(c));
      gain = m.gain(kPi / 2, kPi / 2);
      bw = bandwidth(m, s.resolution);
    }
    const double ga =
        g == Generator::oat ? gain_analytic(s.n, r_from_tau(s.n, c.tau_E)) : std::numeric_limits<double>::quiet_NaN();
    csv.row(f, c.tau_E, gain, db(gain), ga, db(ga), bw, c.nu_E, c.phi_MS);
  }
  emit(s, "gain-scan", "gain_scan", csv);
}

void cmd_ms_scan(const Settings& s) {
  const ProtocolConfig c = protocol_of(s);
  const SwapScanner scan(build_basis(s.n), c.generator, c.tau_E);
  const int p = s.points;
  std::vector<double> gains(static_cast<std::size_t>(p) * p);
  parallel_for(gains.size(), [&](std::size_t k) {
    const double nu = 4 * kPi * static_cast<double>(k / p) / p;
    const double phi = -kPi / 2 + kPi * static_cast<double>(k % p) / p;
    try {
      gains[k] = scan.midfringe_gain(nu, c.theta_MS, phi);
    } catch (const DegenerateWorkingPoint&) {
      gains[k] = 0.0;
    }
  });
  Csv csv({"nu", "phi_ms", "gain", "gain_db"});
  for (std::size_t k = 0; k < gains.size(); ++k) {
    const double nu = 4 * kPi * static_cast<double>(k / p) / p;
    const double phi = -kPi / 2 + kPi * static_cast<double>(k % p) / p;
    csv.row(nu, phi, gains[k], db(gains[k]));
  }
  emit(s, "ms-scan", "ms_scan", csv);
}

void cmd_bandwidth(const Settings& s) {
  const ProtocolConfig c = protocol_of(s);
  const auto m = InputMoments::from_state(prepare_input_state(c));
  const double g = m.gain(kPi / 2, kPi / 2);
  Csv csv({"n", "tau", "nu", "theta_ms", "phi_ms", "resolution", "bandwidth", "gain_midfringe", "gain_midfringe_db"});
  csv.row(s.n, c.tau_E, c.nu_E, c.theta_MS, c.phi_MS, s.resolution, bandwidth(m, s.resolution), g, db(g));
  emit(s, "bandwidth", "bandwidth", csv);
}

void cmd_avg_gain(const Settings& s) {
  const ProtocolConfig c = protocol_of(s);
  const auto m = InputMoments::from_state(prepare_input_state(c));
  const double g = m.gain(kPi / 2, kPi / 2);
  Csv csv({"lambda", "average_gain", "average_gain_db", "gain_midfringe"});
  for (double l : s.lambda) {
    const double a = average_gain(m, l, s.nodes);
    csv.row(l, a, db(a), g);
  }
  emit(s, "avg-gain", "avg_gain", csv);
}

void cmd_estimate(const Settings& s) {
  const ProtocolConfig c = protocol_of(s);
  NoiseConfig nc;
  nc.sigma_pn = s.sigma, nc.shots = s.shots, nc.seed = s.seed;
  DifferentialOptions o;
  o.histogram_bins = s.bins;
  o.keep_records = s.records;
  const auto r = differential_experiment(prepare_input_state(c), nc, o);

  Csv sum({"n", "tau", "sigma_pn", "shots", "seed", "var_diff", "mean_diff", "var_A", "var_B", "cov_AB", "var_sum",
           "sql", "gain", "gain_db"});
  const double sql = sql_variance(s.n);
  sum.row(s.n, c.tau_E, s.sigma, s.shots, s.seed, r.var_diff, r.mean_diff,
          r.stats.var_a(), r.stats.var_b(), r.stats.cov(), r.stats.var_sum(), sql, sql / r.var_diff,
          db(sql / r.var_diff));
  emit(s, "estimate", "estimate", sum);

  const auto& h = r.histogram;
  const double w = (h.hi - h.lo) / h.bins;
  Csv hist({"i_A", "i_B", "theta_A_lo", "theta_A_hi", "theta_B_lo", "theta_B_hi", "count"});
  for (int i = 0; i < h.bins; ++i) {
    for (int j = 0; j < h.bins; ++j) {
      hist.row(i, j, h.lo + i * w, h.lo + (i + 1) * w, h.lo + j * w, h.lo + (j + 1) * w,
               h.counts[static_cast<std::size_t>(i) * h.bins + j]);
    }
  }
  emit(s, "estimate", "estimate_histogram", hist);

  if (s.records) {
    Csv rec({"N_a", "N_b", "N_c", "N_d", "mu_A", "mu_B", "theta_est_A", "theta_est_B"});
    for (const auto& e : r.records) {
      rec.row(e.outcome[0], e.outcome[1], e.outcome[2], e.outcome[3], e.mu_A, e.mu_B, e.theta_est_A, e.theta_est_B);
    }
    emit(s, "estimate", "estimate_records", rec);
  }
}

void cmd_clock(const Settings& s) {
  ProtocolConfig c = protocol_of(s);
  if (s.coherent) c.tau_E = 0;
  NoiseConfig nc;
  nc.shots = s.shots, nc.seed = s.seed, nc.gamma_LO = s.gamma, nc.T_tot = s.t_tot, nc.omega_0 = s.omega0;
  nc.omega_A = nc.omega_B = s.omega0;
  const auto pts = clock_experiment(c, nc, s.times);
  Csv csv({"T", "cycles", "var_phase_diff", "var_fractional", "sql_reference", "ratio_to_sql", "clock_constant"});
  const double n15 = std::pow(static_cast<double>(s.n), 1.5);
  for (const auto& p : pts) {
    csv.row(p.T, p.cycles, p.var_phase_diff, p.var_fractional, p.sql_reference, p.var_fractional / p.sql_reference,
            p.var_fractional * s.omega0 * s.omega0 * n15 * p.T * s.t_tot);
  }
  emit(s, "clock", "clock", csv);
}

void cmd_optimize(const Settings& s) {
  const ProtocolConfig c = protocol_of(s);
  const auto r = optimize_protocol(c, free_params(s), {s.budget, s.grid, 3});
  Csv csv({"nu_opt", "phi_ms_opt", "theta_ms_opt", "tau_opt", "tau_opt_over_tauref", "gain_at_opt", "gain_at_opt_db",
           "method", "evaluations", "budget_exhausted", "phi_period_residual"});
  csv.row(r.nu_opt, r.phi_ms_opt, r.theta_ms_opt, r.tau_opt, r.tau_opt / tau_ref(s.n, c.generator), r.gain_at_opt,
          db(r.gain_at_opt), to_string(r.method), r.evaluations, r.budget_exhausted ? 1 : 0, r.phi_period_residual);
  emit(s, "optimize", "optimize", csv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mode-swapped squeezing for distributed sensing: batch experiments"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Settings s;
  Registry reg(app);
  reg.option("n", s.n, "Atom number");
  reg.option("tau", s.tau, "Squeezing strength tau_E (absolute)");
  reg.option("tau-rel", s.tau_rel, "Squeezing strength in units of tau_ref (overrides --tau)");
  reg.option("nu", s.nu, "Rotation nu_E after squeezing");
  reg.option("theta-ms", s.theta_ms, "Mode-swap strength");
  reg.option("phi-ms", s.phi_ms, "Mode-swap phase");
  reg.option("generator", s.generator, "Squeezing generator: oat or tat");
  reg.flag("msep", s.msep, "gain-scan: mode-separable reference (tau_S^A = tau, tau_S^B = --tau-b)");
  reg.option("tau-a", s.tau_a, "Separable squeezing in interferometer A");
  reg.option("tau-b", s.tau_b, "Separable squeezing in interferometer B");
  reg.option("shots", s.shots, "Monte Carlo shots");
  reg.option("seed", s.seed, "Random seed");
  reg.option("threads", s.threads, "Worker cap (0 = hardware)");
  reg.option("out", s.out, "Output directory");
  reg.option("points", s.points, "Scan points (gain-scan rows, ms-scan points per axis)");
  reg.option("tau-max", s.tau_max, "gain-scan range in units of tau_ref");
  reg.flag("fixed", s.fixed, "gain-scan: keep --nu/--phi-ms instead of optimizing per point");
  reg.option("grid", s.grid, "Optimizer grid points per free parameter");
  reg.option("resolution", s.resolution, "Bandwidth grid resolution");
  reg.option("sigma", s.sigma, "Common phase-noise width (rad)");
  reg.option("lambda", s.lambda, "avg-gain half-widths (rad)");
  reg.option("nodes", s.nodes, "avg-gain Simpson nodes");
  reg.flag("coherent", s.coherent, "clock: unsqueezed reference (tau = 0)");
  reg.option("times", s.times, "clock: Ramsey times");
  reg.option("gamma", s.gamma, "clock: LO decoherence rate");
  reg.option("t-tot", s.t_tot, "clock: total interrogation time");
  reg.option("omega0", s.omega0, "clock: reference angular frequency");
  reg.option("free", s.free, "optimize: free parameters (nu_E phi_MS theta_MS tau_E)");
  reg.option("budget", s.budget, "optimize: evaluation budget");
  reg.option("bins", s.bins, "estimate: histogram bins per axis");
  reg.flag("records", s.records, "estimate: also write per-shot records");
  std::string config;
  app.add_option("--config", config, "Flat JSON file with flag values (flags take precedence)");

  std::map<std::string, std::function<void(const Settings&)>> cmds = {
      {"gain-scan", cmd_gain_scan}, {"ms-scan", cmd_ms_scan},   {"bandwidth", cmd_bandwidth},
      {"avg-gain", cmd_avg_gain},   {"estimate", cmd_estimate}, {"clock", cmd_clock},
      {"optimize", cmd_optimize}};
  const std::map<std::string, std::string> help = {
      {"gain-scan", "Gain and bandwidth versus squeezing strength"},
      {"ms-scan", "Mid-fringe gain over (nu_E, phi_MS)"},
      {"bandwidth", "Fraction of (theta_A, theta_B) with gain above 1"},
      {"avg-gain", "Gain averaged over a common phase window"},
      {"estimate", "Monte Carlo differential phase estimation"},
      {"clock", "Differential clock comparison versus Ramsey time"},
      {"optimize", "Exact-protocol parameter search"}};
  for (const auto& [name, fn] : cmds) app.add_subcommand(name, help.at(name));

  try {
    app.parse(argc, argv);
    if (!config.empty()) reg.apply_config(config);
    validate(s);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  set_max_threads(s.threads);
  try {
    for (const auto* sub : app.get_subcommands()) cmds.at(sub->get_name())(s);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
