#include "commands.hpp"

#include "iplpmb/errors.hpp"
#include "iplpmb/scenario_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#ifndef IPLPMB_VERSION
#define IPLPMB_VERSION "unknown"
#endif

namespace iplpmb::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string run_file(const char* prefix, int run) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03d.csv", prefix, run);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const fs::path& path) : out_(path, std::ios::binary) {
    if (!out_) {
      throw Error("cannot write " + path.string());
    }
  }
  template <typename... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cells, first = false), ...);
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

void write_run_csv(const fs::path& path, const RunRecord& run) {
  CsvWriter w(path);
  w.row("step", "gospa_va", "gospa_sp", "pos_err", "heading_err", "bias_err", "iplf_iters", "pos_std",
        "heading_std", "bias_std", "gospa_va_loc", "gospa_va_missed", "gospa_va_false", "gospa_sp_loc",
        "gospa_sp_missed", "gospa_sp_false", "measurements", "hypotheses", "bernoullis");
  constexpr double kDeg = 180.0 / std::numbers::pi;
  for (const auto& s : run.steps) {
    w.row(s.step, num(s.gospa_va.total), num(s.gospa_sp.total), num(s.pos_err), num(s.heading_err_deg),
          num(s.bias_err), num(s.iterations), num(s.ue.position_std()), num(s.ue.std[kHeadingIndex] * kDeg),
          num(s.ue.std[kBiasIndex]), num(s.gospa_va.localization), num(s.gospa_va.missed),
          num(s.gospa_va.false_targets), num(s.gospa_sp.localization), num(s.gospa_sp.missed),
          num(s.gospa_sp.false_targets), s.measurements, s.hypotheses, s.bernoullis);
  }
}

void write_timing_csv(const fs::path& path, const RunRecord& run) {
  CsvWriter w(path);
  w.row("step", "predict_ms", "update_ms", "step_ms");
  for (const auto& s : run.steps) {
    w.row(s.step, num(s.predict_ms), num(s.update_ms), num(s.step_ms));
  }
}

double final_window_mean(const std::vector<StepAggregate>& steps, double Stat::*field, Stat StepAggregate::*which,
                         std::size_t window) {
  if (steps.empty()) {
    return 0.0;
  }
  const std::size_t n = std::min(window, steps.size());
  double sum = 0.0;
  for (std::size_t i = steps.size() - n; i < steps.size(); ++i) {
    sum += (steps[i].*which).*field;
  }
  return sum / static_cast<double>(n);
}

std::vector<std::pair<std::string, double>> summary_rows(const MonteCarloResult& res, int runs) {
  const UeErrorSummary& u = res.ue;
  return {
      {"runs", runs},
      {"failed_runs", static_cast<double>(res.failed_runs)},
      {"pos_rmse", u.position_rmse},
      {"heading_rmse_deg", u.heading_rmse_deg},
      {"bias_rmse", u.bias_rmse},
      {"pos_std_filter", u.position_std},
      {"heading_std_filter_deg", u.heading_std_deg},
      {"bias_std_filter", u.bias_std},
      {"pos_std_empirical", u.position_std_empirical},
      {"heading_std_empirical_deg", u.heading_std_empirical_deg},
      {"bias_std_empirical", u.bias_std_empirical},
      {"mean_iterations", res.mean_iterations},
      {"gospa_va_initial", res.initial_gospa_va.total},
      {"gospa_sp_initial", res.initial_gospa_sp.total},
      {"gospa_va_final10", final_window_mean(res.per_step, &Stat::mean, &StepAggregate::gospa_va, 10)},
      {"gospa_sp_final10", final_window_mean(res.per_step, &Stat::mean, &StepAggregate::gospa_sp, 10)},
  };
}

std::map<std::string, double> read_metric_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw MissingManifest("missing " + path.string());
  }
  std::map<std::string, double> out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      continue;
    }
    out[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
  }
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw MissingManifest("missing " + path.string());
  }
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cells.push_back(cell);
    }
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

json read_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  std::ifstream in(p);
  if (!in) {
    throw MissingManifest("no manifest.json in " + dir.string());
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw MissingManifest("unreadable manifest " + p.string() + ": " + e.what());
  }
}

}  // namespace

std::string filter_name(Linearizer l) {
  return l == Linearizer::Posterior ? "ipl" : "ek";
}

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  ExperimentConfig config;
  try {
    if (!opts.config_path.empty()) {
      config = load_experiment_config(opts.config_path);
    }
    if (opts.seed) {
      config.scenario.seed = *opts.seed;
    }
    if (opts.gamma) {
      config.filter.gamma = *opts.gamma;
    }
    if (opts.runs < 1) {
      throw ConfigError("--runs must be >= 1");
    }
    config.validate();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  MonteCarloOptions mc;
  mc.linearizer = opts.linearizer;
  mc.runs = opts.runs;
  mc.base_seed = config.scenario.seed;
  mc.threads = opts.threads;
  const MonteCarloResult res = run_monte_carlo(config, mc);

  fs::create_directories(opts.out_dir);
  json files = {{"runs", json::array()}, {"timing", json::array()}};
  json failures = json::array();

  {
    std::ofstream cfg(opts.out_dir / "config.yaml", std::ios::binary);
    cfg << dump_experiment_config(config);
  }
  for (const auto& run : res.runs) {
    const std::string rf = run_file("run", run.run);
    const std::string tf = run_file("timing", run.run);
    write_run_csv(opts.out_dir / rf, run);
    write_timing_csv(opts.out_dir / tf, run);
    files["runs"].push_back(rf);
    files["timing"].push_back(tf);
    if (run.failed) {
      failures.push_back({{"run", run.run}, {"seed", run.seed}, {"step", run.failed_step}, {"error", run.error}});
      err << "run " << run.run << " (seed " << run.seed << ") failed at step " << run.failed_step << ": "
          << run.error << '\n';
    }
  }

  {
    CsvWriter w(opts.out_dir / "summary_steps.csv");
    w.row("step", "gospa_va_mean", "gospa_va_std", "gospa_sp_mean", "gospa_sp_std", "pos_rmse", "heading_rmse",
          "bias_rmse", "pos_std_mean", "iplf_iters_mean");
    for (const auto& a : res.per_step) {
      w.row(a.step, num(a.gospa_va.mean), num(a.gospa_va.std), num(a.gospa_sp.mean), num(a.gospa_sp.std),
            num(a.pos_rmse), num(a.heading_rmse_deg), num(a.bias_rmse), num(a.pos_std.mean),
            num(a.iterations.mean));
    }
  }
  {
    CsvWriter w(opts.out_dir / "summary.csv");
    w.row("metric", "value");
    for (const auto& [k, v] : summary_rows(res, opts.runs)) {
      w.row(k, num(v));
    }
  }
  {
    double step_sum = 0.0;
    std::size_t n = 0;
    for (const auto& run : res.runs) {
      if (run.failed) {
        continue;
      }
      for (const auto& s : run.steps) {
        step_sum += s.step_ms;
        ++n;
      }
    }
    CsvWriter w(opts.out_dir / "timing_summary.csv");
    w.row("metric", "value");
    w.row("predict_ms_mean", num(res.mean_predict_ms));
    w.row("update_ms_mean", num(res.mean_update_ms));
    w.row("step_ms_mean", num(n > 0 ? step_sum / static_cast<double>(n) : 0.0));
  }

  files["config"] = "config.yaml";
  files["summary"] = "summary.csv";
  files["summary_steps"] = "summary_steps.csv";
  files["timing_summary"] = "timing_summary.csv";
  const json manifest = {
      {"tool", "iplpmb"},
      {"version", IPLPMB_VERSION},
      {"filter", filter_name(opts.linearizer)},
      {"runs", opts.runs},
      {"seed", config.scenario.seed},
      {"gamma", config.filter.gamma},
      {"config", dump_experiment_config(config)},
      {"files", files},
      {"failed_runs", failures},
  };
  {
    std::ofstream m(opts.out_dir / "manifest.json", std::ios::binary);
    m << manifest.dump(2) << '\n';
  }

  out << filter_name(opts.linearizer) << ": " << (opts.runs - static_cast<int>(res.failed_runs)) << "/"
      << opts.runs << " runs ok, pos RMSE " << num(res.ue.position_rmse) << " m, final VA GOSPA "
      << num(final_window_mean(res.per_step, &Stat::mean, &StepAggregate::gospa_va, 10)) << " m, mean iterations "
      << num(res.mean_iterations) << '\n';
  if (res.failed_runs == res.runs.size()) {
    err << "every run diverged\n";
    return kExitDiverged;
  }
  return kExitOk;
}

void cmd_compare(const fs::path& dir_a, const fs::path& dir_b, std::ostream& out,
                 const std::optional<fs::path>& csv_path) {
  const json ma = read_manifest(dir_a);
  const json mb = read_manifest(dir_b);
  auto summary_a = read_metric_csv(dir_a / ma.at("files").at("summary").get<std::string>());
  auto summary_b = read_metric_csv(dir_b / mb.at("files").at("summary").get<std::string>());
  for (const auto& [k, v] : read_metric_csv(dir_a / ma.at("files").at("timing_summary").get<std::string>())) {
    summary_a[k] = v;
  }
  for (const auto& [k, v] : read_metric_csv(dir_b / mb.at("files").at("timing_summary").get<std::string>())) {
    summary_b[k] = v;
  }
  const Table steps_a = read_table(dir_a / ma.at("files").at("summary_steps").get<std::string>());
  const Table steps_b = read_table(dir_b / mb.at("files").at("summary_steps").get<std::string>());

  const std::string name_a = "A(" + ma.at("filter").get<std::string>() + ")";
  const std::string name_b = "B(" + mb.at("filter").get<std::string>() + ")";

  std::ostringstream csv;
  csv << "section,key,a,b,delta\n";
  out << std::left << std::setw(28) << "metric" << std::right << std::setw(14) << name_a << std::setw(14) << name_b
      << std::setw(14) << "B-A" << '\n';
  for (const auto& [k, va] : summary_a) {
    const auto it = summary_b.find(k);
    if (it == summary_b.end()) {
      continue;
    }
    const double vb = it->second;
    out << std::left << std::setw(28) << k << std::right << std::setw(14) << num(va) << std::setw(14) << num(vb)
        << std::setw(14) << num(vb - va) << '\n';
    csv << "summary," << k << ',' << num(va) << ',' << num(vb) << ',' << num(vb - va) << '\n';
  }

  auto column = [](const Table& t, const std::string& name) -> std::ptrdiff_t {
    for (std::size_t i = 0; i < t.header.size(); ++i) {
      if (t.header[i] == name) {
        return static_cast<std::ptrdiff_t>(i);
      }
    }
    throw MissingManifest("summary_steps.csv lacks column " + name);
  };
  out << '\n' << std::left << std::setw(8) << "step";
  const std::vector<std::string> curves{"gospa_va_mean", "gospa_sp_mean", "pos_rmse"};
  for (const auto& c : curves) {
    out << std::right << std::setw(16) << (c + ".A") << std::setw(16) << (c + ".B");
  }
  out << '\n';
  const std::size_t n = std::min(steps_a.rows.size(), steps_b.rows.size());
  for (std::size_t r = 0; r < n; ++r) {
    out << std::left << std::setw(8) << steps_a.rows[r][0];
    for (const auto& c : curves) {
      const double a = std::stod(steps_a.rows[r][static_cast<std::size_t>(column(steps_a, c))]);
      const double b = std::stod(steps_b.rows[r][static_cast<std::size_t>(column(steps_b, c))]);
      out << std::right << std::setw(16) << num(a) << std::setw(16) << num(b);
      csv << c << ',' << steps_a.rows[r][0] << ',' << num(a) << ',' << num(b) << ',' << num(b - a) << '\n';
    }
    out << '\n';
  }
  if (csv_path) {
    std::ofstream f(*csv_path, std::ios::binary);
    f << csv.str();
  }
}

Fig2Report fig2_demo() {
  const ModelFunction h{[](const Vector& x) { return Vector::Constant(1, -0.1 * x[0] * x[0] + 3.0); },
                        CircularMask{false}};
  const Matrix r = Matrix::Constant(1, 1, 0.1);
  const Vector z = Vector::Constant(1, 0.5);

  Fig2Report rep;
  rep.prior = GaussianDensity(Vector::Constant(1, 3.0), Matrix::Constant(1, 1, 4.0));
  rep.ekf = ekf_update(h, rep.prior, z, r);

  const IplfOptions opts;
  GaussianDensity current = rep.prior;
  for (int i = 0; i < opts.max_iterations; ++i) {
    current = kf_update(rep.prior, slr(h, current).first, z, r, h.circular);
    rep.iplf_iterates.push_back(current);
  }
  rep.iplf = iplf(h, rep.prior, z, r, opts);

  // Exact posterior on a grid.
  constexpr double kLo = -30.0;
  constexpr double kStep = 1e-3;
  constexpr int kN = 60001;
  std::vector<double> logp(kN);
  double hi = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kN; ++i) {
    const double x = kLo + i * kStep;
    const double hx = -0.1 * x * x + 3.0;
    logp[static_cast<std::size_t>(i)] = -0.5 * (x - 3.0) * (x - 3.0) / 4.0 - 0.5 * (0.5 - hx) * (0.5 - hx) / 0.1;
    hi = std::max(hi, logp[static_cast<std::size_t>(i)]);
  }
  double mass = 0.0;
  for (double& lp : logp) {
    lp -= hi;
    mass += std::exp(lp) * kStep;
  }
  const double log_mass = std::log(mass);
  double m1 = 0.0;
  double m2 = 0.0;
  for (int i = 0; i < kN; ++i) {
    const double x = kLo + i * kStep;
    const double p = std::exp(logp[static_cast<std::size_t>(i)] - log_mass);
    m1 += p * x * kStep;
    m2 += p * x * x * kStep;
  }
  rep.grid_mean = m1;
  rep.grid_var = m2 - m1 * m1;

  auto kl_to = [&](const GaussianDensity& q) {
    const double mq = q.mean()[0];
    const double vq = q.cov()(0, 0);
    double kl = 0.0;
    for (int i = 0; i < kN; ++i) {
      const double x = kLo + i * kStep;
      const double lp = logp[static_cast<std::size_t>(i)] - log_mass;
      const double lq = -0.5 * std::log(2.0 * std::numbers::pi * vq) - 0.5 * (x - mq) * (x - mq) / vq;
      kl += std::exp(lp) * (lp - lq) * kStep;
    }
    return kl;
  };
  rep.kl_ekf = kl_to(rep.ekf);
  rep.kl_iplf = kl_to(rep.iplf.posterior);
  return rep;
}

int cmd_fig2(std::ostream& out) {
  const Fig2Report rep = fig2_demo();
  auto line = [&](const std::string& label, const GaussianDensity& g) {
    out << std::left << std::setw(16) << label << " mean " << num(g.mean()[0]) << "  var " << num(g.cov()(0, 0))
        << '\n';
  };
  out << "h(x) = -0.1 x^2 + 3, R = 0.1, prior N(3, 4), z = 0.5\n";
  line("prior", rep.prior);
  line("EKF", rep.ekf);
  for (std::size_t i = 0; i < rep.iplf_iterates.size() && i < static_cast<std::size_t>(rep.iplf.iterations); ++i) {
    line("IPLF iter " + std::to_string(i + 1), rep.iplf_iterates[i]);
  }
  line("IPLF final", rep.iplf.posterior);
  out << std::left << std::setw(16) << "grid truth" << " mean " << num(rep.grid_mean) << "  var "
      << num(rep.grid_var) << '\n';
  out << "KL(true || EKF)  = " << num(rep.kl_ekf) << '\n';
  out << "KL(true || IPLF) = " << num(rep.kl_iplf) << '\n';
  const bool ok = rep.kl_iplf < rep.kl_ekf;
  out << (ok ? "IPLF is closer to the true posterior\n" : "IPLF is NOT closer to the true posterior\n");
  return ok ? kExitOk : kExitError;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"IPL-PMB / EK-PMB 5G SLAM simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(IPLPMB_VERSION));

  RunOptions run;
  std::string filter = "ipl";
  std::uint64_t seed = 0;
  int gamma = 0;
  run.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  CLI::App* run_cmd = app.add_subcommand("run", "run a Monte Carlo experiment");
  run_cmd->add_option("--config", run.config_path, "YAML config (defaults when omitted)");
  run_cmd->add_option("--filter", filter, "linearization: ek or ipl")->check(CLI::IsMember({"ek", "ipl"}));
  run_cmd->add_option("--runs", run.runs, "number of Monte Carlo runs")->check(CLI::PositiveNumber);
  CLI::Option* seed_opt = run_cmd->add_option("--seed", seed, "base seed, run r uses seed + r");
  CLI::Option* gamma_opt = run_cmd->add_option("--gamma", gamma, "number of best associations kept");
  run_cmd->add_option("--out", run.out_dir, "output directory")->required();
  run_cmd->add_option("--threads", run.threads, "worker threads")->check(CLI::PositiveNumber);

  std::string dir_a;
  std::string dir_b;
  std::string compare_csv;
  CLI::App* cmp = app.add_subcommand("compare", "compare two run directories");
  cmp->add_option("a", dir_a, "first run directory")->required();
  cmp->add_option("b", dir_b, "second run directory")->required();
  cmp->add_option("--csv", compare_csv, "also write the comparison as CSV");

  CLI::App* fig2 = app.add_subcommand("fig2", "scalar EKF vs IPLF example");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run_cmd) {
      run.linearizer = filter == "ek" ? Linearizer::Prior : Linearizer::Posterior;
      if (*seed_opt) {
        run.seed = seed;
      }
      if (*gamma_opt) {
        run.gamma = gamma;
      }
      return cmd_run(run, out, err);
    }
    if (*cmp) {
      cmd_compare(dir_a, dir_b, out,
                  compare_csv.empty() ? std::nullopt : std::optional<fs::path>(compare_csv));
      return kExitOk;
    }
    if (*fig2) {
      return cmd_fig2(out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

}  // namespace iplpmb::cli
