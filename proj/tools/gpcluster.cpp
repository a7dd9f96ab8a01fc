// gpcluster: simulate / fit / eval / bench for GP mixture clustering.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "gpclust/datasets.hpp"
#include "gpclust/dense.hpp"
#include "gpclust/evaluation.hpp"
#include "gpclust/mixture.hpp"

using json = nlohmann::json;
using namespace gpclust;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitModel = 3;

// Apply a --config JSON file: every key must name a known option, and values
// only fill options the command line left untouched.
void apply_config(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open config file: " + path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw CLI::ValidationError("--config", std::string("invalid JSON: ") + e.what());
  }
  if (!cfg.is_object()) throw CLI::ValidationError("--config", "config root must be an object");
  for (const auto& [key, value] : cfg.items()) {
    CLI::Option* opt = nullptr;
    try {
      opt = cmd->get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw CLI::ValidationError("--config", "unknown config key: " + key);
    }
    if (opt->count() > 0) continue;  // command line wins
    std::string text = value.is_string() ? value.get<std::string>() : value.dump();
    if (value.is_array()) {
      for (const auto& v : value)
        opt->add_result(v.is_string() ? v.get<std::string>() : v.dump());
    } else {
      opt->add_result(text);
    }
    opt->run_callback();
  }
}

std::string strip_ext(const std::string& path) {
  auto slash = path.find_last_of('/');
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
  return path.substr(0, dot);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json model_to_json(const MixtureModel& model) {
  json comps = json::array();
  for (int g = 0; g < model.n_components(); ++g) {
    const auto& c = model.components[g];
    comps.push_back({{"family", family_name(c.family)},
                     {"l", c.l},
                     {"sigma", c.sigma},
                     {"nugget", c.nugget},
                     {"weight", model.weights[g]}});
  }
  return comps;
}

struct FitFlags {
  std::string data_path;
  std::string backend = "exact";
  std::string kernel = "sqexp";
  std::string out;
  int G = 2;
  int m = 0;
  int ma_window = 1;
  int max_iters = 500;
  int restarts = 5;
  int threads = 0;
  double learning_rate = 1e-2;
  double tol = 1e-6;
  double fd_step = 1e-5;
  std::string gradient = "analytic";
  std::uint64_t seed = 0;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--backend", f.backend, "exact | vecchia")
      ->check(CLI::IsMember({"exact", "vecchia"}));
  cmd->add_option("--kernel", f.kernel, "sqexp | matern12")
      ->check(CLI::IsMember({"sqexp", "matern12"}));
  cmd->add_option("--m", f.m, "conditioning-set size (vecchia backend)");
  cmd->add_option("--G", f.G, "number of clusters")->check(CLI::PositiveNumber);
  cmd->add_option("--ma", f.ma_window, "odd moving-average window applied before fitting");
  cmd->add_option("--max-iters", f.max_iters)->check(CLI::PositiveNumber);
  cmd->add_option("--restarts", f.restarts)->check(CLI::PositiveNumber);
  cmd->add_option("--learning-rate", f.learning_rate);
  cmd->add_option("--tol", f.tol);
  cmd->add_option("--gradient", f.gradient, "analytic | fd")
      ->check(CLI::IsMember({"analytic", "fd"}));
  cmd->add_option("--fd-step", f.fd_step);
  cmd->add_option("--seed", f.seed);
  cmd->add_option("--threads", f.threads, "worker cap; 0 = all cores");
}

FitConfig to_fit_config(const FitFlags& f) {
  FitConfig cfg;
  cfg.backend = f.backend == "vecchia" ? BackendKind::Vecchia : BackendKind::Exact;
  cfg.family = family_from_name(f.kernel);
  cfg.m = f.m;
  cfg.learning_rate = f.learning_rate;
  cfg.max_iters = f.max_iters;
  cfg.tol = f.tol;
  cfg.restarts = f.restarts;
  cfg.seed = f.seed;
  cfg.gradient_mode = f.gradient == "fd" ? GradientMode::CentralFD : GradientMode::Analytic;
  cfg.fd_step = f.fd_step;
  cfg.threads = f.threads;
  return cfg;
}

int run_simulate(int scenario, std::uint64_t seed, int p, int per_cluster,
                 const std::string& out) {
  auto spec = ScenarioSpec::standard(scenario, seed, p, per_cluster);
  Dataset ds = simulate_mixture(spec);
  std::string labels_path = strip_ext(out) + "_labels.csv";
  write_csv(ds, out);
  write_labels_csv(*ds.truth, ds.names, labels_path);
  std::printf("wrote %s (%d curves x %d points) and %s\n", out.c_str(), ds.n_curves(),
              ds.n_points(), labels_path.c_str());
  return 0;
}

int run_fit(const FitFlags& f) {
  Dataset ds = load_csv(f.data_path);
  if (f.ma_window > 1) ds = moving_average(ds, f.ma_window);
  FitResult r = fit(ds, f.G, to_fit_config(f));

  std::string prefix = f.out.empty() ? strip_ext(f.data_path) + "_fit" : f.out;
  json out = {{"components", model_to_json(r.model)},
              {"labels", r.labels},
              {"curves", ds.names},
              {"objective_trace", r.objective_trace},
              {"iterations", r.iterations},
              {"warnings", r.warnings},
              {"timings",
               {{"e_seconds", r.wall_times.e_seconds},
                {"m_seconds", r.wall_times.m_seconds},
                {"total_seconds", r.wall_times.total_seconds}}}};
  {
    std::ofstream js(prefix + ".json");
    if (!js) throw std::runtime_error("cannot write file: " + prefix + ".json");
    js << out.dump(2) << "\n";
  }
  write_labels_csv(r.labels, ds.names, prefix + "_labels.csv");
  std::printf("fit: %d curves, G=%d, %d iterations, loglik %.6f -> %s.json\n", ds.n_curves(),
              f.G, r.iterations, r.objective_trace.back(), prefix.c_str());
  return 0;
}

int run_eval(const std::string& a_path, const std::string& b_path) {
  auto a = load_labels_csv(a_path);
  auto b = load_labels_csv(b_path);
  if (a.size() != b.size()) {
    std::fprintf(stderr, "eval: label files differ in length (%zu vs %zu)\n", a.size(), b.size());
    return kExitUsage;
  }
  std::printf("%.6f\n", nmi(a, b));
  return 0;
}

int run_bench(int scenario, int trials, int p, const std::vector<int>& ms, std::uint64_t seed,
              int max_iters, int restarts, int threads, const std::string& out) {
  std::ofstream csv(out);
  if (!csv) throw std::runtime_error("cannot write file: " + out);
  csv << "trial,backend,m,p,iterations,seconds-per-iteration,NMI\n";

  std::vector<double> exact_spi(trials);
  std::vector<std::vector<double>> vem_spi(ms.size(), std::vector<double>(trials));
  char buf[64];
  for (int t = 0; t < trials; ++t) {
    auto spec = ScenarioSpec::standard(scenario, seed + t, p);
    Dataset ds = simulate_mixture(spec);

    auto run_one = [&](BackendKind backend, int m) {
      FitConfig cfg;
      cfg.backend = backend;
      cfg.m = m;
      cfg.max_iters = max_iters;
      cfg.restarts = restarts;
      cfg.seed = seed + t;  // matched seeds: same data and same init stream
      cfg.threads = threads;
      FitResult r = fit(ds, 2, cfg);
      double spi = r.wall_times.total_seconds / std::max(1, r.iterations);
      std::snprintf(buf, sizeof(buf), "%.6g", spi);
      csv << t + 1 << "," << (backend == BackendKind::Exact ? "exact" : "vecchia") << ","
          << (backend == BackendKind::Exact ? 0 : m) << "," << ds.n_points() << ","
          << r.iterations << "," << buf << ",";
      std::snprintf(buf, sizeof(buf), "%.6f", nmi(r.labels, *ds.truth));
      csv << buf << "\n";
      return spi;
    };

    exact_spi[t] = run_one(BackendKind::Exact, 0);
    for (std::size_t k = 0; k < ms.size(); ++k)
      vem_spi[k][t] = run_one(BackendKind::Vecchia, ms[k]);
  }
  for (std::size_t k = 0; k < ms.size(); ++k) {
    std::vector<double> ratios(trials);
    for (int t = 0; t < trials; ++t) ratios[t] = vem_spi[k][t] / exact_spi[t];
    std::printf("m=%d: median seconds-per-iteration ratio (vecchia/exact) = %.3f\n", ms[k],
                median(ratios));
  }
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-based clustering of functional data under GP mixtures"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "write a synthetic two-cluster dataset");
  int sim_scenario = 1, sim_p = 300, sim_per = 10;
  std::uint64_t sim_seed = 0;
  std::string sim_out = "simulated.csv", sim_config;
  sim->add_option("--scenario", sim_scenario, "1 (hard) or 2 (easy)")
      ->check(CLI::IsMember({1, 2}));
  sim->add_option("--seed", sim_seed);
  sim->add_option("--p", sim_p, "grid size")->check(CLI::PositiveNumber);
  sim->add_option("--per-cluster", sim_per, "curves per cluster")->check(CLI::PositiveNumber);
  sim->add_option("--out", sim_out, "output CSV path");
  sim->add_option("--config", sim_config, "JSON config file (flags take precedence)");

  // fit
  auto* fitc = app.add_subcommand("fit", "fit a GP mixture and write labels + JSON result");
  FitFlags ff;
  std::string fit_config;
  fitc->add_option("data", ff.data_path, "input dataset CSV")->required();
  add_fit_flags(fitc, ff);
  fitc->add_option("--out", ff.out, "output path prefix (default: <data>_fit)");
  fitc->add_option("--config", fit_config, "JSON config file (flags take precedence)");

  // eval
  auto* ev = app.add_subcommand("eval", "NMI between two label CSVs");
  std::string eval_a, eval_b;
  ev->add_option("labels_a", eval_a)->required();
  ev->add_option("labels_b", eval_b)->required();

  // bench
  auto* be = app.add_subcommand("bench", "matched-seed exact vs vecchia timing");
  int b_scenario = 2, b_trials = 5, b_p = 300, b_iters = 30, b_restarts = 1, b_threads = 0;
  std::uint64_t b_seed = 0;
  std::vector<int> b_ms{30};
  std::string b_out = "bench.csv", b_config;
  be->add_option("--scenario", b_scenario)->check(CLI::IsMember({1, 2}));
  be->add_option("--trials", b_trials)->check(CLI::PositiveNumber);
  be->add_option("--p", b_p)->check(CLI::PositiveNumber);
  be->add_option("--m", b_ms, "conditioning-set sizes to benchmark");
  be->add_option("--seed", b_seed);
  be->add_option("--max-iters", b_iters)->check(CLI::PositiveNumber);
  be->add_option("--restarts", b_restarts)->check(CLI::PositiveNumber);
  be->add_option("--threads", b_threads);
  be->add_option("--out", b_out, "per-trial CSV path");
  be->add_option("--config", b_config, "JSON config file (flags take precedence)");

  try {
    app.parse(argc, argv);
    if (sim->parsed() && !sim_config.empty()) apply_config(sim, sim_config);
    if (fitc->parsed() && !fit_config.empty()) apply_config(fitc, fit_config);
    if (be->parsed() && !b_config.empty()) apply_config(be, b_config);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (sim->parsed()) return run_simulate(sim_scenario, sim_seed, sim_p, sim_per, sim_out);
    if (fitc->parsed()) {
      if (ff.backend == "vecchia" && ff.m <= 0) {
        std::fprintf(stderr, "fit: --backend vecchia requires --m >= 1\n");
        return kExitUsage;
      }
      return run_fit(ff);
    }
    if (ev->parsed()) return run_eval(eval_a, eval_b);
    if (be->parsed())
      return run_bench(b_scenario, b_trials, b_p, b_ms, b_seed, b_iters, b_restarts, b_threads,
                       b_out);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const DegenerateComponentError& e) {
    std::fprintf(stderr, "model failure: %s\n", e.what());
    return kExitModel;
  } catch (const NotPositiveDefiniteError& e) {
    std::fprintf(stderr, "model failure: %s\n", e.what());
    return kExitModel;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
