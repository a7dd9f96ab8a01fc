// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Optional argv[1] points at the repository's data directory.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "gpclust/datasets.hpp"
#include "gpclust/dense.hpp"
#include "gpclust/evaluation.hpp"
#include "gpclust/mixture.hpp"
#include "gpclust/rng.hpp"
#include "gpclust/vecchia.hpp"

using namespace gpclust;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int idx, const char* name, bool pass, const std::string& detail) {
  std::printf("criterion %d (%s): %s  [%s]\n", idx, name, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

KernelParams random_params(SplitMix64& rng) {
  KernelParams k;
  k.family = (rng.next() & 1) ? KernelFamily::SquaredExponential : KernelFamily::Matern12;
  k.l = 0.1 + 0.6 * rng.uniform01();
  k.sigma = 0.2 + rng.uniform01();
  k.nugget = KernelParams::default_nugget(k.sigma);
  return k;
}

Eigen::VectorXd reorder(const Eigen::VectorXd& y, const std::vector<int>& order) {
  Eigen::VectorXd out(y.size());
  for (int i = 0; i < y.size(); ++i) out(i) = y(order[i]);
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

char buf[256];

// 1. Vecchia log-likelihood is exact at m = p-1.
void criterion1() {
  auto t0 = Clock::now();
  SplitMix64 rng(101);
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    int p = 10 + static_cast<int>(rng.next() % 91);  // 10..100
    Grid g = Grid::uniform(p);
    KernelParams k = random_params(rng);
    Eigen::VectorXd y = sample_gp(k, g, derive_seed(900, inst));
    auto plan = build_plan(g, p - 1);
    double exact = gaussian_loglik_exact(y, build_covariance(k, g));
    double vecc = vecchia_loglik(reorder(y, plan.order),
                                 vecchia_inverse_cholesky(k, g, plan));
    worst = std::max(worst, std::abs(vecc - exact) / std::abs(exact));
  }
  double secs = seconds_since(t0);
  std::snprintf(buf, sizeof(buf), "worst rel err %.3g (<= 1e-8), %.2f s (< 10 s)", worst, secs);
  report(1, "exactness at m=p-1", worst <= 1e-8 && secs < 10.0, buf);
}

// 2. KL-vs-m curve is non-increasing and vanishes at m = p-1.
void criterion2() {
  auto t0 = Clock::now();
  KernelParams k;
  k.family = KernelFamily::SquaredExponential;
  k.l = 0.2;
  k.sigma = 0.2;
  k.nugget = KernelParams::default_nugget(k.sigma);
  Grid g = Grid::uniform(100);
  auto kl = vecchia_kl_curve(k, g, {1, 5, 10, 20, 50, 99});
  bool monotone = true;
  for (std::size_t i = 1; i < kl.size(); ++i)
    monotone = monotone && kl[i].second <= kl[i - 1].second + 1e-9;
  double tail = kl.back().second;
  double secs = seconds_since(t0);
  std::snprintf(buf, sizeof(buf), "KL(1)=%.3g .. KL(99)=%.3g (<= 1e-8), monotone=%d, %.2f s (< 30 s)",
                kl.front().second, tail, monotone ? 1 : 0, secs);
  report(2, "KL monotone in m", monotone && tail <= 1e-8 && secs < 30.0, buf);
}

// 3. Exact-backend analytic gradients match central finite differences.
void criterion3() {
  auto t0 = Clock::now();
  SplitMix64 rng(303);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    int p = 3 + static_cast<int>(rng.next() % 18);  // 3..20
    Grid g = Grid::uniform(p);
    KernelParams k = random_params(rng);
    k.nugget = 1e-6;  // keep FD well above roundoff
    Eigen::VectorXd y = sample_gp(k, g, derive_seed(901, inst));
    auto grad = loglik_gradient_exact(y, k, g);
    auto obj = [&](double l, double s) {
      KernelParams q = k;
      q.l = l;
      q.sigma = s;
      return gaussian_loglik_exact(y, build_covariance(q, g));
    };
    double hl = 1e-5 * k.l, hs = 1e-5 * k.sigma;
    double fdl = (obj(k.l + hl, k.sigma) - obj(k.l - hl, k.sigma)) / (2 * hl);
    double fds = (obj(k.l, k.sigma + hs) - obj(k.l, k.sigma - hs)) / (2 * hs);
    worst = std::max(worst, std::abs(grad.first - fdl) / std::max(1.0, std::abs(fdl)));
    worst = std::max(worst, std::abs(grad.second - fds) / std::max(1.0, std::abs(fds)));
  }
  double secs = seconds_since(t0);
  std::snprintf(buf, sizeof(buf), "worst rel err %.3g (<= 1e-4), %.2f s (< 30 s)", worst, secs);
  report(3, "analytic vs FD gradients", worst <= 1e-4 && secs < 30.0, buf);
}

std::vector<double> scenario_nmis(int scenario, BackendKind backend, int m, int trials,
                                  std::vector<double>* spi = nullptr) {
  std::vector<double> out;
  for (int t = 0; t < trials; ++t) {
    Dataset ds = simulate_mixture(ScenarioSpec::standard(scenario, 1000 + t));
    FitConfig cfg;
    cfg.backend = backend;
    cfg.m = m;
    cfg.seed = 1000 + t;
    cfg.restarts = 2;
    cfg.max_iters = 120;
    FitResult r = fit(ds, 2, cfg);
    out.push_back(nmi(r.labels, *ds.truth));
    if (spi) spi->push_back(r.wall_times.total_seconds / std::max(1, r.iterations));
  }
  return out;
}

// 4. Scenario 2: VEM m=30 clusters about as well as naive EM.
void criterion4() {
  auto t0 = Clock::now();
  double naive = median(scenario_nmis(2, BackendKind::Exact, 0, 25));
  double vem = median(scenario_nmis(2, BackendKind::Vecchia, 30, 25));
  double secs = seconds_since(t0);
  std::snprintf(buf, sizeof(buf),
                "naive median NMI %.3f (>= 0.8), VEM m=30 median NMI %.3f (>= naive - 0.10), %.0f s",
                naive, vem, secs);
  report(4, "scenario 2 accuracy", naive >= 0.8 && vem >= naive - 0.10, buf);
}

// 5. Scenario 1: VEM accuracy does not deteriorate as m grows.
void criterion5() {
  auto t0 = Clock::now();
  double lo = median(scenario_nmis(1, BackendKind::Vecchia, 15, 25));
  double hi = median(scenario_nmis(1, BackendKind::Vecchia, 60, 25));
  double secs = seconds_since(t0);
  std::snprintf(buf, sizeof(buf), "median NMI m=15: %.3f, m=60: %.3f (>= m=15 - 0.05), %.0f s",
                lo, hi, secs);
  report(5, "scenario 1 m-trend", hi >= lo - 0.05, buf);
}

// 6. Per-iteration wall-time ratio of VEM to naive EM.
void criterion6() {
  auto run_pair = [](int p, int m, int trials) {
    std::vector<double> exact_spi, vem_spi, ratios;
    for (int t = 0; t < trials; ++t) {
      Dataset ds = simulate_mixture(ScenarioSpec::standard(2, 2000 + t, p));
      for (int pass = 0; pass < 2; ++pass) {
        FitConfig cfg;
        cfg.backend = pass ? BackendKind::Vecchia : BackendKind::Exact;
        cfg.m = pass ? m : 0;
        cfg.seed = 2000 + t;  // matched seeds across backends
        cfg.restarts = 1;
        cfg.max_iters = 25;
        FitResult r = fit(ds, 2, cfg);
        (pass ? vem_spi : exact_spi)
            .push_back(r.wall_times.total_seconds / std::max(1, r.iterations));
      }
      ratios.push_back(vem_spi.back() / exact_spi.back());
    }
    return median(ratios);
  };
  double r300 = run_pair(300, 30, 3);
  double r700 = run_pair(700, 70, 3);
  std::snprintf(buf, sizeof(buf), "per-iteration ratio p=300/m=30: %.3f (<= 0.6), p=700/m=70: %.3f (<= 0.3)",
                r300, r700);
  report(6, "runtime ratio", r300 <= 0.6 && r700 <= 0.3, buf);
}

// 7. E-step of the Vecchia backend matches the exact backend at m = p-1.
void criterion7() {
  SplitMix64 rng(707);
  double worst = 0.0;
  for (int inst = 0; inst < 10; ++inst) {
    int p = 20 + static_cast<int>(rng.next() % 81);  // 20..100
    Dataset ds = simulate_mixture(ScenarioSpec::standard(2, 3000 + inst, p, 5));
    MixtureModel model;
    model.weights = {0.4, 0.6};
    model.components = {random_params(rng), random_params(rng)};
    FitConfig exact_cfg;
    FitConfig vem_cfg;
    vem_cfg.backend = BackendKind::Vecchia;
    vem_cfg.m = p - 1;
    auto exact = make_backend(ds, exact_cfg);
    auto vem = make_backend(ds, vem_cfg);
    Eigen::MatrixXd We = e_step(ds, model, *exact);
    Eigen::MatrixXd Wv = e_step(ds, model, *vem);
    worst = std::max(worst, (We - Wv).cwiseAbs().maxCoeff());
  }
  std::snprintf(buf, sizeof(buf), "worst entrywise gap %.3g (<= 1e-6)", worst);
  report(7, "E-step backend equivalence", worst <= 1e-6, buf);
}

// 8. NOAA-style study: 5-year moving average, Matern12, G=3, m=10.
void criterion8(const std::string& data_dir) {
  std::string path = data_dir + "/noaa_anomaly_sample.csv";
  try {
    Dataset ds = load_csv(path);
    Dataset ma = moving_average(ds, 5);
    FitConfig cfg;
    cfg.backend = BackendKind::Vecchia;
    cfg.family = KernelFamily::Matern12;
    cfg.m = 10;
    cfg.seed = 0;
    FitResult r = fit(ma, 3, cfg);
    std::vector<int> reference = load_labels_csv(data_dir + "/noaa_reference_labels.csv");
    double v = nmi(r.labels, reference);
    std::snprintf(buf, sizeof(buf),
                  "NMI %.3f (>= 0.8) vs {Jun-Aug},{Oct-Feb},{Mar,Apr,Sep} on %d series x %d years (best-effort)",
                  v, ds.n_curves(), ds.n_points());
    report(8, "NOAA three-cluster study", v >= 0.8, buf);
  } catch (const std::exception& e) {
    report(8, "NOAA three-cluster study", false, std::string("error: ") + e.what());
  }
}

// 9. Invariant suites: NMI, responsibilities, sparsity, determinism.
void criterion9() {
  bool ok = true;
  std::string what = "all invariants hold";
  auto fail = [&](const std::string& msg) {
    if (ok) what = msg;
    ok = false;
  };

  // NMI: symmetry, relabel-invariance, bounds
  SplitMix64 rng(909);
  for (int rep = 0; rep < 30 && ok; ++rep) {
    int n = 6 + static_cast<int>(rng.next() % 20);
    std::vector<int> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng.next() % 3);
      b[i] = static_cast<int>(rng.next() % 4);
    }
    double v = nmi(a, b);
    if (v < 0.0 || v > 1.0 + 1e-12) fail("nmi out of [0,1]");
    if (std::abs(nmi(b, a) - v) > 1e-12) fail("nmi not symmetric");
    std::vector<int> relab(a);
    for (int& x : relab) x += 17;
    if (std::abs(nmi(relab, b) - v) > 1e-12) fail("nmi not relabel-invariant");
  }

  // responsibilities: row-stochastic
  Dataset ds = simulate_mixture(ScenarioSpec::standard(2, 5, 80, 5));
  FitConfig cfg;
  cfg.backend = BackendKind::Vecchia;
  cfg.m = 16;
  cfg.seed = 9;
  cfg.restarts = 2;
  FitResult r = fit(ds, 2, cfg);
  for (int i = 0; i < r.responsibilities.rows(); ++i) {
    if (std::abs(r.responsibilities.row(i).sum() - 1.0) > 1e-9)
      fail("responsibility row does not sum to 1");
    if (r.responsibilities.row(i).minCoeff() < 0.0) fail("negative responsibility");
  }

  // sparsity: fewer than p*m off-diagonal entries
  Grid g = Grid::uniform(150);
  KernelParams k = random_params(rng);
  auto plan = build_plan(g, 12);
  if (vecchia_inverse_cholesky(k, g, plan).nnz_offdiag() >= 150L * 12L)
    fail("factor sparsity bound violated");

  // determinism: identical fits give identical bytes
  FitResult r2 = fit(ds, 2, cfg);
  if (r.labels != r2.labels || r.iterations != r2.iterations ||
      (r.responsibilities - r2.responsibilities).cwiseAbs().maxCoeff() != 0.0 ||
      std::memcmp(&r.model.components[0].l, &r2.model.components[0].l, sizeof(double)) != 0)
    fail("fit not deterministic for a fixed seed");

  report(9, "invariant suites", ok, what);
}

}  // namespace

int main(int argc, char** argv) {
  std::string data_dir = argc > 1 ? argv[1] : "data";
  criterion1();
  criterion2();
  criterion3();
  criterion7();
  criterion9();
  criterion8(data_dir);
  criterion6();
  criterion4();
  criterion5();
  if (failures) {
    std::printf("%d criterion(s) FAILED\n", failures);
    return 1;
  }
  std::printf("all 9 criteria passed\n");
  return 0;
}
