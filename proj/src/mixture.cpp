#include "gpclust/mixture.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "gpclust/dense.hpp"
#include "gpclust/rng.hpp"
#include "gpclust/vecchia.hpp"

namespace gpclust {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kMaxLogStep = 0.5;       // trust-region clamp on log-parameter updates
constexpr double kDegenerateMass = 1e-8;  // responsibility mass below which a component is degenerate

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

void MixtureModel::validate() const {
  if (weights.empty() || weights.size() != components.size())
    throw std::invalid_argument("mixture model: weights/components size mismatch");
  double s = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("mixture weights must be non-negative");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-8) throw std::invalid_argument("mixture weights must sum to 1");
  for (const auto& c : components) c.validate();
}

// ---------------------------------------------------------------------------
// Exact (dense) backend

class ExactBackend final : public LikelihoodBackend {
 public:
  ExactBackend(const Dataset& ds) : ds_(ds), yt_(ds.curves.transpose()) {}

  void prepare(const MixtureModel& model) override {
    model.validate();
    const int G = model.n_components();
    const int n = ds_.n_curves();
    const int p = ds_.n_points();
    params_.assign(model.components.begin(), model.components.end());
    llt_.resize(G);
    K_.resize(G);
    L_.resize(n, G);
    for (int g = 0; g < G; ++g) {
      K_[g] = build_covariance(model.components[g], ds_.grid);
      llt_[g].compute(K_[g]);
      if (llt_[g].info() != Eigen::Success)
        throw NotPositiveDefiniteError(-1);
      double logdet = 2.0 * Eigen::MatrixXd(llt_[g].matrixL()).diagonal().array().log().sum();
      Eigen::MatrixXd w = llt_[g].matrixL().solve(yt_);  // p x n
      L_.col(g) = -0.5 * (p * kLog2Pi + logdet + w.colwise().squaredNorm().transpose().array());
    }
  }

  const Eigen::MatrixXd& logliks() const override { return L_; }

  std::array<double, 2> weighted_grad(int g, const Eigen::VectorXd& w) override {
    const int p = ds_.n_points();
    const KernelParams& prm = params_[g];
    Eigen::MatrixXd Kinv = llt_[g].solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd A = llt_[g].solve(yt_);  // p x n, alpha per curve

    Eigen::MatrixXd dKl(p, p), dKs(p, p);
    const double h = ds_.grid.uniform_spacing();
    if (h > 0.0) {
      std::vector<double> ll(p), ls(p);
      for (int d = 0; d < p; ++d) {
        ll[d] = kernel_dlogl(prm, d * h);
        ls[d] = kernel_dlogsigma(prm, d * h);
      }
      for (int i = 0; i < p; ++i)
        for (int j = 0; j <= i; ++j) {
          dKl(i, j) = dKl(j, i) = ll[i - j];
          dKs(i, j) = dKs(j, i) = ls[i - j];
        }
    } else {
      for (int i = 0; i < p; ++i)
        for (int j = 0; j <= i; ++j) {
          double r = std::abs(ds_.grid.points[i] - ds_.grid.points[j]);
          dKl(i, j) = dKl(j, i) = kernel_dlogl(prm, r);
          dKs(i, j) = dKs(j, i) = kernel_dlogsigma(prm, r);
        }
    }

    std::array<double, 2> grad{0.0, 0.0};
    const Eigen::MatrixXd* dK[2] = {&dKl, &dKs};
    for (int t = 0; t < 2; ++t) {
      double tr = (Kinv.array() * dK[t]->array()).sum();
      Eigen::VectorXd quad = (A.array() * (*dK[t] * A).array()).colwise().sum().transpose();
      grad[t] = 0.5 * (w.dot(quad) - tr * w.sum());
    }
    return grad;
  }

  double weighted_objective(const KernelParams& prm, const Eigen::VectorXd& w) override {
    return w.dot(per_curve_loglik(prm));
  }

  Eigen::VectorXd per_curve_loglik(const KernelParams& prm) override {
    const int p = ds_.n_points();
    Eigen::MatrixXd K = build_covariance(prm, ds_.grid);
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) throw NotPositiveDefiniteError(-1);
    double logdet = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
    Eigen::MatrixXd v = llt.matrixL().solve(yt_);
    return -0.5 * (p * kLog2Pi + logdet + v.colwise().squaredNorm().transpose().array());
  }

 private:
  const Dataset& ds_;
  Eigen::MatrixXd yt_;  // p x n
  std::vector<KernelParams> params_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llt_;
  std::vector<Eigen::MatrixXd> K_;
  Eigen::MatrixXd L_;
};

// ---------------------------------------------------------------------------
// Vecchia backend

class VecchiaBackend final : public LikelihoodBackend {
 public:
  VecchiaBackend(const Dataset& ds, int m, bool analytic)
      : ds_(ds), plan_(build_plan(ds.grid, m)), analytic_(analytic) {
    const int n = ds.n_curves();
    const int p = ds.n_points();
    yp_.resize(n, p);
    for (int k = 0; k < p; ++k) yp_.col(k) = ds.curves.col(plan_.order[k]);
  }

  const VecchiaPlan& plan() const { return plan_; }

  void prepare(const MixtureModel& model) override {
    model.validate();
    const int G = model.n_components();
    const int n = ds_.n_curves();
    const int p = ds_.n_points();
    factors_.clear();
    factors_.reserve(G);
    z_.resize(G);
    L_.resize(n, G);
    for (int g = 0; g < G; ++g) {
      factors_.push_back(build_vecchia_factor(model.components[g], ds_.grid, plan_, analytic_));
      const auto& f = factors_.back();
      // z(i,k) = (R y_i)_k, the standardized conditional residuals
      Eigen::MatrixXd& z = z_[g];
      z.resize(n, p);
      double logdiag = 0.0;
      for (int k = 0; k < p; ++k) {
        double dk = f.L.diag(k);
        logdiag += std::log(dk);
        z.col(k) = dk * yp_.col(k);
        const auto& cols = f.L.row_cols(k);
        const auto& vals = f.L.row_vals(k);
        for (std::size_t t = 0; t < cols.size(); ++t) z.col(k) += vals[t] * yp_.col(cols[t]);
      }
      L_.col(g) = -0.5 * (p * kLog2Pi + z.rowwise().squaredNorm().array()) + logdiag;
    }
  }

  const Eigen::MatrixXd& logliks() const override { return L_; }

  std::array<double, 2> weighted_grad(int g, const Eigen::VectorXd& w) override {
    const auto& f = factors_[g];
    const int p = ds_.n_points();
    const Eigen::MatrixXd& z = z_[g];
    const double w0 = w.sum();
    std::array<double, 2> grad{0.0, 0.0};
    Eigen::VectorXd wr(ds_.n_curves());
    for (int k = 0; k < p; ++k) {
      const double d = f.cond_var[k];
      const double sd = std::sqrt(d);
      // r = z * sqrt(d); s2 = sum_i w_i r_i^2; tvec = sum_i w_i r_i y_{i,c}
      wr = w.array() * z.col(k).array();  // w_i r_i / sqrt(d)
      const double s2 = sd * sd * wr.dot(z.col(k));
      const auto& cols = f.L.row_cols(k);
      for (int t = 0; t < 2; ++t) {
        const double dd = f.dd[k][t];
        double acc = -0.5 * w0 * dd / d + 0.5 * s2 * dd / (d * d);
        const auto& db = f.db[k][t];
        double dot = 0.0;
        for (std::size_t a = 0; a < cols.size(); ++a) dot += db[a] * wr.dot(yp_.col(cols[a]));
        grad[t] += acc + (sd / d) * dot;
      }
    }
    return grad;
  }

  double weighted_objective(const KernelParams& prm, const Eigen::VectorXd& w) override {
    return w.dot(per_curve_loglik(prm));
  }

  Eigen::VectorXd per_curve_loglik(const KernelParams& prm) override {
    VecchiaFactor f = build_vecchia_factor(prm, ds_.grid, plan_, false);
    const int p = ds_.n_points();
    double logdiag = 0.0;
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(ds_.n_curves());
    Eigen::VectorXd zk(ds_.n_curves());
    for (int k = 0; k < p; ++k) {
      logdiag += std::log(f.L.diag(k));
      zk = f.L.diag(k) * yp_.col(k);
      const auto& cols = f.L.row_cols(k);
      const auto& vals = f.L.row_vals(k);
      for (std::size_t t = 0; t < cols.size(); ++t) zk += vals[t] * yp_.col(cols[t]);
      sq.array() += zk.array().square();
    }
    return (-0.5 * (p * kLog2Pi + sq.array()) + logdiag).matrix();
  }

 private:
  const Dataset& ds_;
  VecchiaPlan plan_;
  bool analytic_;
  Eigen::MatrixXd yp_;  // n x p, curves in ordered coordinates
  std::vector<VecchiaFactor> factors_;
  std::vector<Eigen::MatrixXd> z_;
  Eigen::MatrixXd L_;
};

std::unique_ptr<LikelihoodBackend> make_backend(const Dataset& ds, const FitConfig& cfg) {
  if (cfg.backend == BackendKind::Exact) return std::make_unique<ExactBackend>(ds);
  return std::make_unique<VecchiaBackend>(ds, cfg.m, cfg.gradient_mode == GradientMode::Analytic);
}

// ---------------------------------------------------------------------------
// EM steps

namespace {

Eigen::MatrixXd responsibilities_from(const Eigen::MatrixXd& logliks,
                                      const std::vector<double>& weights) {
  const int n = static_cast<int>(logliks.rows());
  const int G = static_cast<int>(logliks.cols());
  Eigen::MatrixXd W(n, G);
  for (int i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int g = 0; g < G; ++g) {
      double v = std::log(weights[g]) + logliks(i, g);
      if (!std::isfinite(logliks(i, g)))
        throw std::runtime_error("non-finite log-likelihood in E-step (curve " + std::to_string(i) + ")");
      W(i, g) = v;
      mx = std::max(mx, v);
    }
    double s = 0.0;
    for (int g = 0; g < G; ++g) s += std::exp(W(i, g) - mx);
    for (int g = 0; g < G; ++g) W(i, g) = std::exp(W(i, g) - mx) / s;
  }
  return W;
}

double observed_loglik(const Eigen::MatrixXd& logliks, const std::vector<double>& weights) {
  double total = 0.0;
  for (int i = 0; i < logliks.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int g = 0; g < logliks.cols(); ++g)
      mx = std::max(mx, std::log(weights[g]) + logliks(i, g));
    double s = 0.0;
    for (int g = 0; g < logliks.cols(); ++g) s += std::exp(std::log(weights[g]) + logliks(i, g) - mx);
    total += mx + std::log(s);
  }
  return total;
}

// Draw component parameters: range log-uniform on [0.05, 1], scale matched
// to the standard deviation of a randomly chosen curve. A scale drawn blindly
// can sit hundreds of nats below a competitor at large p, which starves the
// component of responsibility mass before it can learn.
// Range draws live on [0.05, 1] times the grid span so behaviour is
// invariant to the units of the inputs (a [0,1] grid and a century of
// yearly observations get equivalent initializations).
double grid_span(const Dataset& ds) {
  return std::max(ds.grid.points.back() - ds.grid.points.front(), 1e-12);
}

KernelParams params_from_curve(const Dataset& ds, KernelFamily family, int curve, double l) {
  KernelParams k;
  k.family = family;
  k.l = l;
  Eigen::VectorXd c = ds.curves.row(curve);
  double sd = std::sqrt((c.array() - c.mean()).square().sum() / std::max(1, ds.n_points() - 1));
  k.sigma = std::max(sd, 1e-3);
  k.nugget = KernelParams::default_nugget(k.sigma);
  return k;
}

MixtureModel init_model(const Dataset& ds, int G, KernelFamily family, std::uint64_t seed) {
  SplitMix64 rng(seed);
  // anchor each component's scale to a distinct random curve
  std::vector<int> idx(ds.n_curves());
  for (int i = 0; i < ds.n_curves(); ++i) idx[i] = i;
  for (int i = ds.n_curves() - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.next() % static_cast<std::uint64_t>(i + 1)]);

  MixtureModel model;
  model.weights.assign(G, 1.0 / G);
  for (int g = 0; g < G; ++g) {
    double l = grid_span(ds) * std::exp(rng.uniform(std::log(0.05), std::log(1.0)));
    model.components.push_back(params_from_curve(ds, family, idx[g % ds.n_curves()], l));
  }
  return model;
}

}  // namespace

Eigen::MatrixXd e_step(const Dataset& ds, const MixtureModel& model, LikelihoodBackend& backend) {
  (void)ds;
  backend.prepare(model);
  return responsibilities_from(backend.logliks(), model.weights);
}

MixtureModel m_step(const Dataset& ds, const Eigen::MatrixXd& W, const MixtureModel& model,
                    const FitConfig& cfg, LikelihoodBackend& backend) {
  const int G = model.n_components();
  const int n = ds.n_curves();
  const double p = static_cast<double>(ds.n_points());
  MixtureModel next = model;

  for (int g = 0; g < G; ++g) {
    const Eigen::VectorXd w = W.col(g);
    const double mass = w.sum();
    next.weights[g] = mass / n;

    std::array<double, 2> grad;
    if (cfg.gradient_mode == GradientMode::Analytic) {
      grad = backend.weighted_grad(g, w);
    } else {
      // central differences of the weighted objective in log-parameters
      for (int t = 0; t < 2; ++t) {
        double logtheta = std::log(t == 0 ? model.components[g].l : model.components[g].sigma);
        double h = cfg.fd_step * std::max(1.0, std::abs(logtheta));
        KernelParams up = model.components[g], dn = model.components[g];
        (t == 0 ? up.l : up.sigma) = std::exp(logtheta + h);
        (t == 0 ? dn.l : dn.sigma) = std::exp(logtheta - h);
        grad[t] = (backend.weighted_objective(up, w) - backend.weighted_objective(dn, w)) / (2.0 * h);
      }
    }
    for (int t = 0; t < 2; ++t) {
      if (!std::isfinite(grad[t]))
        throw std::runtime_error("non-finite gradient in M-step (component " + std::to_string(g + 1) + ")");
    }

    // One ascent step on the per-observation average objective, clamped so a
    // single update cannot leave the region where the linearization holds.
    // The mass floor keeps near-empty components from taking noise-sized
    // gradients blown up by the normalization.
    const double scale = p * std::max(mass, 1.0);
    for (int t = 0; t < 2; ++t) {
      double step = cfg.learning_rate * grad[t] / scale;
      step = std::clamp(step, -kMaxLogStep, kMaxLogStep);
      double& theta = (t == 0 ? next.components[g].l : next.components[g].sigma);
      theta = std::exp(std::log(theta) + step);
    }
    next.components[g].nugget = KernelParams::default_nugget(next.components[g].sigma);
  }
  return next;
}

std::vector<int> assign_clusters(const Eigen::MatrixXd& W) {
  std::vector<int> labels(W.rows());
  for (int i = 0; i < W.rows(); ++i) {
    int best = 0;
    for (int g = 1; g < W.cols(); ++g)
      if (W(i, g) > W(i, best)) best = g;
    labels[i] = best + 1;
  }
  return labels;
}

namespace {

// Replacement parameters for a collapsed component: anchor on the curve
// whose individually tuned fit beats the surviving components by the widest
// margin. Merely taking the worst-explained curve is not enough — a
// large-scale component explains the other cluster's smooth curves well, so
// its worst curve sits in its own cluster and the re-seed lands on a
// duplicate of the incumbent, an unstable equilibrium in which the lighter
// twin starves again.
//
// Tuning all curves is affordable because K(l, s) = s^2 (K1(l) + eps I):
// each curve's loglik at its own scale s_i follows in closed form from two
// scale probes per candidate range,
//   ll_i(l, s) = A_i(l) - p log s - q_i(l) / (2 s^2).
KernelParams reseed_params(const Dataset& ds, const FitConfig& cfg, LikelihoodBackend& backend,
                           int g, int G) {
  const Eigen::MatrixXd& L = backend.logliks();
  const int n = static_cast<int>(L.rows());
  const double p = static_cast<double>(ds.n_points());
  Eigen::VectorXd best_other(n);
  for (int i = 0; i < n; ++i) {
    double bi = -std::numeric_limits<double>::infinity();
    for (int h = 0; h < G; ++h)
      if (h != g) bi = std::max(bi, L(i, h));
    best_other(i) = bi;
  }

  Eigen::VectorXd sds(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd c = ds.curves.row(i);
    double sd = std::sqrt((c.array() - c.mean()).square().sum() / std::max(1, ds.n_points() - 1));
    sds(i) = std::max(sd, 1e-3);
  }

  KernelParams pick;
  pick.family = cfg.family;
  double pick_adv = -std::numeric_limits<double>::infinity();
  int pick_curve = 0;
  for (int s = 0; s < 8; ++s) {
    KernelParams a;
    a.family = cfg.family;
    a.l = grid_span(ds) * std::exp(std::log(0.05) + s * (std::log(1.0) - std::log(0.05)) / 7.0);
    a.sigma = 1.0;
    a.nugget = KernelParams::default_nugget(1.0);
    KernelParams b = a;
    b.sigma = 2.0;
    b.nugget = KernelParams::default_nugget(2.0);
    Eigen::VectorXd va = backend.per_curve_loglik(a);
    Eigen::VectorXd vb = backend.per_curve_loglik(b);
    // va_i = A_i - q_i/2, vb_i = A_i - p log2 - q_i/8
    Eigen::ArrayXd q = ((vb - va).array() + p * std::log(2.0)) * (8.0 / 3.0);
    q = q.max(0.0);
    for (int i = 0; i < n; ++i) {
      double ll = va(i) + 0.5 * q(i) - p * std::log(sds(i)) - 0.5 * q(i) / (sds(i) * sds(i));
      double adv = ll - best_other(i);
      if (adv > pick_adv) {
        pick_adv = adv;
        pick.l = a.l;
        pick_curve = i;
      }
    }
  }
  pick.sigma = sds(pick_curve);
  pick.nugget = KernelParams::default_nugget(pick.sigma);
  return pick;
}

struct RunOutcome {
  FitResult result;
  double final_loglik = -std::numeric_limits<double>::infinity();
};

RunOutcome run_em(const Dataset& ds, int G, const FitConfig& cfg, std::uint64_t run_seed) {
  auto backend = make_backend(ds, cfg);
  MixtureModel model = init_model(ds, G, cfg.family, run_seed);

  RunOutcome out;
  FitResult& res = out.result;
  std::vector<int> degen_count(G, 0);
  std::vector<char> reseeded(G, 0);
  bool any_reseed = false;
  double prev = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd W;

  for (int it = 0; it < cfg.max_iters; ++it) {
    double t0 = now_seconds();
    backend->prepare(model);
    double ll = observed_loglik(backend->logliks(), model.weights);
    W = responsibilities_from(backend->logliks(), model.weights);
    res.wall_times.e_seconds += now_seconds() - t0;
    res.objective_trace.push_back(ll);

    for (int g = 0; g < G; ++g) {
      if (W.col(g).sum() < kDegenerateMass) {
        if (++degen_count[g] >= 3) {
          if (reseeded[g] >= 3) throw DegenerateComponentError(g);
          model.components[g] = reseed_params(ds, cfg, *backend, g, G);
          double floor = 1.0 / (10.0 * G);
          model.weights[g] = std::max(model.weights[g], floor);
          double s = 0.0;
          for (double v : model.weights) s += v;
          for (double& v : model.weights) v /= s;
          ++reseeded[g];
          degen_count[g] = 0;
          any_reseed = true;
          res.warnings.push_back("component " + std::to_string(g + 1) + " degenerate at iteration " +
                                 std::to_string(it + 1) + "; re-seeded");
        }
      } else {
        degen_count[g] = 0;
      }
    }

    if (any_reseed) {
      // refresh responsibilities so the M-step does not move the re-seeded
      // component with a gradient computed from its old, collapsed state
      double tr = now_seconds();
      backend->prepare(model);
      W = responsibilities_from(backend->logliks(), model.weights);
      res.wall_times.e_seconds += now_seconds() - tr;
      any_reseed = false;
    }

    double t1 = now_seconds();
    model = m_step(ds, W, model, cfg, *backend);
    res.wall_times.m_seconds += now_seconds() - t1;

    if (it >= 1 && std::abs(ll - prev) <= cfg.tol * std::abs(prev)) {
      prev = ll;
      break;
    }
    prev = ll;
  }

  // final E-step so the reported responsibilities match the reported model
  double t0 = now_seconds();
  backend->prepare(model);
  out.final_loglik = observed_loglik(backend->logliks(), model.weights);
  res.responsibilities = responsibilities_from(backend->logliks(), model.weights);
  res.wall_times.e_seconds += now_seconds() - t0;

  res.model = model;
  res.labels = assign_clusters(res.responsibilities);
  res.iterations = static_cast<int>(res.objective_trace.size());
  res.wall_times.total_seconds = res.wall_times.e_seconds + res.wall_times.m_seconds;
  return out;
}

}  // namespace

FitResult fit(const Dataset& ds, int G, const FitConfig& cfg) {
  if (G < 1) throw std::invalid_argument("fit: G must be >= 1");
  if (ds.n_curves() < G) throw std::invalid_argument("fit: need at least G curves");
  if (cfg.max_iters < 1 || !(cfg.tol > 0.0) || !(cfg.learning_rate > 0.0) || cfg.restarts < 1)
    throw std::invalid_argument("fit: invalid configuration");
  if (cfg.backend == BackendKind::Vecchia && (cfg.m < 1 || cfg.m > ds.n_points() - 1))
    throw std::invalid_argument("fit: vecchia backend requires 1 <= m <= p-1");

  RunOutcome best;
  bool have = false;
  int failures = 0;
  for (int r = 0; r < cfg.restarts; ++r) {
    RunOutcome cur;
    try {
      cur = run_em(ds, G, cfg, derive_seed(cfg.seed, r));
    } catch (const DegenerateComponentError&) {
      // a single collapsed restart is recoverable; rethrow only if every
      // restart collapses
      if (++failures == cfg.restarts && !have) throw;
      continue;
    }
    if (!have || cur.final_loglik > best.final_loglik) {
      // accumulate timing across restarts into the winner afterwards
      cur.result.wall_times.e_seconds += have ? best.result.wall_times.e_seconds : 0.0;
      cur.result.wall_times.m_seconds += have ? best.result.wall_times.m_seconds : 0.0;
      best = std::move(cur);
      have = true;
    } else {
      best.result.wall_times.e_seconds += cur.result.wall_times.e_seconds;
      best.result.wall_times.m_seconds += cur.result.wall_times.m_seconds;
    }
    best.result.wall_times.total_seconds =
        best.result.wall_times.e_seconds + best.result.wall_times.m_seconds;
  }
  return best.result;
}

}  // namespace gpclust
