#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gpclust/dense.hpp"
#include "gpclust/evaluation.hpp"
#include "gpclust/mixture.hpp"
#include "gpclust/rng.hpp"

using namespace gpclust;

namespace {

KernelParams make(KernelFamily f, double l, double s) {
  KernelParams k;
  k.family = f;
  k.l = l;
  k.sigma = s;
  k.nugget = KernelParams::default_nugget(s);
  return k;
}

Dataset two_cluster_data(std::uint64_t seed, int p = 60, int per = 6) {
  return simulate_mixture(ScenarioSpec::standard(2, seed, p, per));
}

}  // namespace

TEST_CASE("e_step matches a brute-force two-component oracle") {
  // N=2 curves, G=2, p=3: compute responsibilities from explicit densities
  Grid g = Grid::uniform(3);
  Dataset ds{g, Eigen::MatrixXd(2, 3), {"a", "b"}, std::nullopt};
  ds.curves << 0.1, -0.4, 0.9, 1.2, 1.1, -0.3;

  MixtureModel model;
  model.weights = {0.4, 0.6};
  model.components = {make(KernelFamily::SquaredExponential, 0.3, 0.5),
                      make(KernelFamily::Matern12, 0.6, 1.1)};

  FitConfig cfg;
  auto backend = make_backend(ds, cfg);
  Eigen::MatrixXd W = e_step(ds, model, *backend);

  for (int i = 0; i < 2; ++i) {
    Eigen::VectorXd y = ds.curves.row(i).transpose();
    double num[2];
    for (int k = 0; k < 2; ++k) {
      Eigen::MatrixXd K = build_covariance(model.components[k], g);
      num[k] = model.weights[k] * std::exp(-0.5 * y.dot(K.inverse() * y)) /
               std::sqrt(std::pow(2.0 * M_PI, 3) * K.determinant());
    }
    for (int k = 0; k < 2; ++k)
      CHECK(W(i, k) == doctest::Approx(num[k] / (num[0] + num[1])).epsilon(1e-10));
  }
}

TEST_CASE("e_step rows are stochastic and identical components split evenly") {
  Dataset ds = two_cluster_data(3);
  MixtureModel model;
  model.weights = {0.5, 0.5};
  auto k = make(KernelFamily::SquaredExponential, 0.3, 0.4);
  model.components = {k, k};
  FitConfig cfg;
  auto backend = make_backend(ds, cfg);
  Eigen::MatrixXd W = e_step(ds, model, *backend);
  REQUIRE(W.rows() == ds.n_curves());
  for (int i = 0; i < W.rows(); ++i) {
    CHECK(W.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(W(i, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(W.row(i).minCoeff() >= 0.0);
  }
}

TEST_CASE("e_step survives extreme log-likelihood gaps") {
  // one component wildly mis-scaled: responsibilities must stay finite
  Dataset ds = two_cluster_data(4, 40, 3);
  MixtureModel model;
  model.weights = {0.5, 0.5};
  model.components = {make(KernelFamily::SquaredExponential, 0.2, 1e-3),
                      make(KernelFamily::SquaredExponential, 0.2, 0.5)};
  FitConfig cfg;
  auto backend = make_backend(ds, cfg);
  Eigen::MatrixXd W = e_step(ds, model, *backend);
  CHECK(W.allFinite());
  for (int i = 0; i < W.rows(); ++i)
    CHECK(W.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("m_step weights are the responsibility column means") {
  Dataset ds = two_cluster_data(5, 40, 5);  // N = 10
  Eigen::MatrixXd W(10, 2);
  for (int i = 0; i < 10; ++i) {
    double a = (i < 3) ? 1.0 : 0.0;
    W(i, 0) = a;
    W(i, 1) = 1.0 - a;
  }
  MixtureModel model;
  model.weights = {0.5, 0.5};
  model.components = {make(KernelFamily::SquaredExponential, 0.2, 0.5),
                      make(KernelFamily::SquaredExponential, 0.5, 0.2)};
  FitConfig cfg;
  auto backend = make_backend(ds, cfg);
  backend->prepare(model);
  MixtureModel next = m_step(ds, W, model, cfg, *backend);
  CHECK(next.weights[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(next.weights[1] == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("m_step ascends the weighted objective") {
  Dataset ds = two_cluster_data(6, 50, 5);
  MixtureModel model;
  model.weights = {0.5, 0.5};
  model.components = {make(KernelFamily::SquaredExponential, 0.3, 0.35),
                      make(KernelFamily::SquaredExponential, 0.4, 0.3)};
  FitConfig cfg;
  auto backend = make_backend(ds, cfg);
  backend->prepare(model);
  Eigen::MatrixXd W = e_step(ds, model, *backend);
  MixtureModel next = m_step(ds, W, model, cfg, *backend);
  for (int k = 0; k < 2; ++k) {
    double before = backend->weighted_objective(model.components[k], W.col(k));
    double after = backend->weighted_objective(next.components[k], W.col(k));
    CHECK(after >= before - 1e-9);
  }
}

TEST_CASE("assign_clusters tie goes to the first component") {
  Eigen::MatrixXd W(3, 2);
  W << 0.5, 0.5, 0.2, 0.8, 0.8, 0.2;
  auto labels = assign_clusters(W);
  CHECK(labels == std::vector<int>{1, 2, 1});
}

TEST_CASE("backends agree at m = p-1") {
  Dataset ds = two_cluster_data(7, 30, 4);
  MixtureModel model;
  model.weights = {0.35, 0.65};
  model.components = {make(KernelFamily::SquaredExponential, 0.2, 0.5),
                      make(KernelFamily::Matern12, 0.5, 0.2)};
  FitConfig exact_cfg;
  FitConfig vem_cfg;
  vem_cfg.backend = BackendKind::Vecchia;
  vem_cfg.m = ds.n_points() - 1;
  auto exact = make_backend(ds, exact_cfg);
  auto vem = make_backend(ds, vem_cfg);
  Eigen::MatrixXd We = e_step(ds, model, *exact);
  Eigen::MatrixXd Wv = e_step(ds, model, *vem);
  CHECK((We - Wv).cwiseAbs().maxCoeff() <= 1e-6);

  exact->prepare(model);
  vem->prepare(model);
  CHECK((exact->logliks() - vem->logliks()).cwiseAbs().maxCoeff() <=
        1e-6 * exact->logliks().cwiseAbs().maxCoeff());
}

TEST_CASE("vecchia backend analytic gradient matches its own central FD") {
  Dataset ds = two_cluster_data(8, 40, 4);
  auto prm = make(KernelFamily::SquaredExponential, 0.3, 0.4);
  FitConfig cfg;
  cfg.backend = BackendKind::Vecchia;
  cfg.m = 8;
  auto backend = make_backend(ds, cfg);
  MixtureModel model;
  model.weights = {1.0};
  model.components = {prm};
  backend->prepare(model);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(ds.n_curves(), 1.0 / ds.n_curves());
  auto grad = backend->weighted_grad(0, w);

  const double h = 1e-4;  // central FD; smaller steps drown in factor roundoff
  auto at = [&](double dl, double dsig) {
    KernelParams q = prm;
    q.l = std::exp(std::log(prm.l) + dl);
    q.sigma = std::exp(std::log(prm.sigma) + dsig);
    return backend->weighted_objective(q, w);
  };
  double fd_l = (at(h, 0) - at(-h, 0)) / (2 * h);
  double fd_s = (at(0, h) - at(0, -h)) / (2 * h);
  CHECK(std::abs(grad[0] - fd_l) / std::max(1.0, std::abs(fd_l)) <= 1e-4);
  CHECK(std::abs(grad[1] - fd_s) / std::max(1.0, std::abs(fd_s)) <= 1e-4);
}

TEST_CASE("fit recovers an easy two-cluster split") {
  Dataset ds = two_cluster_data(9, 80, 8);
  FitConfig cfg;
  cfg.restarts = 2;
  cfg.max_iters = 80;
  cfg.seed = 11;
  FitResult r = fit(ds, 2, cfg);
  REQUIRE(ds.truth.has_value());
  CHECK(nmi(r.labels, *ds.truth) >= 0.8);
  CHECK(r.iterations >= 1);
  CHECK(r.model.n_components() == 2);
  for (int i = 0; i < r.responsibilities.rows(); ++i)
    CHECK(r.responsibilities.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
  // labels are 1-based argmax of responsibilities
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    CHECK(r.labels[i] >= 1);
    CHECK(r.labels[i] <= 2);
  }
}

TEST_CASE("objective trace is non-decreasing up to tolerance") {
  Dataset ds = two_cluster_data(10, 60, 6);
  FitConfig cfg;
  cfg.restarts = 1;
  cfg.max_iters = 60;
  cfg.seed = 3;
  FitResult r = fit(ds, 2, cfg);
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
    CHECK(r.objective_trace[i] >= r.objective_trace[i - 1] - 1e-6 * std::abs(r.objective_trace[i - 1]));
}

TEST_CASE("fit is deterministic for a fixed seed") {
  Dataset ds = two_cluster_data(12, 50, 5);
  FitConfig cfg;
  cfg.restarts = 2;
  cfg.max_iters = 40;
  cfg.seed = 21;
  FitResult a = fit(ds, 2, cfg);
  FitResult b = fit(ds, 2, cfg);
  CHECK(a.labels == b.labels);
  CHECK(a.iterations == b.iterations);
  CHECK((a.responsibilities - b.responsibilities).cwiseAbs().maxCoeff() == 0.0);
  for (int k = 0; k < 2; ++k) {
    CHECK(a.model.weights[k] == b.model.weights[k]);
    CHECK(a.model.components[k].l == b.model.components[k].l);
    CHECK(a.model.components[k].sigma == b.model.components[k].sigma);
  }
}

TEST_CASE("vecchia fit requires a valid m") {
  Dataset ds = two_cluster_data(13, 30, 3);
  FitConfig cfg;
  cfg.backend = BackendKind::Vecchia;
  cfg.m = 0;
  CHECK_THROWS_AS(fit(ds, 2, cfg), std::invalid_argument);
}

TEST_CASE("G=1 fit degenerates to single-model estimation") {
  Dataset ds = two_cluster_data(14, 40, 4);
  FitConfig cfg;
  cfg.restarts = 1;
  cfg.max_iters = 40;
  cfg.seed = 5;
  FitResult r = fit(ds, 1, cfg);
  CHECK(r.model.weights[0] == doctest::Approx(1.0));
  for (int lab : r.labels) CHECK(lab == 1);
}

TEST_CASE("MixtureModel::validate rejects bad weights") {
  MixtureModel m;
  m.weights = {0.5, 0.6};
  m.components = {make(KernelFamily::SquaredExponential, 0.2, 0.5),
                  make(KernelFamily::SquaredExponential, 0.5, 0.2)};
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m.weights = {0.5, 0.5};
  CHECK_NOTHROW(m.validate());
  m.components.pop_back();
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}
