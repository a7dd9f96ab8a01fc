#include "gpclust/dense.hpp"

#include <cmath>

#include "gpclust/rng.hpp"

namespace gpclust {

namespace {

// Unblocked scalar Cholesky, used only to locate the failing pivot after
// Eigen's blocked LLT reports a numerical issue.
int find_failing_pivot(const Eigen::MatrixXd& K) {
  const int p = static_cast<int>(K.rows());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(p, p);
  for (int j = 0; j < p; ++j) {
    double s = K(j, j) - L.row(j).head(j).squaredNorm();
    if (!(s > 0.0) || !std::isfinite(s)) return j;
    L(j, j) = std::sqrt(s);
    for (int i = j + 1; i < p; ++i)
      L(i, j) = (K(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
  }
  return p - 1;
}

}  // namespace

Eigen::MatrixXd dense_cholesky(const Eigen::MatrixXd& K) {
  if (K.rows() != K.cols()) throw std::invalid_argument("dense_cholesky: matrix must be square");
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) throw NotPositiveDefiniteError(find_failing_pivot(K));
  return llt.matrixL();
}

double gaussian_loglik_exact(const Eigen::VectorXd& y, const Eigen::MatrixXd& K) {
  if (y.size() != K.rows()) throw std::invalid_argument("gaussian_loglik_exact: dimension mismatch");
  const double p = static_cast<double>(y.size());
  Eigen::MatrixXd L = dense_cholesky(K);
  Eigen::VectorXd w = L.triangularView<Eigen::Lower>().solve(y);
  const double log2pi = 1.8378770664093454835606594728112;
  return -0.5 * p * log2pi - L.diagonal().array().log().sum() - 0.5 * w.squaredNorm();
}

std::pair<double, double> loglik_gradient_exact(const Eigen::VectorXd& y,
                                                const KernelParams& params,
                                                const Grid& grid) {
  params.validate();
  const int p = grid.size();
  if (y.size() != p) throw std::invalid_argument("loglik_gradient_exact: dimension mismatch");

  Eigen::MatrixXd K = build_covariance(params, grid);
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) throw NotPositiveDefiniteError(find_failing_pivot(K));
  Eigen::MatrixXd Kinv = llt.solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::VectorXd alpha = llt.solve(y);

  Eigen::MatrixXd dKl(p, p), dKs(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j <= i; ++j) {
      double r = std::abs(grid.points[i] - grid.points[j]);
      dKl(i, j) = dKl(j, i) = kernel_dlogl(params, r);
      dKs(i, j) = dKs(j, i) = kernel_dlogsigma(params, r);
    }

  // d loglik / d theta = (alpha' dK alpha - tr(Kinv dK)) / 2, then chain rule
  // from log-parameters back to (l, sigma).
  double gl = 0.5 * (alpha.dot(dKl * alpha) - (Kinv.array() * dKl.array()).sum());
  double gs = 0.5 * (alpha.dot(dKs * alpha) - (Kinv.array() * dKs.array()).sum());
  return {gl / params.l, gs / params.sigma};
}

Eigen::VectorXd sample_gp(const KernelParams& params, const Grid& grid, std::uint64_t seed) {
  Eigen::MatrixXd L = dense_cholesky(build_covariance(params, grid));
  SplitMix64 rng(seed);
  Eigen::VectorXd z(grid.size());
  for (int i = 0; i < grid.size(); ++i) z(i) = rng.normal();
  return L.triangularView<Eigen::Lower>() * z;
}

}  // namespace gpclust
