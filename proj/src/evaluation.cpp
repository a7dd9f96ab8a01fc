#include "gpclust/evaluation.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "gpclust/dense.hpp"
#include "gpclust/vecchia.hpp"

namespace gpclust {

double nmi(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("nmi: label vectors differ in length");
  if (a.empty()) throw std::invalid_argument("nmi: empty label vectors");
  const double n = static_cast<double>(a.size());

  std::map<int, int> ca, cb;
  std::map<std::pair<int, int>, int> cab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++ca[a[i]];
    ++cb[b[i]];
    ++cab[{a[i], b[i]}];
  }

  auto entropy = [n](const std::map<int, int>& c) {
    double h = 0.0;
    for (const auto& [_, cnt] : c) {
      double q = cnt / n;
      h -= q * std::log(q);
    }
    return h;
  };
  double ha = entropy(ca), hb = entropy(cb);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;

  double mi = 0.0;
  for (const auto& [key, cnt] : cab) {
    double pab = cnt / n;
    double pa = ca[key.first] / n;
    double pb = cb[key.second] / n;
    mi += pab * std::log(pab / (pa * pb));
  }
  return mi / std::sqrt(ha * hb);
}

double gaussian_kl(const Eigen::MatrixXd& K1, const Eigen::MatrixXd& K2) {
  if (K1.rows() != K2.rows() || K1.cols() != K2.cols())
    throw std::invalid_argument("gaussian_kl: dimension mismatch");
  const int p = static_cast<int>(K1.rows());
  Eigen::MatrixXd L1 = dense_cholesky(K1);
  Eigen::LLT<Eigen::MatrixXd> llt2(K2);
  if (llt2.info() != Eigen::Success) throw NotPositiveDefiniteError(-1);
  double trace = llt2.solve(K1).trace();
  double logdet1 = 2.0 * L1.diagonal().array().log().sum();
  double logdet2 = 2.0 * Eigen::MatrixXd(llt2.matrixL()).diagonal().array().log().sum();
  return 0.5 * (trace - p + logdet2 - logdet1);
}

std::vector<std::pair<int, double>> vecchia_kl_curve(const KernelParams& params,
                                                     const Grid& grid,
                                                     const std::vector<int>& ms) {
  if (grid.size() > 2000) throw std::invalid_argument("vecchia_kl_curve: p > 2000");
  for (std::size_t i = 1; i < ms.size(); ++i)
    if (ms[i] <= ms[i - 1]) throw std::invalid_argument("vecchia_kl_curve: ms must be strictly ascending");

  // true covariance in ordered coordinates, shared across all m
  std::vector<int> order = maximin_order(grid);
  const int p = grid.size();
  Eigen::MatrixXd K = build_covariance(params, grid);
  Eigen::MatrixXd Ko(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) Ko(i, j) = K(order[i], order[j]);

  // With Khat^-1 = R^T R and K = L L^T, KL(N(0,K) || N(0,Khat)) equals
  //   1/2 ||R L||_F^2 - p/2 - sum log diag(R) - sum log diag(L).
  // Unlike densifying Khat and calling gaussian_kl, this stays accurate when
  // K is badly conditioned: at m = p-1 (R L orthogonal) the residual is
  // second order in the rounding of R L.
  Eigen::MatrixXd L = dense_cholesky(Ko);
  double logdiag_L = L.diagonal().array().log().sum();

  std::vector<std::pair<int, double>> out;
  out.reserve(ms.size());
  for (int m : ms) {
    VecchiaPlan plan = build_plan(grid, m);
    SparseLowerTriangular R = vecchia_inverse_cholesky(params, grid, plan);
    double fro = 0.0, logdiag_R = 0.0;
    for (int j = 0; j < p; ++j) fro += R.apply(L.col(j)).squaredNorm();
    for (int i = 0; i < p; ++i) logdiag_R += std::log(R.diag(i));
    out.emplace_back(m, 0.5 * (fro - p) - logdiag_R - logdiag_L);
  }
  return out;
}

}  // namespace gpclust
