#include "gpclust/vecchia.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "gpclust/dense.hpp"

namespace gpclust {

long VecchiaPlan::pattern_size() const {
  long n = size();
  for (const auto& c : csets) n += static_cast<long>(c.size());
  return n;
}

std::vector<int> maximin_order(const Grid& grid) {
  const int p = grid.size();
  const auto& x = grid.points;
  for (int i = 1; i < p; ++i)
    if (x[i] == x[i - 1]) throw std::invalid_argument("maximin_order: duplicate grid points");

  double centroid = 0.0;
  for (double xi : x) centroid += xi;
  centroid /= p;

  int first = 0;
  for (int i = 1; i < p; ++i)
    if (std::abs(x[i] - centroid) < std::abs(x[first] - centroid)) first = i;

  std::vector<int> order;
  order.reserve(p);
  order.push_back(first);
  std::vector<double> mindist(p, std::numeric_limits<double>::infinity());
  std::vector<char> used(p, 0);
  used[first] = 1;
  for (int i = 0; i < p; ++i)
    if (!used[i]) mindist[i] = std::abs(x[i] - x[first]);

  for (int step = 1; step < p; ++step) {
    int best = -1;
    for (int i = 0; i < p; ++i) {
      if (used[i]) continue;
      if (best < 0 || mindist[i] > mindist[best]) best = i;
    }
    order.push_back(best);
    used[best] = 1;
    for (int i = 0; i < p; ++i)
      if (!used[i]) mindist[i] = std::min(mindist[i], std::abs(x[i] - x[best]));
  }
  return order;
}

VecchiaPlan build_plan(const Grid& grid, int m) {
  const int p = grid.size();
  if (m < 1 || m > p - 1) throw std::invalid_argument("build_plan: m must satisfy 1 <= m <= p-1");

  VecchiaPlan plan;
  plan.m = m;
  plan.order = maximin_order(grid);
  plan.csets.resize(p);

  std::vector<std::pair<double, int>> cand;
  for (int k = 1; k < p; ++k) {
    double xk = grid.points[plan.order[k]];
    cand.clear();
    for (int j = 0; j < k; ++j) cand.emplace_back(std::abs(grid.points[plan.order[j]] - xk), j);
    int take = std::min(m, k);
    std::partial_sort(cand.begin(), cand.begin() + take, cand.end());
    auto& cs = plan.csets[k];
    cs.reserve(take);
    for (int t = 0; t < take; ++t) cs.push_back(cand[t].second);
    std::sort(cs.begin(), cs.end());
  }
  return plan;
}

SparseLowerTriangular::SparseLowerTriangular(const VecchiaPlan& plan) {
  const int p = plan.size();
  cols_.resize(p);
  vals_.resize(p);
  diag_.assign(p, 0.0);
  for (int i = 0; i < p; ++i) {
    cols_[i] = &plan.csets[i];
    vals_[i].assign(plan.csets[i].size(), 0.0);
  }
}

long SparseLowerTriangular::nnz_offdiag() const {
  long n = 0;
  for (const auto& v : vals_) n += static_cast<long>(v.size());
  return n;
}

Eigen::VectorXd SparseLowerTriangular::apply(const Eigen::VectorXd& y) const {
  if (y.size() != size()) throw std::invalid_argument("SparseLowerTriangular::apply: dimension mismatch");
  Eigen::VectorXd out(size());
  for (int i = 0; i < size(); ++i) {
    double s = diag_[i] * y(i);
    const auto& cols = *cols_[i];
    const auto& vals = vals_[i];
    for (std::size_t t = 0; t < cols.size(); ++t) s += vals[t] * y(cols[t]);
    out(i) = s;
  }
  return out;
}

Eigen::MatrixXd SparseLowerTriangular::to_dense() const {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(size(), size());
  for (int i = 0; i < size(); ++i) {
    M(i, i) = diag_[i];
    const auto& cols = *cols_[i];
    for (std::size_t t = 0; t < cols.size(); ++t) M(i, cols[t]) = vals_[i][t];
  }
  return M;
}

namespace {

// In-place Cholesky of the leading m x m block of a row-major buffer
// (stride s). Returns the failing pivot or -1.
inline int chol_inplace(double* A, int m, int s) {
  for (int j = 0; j < m; ++j) {
    double* rj = A + j * s;
    double d = rj[j];
    for (int k = 0; k < j; ++k) d -= rj[k] * rj[k];
    if (!(d > 0.0) || !std::isfinite(d)) return j;
    d = std::sqrt(d);
    rj[j] = d;
    const double inv = 1.0 / d;
    // 4-way blocking over the trailing rows keeps the pivot row in registers
    int i = j + 1;
    for (; i + 3 < m; i += 4) {
      double* r0 = A + i * s;
      double* r1 = r0 + s;
      double* r2 = r1 + s;
      double* r3 = r2 + s;
      double v0 = r0[j], v1 = r1[j], v2 = r2[j], v3 = r3[j];
      for (int k = 0; k < j; ++k) {
        const double q = rj[k];
        v0 -= r0[k] * q;
        v1 -= r1[k] * q;
        v2 -= r2[k] * q;
        v3 -= r3[k] * q;
      }
      r0[j] = v0 * inv;
      r1[j] = v1 * inv;
      r2[j] = v2 * inv;
      r3[j] = v3 * inv;
    }
    for (; i < m; ++i) {
      double* ri = A + i * s;
      double v = ri[j];
      for (int k = 0; k < j; ++k) v -= ri[k] * rj[k];
      ri[j] = v * inv;
    }
  }
  return -1;
}

// Solve (L L^T) x = rhs in place for two right-hand sides, sharing the
// factor traversal.
inline void chol_solve2(const double* A, int m, int s, double* x, double* y) {
  for (int i = 0; i < m; ++i) {
    const double* ri = A + i * s;
    double vx = x[i], vy = y[i];
    for (int k = 0; k < i; ++k) {
      vx -= ri[k] * x[k];
      vy -= ri[k] * y[k];
    }
    x[i] = vx / ri[i];
    y[i] = vy / ri[i];
  }
  for (int i = m - 1; i >= 0; --i) {
    double vx = x[i], vy = y[i];
    for (int k = i + 1; k < m; ++k) {
      vx -= A[k * s + i] * x[k];
      vy -= A[k * s + i] * y[k];
    }
    x[i] = vx / A[i * s + i];
    y[i] = vy / A[i * s + i];
  }
}

// Solve (L L^T) x = rhs in place, L the factor left by chol_inplace.
inline void chol_solve(const double* A, int m, int s, double* x) {
  for (int i = 0; i < m; ++i) {
    const double* ri = A + i * s;
    double v = x[i];
    for (int k = 0; k < i; ++k) v -= ri[k] * x[k];
    x[i] = v / ri[i];
  }
  for (int i = m - 1; i >= 0; --i) {
    double v = x[i];
    for (int k = i + 1; k < m; ++k) v -= A[k * s + i] * x[k];
    x[i] = v / (A + i * s)[i];
  }
}

// Kernel values (and log-parameter derivatives) by distance. Uniform grids
// get a lag table with one evaluation per distinct lag.
struct KernelEvaluator {
  const KernelParams& params;
  const std::vector<double>& x;
  double h = 0.0;
  std::vector<double> lag_k, lag_dl, lag_ds;

  KernelEvaluator(const KernelParams& prm, const Grid& grid, const std::vector<int>& order,
                  bool with_gradients)
      : params(prm), x(grid.points), h(grid.uniform_spacing()) {
    if (h > 0.0) {
      const int p = grid.size();
      lag_k.resize(p);
      for (int d = 0; d < p; ++d) lag_k[d] = kernel_eval(prm, 0.0, d * h);
      if (with_gradients) {
        lag_dl.resize(p);
        lag_ds.resize(p);
        for (int d = 0; d < p; ++d) {
          lag_dl[d] = kernel_dlogl(prm, d * h);
          lag_ds[d] = kernel_dlogsigma(prm, d * h);
        }
      }
    }
    (void)order;
  }
};

}  // namespace

VecchiaFactor build_vecchia_factor(const KernelParams& params, const Grid& grid,
                                   const VecchiaPlan& plan, bool with_gradients) {
  params.validate();
  const int p = plan.size();
  if (grid.size() != p) throw std::invalid_argument("build_vecchia_factor: plan/grid size mismatch");

  VecchiaFactor f;
  f.L = SparseLowerTriangular(plan);
  f.cond_var.resize(p);
  if (with_gradients) {
    f.db.resize(p);
    f.dd.resize(p);
  }

  KernelEvaluator ev(params, grid, plan.order, with_gradients);
  const bool uniform = ev.h > 0.0;
  const double kii0 = kernel_eval(params, 0.0, 0.0) + params.nugget;
  const double dkii_l = kernel_dlogl(params, 0.0);
  const double dkii_s = kernel_dlogsigma(params, 0.0);

  const int mcap = plan.m;
  std::vector<double> A(static_cast<std::size_t>(mcap) * mcap);
  std::vector<double> kv(mcap), b(mcap), db_l(mcap), db_s(mcap);
  std::vector<int> lags(static_cast<std::size_t>(mcap) * mcap);
  std::vector<int> lagk(mcap);

  for (int i = 0; i < p; ++i) {
    const auto& cset = plan.csets[i];
    const int m = static_cast<int>(cset.size());
    double d;
    if (m == 0) {
      d = kii0;
    } else {
      if (uniform) {
        const int oi = plan.order[i];
        for (int a = 0; a < m; ++a) {
          const int oa = plan.order[cset[a]];
          for (int c = 0; c <= a; ++c) {
            int lg = std::abs(oa - plan.order[cset[c]]);
            lags[a * mcap + c] = lg;
            A[a * mcap + c] = ev.lag_k[lg];
          }
          A[a * mcap + a] += params.nugget;
          lagk[a] = std::abs(oa - oi);
          kv[a] = ev.lag_k[lagk[a]];
        }
      } else {
        const double xi = ev.x[plan.order[i]];
        for (int a = 0; a < m; ++a) {
          const double xa = ev.x[plan.order[cset[a]]];
          for (int c = 0; c <= a; ++c)
            A[a * mcap + c] = kernel_eval(params, xa, ev.x[plan.order[cset[c]]]);
          A[a * mcap + a] += params.nugget;
          kv[a] = kernel_eval(params, xa, xi);
        }
      }
      // symmetrize upper part for the derivative products
      for (int a = 0; a < m; ++a)
        for (int c = a + 1; c < m; ++c) A[a * mcap + c] = A[c * mcap + a];

      std::copy(kv.begin(), kv.begin() + m, b.begin());
      // chol destroys the lower triangle; keep upper for dA * b products
      int bad = chol_inplace(A.data(), m, mcap);
      if (bad >= 0) throw NotPositiveDefiniteError(i);
      chol_solve(A.data(), m, mcap, b.data());
      d = kii0;
      for (int a = 0; a < m; ++a) d -= kv[a] * b[a];
    }
    if (!(d > 0.0) || !std::isfinite(d)) throw NotPositiveDefiniteError(i);

    const double inv_sd = 1.0 / std::sqrt(d);
    f.L.diag(i) = inv_sd;
    auto& vals = f.L.row_vals(i);
    for (int a = 0; a < m; ++a) vals[a] = -b[a] * inv_sd;
    f.cond_var[i] = d;

    if (with_gradients) {
      f.db[i][0].assign(m, 0.0);
      f.db[i][1].assign(m, 0.0);
      if (m == 0) {
        f.dd[i] = {dkii_l, dkii_s};
      } else {
        // rhs_a = dk_a - sum_c dA_ac * b_c for both parameters in one pass
        // over the shared lag indices
        double* rl = db_l.data();
        double* rs = db_s.data();
        if (uniform) {
          for (int a = 0; a < m; ++a) {
            double sl = 0.0, ss = 0.0;
            for (int c = 0; c < a; ++c) {
              int lg = lags[a * mcap + c];
              sl += ev.lag_dl[lg] * b[c];
              ss += ev.lag_ds[lg] * b[c];
            }
            for (int c = a; c < m; ++c) {
              int lg = lags[c * mcap + a];
              sl += ev.lag_dl[lg] * b[c];
              ss += ev.lag_ds[lg] * b[c];
            }
            rl[a] = ev.lag_dl[lagk[a]] - sl;
            rs[a] = ev.lag_ds[lagk[a]] - ss;
          }
        } else {
          for (int a = 0; a < m; ++a) {
            const double xa = ev.x[plan.order[cset[a]]];
            double sl = 0.0, ss = 0.0;
            for (int c = 0; c < m; ++c) {
              double r = std::abs(xa - ev.x[plan.order[cset[c]]]);
              sl += kernel_dlogl(params, r) * b[c];
              ss += kernel_dlogsigma(params, r) * b[c];
            }
            double r = std::abs(xa - ev.x[plan.order[i]]);
            rl[a] = kernel_dlogl(params, r) - sl;
            rs[a] = kernel_dlogsigma(params, r) - ss;
          }
        }
        chol_solve2(A.data(), m, mcap, rl, rs);
        double ddl = dkii_l, dds = dkii_s;
        for (int a = 0; a < m; ++a) {
          double dk_l, dk_s;
          if (uniform) {
            dk_l = ev.lag_dl[lagk[a]];
            dk_s = ev.lag_ds[lagk[a]];
          } else {
            const double xa = ev.x[plan.order[cset[a]]];
            double r = std::abs(xa - ev.x[plan.order[i]]);
            dk_l = kernel_dlogl(params, r);
            dk_s = kernel_dlogsigma(params, r);
          }
          ddl -= dk_l * b[a] + kv[a] * rl[a];
          dds -= dk_s * b[a] + kv[a] * rs[a];
        }
        f.dd[i][0] = ddl;
        f.dd[i][1] = dds;
        for (int a = 0; a < m; ++a) {
          f.db[i][0][a] = rl[a];
          f.db[i][1][a] = rs[a];
        }
      }
    }
  }
  return f;
}

SparseLowerTriangular vecchia_inverse_cholesky(const KernelParams& params, const Grid& grid,
                                               const VecchiaPlan& plan) {
  return build_vecchia_factor(params, grid, plan, false).L;
}

SparseLowerTriangular incomplete_cholesky(const Eigen::MatrixXd& Sigma, const VecchiaPlan& plan) {
  const int p = plan.size();
  if (Sigma.rows() != p || Sigma.cols() != p)
    throw std::invalid_argument("incomplete_cholesky: dimension mismatch");

  SparseLowerTriangular L(plan);
  for (int i = 0; i < p; ++i) {
    const auto& ci = plan.csets[i];
    auto& vi = L.row_vals(i);
    for (std::size_t a = 0; a < ci.size(); ++a) {
      const int j = ci[a];
      const auto& cj = plan.csets[j];
      const auto& vj = L.row_vals(j);
      // sum over columns u < j stored in both rows
      double s = 0.0;
      std::size_t ai = 0, aj = 0;
      while (ai < a && aj < cj.size()) {
        if (ci[ai] == cj[aj]) {
          s += vi[ai] * vj[aj];
          ++ai;
          ++aj;
        } else if (ci[ai] < cj[aj]) {
          ++ai;
        } else {
          ++aj;
        }
      }
      vi[a] = (Sigma(i, j) - s) / L.diag(j);
    }
    double s = Sigma(i, i);
    for (double v : vi) s -= v * v;
    if (!(s > 0.0)) throw NotPositiveDefiniteError(i);
    L.diag(i) = std::sqrt(s);
  }
  return L;
}

double vecchia_loglik(const Eigen::VectorXd& y, const SparseLowerTriangular& L) {
  if (y.size() != L.size()) throw std::invalid_argument("vecchia_loglik: dimension mismatch");
  const double p = static_cast<double>(L.size());
  const double log2pi = 1.8378770664093454835606594728112;
  double logdiag = 0.0;
  for (int i = 0; i < L.size(); ++i) logdiag += std::log(L.diag(i));
  return -0.5 * p * log2pi + logdiag - 0.5 * L.apply(y).squaredNorm();
}

Eigen::MatrixXd implied_covariance(const SparseLowerTriangular& L) {
  if (L.size() > 2000)
    throw std::invalid_argument("implied_covariance: refusing to densify p > 2000");
  Eigen::MatrixXd R = L.to_dense();
  Eigen::MatrixXd M = R.transpose() * R;
  return M.llt().solve(Eigen::MatrixXd::Identity(L.size(), L.size()));
}

}  // namespace gpclust
