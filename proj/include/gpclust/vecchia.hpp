#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "gpclust/kernels.hpp"

namespace gpclust {

/// Maximin ordering and nearest-neighbor conditioning sets. Everything here
/// is pure geometry: it is computed once per grid and shared across mixture
/// components and iterations.
struct VecchiaPlan {
  std::vector<int> order;               // ordered position -> original grid index
  std::vector<std::vector<int>> csets;  // per ordered position, earlier positions
                                        // it conditions on, sorted ascending
  int m = 0;

  int size() const { return static_cast<int>(order.size()); }
  /// Number of (row, col) pairs in the sparsity pattern, diagonal included.
  long pattern_size() const;
};

/// Greedy maximin ordering. First point: nearest to the grid centroid
/// (smallest index on ties); each next point maximizes the minimum distance
/// to the already-ordered ones (smallest index on ties).
std::vector<int> maximin_order(const Grid& grid);

VecchiaPlan build_plan(const Grid& grid, int m);

/// Row-compressed lower-triangular matrix whose support is a plan's pattern:
/// row i holds the diagonal plus values at the columns in csets[i].
class SparseLowerTriangular {
 public:
  SparseLowerTriangular() = default;
  SparseLowerTriangular(const VecchiaPlan& plan);

  int size() const { return static_cast<int>(diag_.size()); }
  long nnz_offdiag() const;

  double diag(int i) const { return diag_[i]; }
  double& diag(int i) { return diag_[i]; }
  const std::vector<int>& row_cols(int i) const { return *cols_[i]; }
  const std::vector<double>& row_vals(int i) const { return vals_[i]; }
  std::vector<double>& row_vals(int i) { return vals_[i]; }

  /// L * y.
  Eigen::VectorXd apply(const Eigen::VectorXd& y) const;
  Eigen::MatrixXd to_dense() const;

 private:
  std::vector<const std::vector<int>*> cols_;  // borrowed from the plan
  std::vector<std::vector<double>> vals_;
  std::vector<double> diag_;
};

/// Per-column conditional solves and (optionally) their derivatives with
/// respect to (log l, log sigma), as produced by build_vecchia_factor.
struct VecchiaFactor {
  SparseLowerTriangular L;          // row i: 1/sqrt(d_i) on diag, -b_i/sqrt(d_i) off
  std::vector<double> cond_var;     // d_i
  // gradient blocks, filled when with_gradients is set
  std::vector<std::array<std::vector<double>, 2>> db;  // per row, per parameter
  std::vector<std::array<double, 2>> dd;
};

/// Ordered-conditional construction of the sparse factor of the Vecchia
/// precision: with R = factor.L (rows in ordered coordinates), R^T R equals
/// the inverse of the Vecchia-implied covariance. Uniform grids use a lag
/// table so each distinct kernel value is evaluated once per build.
VecchiaFactor build_vecchia_factor(const KernelParams& params, const Grid& grid,
                                   const VecchiaPlan& plan, bool with_gradients = false);

/// Convenience wrapper: just the factor, no gradient blocks.
SparseLowerTriangular vecchia_inverse_cholesky(const KernelParams& params, const Grid& grid,
                                               const VecchiaPlan& plan);

/// Incomplete Cholesky of a dense SPD matrix restricted to the plan's
/// pattern: L * L^T approximates Sigma, exact when the pattern is full.
SparseLowerTriangular incomplete_cholesky(const Eigen::MatrixXd& Sigma, const VecchiaPlan& plan);

/// log N_p(y; 0, Khat) with Khat the Vecchia-implied covariance. `y` must
/// already be in ordered coordinates.
double vecchia_loglik(const Eigen::VectorXd& y, const SparseLowerTriangular& L);

/// Densified (R^T R)^{-1}, for validation only (guard p <= 2000).
Eigen::MatrixXd implied_covariance(const SparseLowerTriangular& L);

}  // namespace gpclust
