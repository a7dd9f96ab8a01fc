#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <utility>

#include "gpclust/kernels.hpp"

namespace gpclust {

/// Thrown when a matrix that should be SPD is not; `index` is the pivot
/// (0-based) at which the factorization failed.
struct NotPositiveDefiniteError : std::runtime_error {
  int index;
  explicit NotPositiveDefiniteError(int idx)
      : std::runtime_error("matrix is not positive definite (failing pivot " + std::to_string(idx) + ")"),
        index(idx) {}
};

/// Lower-triangular L with L * L^T = K.
Eigen::MatrixXd dense_cholesky(const Eigen::MatrixXd& K);

/// log N_p(y; 0, K).
double gaussian_loglik_exact(const Eigen::VectorXd& y, const Eigen::MatrixXd& K);

/// Gradient of log N_p(y; 0, K(l, sigma)) with respect to (l, sigma).
/// Nugget is held constant.
std::pair<double, double> loglik_gradient_exact(const Eigen::VectorXd& y,
                                                const KernelParams& params,
                                                const Grid& grid);

/// One zero-mean GP draw on the grid: L * z with z i.i.d. standard normal
/// from a SplitMix64 stream at `seed`. Bit-for-bit reproducible.
Eigen::VectorXd sample_gp(const KernelParams& params, const Grid& grid, std::uint64_t seed);

}  // namespace gpclust
