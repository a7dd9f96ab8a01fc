#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "gpclust/kernels.hpp"

namespace gpclust {

/// Normalized mutual information between two label vectors, geometric-mean
/// normalization with natural logs. Conventions: 1 if both partitions are
/// constant, 0 if exactly one is.
double nmi(const std::vector<int>& a, const std::vector<int>& b);

/// KL( N(0, K1) || N(0, K2) ), both SPD.
double gaussian_kl(const Eigen::MatrixXd& K1, const Eigen::MatrixXd& K2);

/// KL between the true covariance and the Vecchia-implied one, for each
/// conditioning-set size in `ms` (ascending). Non-increasing in m.
std::vector<std::pair<int, double>> vecchia_kl_curve(const KernelParams& params,
                                                     const Grid& grid,
                                                     const std::vector<int>& ms);

}  // namespace gpclust
