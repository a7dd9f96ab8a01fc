#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace gpclust {

enum class KernelFamily { SquaredExponential, Matern12 };

std::string family_name(KernelFamily f);
KernelFamily family_from_name(const std::string& name);

/// Stationary covariance kernel parameters. The nugget is added to the
/// diagonal only (by build_covariance and the Vecchia factor), never inside
/// kernel_eval.
struct KernelParams {
  KernelFamily family = KernelFamily::SquaredExponential;
  double l = 1.0;       // range, input units
  double sigma = 1.0;   // scale, response units
  double nugget = 0.0;  // diagonal jitter, variance units

  static double default_nugget(double sigma) { return 1e-8 * sigma * sigma; }

  void validate() const;  // throws std::invalid_argument
};

/// 1-D input grid; strictly increasing, finite, at least one point.
struct Grid {
  std::vector<double> points;

  explicit Grid(std::vector<double> pts);
  int size() const { return static_cast<int>(points.size()); }

  static Grid uniform(int p, double lo = 0.0, double hi = 1.0);
  /// Constant spacing (within 1e-9 relative), or 0 if the grid is not uniform.
  double uniform_spacing() const;
};

/// Kernel value at a pair of inputs (no nugget).
double kernel_eval(const KernelParams& params, double xi, double xj);

/// Derivatives of the kernel value at distance r with respect to log(l)
/// and log(sigma). Nugget is treated as a constant.
double kernel_dlogl(const KernelParams& params, double r);
double kernel_dlogsigma(const KernelParams& params, double r);

/// Dense covariance matrix with nugget on the diagonal. Built symmetrically;
/// uniform grids use a Toeplitz fill from the p distinct distances.
Eigen::MatrixXd build_covariance(const KernelParams& params, const Grid& grid);

}  // namespace gpclust
