#include "gpclust/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace gpclust {

std::string family_name(KernelFamily f) {
  return f == KernelFamily::SquaredExponential ? "sqexp" : "matern12";
}

KernelFamily family_from_name(const std::string& name) {
  if (name == "sqexp" || name == "squared_exponential") return KernelFamily::SquaredExponential;
  if (name == "matern12" || name == "exponential") return KernelFamily::Matern12;
  throw std::invalid_argument("unknown kernel family: " + name);
}

void KernelParams::validate() const {
  if (!(l > 0.0) || !std::isfinite(l)) throw std::invalid_argument("kernel range l must be positive and finite");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("kernel scale sigma must be positive and finite");
  if (!(nugget >= 0.0) || !std::isfinite(nugget)) throw std::invalid_argument("nugget must be non-negative and finite");
}

Grid::Grid(std::vector<double> pts) : points(std::move(pts)) {
  if (points.empty()) throw std::invalid_argument("grid must contain at least one point");
  for (double x : points)
    if (!std::isfinite(x)) throw std::invalid_argument("grid points must be finite");
  for (std::size_t i = 1; i < points.size(); ++i)
    if (!(points[i] > points[i - 1]))
      throw std::invalid_argument("grid points must be strictly increasing");
}

Grid Grid::uniform(int p, double lo, double hi) {
  if (p < 1) throw std::invalid_argument("grid size must be >= 1");
  std::vector<double> pts(p);
  if (p == 1) {
    pts[0] = lo;
  } else {
    for (int i = 0; i < p; ++i) pts[i] = lo + (hi - lo) * static_cast<double>(i) / (p - 1);
  }
  return Grid(std::move(pts));
}

double Grid::uniform_spacing() const {
  if (points.size() < 2) return 0.0;
  double h = points[1] - points[0];
  for (std::size_t i = 2; i < points.size(); ++i) {
    double d = points[i] - points[i - 1];
    if (std::abs(d - h) > 1e-9 * std::max(1.0, std::abs(h))) return 0.0;
  }
  return h;
}

double kernel_eval(const KernelParams& params, double xi, double xj) {
  if (!std::isfinite(xi) || !std::isfinite(xj)) throw std::invalid_argument("kernel inputs must be finite");
  double r = std::abs(xi - xj);
  double s2 = params.sigma * params.sigma;
  switch (params.family) {
    case KernelFamily::SquaredExponential:
      return s2 * std::exp(-(r * r) / (params.l * params.l));
    case KernelFamily::Matern12:
      return s2 * std::exp(-r / params.l);
  }
  return 0.0;
}

double kernel_dlogl(const KernelParams& params, double r) {
  double k = kernel_eval(params, 0.0, r);
  switch (params.family) {
    case KernelFamily::SquaredExponential:
      return k * 2.0 * (r * r) / (params.l * params.l);
    case KernelFamily::Matern12:
      return k * r / params.l;
  }
  return 0.0;
}

double kernel_dlogsigma(const KernelParams& params, double r) {
  return 2.0 * kernel_eval(params, 0.0, r);
}

Eigen::MatrixXd build_covariance(const KernelParams& params, const Grid& grid) {
  params.validate();
  const int p = grid.size();
  Eigen::MatrixXd K(p, p);
  double h = grid.uniform_spacing();
  if (h > 0.0) {
    // Toeplitz fill: one kernel evaluation per distinct lag.
    std::vector<double> lag(p);
    for (int d = 0; d < p; ++d) lag[d] = kernel_eval(params, 0.0, d * h);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j <= i; ++j) K(i, j) = K(j, i) = lag[i - j];
  } else {
    for (int i = 0; i < p; ++i)
      for (int j = 0; j <= i; ++j)
        K(i, j) = K(j, i) = kernel_eval(params, grid.points[i], grid.points[j]);
  }
  K.diagonal().array() += params.nugget;
  return K;
}

}  // namespace gpclust
