#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpclust/datasets.hpp"
#include "gpclust/kernels.hpp"

namespace gpclust {

enum class BackendKind { Exact, Vecchia };
enum class GradientMode { Analytic, CentralFD };

/// Zero-mean GP mixture: weights and per-component kernel parameters.
struct MixtureModel {
  std::vector<double> weights;
  std::vector<KernelParams> components;

  int n_components() const { return static_cast<int>(weights.size()); }
  void validate() const;
};

struct FitConfig {
  BackendKind backend = BackendKind::Exact;
  KernelFamily family = KernelFamily::SquaredExponential;
  int m = 0;  // conditioning-set size, Vecchia backend only
  double learning_rate = 1e-2;
  int max_iters = 500;
  double tol = 1e-6;  // relative change of the observed-data log-likelihood
  int restarts = 5;
  std::uint64_t seed = 0;
  GradientMode gradient_mode = GradientMode::Analytic;
  double fd_step = 1e-5;
  int threads = 0;  // 0 = all available; results are thread-count independent
};

struct FitTimings {
  double e_seconds = 0.0;
  double m_seconds = 0.0;
  double total_seconds = 0.0;
};

struct FitResult {
  MixtureModel model;
  Eigen::MatrixXd responsibilities;  // N x G, rows sum to 1
  std::vector<int> labels;           // 1-based, argmax per row
  std::vector<double> objective_trace;  // observed-data log-likelihood per iteration
  int iterations = 0;
  FitTimings wall_times;
  std::vector<std::string> warnings;
};

struct DegenerateComponentError : std::runtime_error {
  int component;
  explicit DegenerateComponentError(int g)
      : std::runtime_error("component " + std::to_string(g + 1) +
                           " stayed degenerate after re-seeding"),
        component(g) {}
};

/// Per-component Gaussian log-density provider. prepare() refactorizes for
/// the given parameters and fills the N x G log-likelihood matrix.
class LikelihoodBackend {
 public:
  virtual ~LikelihoodBackend() = default;
  virtual void prepare(const MixtureModel& model) = 0;
  virtual const Eigen::MatrixXd& logliks() const = 0;
  /// d/d(log l, log sigma) of sum_i w_i * loglik_g(y_i), at the prepared params.
  virtual std::array<double, 2> weighted_grad(int g, const Eigen::VectorXd& w) = 0;
  /// sum_i w_i * loglik(y_i; params), independent of the prepared state.
  virtual double weighted_objective(const KernelParams& params, const Eigen::VectorXd& w) = 0;
  /// loglik(y_i; params) for every curve, independent of the prepared state.
  virtual Eigen::VectorXd per_curve_loglik(const KernelParams& params) = 0;
};

std::unique_ptr<LikelihoodBackend> make_backend(const Dataset& ds, const FitConfig& cfg);

Eigen::MatrixXd e_step(const Dataset& ds, const MixtureModel& model, LikelihoodBackend& backend);

MixtureModel m_step(const Dataset& ds, const Eigen::MatrixXd& W, const MixtureModel& model,
                    const FitConfig& cfg, LikelihoodBackend& backend);

FitResult fit(const Dataset& ds, int G, const FitConfig& cfg);

std::vector<int> assign_clusters(const Eigen::MatrixXd& W);

}  // namespace gpclust
