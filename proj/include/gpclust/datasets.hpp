#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gpclust/kernels.hpp"

namespace gpclust {

/// N curves observed on a shared grid; `truth` is present for synthetic data.
struct Dataset {
  Grid grid;
  Eigen::MatrixXd curves;  // N x p
  std::vector<std::string> names;
  std::optional<std::vector<int>> truth;

  int n_curves() const { return static_cast<int>(curves.rows()); }
  int n_points() const { return static_cast<int>(curves.cols()); }
};

/// Synthetic GP mixture: per-cluster kernels and curve counts on a uniform
/// grid over [0, 1].
struct ScenarioSpec {
  std::vector<KernelParams> clusters;
  std::vector<int> counts;
  int p = 300;
  std::uint64_t seed = 0;

  /// The two simulation settings used throughout: 1 = hard
  /// ((0.2,0.2) vs (0.5,0.3)), 2 = easy ((0.2,0.5) vs (0.5,0.2)).
  static ScenarioSpec standard(int scenario, std::uint64_t seed, int p = 300,
                               int curves_per_cluster = 10);
};

Dataset simulate_mixture(const ScenarioSpec& spec);

/// CSV schema: header row; column 1 is the grid, each further column one
/// curve. Decimal point, comma separator, UTF-8, LF or CRLF.
Dataset load_csv(const std::string& path);
void write_csv(const Dataset& ds, const std::string& path);

/// Labels CSV: header "curve,label", one row per curve.
void write_labels_csv(const std::vector<int>& labels, const std::vector<std::string>& names,
                      const std::string& path);
std::vector<int> load_labels_csv(const std::string& path);

/// Centered moving average with truncation; output length p - window + 1.
Dataset moving_average(const Dataset& ds, int window);

}  // namespace gpclust
