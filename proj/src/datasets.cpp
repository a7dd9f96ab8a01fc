#include "gpclust/datasets.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gpclust/dense.hpp"
#include "gpclust/rng.hpp"

namespace gpclust {

ScenarioSpec ScenarioSpec::standard(int scenario, std::uint64_t seed, int p,
                                    int curves_per_cluster) {
  ScenarioSpec spec;
  spec.p = p;
  spec.seed = seed;
  auto mk = [](double l, double sigma) {
    KernelParams k;
    k.family = KernelFamily::SquaredExponential;
    k.l = l;
    k.sigma = sigma;
    k.nugget = KernelParams::default_nugget(sigma);
    return k;
  };
  if (scenario == 1) {
    spec.clusters = {mk(0.2, 0.2), mk(0.5, 0.3)};
  } else if (scenario == 2) {
    spec.clusters = {mk(0.2, 0.5), mk(0.5, 0.2)};
  } else {
    throw std::invalid_argument("unknown scenario: " + std::to_string(scenario));
  }
  spec.counts = {curves_per_cluster, curves_per_cluster};
  return spec;
}

Dataset simulate_mixture(const ScenarioSpec& spec) {
  if (spec.clusters.empty() || spec.clusters.size() != spec.counts.size())
    throw std::invalid_argument("simulate_mixture: clusters and counts must match and be non-empty");
  for (int c : spec.counts)
    if (c <= 0) throw std::invalid_argument("simulate_mixture: counts must be positive");

  Grid grid = Grid::uniform(spec.p, 0.0, 1.0);
  int n = 0;
  for (int c : spec.counts) n += c;

  Dataset ds{grid, Eigen::MatrixXd(n, spec.p), {}, std::vector<int>(n)};
  int row = 0;
  for (std::size_t g = 0; g < spec.clusters.size(); ++g) {
    spec.clusters[g].validate();
    for (int c = 0; c < spec.counts[g]; ++c, ++row) {
      ds.curves.row(row) = sample_gp(spec.clusters[g], grid, derive_seed(spec.seed, row));
      (*ds.truth)[row] = static_cast<int>(g) + 1;
      ds.names.push_back("curve_" + std::to_string(row + 1));
    }
  }
  return ds;
}

namespace {

std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_cell(const std::string& cell, int row, int col) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != cell.size() || cell.empty())
    throw std::invalid_argument("CSV parse error at row " + std::to_string(row) + ", column " +
                                std::to_string(col) + ": non-numeric cell '" + cell + "'");
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty CSV file: " + path);
  std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 2) throw std::invalid_argument("CSV must have a grid column and at least one curve column");
  const int ncols = static_cast<int>(header.size());

  std::vector<double> gridpts;
  std::vector<std::vector<double>> cols(ncols - 1);
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != ncols)
      throw std::invalid_argument("CSV parse error at row " + std::to_string(row) + ": expected " +
                                  std::to_string(ncols) + " cells, got " + std::to_string(cells.size()));
    gridpts.push_back(parse_cell(cells[0], row, 1));
    for (int c = 1; c < ncols; ++c) cols[c - 1].push_back(parse_cell(cells[c], row, c + 1));
  }
  if (gridpts.empty()) throw std::invalid_argument("CSV has a header but no data rows: " + path);
  for (std::size_t i = 1; i < gridpts.size(); ++i)
    if (gridpts[i] == gridpts[i - 1])
      throw std::invalid_argument("CSV parse error at row " + std::to_string(i + 2) +
                                  ", column 1: duplicate grid value");

  const int p = static_cast<int>(gridpts.size());
  Dataset ds{Grid(std::move(gridpts)), Eigen::MatrixXd(ncols - 1, p), {}, std::nullopt};
  for (int c = 0; c < ncols - 1; ++c) {
    ds.names.push_back(header[c + 1]);
    for (int j = 0; j < p; ++j) ds.curves(c, j) = cols[c][j];
  }
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "x";
  for (int i = 0; i < ds.n_curves(); ++i)
    out << "," << (i < static_cast<int>(ds.names.size()) ? ds.names[i] : "curve_" + std::to_string(i + 1));
  out << "\n";
  char buf[32];
  for (int j = 0; j < ds.n_points(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.17g", ds.grid.points[j]);
    out << buf;
    for (int i = 0; i < ds.n_curves(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.curves(i, j));
      out << "," << buf;
    }
    out << "\n";
  }
}

void write_labels_csv(const std::vector<int>& labels, const std::vector<std::string>& names,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "curve,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << (i < names.size() ? names[i] : "curve_" + std::to_string(i + 1)) << "," << labels[i] << "\n";
  }
}

std::vector<int> load_labels_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty labels file: " + path);
  std::vector<int> labels;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != 2)
      throw std::invalid_argument("labels CSV parse error at row " + std::to_string(row));
    labels.push_back(static_cast<int>(parse_cell(cells[1], row, 2)));
  }
  if (labels.empty()) throw std::invalid_argument("labels CSV has no data rows: " + path);
  return labels;
}

Dataset moving_average(const Dataset& ds, int window) {
  const int p = ds.n_points();
  if (window < 1 || window > p || window % 2 == 0)
    throw std::invalid_argument("moving_average: window must be odd, >= 1 and <= p");
  const int q = p - window + 1;
  const int half = window / 2;

  std::vector<double> gridpts(ds.grid.points.begin() + half, ds.grid.points.begin() + half + q);
  Dataset out{Grid(std::move(gridpts)), Eigen::MatrixXd(ds.n_curves(), q), ds.names, ds.truth};
  for (int i = 0; i < ds.n_curves(); ++i)
    for (int j = 0; j < q; ++j) out.curves(i, j) = ds.curves.row(i).segment(j, window).mean();
  return out;
}

}  // namespace gpclust
