#include "hierind/simgen.hpp"

#include <cmath>

#include "hierind/error.hpp"

namespace hierind {

namespace {
constexpr std::uint64_t kMeansStream = 1;
constexpr std::uint64_t kPatternsStream = 2;
}  // namespace

void SimConfig::validate() const {
  require(gamma0 > 0.0, "gamma0 must be positive");
  require(gamma1 > 0.0, "gamma1 must be positive");
  require(per_parent >= 1, "per_parent must be at least 1");
  require(n_per_class >= 2, "n_per_class must be at least 2");
  require(dim >= 2, "dim must be at least 2");
}

RowMatrix parent_centers(int dim) {
  RowMatrix centers = RowMatrix::Zero(kNumParents, dim);
  const double signs[kNumParents][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  for (int j = 0; j < kNumParents; ++j) {
    centers(j, 0) = signs[j][0];
    centers(j, 1) = signs[j][1];
  }
  return centers;
}

Type2Draw sample_type2_means(const SimConfig& cfg) {
  cfg.validate();
  Type2Draw draw;
  draw.parent_centers = parent_centers(cfg.dim);
  const int k = kNumParents * cfg.per_parent;
  draw.class_means.resize(k, cfg.dim);
  std::vector<int> parent(static_cast<std::size_t>(k));
  const double sd = std::sqrt(cfg.gamma0);
  Rng rng(cfg.seed.derive(kMeansStream));
  for (int j = 0; j < kNumParents; ++j) {
    for (int m = 0; m < cfg.per_parent; ++m) {
      const int cls = j * cfg.per_parent + m;
      parent[static_cast<std::size_t>(cls)] = j;
      for (int t = 0; t < cfg.dim; ++t) {
        draw.class_means(cls, t) = draw.parent_centers(j, t) + sd * rng.normal();
      }
    }
  }
  draw.truth = Hierarchy(std::move(parent));
  return draw;
}

LabeledDataset sample_patterns(const RowMatrix& class_means, double gamma1,
                               int n_per_class, RngSeed seed) {
  require(gamma1 > 0.0, "gamma1 must be positive");
  require(n_per_class >= 1, "n_per_class must be positive");
  const auto k = static_cast<int>(class_means.rows());
  const auto dim = class_means.cols();
  const double sd = std::sqrt(gamma1);
  RowMatrix x(static_cast<Eigen::Index>(k) * n_per_class, dim);
  std::vector<int> labels(static_cast<std::size_t>(k) * static_cast<std::size_t>(n_per_class));
  for (int c = 0; c < k; ++c) {
    Rng rng(seed.derive(static_cast<std::uint64_t>(c)));
    for (int s = 0; s < n_per_class; ++s) {
      const Eigen::Index row = static_cast<Eigen::Index>(c) * n_per_class + s;
      for (Eigen::Index t = 0; t < dim; ++t) {
        x(row, t) = class_means(c, t) + sd * rng.normal();
      }
      labels[static_cast<std::size_t>(row)] = c;
    }
  }
  return LabeledDataset(std::move(x), std::move(labels), k);
}

SimulatedWorld simulate_dataset(const SimConfig& cfg) {
  Type2Draw draw = sample_type2_means(cfg);
  SimulatedWorld world;
  world.dataset = sample_patterns(draw.class_means, cfg.gamma1, cfg.n_per_class,
                                  cfg.seed.derive(kPatternsStream));
  world.parent_centers = std::move(draw.parent_centers);
  world.class_means = std::move(draw.class_means);
  world.truth = std::move(draw.truth);
  return world;
}

}  // namespace hierind
