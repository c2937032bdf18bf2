#pragma once

#include "hierind/dataset.hpp"
#include "hierind/hierarchy.hpp"
#include "hierind/rng.hpp"

namespace hierind {

/// Two-level Gaussian world. Four parent centres at (+-1, +-1) (padded with
/// zeros when dim > 2); class means drawn around each centre with variance
/// gamma0 per coordinate; patterns drawn around each class mean with
/// variance gamma1 per coordinate.
struct SimConfig {
  double gamma0 = 1.0;
  double gamma1 = 1.0;
  int per_parent = 5;
  int n_per_class = 50;
  int dim = 2;
  RngSeed seed{};

  void validate() const;
};

inline constexpr int kNumParents = 4;

struct Type2Draw {
  RowMatrix parent_centers;  // 4 x dim
  RowMatrix class_means;     // k x dim, k = 4 * per_parent
  Hierarchy truth;
};

struct SimulatedWorld {
  RowMatrix parent_centers;
  RowMatrix class_means;
  Hierarchy truth;
  LabeledDataset dataset;
};

RowMatrix parent_centers(int dim);

/// Class means, parent-major: classes [j*per_parent, (j+1)*per_parent) belong
/// to parent j.
Type2Draw sample_type2_means(const SimConfig& cfg);

/// Draws n_per_class patterns for each given class mean. Each class uses its
/// own substream of `seed`, so the draw for class i does not depend on the
/// other classes.
LabeledDataset sample_patterns(const RowMatrix& class_means, double gamma1,
                               int n_per_class, RngSeed seed);

SimulatedWorld simulate_dataset(const SimConfig& cfg);

}  // namespace hierind
