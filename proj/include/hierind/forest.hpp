#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hierind/dataset.hpp"
#include "hierind/rng.hpp"

namespace hierind {

/// Record of which training rows shaped each tree and which rows were
/// counted into its leaf posteriors. Filled only when requested.
struct HonestyTrace {
  struct TreeTrace {
    std::vector<std::size_t> structure_rows;
    std::vector<std::size_t> estimation_rows;
    /// leaf_rows[leaf node index] = estimation rows counted in that leaf.
    std::vector<std::vector<std::size_t>> leaf_rows;
  };
  std::vector<TreeTrace> trees;
};

/// Honest ensemble of axis-aligned trees estimating the class-posterior
/// vector. Split structure is grown on one half of the data; leaf posteriors
/// are add-one smoothed class frequencies of the other half.
class UncertaintyForest {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int support = 0;  // estimation points routed here (leaves only)
  };

  struct Tree {
    std::vector<Node> nodes;  // root at index 0
    /// Row-major: posterior of node i occupies [i*k, (i+1)*k); unused for
    /// internal nodes.
    std::vector<double> posteriors;
  };

  UncertaintyForest() = default;
  UncertaintyForest(int num_classes, int feature_dim, int max_depth,
                    std::vector<Tree> trees);

  int num_classes() const { return k_; }
  int feature_dim() const { return feature_dim_; }
  int max_depth() const { return max_depth_; }
  int num_trees() const { return static_cast<int>(trees_.size()); }
  const std::vector<Tree>& trees() const { return trees_; }

  /// Mean over trees of the posterior of the leaf containing x.
  Vector predict_posterior(std::span<const double> x) const;
  Vector predict_posterior(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  int predict_class(std::span<const double> x) const;

  /// Posterior rows for every row of `points` (n x k).
  Matrix predict_posteriors(const RowMatrix& points) const;
  std::vector<int> predict_classes(const RowMatrix& points) const;

  /// Same partitions, leaf posteriors recomputed from `ds` with add-one
  /// smoothing. `ds` may use a different label space.
  UncertaintyForest reestimate(const LabeledDataset& ds) const;

  /// Index of the leaf of `tree` containing x.
  static int route(const Tree& tree, const double* x);

  nlohmann::json to_json() const;
  static UncertaintyForest from_json(const nlohmann::json& j);

  friend bool operator==(const UncertaintyForest& a, const UncertaintyForest& b);

 private:
  int k_ = 0;
  int feature_dim_ = 0;
  int max_depth_ = 0;
  std::vector<Tree> trees_;
};

/// Argmax with ties to the lowest index.
int argmax(const Vector& v);

/// Trains n_trees honest trees. For each tree the rows are ranked by a key
/// hashed from the tree seed and the row's feature values; the first half
/// grows the structure (Gini, all features, midpoint thresholds, Poisson(1)
/// bootstrap weights) and the second half estimates leaf posteriors.
/// Because every random choice is keyed by row content, permuting the input
/// rows yields the identical forest.
UncertaintyForest fit_forest(const LabeledDataset& ds, int n_trees, int max_depth,
                             RngSeed seed, unsigned threads = 1,
                             HonestyTrace* trace = nullptr);

}  // namespace hierind
