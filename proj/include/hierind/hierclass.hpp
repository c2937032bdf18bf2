#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "hierind/dataset.hpp"
#include "hierind/forest.hpp"
#include "hierind/hierarchy.hpp"
#include "hierind/numcluster.hpp"
#include "hierind/rng.hpp"
#include "hierind/tasksim.hpp"

namespace hierind {

// ---------------------------------------------------------------------------
// Hierarchy induction

enum class InductionMethod { kCondMean, kTaskSim, kRandomMatched, kTruth };

std::string to_string(InductionMethod method);
InductionMethod parse_induction_method(const std::string& text);

struct InductionConfig {
  InductionMethod method = InductionMethod::kCondMean;
  int pca_dim = 128;
  int embed_dim = 16;
  /// Number of coarse labels; BIC over [bic_min, bic_max] when unset.
  std::optional<int> coarse_k;
  int bic_min = 2;
  int bic_max = 0;  // 0 = min(k - 1, max(2, 2 * ceil(sqrt(k))))
  int n_refs = 10;
  CovarianceMode mode = CovarianceMode::kTiedFull;
  int restarts = 10;
  TaskSimOptions tasksim{};
  RngSeed seed{};
  unsigned threads = 1;

  void validate() const;
};

/// Intermediate products of an induction run, for diagnostics dumps.
struct InductionDiagnostics {
  int chosen_c = 0;
  std::vector<std::pair<int, double>> bic_table;
  Matrix points;                       // the k points that were clustered
  std::optional<Matrix> similarity;    // processed, task-sim only
  std::optional<Vector> eigenvalues;   // task-sim only
  std::vector<std::string> warnings;
};

/// Clusters the class means (after PCA to pca_dim when d > pca_dim) with a
/// Gaussian mixture.
Hierarchy induce_cond_mean(const LabeledDataset& ds, const InductionConfig& cfg,
                           InductionDiagnostics* diag = nullptr);

/// Pairwise task similarity -> process -> adjacency spectral embedding ->
/// Gaussian mixture.
Hierarchy induce_task_sim(const LabeledDataset& ds, const InductionConfig& cfg,
                          InductionDiagnostics* diag = nullptr);

/// The embedding + clustering tail of induce_task_sim, for a given processed
/// similarity matrix. embed_dim above k is capped to k with a warning.
Hierarchy induce_from_similarity(const Matrix& similarity, const InductionConfig& cfg,
                                 InductionDiagnostics* diag = nullptr);

/// Uniformly random relabeling of the leaves that keeps every coarse id's
/// cluster size.
Hierarchy random_matched(const Hierarchy& h, RngSeed seed);

/// Cluster count picked by BIC default range for k classes.
int default_bic_max(int k);

// ---------------------------------------------------------------------------
// Chain-rule classifier

/// Trees per forest and depth.
struct ForestBudget {
  int coarse_trees = 10;
  int fine_trees = 5;
  int hier_depth = 20;
  int flat_trees = 30;
  int flat_depth = 20;
};

/// Leaf posterior p(leaf | x) = p(leaf | coarse(leaf), x) * p(coarse(leaf) | x)
/// with one forest over coarse labels and one forest per coarse label over
/// its leaves (trained on that coarse label's rows only).
class HierarchicalClassifier {
 public:
  HierarchicalClassifier() = default;
  HierarchicalClassifier(Hierarchy hierarchy, UncertaintyForest coarse,
                         std::vector<UncertaintyForest> fine);

  const Hierarchy& hierarchy() const { return hierarchy_; }
  const UncertaintyForest& coarse_forest() const { return coarse_; }
  const std::vector<UncertaintyForest>& fine_forests() const { return fine_; }
  int num_leaves() const { return hierarchy_.num_leaves(); }
  int feature_dim() const { return coarse_.feature_dim(); }
  /// coarse trees + sum of fine trees.
  int tree_count() const;

  Vector predict_leaf_posterior(std::span<const double> x) const;
  Matrix predict_leaf_posteriors(const RowMatrix& points) const;
  std::vector<int> predict_classes(const RowMatrix& points) const;

  nlohmann::json to_json() const;
  static HierarchicalClassifier from_json(const nlohmann::json& j);

  /// Seeds used for the sub-forests. The fine seed is keyed by the smallest
  /// leaf id of the group so that renaming coarse ids changes nothing.
  static RngSeed coarse_seed(RngSeed seed) { return seed.derive(0xc0a75e); }
  static RngSeed fine_seed(RngSeed seed, int smallest_leaf) {
    return seed.derive(0xf1e, static_cast<std::uint64_t>(smallest_leaf));
  }

 private:
  Hierarchy hierarchy_;
  UncertaintyForest coarse_;
  std::vector<UncertaintyForest> fine_;
};

/// Forest whose trees are single leaves with posterior [1].
UncertaintyForest trivial_forest(int n_trees, int feature_dim, int max_depth);

HierarchicalClassifier fit_hierarchical(const LabeledDataset& ds, const Hierarchy& h,
                                        int coarse_trees, int fine_trees, int max_depth,
                                        RngSeed seed, unsigned threads = 1);

UncertaintyForest fit_flat(const LabeledDataset& ds, int n_trees, int max_depth, RngSeed seed,
                           unsigned threads = 1);

// ---------------------------------------------------------------------------
// Model files used by the train / predict commands.

struct SavedModel {
  std::vector<std::string> class_names;
  std::variant<UncertaintyForest, HierarchicalClassifier> model;

  int num_classes() const;
  int feature_dim() const;
  Matrix predict_posteriors(const RowMatrix& points) const;
};

void save_model(const SavedModel& model, const std::string& path);
SavedModel load_model(const std::string& path);

}  // namespace hierind
