#pragma once

#include <vector>

#include "hierind/dataset.hpp"
#include "hierind/rng.hpp"

namespace hierind {

/// Forest used inside every directed similarity evaluation.
struct TaskSimOptions {
  int n_trees = 10;
  int max_depth = 10;
  /// Smallest sample set accepted; each set is cut into up to three parts.
  int min_points = 4;
};

/// k x k matrix of pairwise similarities between class-conditional
/// distributions.
struct SimilarityMatrix {
  Matrix values;
  int n_refs = 0;
};

/// Transfer accuracy TS(F', G') where F' = F vs H and G' = G vs H.
///
/// H is split into two disjoint halves (one per task) and each task is
/// balanced by subsampling both sides to the same size. An honest forest is
/// fit on F' (its structure half learns the partition); the leaf votes are
/// re-estimated on one half of G' and the transferred rule is scored on the
/// other half. Returns a value in [0, 1].
double task_similarity_directed(const RowMatrix& f, const RowMatrix& g, const RowMatrix& h,
                                RngSeed seed, const TaskSimOptions& options = {});

/// Mean over references of (TS(F', G') + TS(G', F')) / 2. Both directions and
/// every reference use the same seed, so the result is symmetric in F and G
/// and a repeated reference contributes identical terms.
double symmetrized_similarity(const RowMatrix& f, const RowMatrix& g,
                              const std::vector<const RowMatrix*>& refs, RngSeed seed,
                              const TaskSimOptions& options = {});

/// Min-max rescales the off-diagonal entries to [0, 1] and sets the diagonal
/// to 1. A constant off-diagonal maps to 0.5.
SimilarityMatrix process_matrix(const Matrix& raw, int n_refs = 0);

/// For each unordered pair (i, j), n_refs reference classes are drawn from
/// the other k - 2 classes (without replacement when possible) on a substream
/// keyed by (i, j); the symmetrized similarities fill (i, j) and (j, i). The
/// raw matrix is then processed with process_matrix.
SimilarityMatrix pairwise_similarity_matrix(const LabeledDataset& ds, int n_refs, RngSeed seed,
                                            unsigned threads = 1,
                                            const TaskSimOptions& options = {},
                                            Matrix* raw_out = nullptr);

}  // namespace hierind
