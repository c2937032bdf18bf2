#include "hierind/tasksim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hierind/error.hpp"
#include "hierind/forest.hpp"
#include "hierind/parallel.hpp"

namespace hierind {

namespace {

RowMatrix take_rows(const RowMatrix& source, const std::vector<std::size_t>& rows,
                    std::size_t begin, std::size_t end) {
  RowMatrix out(static_cast<Eigen::Index>(end - begin), source.cols());
  for (std::size_t i = begin; i < end; ++i) {
    out.row(static_cast<Eigen::Index>(i - begin)) = source.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

// Positive side labelled 1, reference side labelled 0.
LabeledDataset binary_task(const RowMatrix& positive, const RowMatrix& reference) {
  RowMatrix x(positive.rows() + reference.rows(), positive.cols());
  x << positive, reference;
  std::vector<int> y(static_cast<std::size_t>(x.rows()), 0);
  std::fill(y.begin(), y.begin() + positive.rows(), 1);
  return LabeledDataset(std::move(x), std::move(y), 2);
}

}  // namespace

double task_similarity_directed(const RowMatrix& f, const RowMatrix& g, const RowMatrix& h,
                                RngSeed seed, const TaskSimOptions& options) {
  const auto min_points = static_cast<Eigen::Index>(std::max(options.min_points, 4));
  if (f.rows() < min_points || g.rows() < min_points || h.rows() < min_points) {
    fail(ErrorCode::kPrecondition,
         "task similarity: sample set too small to split three ways (need >= " +
             std::to_string(min_points) + " points per set)");
  }
  require(f.cols() == g.cols() && f.cols() == h.cols(), "task similarity: dimension mismatch");
  Rng rng(seed);

  const auto h_rows = rng.permutation(static_cast<std::size_t>(h.rows()));
  const std::size_t h_half = h_rows.size() / 2;
  const RowMatrix h_source = take_rows(h, h_rows, 0, h_half);
  const RowMatrix h_target = take_rows(h, h_rows, h_half, h_rows.size());

  // Source task F' = F vs H, balanced.
  const auto m_f = std::min<std::size_t>(static_cast<std::size_t>(f.rows()), h_half);
  const auto f_pick = rng.sample_without_replacement(static_cast<std::size_t>(f.rows()), m_f);
  const auto hs_pick = rng.sample_without_replacement(h_half, m_f);
  const LabeledDataset source =
      binary_task(take_rows(f, f_pick, 0, m_f), take_rows(h_source, hs_pick, 0, m_f));

  // Target task G' = G vs H, balanced, cut into two folds. Votes come from
  // one fold and accuracy from the other, then the roles swap, so every G'
  // point is scored exactly once and never by votes it contributed to.
  const std::size_t h_target_n = h_rows.size() - h_half;
  const auto m_g = std::min<std::size_t>(static_cast<std::size_t>(g.rows()), h_target_n);
  const auto g_pick = rng.sample_without_replacement(static_cast<std::size_t>(g.rows()), m_g);
  const auto ht_pick = rng.sample_without_replacement(h_target_n, m_g);
  const std::size_t cut = m_g / 2;
  const LabeledDataset fold_a =
      binary_task(take_rows(g, g_pick, 0, cut), take_rows(h_target, ht_pick, 0, cut));
  const LabeledDataset fold_b =
      binary_task(take_rows(g, g_pick, cut, m_g), take_rows(h_target, ht_pick, cut, m_g));

  const UncertaintyForest forest =
      fit_forest(source, options.n_trees, options.max_depth, seed.derive(0x7a5c));
  std::size_t correct = 0;
  std::size_t scored = 0;
  for (const auto& [votes, test] : {std::pair{&fold_a, &fold_b}, std::pair{&fold_b, &fold_a}}) {
    const std::vector<int> predicted = forest.reestimate(*votes).predict_classes(test->features());
    for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == test->labels()[i] ? 1 : 0;
    scored += predicted.size();
  }
  return static_cast<double>(correct) / static_cast<double>(scored);
}

double symmetrized_similarity(const RowMatrix& f, const RowMatrix& g,
                              const std::vector<const RowMatrix*>& refs, RngSeed seed,
                              const TaskSimOptions& options) {
  require(!refs.empty(), "symmetrized_similarity needs at least one reference");
  double sum = 0.0;
  for (const RowMatrix* h : refs) {
    sum += 0.5 * (task_similarity_directed(f, g, *h, seed, options) +
                  task_similarity_directed(g, f, *h, seed, options));
  }
  return sum / static_cast<double>(refs.size());
}

SimilarityMatrix process_matrix(const Matrix& raw, int n_refs) {
  const Eigen::Index k = raw.rows();
  require(raw.cols() == k && k >= 1, "process_matrix: matrix must be square");
  require(raw.allFinite(), "process_matrix: non-finite entries");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      require(std::abs(raw(i, j) - raw(j, i)) <= 1e-12, "process_matrix: matrix is not symmetric");
      lo = std::min(lo, raw(i, j));
      hi = std::max(hi, raw(i, j));
    }
  }
  SimilarityMatrix out;
  out.n_refs = n_refs;
  out.values = Matrix::Identity(k, k);
  const double span = hi - lo;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const double v = span > 0.0 ? (raw(i, j) - lo) / span : 0.5;
      out.values(i, j) = v;
      out.values(j, i) = v;
    }
  }
  return out;
}

SimilarityMatrix pairwise_similarity_matrix(const LabeledDataset& ds, int n_refs, RngSeed seed,
                                            unsigned threads, const TaskSimOptions& options,
                                            Matrix* raw_out) {
  const int k = ds.num_classes();
  require(k >= 3, "pairwise similarity needs k >= 3 classes");
  require(n_refs >= 1, "n_refs must be at least 1");
  const std::vector<RowMatrix> blocks = class_conditional_split(ds);
  for (int c = 0; c < k; ++c) {
    if (blocks[static_cast<std::size_t>(c)].rows() < std::max(options.min_points, 4)) {
      fail(ErrorCode::kPrecondition, "class " + std::to_string(c) + " has too few samples (" +
                                         std::to_string(blocks[static_cast<std::size_t>(c)].rows()) +
                                         ") for task similarity");
    }
  }

  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) pairs.emplace_back(i, j);
  }
  std::vector<double> values(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    const RngSeed pair_seed = seed.derive(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j));
    std::vector<int> candidates;
    for (int c = 0; c < k; ++c) {
      if (c != i && c != j) candidates.push_back(c);
    }
    Rng rng(pair_seed.derive(0));
    std::vector<const RowMatrix*> refs;
    if (static_cast<std::size_t>(n_refs) <= candidates.size()) {
      for (std::size_t pick : rng.sample_without_replacement(candidates.size(), static_cast<std::size_t>(n_refs))) {
        refs.push_back(&blocks[static_cast<std::size_t>(candidates[pick])]);
      }
    } else {
      for (int r = 0; r < n_refs; ++r) {
        refs.push_back(&blocks[static_cast<std::size_t>(candidates[rng.uniform_index(candidates.size())])]);
      }
    }
    values[p] = symmetrized_similarity(blocks[static_cast<std::size_t>(i)],
                                       blocks[static_cast<std::size_t>(j)], refs,
                                       pair_seed.derive(1), options);
  });

  Matrix raw = Matrix::Identity(k, k);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    raw(pairs[p].first, pairs[p].second) = values[p];
    raw(pairs[p].second, pairs[p].first) = values[p];
  }
  if (raw_out) *raw_out = raw;
  return process_matrix(raw, n_refs);
}

}  // namespace hierind
