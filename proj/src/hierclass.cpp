#include "hierind/hierclass.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include "hierind/error.hpp"

namespace hierind {

namespace {

void warn(InductionDiagnostics* diag, const std::string& message) {
  std::cerr << "warning: " << message << '\n';
  if (diag) diag->warnings.push_back(message);
}

Hierarchy cluster_points(const Matrix& points, const InductionConfig& cfg, RngSeed seed,
                         InductionDiagnostics* diag) {
  const int k = static_cast<int>(points.rows());
  GmmOptions options;
  options.mode = cfg.mode;
  options.restarts = cfg.restarts;
  std::vector<int> partition;
  if (cfg.coarse_k) {
    require(*cfg.coarse_k >= 1 && *cfg.coarse_k <= k,
            "coarse_k must lie in [1, k] (k = " + std::to_string(k) + ")");
    GmmFit fit = gmm_fit(points, *cfg.coarse_k, options, seed);
    partition = std::move(fit.partition);
    if (diag) {
      diag->chosen_c = *cfg.coarse_k;
      diag->bic_table = {{*cfg.coarse_k, fit.bic}};
    }
  } else {
    const int hi = std::min(k, cfg.bic_max > 0 ? cfg.bic_max : default_bic_max(k));
    const int lo = std::min(std::max(1, cfg.bic_min), hi);
    GmmSelection sel = gmm_select_c(points, lo, hi, options, seed);
    partition = std::move(sel.best.partition);
    if (diag) {
      diag->chosen_c = sel.chosen_c;
      diag->bic_table = std::move(sel.bic_table);
    }
  }
  if (diag) diag->points = points;
  return Hierarchy::from_assignment(partition);
}

}  // namespace

std::string to_string(InductionMethod method) {
  switch (method) {
    case InductionMethod::kCondMean: return "cond-mean";
    case InductionMethod::kTaskSim: return "task-sim";
    case InductionMethod::kRandomMatched: return "random";
    case InductionMethod::kTruth: return "truth";
  }
  return "unknown";
}

InductionMethod parse_induction_method(const std::string& text) {
  if (text == "cond-mean" || text == "cond_mean") return InductionMethod::kCondMean;
  if (text == "task-sim" || text == "task_sim") return InductionMethod::kTaskSim;
  if (text == "random" || text == "random-matched") return InductionMethod::kRandomMatched;
  if (text == "truth") return InductionMethod::kTruth;
  fail(ErrorCode::kPrecondition, "unknown induction method '" + text + "'");
}

void InductionConfig::validate() const {
  require(pca_dim >= 1, "pca_dim must be positive");
  require(embed_dim >= 1, "embed_dim must be positive");
  require(n_refs >= 1, "n_refs must be at least 1");
  require(restarts >= 1, "restarts must be at least 1");
  require(!coarse_k || *coarse_k >= 1, "coarse_k must be positive");
}

int default_bic_max(int k) {
  const int bound = std::max(2, 2 * static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k)))));
  return std::max(1, std::min(k - 1, bound));
}

Hierarchy induce_cond_mean(const LabeledDataset& ds, const InductionConfig& cfg,
                           InductionDiagnostics* diag) {
  cfg.validate();
  require(ds.is_complete(), "every class needs at least one training point");
  const Matrix x = ds.features();
  Matrix projected;
  const auto n = static_cast<int>(ds.size());
  const auto d = static_cast<int>(ds.dim());
  if (d > cfg.pca_dim) {
    int r = cfg.pca_dim;
    if (r > n - 1) {
      warn(diag, "pca_dim " + std::to_string(r) + " capped to n - 1 = " + std::to_string(n - 1));
      r = n - 1;
    }
    projected = pca_fit(x, r).project(x);
  } else {
    projected = x;
  }
  const int k = ds.num_classes();
  Matrix means = Matrix::Zero(k, projected.cols());
  const auto counts = ds.class_counts();
  for (std::size_t i = 0; i < ds.size(); ++i) means.row(ds.labels()[i]) += projected.row(static_cast<Eigen::Index>(i));
  for (int c = 0; c < k; ++c) means.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  return cluster_points(means, cfg, cfg.seed.derive(0x3ea9), diag);
}

Hierarchy induce_from_similarity(const Matrix& similarity, const InductionConfig& cfg,
                                 InductionDiagnostics* diag) {
  cfg.validate();
  const int k = static_cast<int>(similarity.rows());
  int r = cfg.embed_dim;
  if (r > k) {
    warn(diag, "embed_dim " + std::to_string(r) + " capped to k = " + std::to_string(k));
    r = k;
  }
  const Embedding emb = spectral_embed(similarity, r);
  if (diag) {
    diag->similarity = similarity;
    diag->eigenvalues = emb.eigenvalues;
  }
  return cluster_points(emb.coords, cfg, cfg.seed.derive(0x3eb0), diag);
}

Hierarchy induce_task_sim(const LabeledDataset& ds, const InductionConfig& cfg,
                          InductionDiagnostics* diag) {
  cfg.validate();
  require(ds.num_classes() >= 3, "task-similarity induction needs k >= 3");
  const SimilarityMatrix sim =
      pairwise_similarity_matrix(ds, cfg.n_refs, cfg.seed.derive(0x7a51), cfg.threads, cfg.tasksim);
  return induce_from_similarity(sim.values, cfg, diag);
}

Hierarchy random_matched(const Hierarchy& h, RngSeed seed) {
  Rng rng(seed);
  const auto perm = rng.permutation(static_cast<std::size_t>(h.num_leaves()));
  std::vector<int> parent(perm.size());
  for (std::size_t leaf = 0; leaf < perm.size(); ++leaf) parent[leaf] = h.parent(static_cast<int>(perm[leaf]));
  return Hierarchy(std::move(parent));
}

// ---------------------------------------------------------------------------

HierarchicalClassifier::HierarchicalClassifier(Hierarchy hierarchy, UncertaintyForest coarse,
                                               std::vector<UncertaintyForest> fine)
    : hierarchy_(std::move(hierarchy)), coarse_(std::move(coarse)), fine_(std::move(fine)) {
  require(coarse_.num_classes() == hierarchy_.num_coarse(), "coarse forest class count mismatch");
  require(fine_.size() == static_cast<std::size_t>(hierarchy_.num_coarse()), "one fine forest per coarse label required");
  for (int j = 0; j < hierarchy_.num_coarse(); ++j) {
    const auto& forest = fine_[static_cast<std::size_t>(j)];
    require(forest.num_classes() == static_cast<int>(hierarchy_.children()[static_cast<std::size_t>(j)].size()),
            "fine forest class count mismatch for coarse label " + std::to_string(j));
    require(forest.feature_dim() == coarse_.feature_dim(), "fine forest dimension mismatch");
  }
}

int HierarchicalClassifier::tree_count() const {
  int total = coarse_.num_trees();
  for (const auto& f : fine_) total += f.num_trees();
  return total;
}

Vector HierarchicalClassifier::predict_leaf_posterior(std::span<const double> x) const {
  const Vector coarse = coarse_.predict_posterior(x);
  Vector leaf(hierarchy_.num_leaves());
  for (int j = 0; j < hierarchy_.num_coarse(); ++j) {
    const auto& children = hierarchy_.children()[static_cast<std::size_t>(j)];
    const Vector fine = fine_[static_cast<std::size_t>(j)].predict_posterior(x);
    for (std::size_t local = 0; local < children.size(); ++local) {
      leaf(children[local]) = fine(static_cast<Eigen::Index>(local)) * coarse(j);
    }
  }
  return leaf;
}

Matrix HierarchicalClassifier::predict_leaf_posteriors(const RowMatrix& points) const {
  require(points.cols() == feature_dim(), "dimension mismatch in predict_leaf_posteriors");
  Matrix out(points.rows(), num_leaves());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out.row(i) = predict_leaf_posterior(
                     std::span<const double>(points.row(i).data(), static_cast<std::size_t>(points.cols())))
                     .transpose();
  }
  return out;
}

std::vector<int> HierarchicalClassifier::predict_classes(const RowMatrix& points) const {
  const Matrix post = predict_leaf_posteriors(points);
  std::vector<int> out(static_cast<std::size_t>(post.rows()));
  for (Eigen::Index i = 0; i < post.rows(); ++i) out[static_cast<std::size_t>(i)] = argmax(post.row(i).transpose());
  return out;
}

nlohmann::json HierarchicalClassifier::to_json() const {
  nlohmann::json fine = nlohmann::json::array();
  for (const auto& f : fine_) fine.push_back(f.to_json());
  return {{"format", "hierind.hierarchical_classifier"},
          {"version", 1},
          {"parent_of", hierarchy_.parent_of()},
          {"coarse", coarse_.to_json()},
          {"fine", fine}};
}

HierarchicalClassifier HierarchicalClassifier::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "hierind.hierarchical_classifier" ||
        j.at("version").get<int>() != 1) {
      fail(ErrorCode::kParse, "not a version-1 hierarchical classifier document");
    }
    std::vector<UncertaintyForest> fine;
    for (const auto& f : j.at("fine")) fine.push_back(UncertaintyForest::from_json(f));
    return HierarchicalClassifier(Hierarchy(j.at("parent_of").get<std::vector<int>>()),
                                  UncertaintyForest::from_json(j.at("coarse")), std::move(fine));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed classifier document: ") + e.what());
  }
}

UncertaintyForest trivial_forest(int n_trees, int feature_dim, int max_depth) {
  UncertaintyForest::Tree tree;
  tree.nodes.push_back({});
  tree.posteriors = {1.0};
  return UncertaintyForest(1, feature_dim, max_depth,
                           std::vector<UncertaintyForest::Tree>(static_cast<std::size_t>(std::max(1, n_trees)), tree));
}

HierarchicalClassifier fit_hierarchical(const LabeledDataset& ds, const Hierarchy& h, int coarse_trees,
                                        int fine_trees, int max_depth, RngSeed seed, unsigned threads) {
  require(h.num_leaves() == ds.num_classes(),
          "hierarchy covers " + std::to_string(h.num_leaves()) + " leaves but dataset has " +
              std::to_string(ds.num_classes()) + " classes");
  const int c = h.num_coarse();
  const auto dim = static_cast<int>(ds.dim());

  std::vector<std::vector<std::size_t>> rows_of(static_cast<std::size_t>(c));
  std::vector<int> coarse_labels(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int parent = h.parent(ds.labels()[i]);
    coarse_labels[i] = parent;
    rows_of[static_cast<std::size_t>(parent)].push_back(i);
  }
  for (int j = 0; j < c; ++j) {
    if (rows_of[static_cast<std::size_t>(j)].empty()) {
      fail(ErrorCode::kPrecondition, "empty coarse class " + std::to_string(j));
    }
  }

  UncertaintyForest coarse =
      c == 1 ? trivial_forest(coarse_trees, dim, max_depth)
             : fit_forest(LabeledDataset(ds.features(), coarse_labels, c), coarse_trees, max_depth,
                          HierarchicalClassifier::coarse_seed(seed), threads);

  std::vector<UncertaintyForest> fine;
  fine.reserve(static_cast<std::size_t>(c));
  for (int j = 0; j < c; ++j) {
    const auto& children = h.children()[static_cast<std::size_t>(j)];
    if (children.size() == 1) {
      fine.push_back(trivial_forest(fine_trees, dim, max_depth));
      continue;
    }
    std::vector<int> local_of(static_cast<std::size_t>(ds.num_classes()), -1);
    for (std::size_t local = 0; local < children.size(); ++local) {
      local_of[static_cast<std::size_t>(children[local])] = static_cast<int>(local);
    }
    const auto& rows = rows_of[static_cast<std::size_t>(j)];
    RowMatrix x(static_cast<Eigen::Index>(rows.size()), ds.features().cols());
    std::vector<int> y(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      x.row(static_cast<Eigen::Index>(r)) = ds.features().row(static_cast<Eigen::Index>(rows[r]));
      y[r] = local_of[static_cast<std::size_t>(ds.labels()[rows[r]])];
    }
    fine.push_back(fit_forest(LabeledDataset(std::move(x), std::move(y), static_cast<int>(children.size())),
                              fine_trees, max_depth, HierarchicalClassifier::fine_seed(seed, children.front()),
                              threads));
  }
  return HierarchicalClassifier(h, std::move(coarse), std::move(fine));
}

UncertaintyForest fit_flat(const LabeledDataset& ds, int n_trees, int max_depth, RngSeed seed,
                           unsigned threads) {
  return fit_forest(ds, n_trees, max_depth, seed, threads);
}

// ---------------------------------------------------------------------------

int SavedModel::num_classes() const {
  return std::visit(
      [](const auto& m) {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, UncertaintyForest>) {
          return m.num_classes();
        } else {
          return m.num_leaves();
        }
      },
      model);
}

int SavedModel::feature_dim() const {
  return std::visit([](const auto& m) { return m.feature_dim(); }, model);
}

Matrix SavedModel::predict_posteriors(const RowMatrix& points) const {
  return std::visit(
      [&](const auto& m) -> Matrix {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, UncertaintyForest>) {
          return m.predict_posteriors(points);
        } else {
          return m.predict_leaf_posteriors(points);
        }
      },
      model);
}

void save_model(const SavedModel& model, const std::string& path) {
  nlohmann::json doc;
  doc["format"] = "hierind.model";
  doc["version"] = 1;
  doc["class_names"] = model.class_names;
  if (const auto* flat = std::get_if<UncertaintyForest>(&model.model)) {
    doc["kind"] = "flat";
    doc["forest"] = flat->to_json();
  } else {
    doc["kind"] = "hierarchical";
    doc["classifier"] = std::get<HierarchicalClassifier>(model.model).to_json();
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  out << doc.dump() << '\n';
}

SavedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
    if (doc.at("format").get<std::string>() != "hierind.model" || doc.at("version").get<int>() != 1) {
      fail(ErrorCode::kParse, path + ": not a version-1 model file");
    }
    SavedModel model;
    model.class_names = doc.at("class_names").get<std::vector<std::string>>();
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "flat") {
      model.model = UncertaintyForest::from_json(doc.at("forest"));
    } else if (kind == "hierarchical") {
      model.model = HierarchicalClassifier::from_json(doc.at("classifier"));
    } else {
      fail(ErrorCode::kParse, path + ": unknown model kind '" + kind + "'");
    }
    if (model.class_names.size() != static_cast<std::size_t>(model.num_classes())) {
      fail(ErrorCode::kParse, path + ": class name count does not match the model");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, path + ": malformed model file: " + e.what());
  }
}

}  // namespace hierind
