#include "hierind/forest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "hierind/error.hpp"
#include "hierind/parallel.hpp"

namespace hierind {

namespace {

constexpr const char* kFormatName = "hierind.uncertainty_forest";
constexpr int kFormatVersion = 1;

std::uint64_t row_hash(const double* row, std::size_t dim) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::size_t j = 0; j < dim; ++j) h = mix64(h ^ std::bit_cast<std::uint64_t>(row[j]));
  return h;
}

struct Item {
  std::size_t row;
  double weight;
  int label;
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double score = std::numeric_limits<double>::infinity();
};

class TreeGrower {
 public:
  TreeGrower(const RowMatrix& x, int k, int max_depth)
      : x_(x), dim_(static_cast<std::size_t>(x.cols())), k_(k), max_depth_(max_depth) {}

  std::vector<UncertaintyForest::Node> grow(std::vector<Item> items) {
    items_ = std::move(items);
    nodes_.clear();
    nodes_.push_back({});
    struct Pending {
      int node;
      int depth;
      std::size_t begin;
      std::size_t end;
    };
    std::vector<Pending> stack{{0, 0, 0, items_.size()}};
    while (!stack.empty()) {
      const Pending p = stack.back();
      stack.pop_back();
      const SplitChoice split = find_split(p.begin, p.end, p.depth);
      if (split.feature < 0) continue;  // stays a leaf
      auto mid_it = std::stable_partition(
          items_.begin() + static_cast<std::ptrdiff_t>(p.begin),
          items_.begin() + static_cast<std::ptrdiff_t>(p.end), [&](const Item& it) {
            return value(it.row, split.feature) <= split.threshold;
          });
      const auto mid = static_cast<std::size_t>(mid_it - items_.begin());
      const int left = static_cast<int>(nodes_.size());
      nodes_.push_back({});
      nodes_.push_back({});
      auto& node = nodes_[static_cast<std::size_t>(p.node)];
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.left = left;
      node.right = left + 1;
      stack.push_back({left + 1, p.depth + 1, mid, p.end});
      stack.push_back({left, p.depth + 1, p.begin, mid});
    }
    return std::move(nodes_);
  }

 private:
  double value(std::size_t row, int feature) const {
    return x_(static_cast<Eigen::Index>(row), feature);
  }

  SplitChoice find_split(std::size_t begin, std::size_t end, int depth) {
    SplitChoice best;
    if (depth >= max_depth_ || end - begin < 2) return best;
    std::vector<double> total(static_cast<std::size_t>(k_), 0.0);
    double weight = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      total[static_cast<std::size_t>(items_[i].label)] += items_[i].weight;
      weight += items_[i].weight;
    }
    const auto nonzero = std::count_if(total.begin(), total.end(), [](double w) { return w > 0.0; });
    if (nonzero <= 1) return best;
    double total_sq = 0.0;
    for (double w : total) total_sq += w * w;

    const std::size_t n = end - begin;
    order_.resize(n);
    std::vector<double> left(static_cast<std::size_t>(k_));
    for (std::size_t f = 0; f < dim_; ++f) {
      for (std::size_t i = 0; i < n; ++i) order_[i] = begin + i;
      const int feature = static_cast<int>(f);
      std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
        const double va = value(items_[a].row, feature);
        const double vb = value(items_[b].row, feature);
        return va < vb || (va == vb && a < b);
      });
      std::fill(left.begin(), left.end(), 0.0);
      double left_w = 0.0;
      double left_sq = 0.0;
      double right_sq = total_sq;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const Item& it = items_[order_[i]];
        const auto c = static_cast<std::size_t>(it.label);
        const double right_c = total[c] - left[c];
        left_sq += 2.0 * left[c] * it.weight + it.weight * it.weight;
        right_sq += -2.0 * right_c * it.weight + it.weight * it.weight;
        left[c] += it.weight;
        left_w += it.weight;
        const double v = value(it.row, feature);
        const double v_next = value(items_[order_[i + 1]].row, feature);
        if (!(v < v_next)) continue;
        const double right_w = weight - left_w;
        if (left_w <= 0.0 || right_w <= 0.0) continue;
        const double score = (left_w - left_sq / left_w) + (right_w - right_sq / right_w);
        if (score < best.score) {
          double threshold = 0.5 * (v + v_next);
          if (!(threshold < v_next)) threshold = v;
          best.score = score;
          best.feature = feature;
          best.threshold = threshold;
        }
      }
    }
    return best;
  }

  const RowMatrix& x_;
  std::size_t dim_;
  int k_;
  int max_depth_;
  std::vector<Item> items_;
  std::vector<std::size_t> order_;
  std::vector<UncertaintyForest::Node> nodes_;
};

void fill_posteriors(UncertaintyForest::Tree& tree, int k, const std::vector<int>& counts) {
  tree.posteriors.assign(tree.nodes.size() * static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    auto& node = tree.nodes[i];
    if (node.feature >= 0) {
      node.support = 0;
      continue;
    }
    int support = 0;
    for (int c = 0; c < k; ++c) support += counts[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)];
    node.support = support;
    const double denom = static_cast<double>(support + k);
    for (int c = 0; c < k; ++c) {
      const std::size_t at = i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c);
      tree.posteriors[at] = static_cast<double>(counts[at] + 1) / denom;
    }
  }
}

}  // namespace

UncertaintyForest::UncertaintyForest(int num_classes, int feature_dim, int max_depth,
                                     std::vector<Tree> trees)
    : k_(num_classes), feature_dim_(feature_dim), max_depth_(max_depth), trees_(std::move(trees)) {
  require(k_ >= 1 && feature_dim_ >= 1, "forest needs k >= 1 and d >= 1");
  require(!trees_.empty(), "forest needs at least one tree");
}

int UncertaintyForest::route(const Tree& tree, const double* x) {
  int at = 0;
  for (;;) {
    const Node& node = tree.nodes[static_cast<std::size_t>(at)];
    if (node.feature < 0) return at;
    at = x[node.feature] <= node.threshold ? node.left : node.right;
  }
}

Vector UncertaintyForest::predict_posterior(std::span<const double> x) const {
  require(x.size() == static_cast<std::size_t>(feature_dim_),
          "dimension mismatch: expected " + std::to_string(feature_dim_) + " features, got " +
              std::to_string(x.size()));
  Vector sum = Vector::Zero(k_);
  for (const Tree& tree : trees_) {
    const auto leaf = static_cast<std::size_t>(route(tree, x.data()));
    sum += Eigen::Map<const Vector>(tree.posteriors.data() + leaf * static_cast<std::size_t>(k_), k_);
  }
  return sum / static_cast<double>(trees_.size());
}

Vector UncertaintyForest::predict_posterior(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  const Eigen::RowVectorXd copy = x;
  return predict_posterior(std::span<const double>(copy.data(), static_cast<std::size_t>(copy.size())));
}

int argmax(const Vector& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = static_cast<int>(i);
  }
  return best;
}

int UncertaintyForest::predict_class(std::span<const double> x) const {
  return argmax(predict_posterior(x));
}

Matrix UncertaintyForest::predict_posteriors(const RowMatrix& points) const {
  require(points.cols() == feature_dim_, "dimension mismatch in predict_posteriors");
  Matrix out(points.rows(), k_);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out.row(i) = predict_posterior(std::span<const double>(points.row(i).data(),
                                                           static_cast<std::size_t>(feature_dim_)))
                     .transpose();
  }
  return out;
}

std::vector<int> UncertaintyForest::predict_classes(const RowMatrix& points) const {
  const Matrix post = predict_posteriors(points);
  std::vector<int> out(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < post.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = argmax(post.row(i).transpose());
  }
  return out;
}

UncertaintyForest UncertaintyForest::reestimate(const LabeledDataset& ds) const {
  require(ds.dim() == static_cast<std::size_t>(feature_dim_), "dimension mismatch in reestimate");
  const int k = ds.num_classes();
  std::vector<Tree> trees = trees_;
  for (Tree& tree : trees) {
    std::vector<int> counts(tree.nodes.size() * static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto leaf = static_cast<std::size_t>(route(tree, ds.features().row(static_cast<Eigen::Index>(i)).data()));
      ++counts[leaf * static_cast<std::size_t>(k) + static_cast<std::size_t>(ds.labels()[i])];
    }
    fill_posteriors(tree, k, counts);
  }
  return UncertaintyForest(k, feature_dim_, max_depth_, std::move(trees));
}

nlohmann::json UncertaintyForest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const Tree& tree : trees_) {
    nlohmann::json feature = nlohmann::json::array();
    nlohmann::json threshold = nlohmann::json::array();
    nlohmann::json left = nlohmann::json::array();
    nlohmann::json right = nlohmann::json::array();
    nlohmann::json support = nlohmann::json::array();
    nlohmann::json posterior = nlohmann::json::array();
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const Node& node = tree.nodes[i];
      feature.push_back(node.feature);
      threshold.push_back(node.threshold);
      left.push_back(node.left);
      right.push_back(node.right);
      support.push_back(node.support);
      if (node.feature < 0) {
        posterior.push_back(std::vector<double>(
            tree.posteriors.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(k_)),
            tree.posteriors.begin() + static_cast<std::ptrdiff_t>((i + 1) * static_cast<std::size_t>(k_))));
      } else {
        posterior.push_back(nullptr);
      }
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"support", support},
                     {"posterior", posterior}});
  }
  return {{"format", kFormatName},  {"version", kFormatVersion}, {"k", k_},
          {"feature_dim", feature_dim_}, {"max_depth", max_depth_},   {"trees", trees}};
}

UncertaintyForest UncertaintyForest::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kFormatName) {
      fail(ErrorCode::kParse, "not an uncertainty forest document");
    }
    if (j.at("version").get<int>() != kFormatVersion) {
      fail(ErrorCode::kParse, "unsupported forest format version");
    }
    const int k = j.at("k").get<int>();
    std::vector<Tree> trees;
    for (const auto& jt : j.at("trees")) {
      Tree tree;
      const auto& feature = jt.at("feature");
      const std::size_t n = feature.size();
      tree.nodes.resize(n);
      tree.posteriors.assign(n * static_cast<std::size_t>(k), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        Node& node = tree.nodes[i];
        node.feature = feature.at(i).get<int>();
        node.threshold = jt.at("threshold").at(i).get<double>();
        node.left = jt.at("left").at(i).get<int>();
        node.right = jt.at("right").at(i).get<int>();
        node.support = jt.at("support").at(i).get<int>();
        if (node.feature < 0) {
          const auto post = jt.at("posterior").at(i).get<std::vector<double>>();
          if (post.size() != static_cast<std::size_t>(k)) fail(ErrorCode::kParse, "posterior length mismatch");
          std::copy(post.begin(), post.end(), tree.posteriors.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(k)));
        } else if (node.left <= 0 || node.right <= 0 || static_cast<std::size_t>(node.left) >= n ||
                   static_cast<std::size_t>(node.right) >= n) {
          fail(ErrorCode::kParse, "child index out of range");
        }
      }
      trees.push_back(std::move(tree));
    }
    return UncertaintyForest(k, j.at("feature_dim").get<int>(), j.at("max_depth").get<int>(),
                             std::move(trees));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed forest document: ") + e.what());
  }
}

bool operator==(const UncertaintyForest& a, const UncertaintyForest& b) {
  if (a.k_ != b.k_ || a.feature_dim_ != b.feature_dim_ || a.max_depth_ != b.max_depth_ ||
      a.trees_.size() != b.trees_.size()) {
    return false;
  }
  for (std::size_t t = 0; t < a.trees_.size(); ++t) {
    const auto& ta = a.trees_[t];
    const auto& tb = b.trees_[t];
    if (ta.nodes.size() != tb.nodes.size() || ta.posteriors != tb.posteriors) return false;
    for (std::size_t i = 0; i < ta.nodes.size(); ++i) {
      const auto& na = ta.nodes[i];
      const auto& nb = tb.nodes[i];
      if (na.feature != nb.feature || na.threshold != nb.threshold || na.left != nb.left ||
          na.right != nb.right || na.support != nb.support) {
        return false;
      }
    }
  }
  return true;
}

UncertaintyForest fit_forest(const LabeledDataset& ds, int n_trees, int max_depth, RngSeed seed,
                             unsigned threads, HonestyTrace* trace) {
  const std::size_t n = ds.size();
  require(n >= 4, "fit_forest needs at least 4 rows, got " + std::to_string(n));
  require(n_trees >= 1, "fit_forest needs n_trees >= 1");
  require(max_depth >= 1, "fit_forest needs max_depth >= 1");
  const int k = ds.num_classes();
  const auto dim = ds.dim();
  const RowMatrix& x = ds.features();

  // Row keys depend on content only: the feature vector plus an occurrence
  // number among rows with identical features, assigned in (label, row)
  // order. Without it, duplicated feature vectors would all land in the same
  // half of every tree.
  std::vector<std::uint64_t> hashes(n);
  for (std::size_t i = 0; i < n; ++i) hashes[i] = row_hash(x.row(static_cast<Eigen::Index>(i)).data(), dim);
  {
    std::vector<std::size_t> by_content(n);
    for (std::size_t i = 0; i < n; ++i) by_content[i] = i;
    std::sort(by_content.begin(), by_content.end(), [&](std::size_t a, std::size_t b) {
      if (hashes[a] != hashes[b]) return hashes[a] < hashes[b];
      if (ds.labels()[a] != ds.labels()[b]) return ds.labels()[a] < ds.labels()[b];
      return a < b;
    });
    std::vector<std::uint64_t> keyed(n);
    std::uint64_t occurrence = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t i = by_content[r];
      occurrence = (r > 0 && hashes[by_content[r - 1]] == hashes[i]) ? occurrence + 1 : 0;
      keyed[i] = occurrence == 0 ? hashes[i] : mix64(hashes[i] + 0x9e3779b97f4a7c15ULL * occurrence);
    }
    hashes = std::move(keyed);
  }

  std::vector<UncertaintyForest::Tree> trees(static_cast<std::size_t>(n_trees));
  if (trace) trace->trees.assign(static_cast<std::size_t>(n_trees), {});

  parallel_for(static_cast<std::size_t>(n_trees), threads, [&](std::size_t t) {
    const RngSeed tree_seed = seed.derive(t);
    const std::uint64_t tree_key = mix64(tree_seed.seed) ^ mix64(tree_seed.stream ^ 0xa0761d6478bd642fULL);

    std::vector<std::uint64_t> keys(n);
    for (std::size_t i = 0; i < n; ++i) keys[i] = mix64(tree_key ^ hashes[i]);
    std::vector<std::size_t> ranked(n);
    for (std::size_t i = 0; i < n; ++i) ranked[i] = i;
    std::sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
      if (keys[a] != keys[b]) return keys[a] < keys[b];
      if (hashes[a] != hashes[b]) return hashes[a] < hashes[b];
      if (ds.labels()[a] != ds.labels()[b]) return ds.labels()[a] < ds.labels()[b];
      return a < b;
    });
    const std::size_t n_structure = n / 2;

    std::vector<Item> items;
    items.reserve(n_structure);
    for (std::size_t r = 0; r < n_structure; ++r) {
      const std::size_t row = ranked[r];
      Rng rng(RngSeed{tree_key, hashes[row]});
      const unsigned w = rng.poisson_one();
      if (w > 0) items.push_back({row, static_cast<double>(w), ds.labels()[row]});
    }
    if (items.empty()) {
      for (std::size_t r = 0; r < n_structure; ++r) items.push_back({ranked[r], 1.0, ds.labels()[ranked[r]]});
    }

    UncertaintyForest::Tree tree;
    TreeGrower grower(x, k, max_depth);
    tree.nodes = grower.grow(std::move(items));

    std::vector<int> counts(tree.nodes.size() * static_cast<std::size_t>(k), 0);
    HonestyTrace::TreeTrace* tt = trace ? &trace->trees[t] : nullptr;
    if (tt) {
      tt->structure_rows.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n_structure));
      tt->estimation_rows.assign(ranked.begin() + static_cast<std::ptrdiff_t>(n_structure), ranked.end());
      tt->leaf_rows.assign(tree.nodes.size(), {});
    }
    for (std::size_t r = n_structure; r < n; ++r) {
      const std::size_t row = ranked[r];
      const auto leaf = static_cast<std::size_t>(UncertaintyForest::route(tree, x.row(static_cast<Eigen::Index>(row)).data()));
      ++counts[leaf * static_cast<std::size_t>(k) + static_cast<std::size_t>(ds.labels()[row])];
      if (tt) tt->leaf_rows[leaf].push_back(row);
    }
    fill_posteriors(tree, k, counts);
    trees[t] = std::move(tree);
  });

  return UncertaintyForest(k, static_cast<int>(dim), max_depth, std::move(trees));
}

}  // namespace hierind
