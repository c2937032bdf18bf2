#include "hierind/numcluster.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "hierind/error.hpp"

namespace hierind {

namespace {

// Flip each column so its largest-magnitude entry is positive.
void fix_signs(Matrix& vectors) {
  for (Eigen::Index col = 0; col < vectors.cols(); ++col) {
    Eigen::Index best = 0;
    for (Eigen::Index row = 1; row < vectors.rows(); ++row) {
      if (std::abs(vectors(row, col)) > std::abs(vectors(best, col))) best = row;
    }
    if (vectors(best, col) < 0.0) vectors.col(col) *= -1.0;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// PCA

Matrix PcaModel::project(const Matrix& points) const {
  return (points.rowwise() - mean.transpose()) * components;
}

Matrix PcaModel::reconstruct(const Matrix& scores) const {
  return (scores * components.transpose()).rowwise() + mean.transpose();
}

PcaModel pca_fit(const Matrix& points, int r) {
  const Eigen::Index m = points.rows();
  const Eigen::Index d = points.cols();
  require(m >= 2, "pca_fit needs at least two points");
  require(r >= 1 && r <= std::min<Eigen::Index>(m - 1, d),
          "pca target dimension out of range: r=" + std::to_string(r));

  PcaModel model;
  model.mean = points.colwise().mean().transpose();
  const Matrix centered = points.rowwise() - model.mean.transpose();
  const double scale = 1.0 / static_cast<double>(m - 1);

  if (centered.squaredNorm() == 0.0) fail(ErrorCode::kNumerical, "zero variance");

  model.components.resize(d, r);
  model.explained_variances.resize(r);
  if (m >= d) {
    const Matrix cov = (centered.transpose() * centered) * scale;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
    if (solver.info() != Eigen::Success) fail(ErrorCode::kNumerical, "PCA eigensolver failed");
    for (int i = 0; i < r; ++i) {
      const Eigen::Index src = d - 1 - i;
      model.components.col(i) = solver.eigenvectors().col(src);
      model.explained_variances(i) = std::max(0.0, solver.eigenvalues()(src));
    }
  } else {
    const Matrix gram = (centered * centered.transpose()) * scale;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(gram);
    if (solver.info() != Eigen::Success) fail(ErrorCode::kNumerical, "PCA eigensolver failed");
    const double top = solver.eigenvalues()(m - 1);
    for (int i = 0; i < r; ++i) {
      const Eigen::Index src = m - 1 - i;
      const double lambda = solver.eigenvalues()(src);
      if (lambda <= 1e-12 * top) {
        fail(ErrorCode::kNumerical, "PCA: data rank below requested dimension");
      }
      model.components.col(i) =
          centered.transpose() * solver.eigenvectors().col(src) /
          std::sqrt(lambda / scale);
      model.explained_variances(i) = lambda;
    }
  }
  fix_signs(model.components);
  return model;
}

// ---------------------------------------------------------------------------
// k-means

namespace {

std::vector<Eigen::Index> kmeanspp_seeds(const Matrix& points, int c, Rng& rng) {
  const Eigen::Index m = points.rows();
  std::vector<Eigen::Index> seeds;
  seeds.reserve(static_cast<std::size_t>(c));
  seeds.push_back(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(m))));
  Vector dist2 = (points.rowwise() - points.row(seeds[0])).rowwise().squaredNorm();
  std::vector<bool> chosen(static_cast<std::size_t>(m), false);
  chosen[static_cast<std::size_t>(seeds[0])] = true;
  while (static_cast<int>(seeds.size()) < c) {
    const double total = dist2.sum();
    Eigen::Index pick = -1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        acc += dist2(i);
        if (dist2(i) > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        for (Eigen::Index i = m - 1; i >= 0; --i) {
          if (dist2(i) > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // Every remaining point duplicates a seed; pick an unused index.
      std::vector<Eigen::Index> unused;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (!chosen[static_cast<std::size_t>(i)]) unused.push_back(i);
      }
      pick = unused[rng.uniform_index(unused.size())];
    }
    seeds.push_back(pick);
    chosen[static_cast<std::size_t>(pick)] = true;
    dist2 = dist2.cwiseMin(
        (points.rowwise() - points.row(pick)).rowwise().squaredNorm());
  }
  return seeds;
}

// Assigns each point to its nearest centroid; returns the WCSS.
double assign(const Matrix& points, const Matrix& centroids, std::vector<int>& assignment,
              Vector& point_cost) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < centroids.rows(); ++j) {
      const double d = (points.row(i) - centroids.row(j)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    assignment[static_cast<std::size_t>(i)] = best;
    point_cost(i) = best_d;
    total += best_d;
  }
  return total;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int c, RngSeed seed) {
  const Eigen::Index m = points.rows();
  require(c >= 1, "kmeans needs c >= 1");
  require(c <= m, "kmeans: c > m (" + std::to_string(c) + " clusters for " +
                      std::to_string(m) + " points)");
  Rng rng(seed);
  KMeansResult result;
  const auto seeds = kmeanspp_seeds(points, c, rng);
  result.centroids.resize(c, points.cols());
  for (int j = 0; j < c; ++j) result.centroids.row(j) = points.row(seeds[static_cast<std::size_t>(j)]);

  result.assignment.assign(static_cast<std::size_t>(m), -1);
  Vector cost(m);
  std::vector<int> previous;
  for (int iter = 0; iter < kKMeansMaxIterations; ++iter) {
    previous = result.assignment;
    result.wcss = assign(points, result.centroids, result.assignment, cost);
    result.wcss_history.push_back(result.wcss);
    result.iterations = iter + 1;
    if (result.assignment == previous) break;

    // Centroid update; an empty cluster takes the currently worst-fit point.
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(c), 0);
    for (int a : result.assignment) ++counts[static_cast<std::size_t>(a)];
    for (int j = 0; j < c; ++j) {
      if (counts[static_cast<std::size_t>(j)] > 0) continue;
      Eigen::Index worst = -1;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (counts[static_cast<std::size_t>(result.assignment[static_cast<std::size_t>(i)])] <= 1) continue;
        if (worst < 0 || cost(i) > cost(worst)) worst = i;
      }
      if (worst < 0) break;
      --counts[static_cast<std::size_t>(result.assignment[static_cast<std::size_t>(worst)])];
      result.assignment[static_cast<std::size_t>(worst)] = j;
      counts[static_cast<std::size_t>(j)] = 1;
      cost(worst) = 0.0;
    }
    result.centroids.setZero();
    for (Eigen::Index i = 0; i < m; ++i) {
      result.centroids.row(result.assignment[static_cast<std::size_t>(i)]) += points.row(i);
    }
    for (int j = 0; j < c; ++j) {
      result.centroids.row(j) /= static_cast<double>(counts[static_cast<std::size_t>(j)]);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Gaussian mixtures

std::string to_string(CovarianceMode mode) {
  switch (mode) {
    case CovarianceMode::kSpherical: return "spherical";
    case CovarianceMode::kDiagonal: return "diagonal";
    case CovarianceMode::kFull: return "full";
    case CovarianceMode::kTiedFull: return "tied-full";
  }
  return "unknown";
}

CovarianceMode parse_covariance_mode(const std::string& text) {
  if (text == "spherical") return CovarianceMode::kSpherical;
  if (text == "diagonal" || text == "diag") return CovarianceMode::kDiagonal;
  if (text == "full") return CovarianceMode::kFull;
  if (text == "tied-full" || text == "tied") return CovarianceMode::kTiedFull;
  fail(ErrorCode::kPrecondition, "unknown covariance mode '" + text + "'");
}

const Matrix& GaussianMixture::covariance(int component) const {
  return mode == CovarianceMode::kTiedFull ? covariances.front()
                                           : covariances[static_cast<std::size_t>(component)];
}

double GaussianMixture::num_parameters() const {
  const double c = num_components();
  const double d = dim();
  double cov = 0.0;
  switch (mode) {
    case CovarianceMode::kSpherical: cov = c; break;
    case CovarianceMode::kDiagonal: cov = c * d; break;
    case CovarianceMode::kFull: cov = c * d * (d + 1.0) / 2.0; break;
    case CovarianceMode::kTiedFull: cov = d * (d + 1.0) / 2.0; break;
  }
  return c * d + (c - 1.0) + cov;
}

double covariance_regularization(const Matrix& points) {
  const Eigen::Index m = points.rows();
  const Eigen::Index d = points.cols();
  double trace = 0.0;
  if (m >= 2) {
    const Matrix centered = points.rowwise() - points.colwise().mean();
    trace = centered.squaredNorm() / static_cast<double>(m - 1);
  }
  return std::max(1e-6 * trace / static_cast<double>(d), 1e-12);
}

namespace {

constexpr double kMassFloor = 10.0 * std::numeric_limits<double>::epsilon();

struct ComponentFactor {
  Eigen::LLT<Matrix> llt;
  double log_det = 0.0;
};

std::vector<ComponentFactor> factorize(const GaussianMixture& gm) {
  std::vector<ComponentFactor> factors(gm.covariances.size());
  for (std::size_t j = 0; j < gm.covariances.size(); ++j) {
    factors[j].llt.compute(gm.covariances[j]);
    if (factors[j].llt.info() != Eigen::Success) {
      fail(ErrorCode::kNumerical, "covariance collapse: matrix not positive definite");
    }
    const Matrix& l = factors[j].llt.matrixLLT();
    factors[j].log_det = 2.0 * l.diagonal().array().log().sum();
  }
  return factors;
}

// Fills log(w_j) + log N(x_i | mu_j, Sigma_j) into `joint` (m x c).
void joint_log_densities(const GaussianMixture& gm, const Matrix& points, Matrix& joint) {
  const auto factors = factorize(gm);
  const Eigen::Index m = points.rows();
  const int c = gm.num_components();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  joint.resize(m, c);
  for (int j = 0; j < c; ++j) {
    const auto& f = factors[gm.mode == CovarianceMode::kTiedFull ? 0 : static_cast<std::size_t>(j)];
    Matrix diff = (points.rowwise() - gm.means.row(j)).transpose();  // d x m
    f.llt.matrixL().solveInPlace(diff);
    const Vector mahal = diff.colwise().squaredNorm().transpose();
    const double base = std::log(gm.weights(j)) -
                        0.5 * (static_cast<double>(gm.dim()) * log2pi + f.log_det);
    joint.col(j) = (base - 0.5 * mahal.array()).matrix();
  }
}

// Row-wise log-sum-exp; turns `joint` into responsibilities in place.
double normalize_responsibilities(Matrix& joint) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < joint.rows(); ++i) {
    const double top = joint.row(i).maxCoeff();
    const double lse = top + std::log((joint.row(i).array() - top).exp().sum());
    joint.row(i) = (joint.row(i).array() - lse).exp().matrix();
    total += lse;
  }
  return total;
}

GaussianMixture m_step(const Matrix& points, const Matrix& resp, CovarianceMode mode,
                       double reg) {
  const Eigen::Index m = points.rows();
  const Eigen::Index d = points.cols();
  const Eigen::Index c = resp.cols();
  GaussianMixture gm;
  gm.mode = mode;
  const Vector mass = (resp.colwise().sum().array() + kMassFloor).matrix().transpose();
  gm.weights = mass / mass.sum();
  gm.means = (resp.transpose() * points).array().colwise() / mass.array();

  const Matrix identity = Matrix::Identity(d, d);
  if (mode == CovarianceMode::kTiedFull) {
    Matrix pooled = Matrix::Zero(d, d);
    for (Eigen::Index j = 0; j < c; ++j) {
      const Matrix diff = points.rowwise() - gm.means.row(j);
      pooled += diff.transpose() * (diff.array().colwise() * resp.col(j).array()).matrix();
    }
    pooled /= static_cast<double>(m);
    gm.covariances.push_back(pooled + reg * identity);
    return gm;
  }
  gm.covariances.reserve(static_cast<std::size_t>(c));
  for (Eigen::Index j = 0; j < c; ++j) {
    const Matrix diff = points.rowwise() - gm.means.row(j);
    const Matrix weighted = diff.array().colwise() * resp.col(j).array();
    Matrix cov(d, d);
    switch (mode) {
      case CovarianceMode::kFull:
        cov = diff.transpose() * weighted / mass(j);
        break;
      case CovarianceMode::kDiagonal: {
        const Vector var = (diff.array() * weighted.array()).colwise().sum().transpose() / mass(j);
        cov = var.asDiagonal();
        break;
      }
      case CovarianceMode::kSpherical: {
        const double var = (diff.array() * weighted.array()).sum() / (mass(j) * static_cast<double>(d));
        cov = var * identity;
        break;
      }
      case CovarianceMode::kTiedFull:
        break;
    }
    gm.covariances.push_back(cov + reg * identity);
  }
  return gm;
}

std::vector<int> argmax_rows(const Matrix& resp) {
  std::vector<int> partition(static_cast<std::size_t>(resp.rows()));
  for (Eigen::Index i = 0; i < resp.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < resp.cols(); ++j) {
      if (resp(i, j) > resp(i, best)) best = static_cast<int>(j);
    }
    partition[static_cast<std::size_t>(i)] = best;
  }
  return partition;
}

GmmFit run_em(const Matrix& points, int c, const GmmOptions& options, double reg,
              RngSeed seed) {
  const KMeansResult init = kmeans(points, c, seed);
  Matrix resp = Matrix::Zero(points.rows(), c);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    resp(i, init.assignment[static_cast<std::size_t>(i)]) = 1.0;
  }
  GmmFit fit;
  GaussianMixture gm = m_step(points, resp, options.mode, reg);
  Matrix joint;
  double previous = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    joint_log_densities(gm, points, joint);
    // The diagonal loading is the exact M-step for a per-point penalty of
    // -reg/2 tr(Sigma_z^-1); carrying it into the E-step makes EM monotone
    // in the penalized objective.
    for (int j = 0; j < c; ++j) {
      const Matrix& cov = gm.covariance(j);
      const double tr_inv = cov.llt().solve(Matrix::Identity(cov.rows(), cov.cols())).trace();
      joint.col(j).array() -= 0.5 * reg * tr_inv;
    }
    const double ll = normalize_responsibilities(joint);
    if (!std::isfinite(ll)) fail(ErrorCode::kNumerical, "covariance collapse: non-finite likelihood");
    fit.log_likelihood_history.push_back(ll);
    fit.iterations = iter + 1;
    resp = joint;
    if (std::abs(ll - previous) < options.relative_tolerance * std::abs(ll)) break;
    previous = ll;
    if (iter + 1 < options.max_iterations) gm = m_step(points, resp, options.mode, reg);
  }
  fit.partition = argmax_rows(resp);
  gm.log_likelihood = log_densities(gm, points).sum();
  fit.model = std::move(gm);
  fit.bic = -2.0 * fit.model.log_likelihood +
            fit.model.num_parameters() * std::log(static_cast<double>(points.rows()));
  return fit;
}

}  // namespace

Vector log_densities(const GaussianMixture& gm, const Matrix& points) {
  Matrix joint;
  joint_log_densities(gm, points, joint);
  Vector out(points.rows());
  for (Eigen::Index i = 0; i < joint.rows(); ++i) {
    const double top = joint.row(i).maxCoeff();
    out(i) = top + std::log((joint.row(i).array() - top).exp().sum());
  }
  return out;
}

GmmFit gmm_fit(const Matrix& points, int c, const GmmOptions& options, RngSeed seed) {
  require(c >= 1, "gmm_fit needs c >= 1");
  require(c <= points.rows(), "gmm_fit: c > m");
  require(options.restarts >= 1, "gmm_fit needs at least one restart");
  require(points.allFinite(), "gmm_fit: non-finite input");
  const double reg = covariance_regularization(points);
  std::optional<GmmFit> best;
  for (int restart = 0; restart < options.restarts; ++restart) {
    GmmFit fit = run_em(points, c, options, reg, seed.derive(static_cast<std::uint64_t>(restart)));
    if (!best || fit.model.log_likelihood > best->model.log_likelihood) best = std::move(fit);
  }
  return std::move(*best);
}

GmmSelection gmm_select_c(const Matrix& points, int c_min, int c_max,
                          const GmmOptions& options, RngSeed seed) {
  require(c_min <= c_max, "gmm_select_c: empty cluster-count range");
  require(c_min >= 1 && c_max <= points.rows(), "gmm_select_c: range outside [1, m]");
  GmmSelection selection;
  std::optional<GmmFit> best;
  for (int c = c_min; c <= c_max; ++c) {
    GmmFit fit = gmm_fit(points, c, options, seed.derive(static_cast<std::uint64_t>(c)));
    selection.bic_table.emplace_back(c, fit.bic);
    if (!best || fit.bic < best->bic) {
      selection.chosen_c = c;
      best = std::move(fit);
    }
  }
  selection.best = std::move(*best);
  return selection;
}

// ---------------------------------------------------------------------------
// Spectral embedding

Embedding spectral_embed(const Matrix& similarity, int r) {
  const Eigen::Index k = similarity.rows();
  require(similarity.cols() == k && k >= 1, "similarity matrix must be square");
  require(r >= 1 && r <= k, "embedding dimension out of range");
  require(similarity.allFinite(), "similarity matrix has non-finite entries");
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const double v = similarity(i, j);
      require(std::abs(v - similarity(j, i)) <= 1e-12, "similarity matrix is not symmetric");
      require(v >= -1e-12 && v <= 1.0 + 1e-12, "similarity entries must lie in [0, 1]");
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(similarity);
  if (solver.info() != Eigen::Success) fail(ErrorCode::kNumerical, "eigensolver failed");

  // Largest eigenvalue first, then stable by decreasing magnitude so that a
  // positive eigenvalue precedes a negative one of equal magnitude.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = k - 1 - i;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(solver.eigenvalues()(a)) > std::abs(solver.eigenvalues()(b));
  });

  Embedding emb;
  Matrix vectors(k, r);
  emb.eigenvalues.resize(r);
  for (int i = 0; i < r; ++i) {
    vectors.col(i) = solver.eigenvectors().col(order[static_cast<std::size_t>(i)]);
    emb.eigenvalues(i) = solver.eigenvalues()(order[static_cast<std::size_t>(i)]);
  }
  fix_signs(vectors);
  emb.coords = vectors * emb.eigenvalues.cwiseAbs().cwiseSqrt().asDiagonal();
  return emb;
}

}  // namespace hierind
