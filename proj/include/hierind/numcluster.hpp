#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hierind/dataset.hpp"
#include "hierind/rng.hpp"

namespace hierind {

// ---------------------------------------------------------------------------
// PCA

struct PcaModel {
  Vector mean;                 // length d
  Matrix components;           // d x r, orthonormal columns
  Vector explained_variances;  // length r, nonincreasing

  Matrix project(const Matrix& points) const;
  Matrix reconstruct(const Matrix& scores) const;
};

/// Top-r principal axes of the centred sample covariance (divisor m - 1).
/// Uses the m x m Gram matrix when m < d.
PcaModel pca_fit(const Matrix& points, int r);

// ---------------------------------------------------------------------------
// k-means

struct KMeansResult {
  std::vector<int> assignment;
  Matrix centroids;  // c x r
  double wcss = 0.0;
  /// WCSS after each assignment step, starting with the k-means++ seeding.
  std::vector<double> wcss_history;
  int iterations = 0;
};

inline constexpr int kKMeansMaxIterations = 300;

/// k-means++ seeding followed by Lloyd iterations until the assignment is a
/// fixpoint or 300 iterations. Ties go to the lowest centroid index.
KMeansResult kmeans(const Matrix& points, int c, RngSeed seed);

// ---------------------------------------------------------------------------
// Gaussian mixtures

enum class CovarianceMode { kSpherical, kDiagonal, kFull, kTiedFull };

std::string to_string(CovarianceMode mode);
CovarianceMode parse_covariance_mode(const std::string& text);

struct GaussianMixture {
  CovarianceMode mode = CovarianceMode::kTiedFull;
  Vector weights;                   // length c
  Matrix means;                     // c x d
  std::vector<Matrix> covariances;  // c full d x d matrices (one for tied)
  double log_likelihood = 0.0;

  int num_components() const { return static_cast<int>(weights.size()); }
  int dim() const { return static_cast<int>(means.cols()); }
  const Matrix& covariance(int component) const;
  /// Free parameters counted by BIC.
  double num_parameters() const;
};

struct GmmOptions {
  CovarianceMode mode = CovarianceMode::kTiedFull;
  int restarts = 10;
  int max_iterations = 200;
  double relative_tolerance = 1e-6;
};

struct GmmFit {
  GaussianMixture model;
  std::vector<int> partition;
  /// sum_i log sum_j w_j N(x_i | mu_j, Sigma_j) exp(-reg/2 tr(Sigma_j^-1))
  /// after every EM iteration of the winning restart; nondecreasing.
  /// model.log_likelihood is the unpenalized log-likelihood.
  std::vector<double> log_likelihood_history;
  int iterations = 0;
  double bic = 0.0;
};

/// Diagonal loading added to every covariance estimate:
/// 1e-6 * trace(sample covariance of all points) / d, floored at 1e-12.
double covariance_regularization(const Matrix& points);

/// Per-point log-density log sum_j w_j N(x | mu_j, Sigma_j).
Vector log_densities(const GaussianMixture& gm, const Matrix& points);

/// EM from `restarts` k-means++ initialisations; keeps the best final
/// log-likelihood (lowest restart index on ties). Partition is the argmax
/// responsibility with ties to the lowest component.
GmmFit gmm_fit(const Matrix& points, int c, const GmmOptions& options, RngSeed seed);

struct GmmSelection {
  GmmFit best;
  int chosen_c = 0;
  /// (c, BIC) for every candidate, in increasing c.
  std::vector<std::pair<int, double>> bic_table;
};

/// Fits every c in [c_min, c_max] and keeps the minimum BIC
/// (-2 logL + p ln m); ties go to the smaller c.
GmmSelection gmm_select_c(const Matrix& points, int c_min, int c_max,
                          const GmmOptions& options, RngSeed seed);

// ---------------------------------------------------------------------------
// Adjacency spectral embedding

struct Embedding {
  Matrix coords;       // k x r
  Vector eigenvalues;  // the r selected eigenvalues, by decreasing magnitude
};

/// coords = U_r |Lambda_r|^{1/2} for the r largest-magnitude eigenvalues of
/// the symmetric matrix S. Each eigenvector is signed so that its
/// largest-magnitude entry (lowest index on ties) is positive.
Embedding spectral_embed(const Matrix& similarity, int r);

}  // namespace hierind
