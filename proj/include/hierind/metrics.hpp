#pragma once

#include <span>
#include <string>
#include <vector>

namespace hierind {

/// Adjusted Rand index from the contingency table of two labelings of the
/// same items. When the index is undefined (both partitions all-singletons or
/// both all-in-one) it is 1 for identical partitions and 0 otherwise.
double adjusted_rand_index(std::span<const int> p, std::span<const int> q);

/// True when p and q induce the same partition (up to relabeling).
bool same_partition(std::span<const int> p, std::span<const int> q);

struct EvalRecord {
  double accuracy = 0.0;
  double risk = 0.0;  // 0-1 loss, 1 - accuracy
  std::size_t n_test = 0;
  std::string method;
};

EvalRecord empirical_risk(std::span<const int> predictions, std::span<const int> truth,
                          std::string method = {});

/// Ratio risk_h / risk_ref; above 1 means the reference rule is preferred.
double learning_efficiency(double risk_h, double risk_ref);

struct AggregateResult {
  double mean = 0.0;
  double se = 0.0;  // sample std / sqrt(n); 0 when n == 1
  std::size_t reps = 0;

  friend bool operator==(const AggregateResult&, const AggregateResult&) = default;
};

AggregateResult aggregate(std::span<const double> values);

}  // namespace hierind
