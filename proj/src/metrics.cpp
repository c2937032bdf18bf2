#include "hierind/metrics.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <unordered_map>

#include "hierind/error.hpp"

namespace hierind {

namespace {

std::int64_t choose2(std::int64_t n) { return n * (n - 1) / 2; }

std::vector<int> densify(std::span<const int> labels) {
  std::unordered_map<int, int> ids;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int v : labels) {
    auto [it, inserted] = ids.emplace(v, static_cast<int>(ids.size()));
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

bool same_partition(std::span<const int> p, std::span<const int> q) {
  return p.size() == q.size() && densify(p) == densify(q);
}

double adjusted_rand_index(std::span<const int> p, std::span<const int> q) {
  require(p.size() == q.size(), "ARI: partitions cover different item counts");
  const std::vector<int> a = densify(p);
  const std::vector<int> b = densify(q);
  std::map<std::pair<int, int>, std::int64_t> table;
  std::unordered_map<int, std::int64_t> row_sums;
  std::unordered_map<int, std::int64_t> col_sums;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++table[{a[i], b[i]}];
    ++row_sums[a[i]];
    ++col_sums[b[i]];
  }
  std::int64_t index = 0;
  for (const auto& [cell, count] : table) index += choose2(count);
  std::int64_t sum_a = 0;
  for (const auto& [label, count] : row_sums) sum_a += choose2(count);
  std::int64_t sum_b = 0;
  for (const auto& [label, count] : col_sums) sum_b += choose2(count);
  const std::int64_t pairs = choose2(static_cast<std::int64_t>(a.size()));

  // (index - E) / (M - E) with E = sum_a*sum_b/pairs and M = (sum_a+sum_b)/2,
  // scaled by 2*pairs to stay in integers as long as possible.
  const double numerator = 2.0 * (static_cast<double>(index) * static_cast<double>(pairs) -
                                  static_cast<double>(sum_a) * static_cast<double>(sum_b));
  const double denominator =
      static_cast<double>(pairs) * static_cast<double>(sum_a + sum_b) -
      2.0 * static_cast<double>(sum_a) * static_cast<double>(sum_b);
  if (pairs == 0 || denominator == 0.0) return a == b ? 1.0 : 0.0;
  return numerator / denominator;
}

EvalRecord empirical_risk(std::span<const int> predictions, std::span<const int> truth,
                          std::string method) {
  require(predictions.size() == truth.size(), "empirical_risk: length mismatch");
  require(!predictions.empty(), "empirical_risk: empty evaluation set");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += predictions[i] != truth[i] ? 1 : 0;
  EvalRecord rec;
  rec.n_test = truth.size();
  rec.risk = static_cast<double>(wrong) / static_cast<double>(truth.size());
  rec.accuracy = 1.0 - rec.risk;
  rec.method = std::move(method);
  return rec;
}

double learning_efficiency(double risk_h, double risk_ref) {
  if (!(risk_ref > 0.0)) fail(ErrorCode::kNumerical, "perfect reference: reference risk is 0");
  return risk_h / risk_ref;
}

AggregateResult aggregate(std::span<const double> values) {
  require(!values.empty(), "aggregate: empty list");
  AggregateResult out;
  out.reps = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    out.se = sd / std::sqrt(static_cast<double>(values.size()));
  }
  return out;
}

}  // namespace hierind
