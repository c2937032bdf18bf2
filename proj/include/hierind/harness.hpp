#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hierind/dataset.hpp"
#include "hierind/hierarchy.hpp"
#include "hierind/hierclass.hpp"
#include "hierind/metrics.hpp"

namespace hierind {

/// Simulation sweep over the Type-II variance gamma0.
struct SweepConfig {
  std::vector<double> gamma0_grid{0.0625, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0};
  double gamma1 = 1.0;
  int per_parent = 5;
  int n_per_class = 50;
  int dim = 2;
  int replicates = 30;
  int coarse_k = 4;
  int restarts = 10;
  ForestBudget budget{};  // 10 coarse / 5 fine / 30 flat, depth 20
  std::uint64_t seed = 0;
  unsigned threads = 0;

  void validate() const;
};

/// Real-feature protocol: non-stratified subsample for training, complement
/// for testing, induced hierarchies plus their random matched twins.
struct ExperimentConfig {
  double fraction = 0.1;
  int replicates = 10;
  InductionConfig induction{};
  int coarse_trees = 100;
  int fine_trees = 100;
  int hier_depth = 10;
  int flat_trees = 300;
  int flat_depth = 20;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  void validate() const;
};

struct ReportRow {
  std::optional<double> gamma0;
  std::string method;
  std::string metric;
  AggregateResult value;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/// Trees grown per classifier. `mean_coarse_labels` averages the realised
/// number of coarse labels (and so of fine forests) over replicates.
struct TreeLedgerEntry {
  std::string method;
  int coarse_trees = 0;  // flat: 0
  int fine_trees_per_coarse = 0;
  int flat_trees = 0;
  int max_depth = 0;
  double mean_coarse_labels = 0.0;
  double mean_total_trees = 0.0;
};

/// Per-replicate value behind an aggregate row.
struct ReplicateValue {
  std::optional<double> gamma0;
  int replicate = 0;
  std::string method;
  std::string metric;
  double value = 0.0;
};

struct ExperimentReport {
  std::vector<std::string> methods;
  std::vector<ReportRow> rows;
  std::vector<ReplicateValue> replicate_values;
  std::vector<TreeLedgerEntry> tree_ledger;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::string> notes;
  double wall_seconds = 0.0;

  const ReportRow* find(const std::string& method, const std::string& metric,
                        std::optional<double> gamma0 = std::nullopt) const;
};

inline const std::vector<std::string> kExperimentMethods{"flat",     "cond_mean", "random_cm",
                                                         "task_sim", "random_ts", "truth"};
inline const std::vector<std::string> kSweepMethods{"flat", "cond_mean", "random_cm", "truth"};

ExperimentReport run_sim_sweep(const SweepConfig& cfg);

ExperimentReport run_feature_experiment(const LabeledDataset& ds,
                                        const std::optional<Hierarchy>& truth,
                                        const ExperimentConfig& cfg);
ExperimentReport run_feature_experiment(const std::string& dataset_path,
                                        const std::string& label_column,
                                        const std::optional<std::string>& truth_path,
                                        const ExperimentConfig& cfg);

/// Long-format CSV: gamma0,method,metric,mean,se,reps (gamma0 empty outside
/// sweeps). Values use shortest round-trip formatting.
std::string emit_plot_data(const ExperimentReport& report);
std::vector<ReportRow> parse_plot_data(const std::string& csv_text);

std::string emit_replicates(const ExperimentReport& report);
std::string emit_tree_ledger(const ExperimentReport& report);
std::string emit_metadata(const ExperimentReport& report);

/// Writes <stem>.csv, <stem>_replicates.csv, tree_ledger.csv and
/// metadata.json into `out_dir` (created if needed).
void write_report(const ExperimentReport& report, const std::string& out_dir,
                  const std::string& stem);

}  // namespace hierind
