#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hierind/error.hpp"
#include "hierind/harness.hpp"
#include "test_support.hpp"

using namespace hierind;

namespace {

SweepConfig small_sweep() {
  SweepConfig cfg;
  cfg.gamma0_grid = {0.25, 4.0};
  cfg.replicates = 3;
  cfg.n_per_class = 20;
  cfg.restarts = 3;
  cfg.budget = {4, 3, 8, 6, 8};
  cfg.seed = 17;
  cfg.threads = 1;
  return cfg;
}

ExperimentConfig small_experiment() {
  ExperimentConfig cfg;
  cfg.fraction = 0.1;
  cfg.replicates = 2;
  cfg.induction.n_refs = 2;
  cfg.induction.restarts = 2;
  cfg.coarse_trees = 4;
  cfg.fine_trees = 3;
  cfg.hier_depth = 6;
  cfg.flat_trees = 6;
  cfg.flat_depth = 8;
  cfg.seed = 5;
  cfg.threads = 1;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::string kData = std::string(HIERIND_DATA_DIR) + "/sim_k20.csv";
const std::string kTruth = std::string(HIERIND_DATA_DIR) + "/sim_k20_truth.csv";

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("single grid point with one replicate has zero standard error") {
    SweepConfig cfg = small_sweep();
    cfg.gamma0_grid = {1.0};
    cfg.replicates = 1;
    const ExperimentReport report = run_sim_sweep(cfg);
    REQUIRE_FALSE(report.rows.empty());
    for (const auto& row : report.rows) {
      CHECK(row.value.se == 0.0);
      CHECK(row.value.reps == 1);
      CHECK(row.gamma0 == 1.0);
    }
    CHECK(report.methods == kSweepMethods);
    REQUIRE(report.find("truth", "ari", 1.0) != nullptr);
    CHECK(report.find("truth", "ari", 1.0)->value.mean == 1.0);
    CHECK(report.find("flat", "le", 1.0) == nullptr);
  }

  TEST_CASE("sweep output round-trips and ignores the thread count") {
    SweepConfig cfg = small_sweep();
    const ExperimentReport serial = run_sim_sweep(cfg);
    CHECK(parse_plot_data(emit_plot_data(serial)) == serial.rows);
    CHECK(serial.rows.size() == 2 * (1 + 3 * 3));  // flat accuracy; 3 hierarchies x (ari, accuracy, le)
    CHECK(serial.replicate_values.size() == serial.rows.size() * 3);

    cfg.threads = 4;
    const ExperimentReport parallel = run_sim_sweep(cfg);
    CHECK(emit_plot_data(parallel) == emit_plot_data(serial));
    CHECK(emit_replicates(parallel) == emit_replicates(serial));
    CHECK(emit_tree_ledger(parallel) == emit_tree_ledger(serial));

    cfg.seed = 18;
    CHECK(emit_plot_data(run_sim_sweep(cfg)) != emit_plot_data(serial));
  }

  TEST_CASE("tree ledger records the configured budgets") {
    const ExperimentReport report = run_sim_sweep(small_sweep());
    REQUIRE(report.tree_ledger.size() == 4);
    CHECK(report.tree_ledger[0].method == "flat");
    CHECK(report.tree_ledger[0].flat_trees == 6);
    CHECK(report.tree_ledger[0].mean_total_trees == 6.0);
    for (std::size_t i = 1; i < 4; ++i) {
      const auto& e = report.tree_ledger[i];
      CHECK(e.coarse_trees == 4);
      CHECK(e.fine_trees_per_coarse == 3);
      CHECK(e.max_depth == 8);
      CHECK(e.mean_coarse_labels == 4.0);
      CHECK(e.mean_total_trees == 4.0 + 3.0 * 4.0);
    }
  }

  TEST_CASE("empty report emits a header-only table") {
    const ExperimentReport empty;
    CHECK(emit_plot_data(empty) == "gamma0,method,metric,mean,se,reps\n");
    CHECK(parse_plot_data(emit_plot_data(empty)).empty());
    CHECK_THROWS_AS(parse_plot_data("a,b\n"), Error);
    CHECK_THROWS_AS(parse_plot_data("gamma0,method,metric,mean,se,reps\n,flat,accuracy,x,0,1\n"), Error);
  }

  TEST_CASE("feature experiment with and without a truth hierarchy") {
    const ExperimentConfig cfg = small_experiment();
    const ExperimentReport with = run_feature_experiment(kData, "label", kTruth, cfg);
    CHECK(with.methods == kExperimentMethods);
    for (const auto& m : kExperimentMethods) {
      CHECK(with.find(m, "accuracy") != nullptr);
      CHECK(with.find(m, "le_avg_error") != nullptr);
      if (m != "flat") CHECK(with.find(m, "ari") != nullptr);
    }
    CHECK(with.find("truth", "ari")->value.mean == 1.0);
    CHECK(with.find("flat", "le_avg_error")->value.mean == 1.0);
    for (const auto& row : with.rows) {
      CHECK_FALSE(row.gamma0.has_value());
      if (row.metric == "accuracy") CHECK(row.value.reps == 2);
    }

    const ExperimentReport without = run_feature_experiment(kData, "label", std::nullopt, cfg);
    CHECK(std::find(without.methods.begin(), without.methods.end(), "truth") == without.methods.end());
    for (const auto& row : without.rows) {
      CHECK(row.method != "truth");
      CHECK(row.metric != "ari");
    }
    CHECK(without.find("flat", "accuracy")->value == with.find("flat", "accuracy")->value);

    test_support::TempDir dir("harness");
    write_report(with, dir.str(), "experiment");
    CHECK(slurp(dir.file("experiment.csv")) == emit_plot_data(with));
    CHECK(slurp(dir.file("experiment_replicates.csv")) == emit_replicates(with));
    CHECK(slurp(dir.file("tree_ledger.csv")) == emit_tree_ledger(with));
    CHECK(std::filesystem::exists(dir.file("metadata.json")));
  }

  TEST_CASE("config validation") {
    SweepConfig sweep = small_sweep();
    sweep.gamma0_grid.clear();
    CHECK_THROWS_AS(run_sim_sweep(sweep), Error);
    sweep = small_sweep();
    sweep.coarse_k = 100;
    CHECK_THROWS_AS(run_sim_sweep(sweep), Error);
    ExperimentConfig exp = small_experiment();
    exp.fraction = 0.0;
    CHECK_THROWS_AS(exp.validate(), Error);
    exp = small_experiment();
    exp.fraction = 1.0;
    CHECK_THROWS_AS(run_feature_experiment(kData, "label", std::nullopt, exp), Error);
  }
}
