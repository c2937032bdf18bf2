// hierind command-line driver.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hierind/csv.hpp"
#include "hierind/dataset.hpp"
#include "hierind/error.hpp"
#include "hierind/harness.hpp"
#include "hierind/hierarchy.hpp"
#include "hierind/hierclass.hpp"
#include "hierind/metrics.hpp"
#include "hierind/simgen.hpp"
#include "hierind/tasksim.hpp"

namespace fs = std::filesystem;
using namespace hierind;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string out_dir = ".";
};

// Relative output paths land under --out-dir.
std::string output_path(const Globals& g, const std::string& path) {
  if (fs::path(path).is_absolute() || g.out_dir.empty() || g.out_dir == ".") return path;
  std::error_code ec;
  fs::create_directories(g.out_dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create '" + g.out_dir + "': " + ec.message());
  return (fs::path(g.out_dir) / path).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string matrix_csv(const Matrix& m, const std::vector<std::string>& names) {
  std::ostringstream out;
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << csv::escape(names[j]);
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << csv::format_double(m(i, j));
    out << '\n';
  }
  return out.str();
}

std::vector<std::string> class_ids(int k) {
  std::vector<std::string> ids;
  for (int i = 0; i < k; ++i) ids.push_back(std::to_string(i));
  return ids;
}

// Options shared by induce and experiment.
struct InductionFlags {
  std::string coarse_k = "bic";
  int pca_dim = 128;
  int embed_dim = 16;
  int n_refs = 10;
  std::string covariance = "tied-full";
  int restarts = 10;
  TaskSimOptions tasksim{};

  void add(CLI::App* app) {
    app->add_option("--coarse-k", coarse_k, "number of coarse labels, or 'bic'")->capture_default_str();
    app->add_option("--pca-dim", pca_dim, "PCA target dimension for conditional means")
        ->capture_default_str();
    app->add_option("--embed-dim", embed_dim, "spectral embedding dimension")->capture_default_str();
    app->add_option("--n-refs", n_refs, "reference classes per pair")->capture_default_str();
    app->add_option("--covariance", covariance, "spherical | diagonal | full | tied-full")
        ->capture_default_str();
    app->add_option("--restarts", restarts, "EM restarts")->capture_default_str();
    app->add_option("--ts-trees", tasksim.n_trees, "trees per transfer forest")->capture_default_str();
    app->add_option("--ts-depth", tasksim.max_depth, "depth of transfer trees")->capture_default_str();
  }

  void apply(InductionConfig& cfg) const {
    if (coarse_k == "bic") {
      cfg.coarse_k.reset();
    } else {
      long long c = 0;
      if (!csv::parse_int(coarse_k, c) || c < 1) fail(ErrorCode::kParse, "--coarse-k must be 'bic' or a positive integer");
      cfg.coarse_k = static_cast<int>(c);
    }
    cfg.pca_dim = pca_dim;
    cfg.embed_dim = embed_dim;
    cfg.n_refs = n_refs;
    cfg.mode = parse_covariance_mode(covariance);
    cfg.restarts = restarts;
    cfg.tasksim = tasksim;
  }
};

void write_diagnostics(const std::string& dir, const InductionDiagnostics& diag) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create '" + dir + "': " + ec.message());
  std::ostringstream bic;
  bic << "c,bic\n";
  for (const auto& [c, v] : diag.bic_table) bic << c << ',' << csv::format_double(v) << '\n';
  write_text((fs::path(dir) / "bic.csv").string(), bic.str());
  if (diag.eigenvalues) {
    std::ostringstream ev;
    ev << "index,eigenvalue\n";
    for (Eigen::Index i = 0; i < diag.eigenvalues->size(); ++i) {
      ev << i << ',' << csv::format_double((*diag.eigenvalues)(i)) << '\n';
    }
    write_text((fs::path(dir) / "eigenvalues.csv").string(), ev.str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent hierarchy induction and hierarchical forest classification"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value file; command-line flags override");
  Globals g;
  app.add_option("--seed", g.seed, "base seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "directory for relative outputs")->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "draw a two-level Gaussian world");
  SimConfig sim_cfg;
  std::string sim_out = "dataset.csv", sim_truth_out;
  sim->add_option("--gamma0", sim_cfg.gamma0)->capture_default_str();
  sim->add_option("--gamma1", sim_cfg.gamma1)->capture_default_str();
  sim->add_option("--per-parent", sim_cfg.per_parent)->capture_default_str();
  sim->add_option("--n-per-class", sim_cfg.n_per_class)->capture_default_str();
  sim->add_option("--dim", sim_cfg.dim)->capture_default_str();
  sim->add_option("--out", sim_out, "dataset CSV")->capture_default_str();
  sim->add_option("--truth-out", sim_truth_out, "hierarchy CSV (leaf_id,coarse_id)");

  // similarity
  auto* simil = app.add_subcommand("similarity", "pairwise task-similarity matrix");
  std::string simil_input, simil_out = "similarity.csv", simil_raw_out, label_column = "label";
  int simil_refs = 10;
  TaskSimOptions simil_opts;
  simil->add_option("--input", simil_input)->required();
  simil->add_option("--label-column", label_column)->capture_default_str();
  simil->add_option("--n-refs", simil_refs)->capture_default_str();
  simil->add_option("--ts-trees", simil_opts.n_trees, "trees per transfer forest")->capture_default_str();
  simil->add_option("--ts-depth", simil_opts.max_depth, "depth of transfer trees")->capture_default_str();
  simil->add_option("--out", simil_out, "processed k x k CSV")->capture_default_str();
  simil->add_option("--raw-out", simil_raw_out, "unprocessed k x k CSV");

  // induce
  auto* ind = app.add_subcommand("induce", "induce a two-level hierarchy");
  std::string ind_input, ind_method = "cond-mean", ind_out = "hierarchy.csv", ind_truth, ind_base, ind_diag;
  InductionFlags ind_flags;
  ind->add_option("--input", ind_input)->required();
  ind->add_option("--label-column", label_column)->capture_default_str();
  ind->add_option("--method", ind_method, "cond-mean | task-sim | random | truth")->capture_default_str();
  ind_flags.add(ind);
  ind->add_option("--truth", ind_truth, "hierarchy CSV for --method truth");
  ind->add_option("--base", ind_base, "hierarchy CSV permuted by --method random (default: cond-mean)");
  ind->add_option("--diagnostics", ind_diag, "directory for BIC / eigenvalue tables");
  ind->add_option("--out", ind_out)->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "fit a flat or hierarchical classifier");
  std::string train_input, train_hier, train_out = "model.json";
  ForestBudget budget{100, 100, 10, 300, 20};
  train->add_option("--input", train_input)->required();
  train->add_option("--label-column", label_column)->capture_default_str();
  train->add_option("--hierarchy", train_hier, "hierarchy CSV; omit for a flat forest");
  train->add_option("--coarse-trees", budget.coarse_trees)->capture_default_str();
  train->add_option("--fine-trees", budget.fine_trees)->capture_default_str();
  train->add_option("--hier-depth", budget.hier_depth)->capture_default_str();
  train->add_option("--flat-trees", budget.flat_trees)->capture_default_str();
  train->add_option("--flat-depth", budget.flat_depth)->capture_default_str();
  train->add_option("--out", train_out)->capture_default_str();

  // predict
  auto* pred = app.add_subcommand("predict", "predict leaf labels and posteriors");
  std::string pred_model, pred_input, pred_out = "predictions.csv";
  pred->add_option("--model", pred_model)->required();
  pred->add_option("--input", pred_input)->required();
  pred->add_option("--label-column", label_column)->capture_default_str();
  pred->add_option("--out", pred_out)->capture_default_str();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "score predictions against labels");
  std::string eval_pred, eval_input, eval_ref, eval_method = "model", eval_out;
  eval->add_option("--predictions", eval_pred)->required();
  eval->add_option("--input", eval_input, "dataset CSV holding the true labels")->required();
  eval->add_option("--label-column", label_column)->capture_default_str();
  eval->add_option("--reference", eval_ref, "baseline predictions; adds learning efficiency");
  eval->add_option("--method", eval_method)->capture_default_str();
  eval->add_option("--out", eval_out, "CSV output (stdout if omitted)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "simulation sweep over gamma0");
  SweepConfig sweep_cfg;
  std::string sweep_stem = "sweep";
  sweep->add_option("--gamma0", sweep_cfg.gamma0_grid, "grid values")->delimiter(',')->capture_default_str();
  sweep->add_option("--gamma1", sweep_cfg.gamma1)->capture_default_str();
  sweep->add_option("--per-parent", sweep_cfg.per_parent)->capture_default_str();
  sweep->add_option("--n-per-class", sweep_cfg.n_per_class)->capture_default_str();
  sweep->add_option("--dim", sweep_cfg.dim)->capture_default_str();
  sweep->add_option("--replicates", sweep_cfg.replicates)->capture_default_str();
  sweep->add_option("--coarse-k", sweep_cfg.coarse_k)->capture_default_str();
  sweep->add_option("--restarts", sweep_cfg.restarts)->capture_default_str();
  sweep->add_option("--coarse-trees", sweep_cfg.budget.coarse_trees)->capture_default_str();
  sweep->add_option("--fine-trees", sweep_cfg.budget.fine_trees)->capture_default_str();
  sweep->add_option("--hier-depth", sweep_cfg.budget.hier_depth)->capture_default_str();
  sweep->add_option("--flat-trees", sweep_cfg.budget.flat_trees)->capture_default_str();
  sweep->add_option("--flat-depth", sweep_cfg.budget.flat_depth)->capture_default_str();
  sweep->add_option("--stem", sweep_stem, "results file stem")->capture_default_str();

  // experiment
  auto* exp = app.add_subcommand("experiment", "subsample protocol on a feature CSV");
  ExperimentConfig exp_cfg;
  std::string exp_input, exp_truth, exp_stem = "experiment";
  InductionFlags exp_flags;
  exp->add_option("--input", exp_input)->required();
  exp->add_option("--label-column", label_column)->capture_default_str();
  exp->add_option("--truth", exp_truth, "hierarchy CSV over the dataset's classes");
  exp->add_option("--fraction", exp_cfg.fraction)->capture_default_str();
  exp->add_option("--replicates", exp_cfg.replicates)->capture_default_str();
  exp_flags.add(exp);
  exp->add_option("--coarse-trees", exp_cfg.coarse_trees)->capture_default_str();
  exp->add_option("--fine-trees", exp_cfg.fine_trees)->capture_default_str();
  exp->add_option("--hier-depth", exp_cfg.hier_depth)->capture_default_str();
  exp->add_option("--flat-trees", exp_cfg.flat_trees)->capture_default_str();
  exp->add_option("--flat-depth", exp_cfg.flat_depth)->capture_default_str();
  exp->add_option("--stem", exp_stem, "results file stem")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error code=usage message=" << std::quoted(std::string(e.what())) << '\n';
    return 2;
  }

  const RngSeed seed{g.seed, 0};
  try {
    if (*sim) {
      sim_cfg.seed = seed;
      const SimulatedWorld world = simulate_dataset(sim_cfg);
      save_dataset(world.dataset, output_path(g, sim_out));
      if (!sim_truth_out.empty()) save_hierarchy(world.truth, output_path(g, sim_truth_out));
    } else if (*simil) {
      const LabeledDataset ds = load_dataset(simil_input, label_column);
      Matrix raw;
      const SimilarityMatrix s = pairwise_similarity_matrix(ds, simil_refs, seed, g.threads, simil_opts, &raw);
      write_text(output_path(g, simil_out), matrix_csv(s.values, class_ids(ds.num_classes())));
      if (!simil_raw_out.empty()) {
        write_text(output_path(g, simil_raw_out), matrix_csv(raw, class_ids(ds.num_classes())));
      }
    } else if (*ind) {
      const LabeledDataset ds = load_dataset(ind_input, label_column);
      InductionConfig cfg;
      ind_flags.apply(cfg);
      cfg.method = parse_induction_method(ind_method);
      cfg.seed = seed;
      cfg.threads = g.threads;
      InductionDiagnostics diag;
      Hierarchy h;
      switch (cfg.method) {
        case InductionMethod::kCondMean:
          h = induce_cond_mean(ds, cfg, &diag);
          break;
        case InductionMethod::kTaskSim:
          h = induce_task_sim(ds, cfg, &diag);
          break;
        case InductionMethod::kRandomMatched: {
          const Hierarchy base = ind_base.empty() ? induce_cond_mean(ds, cfg, &diag) : load_hierarchy(ind_base);
          require(base.num_leaves() == ds.num_classes(), "base hierarchy does not cover the dataset's classes");
          h = random_matched(base, seed.derive(4));
          break;
        }
        case InductionMethod::kTruth:
          require(!ind_truth.empty(), "--method truth needs --truth");
          h = load_hierarchy(ind_truth);
          require(h.num_leaves() == ds.num_classes(), "truth hierarchy does not cover the dataset's classes");
          break;
      }
      save_hierarchy(h, output_path(g, ind_out));
      if (!ind_diag.empty()) write_diagnostics(output_path(g, ind_diag), diag);
    } else if (*train) {
      const LabeledDataset ds = load_dataset(train_input, label_column);
      SavedModel model;
      model.class_names = ds.class_names();
      if (train_hier.empty()) {
        model.model = fit_flat(ds, budget.flat_trees, budget.flat_depth, seed, g.threads);
      } else {
        const Hierarchy h = load_hierarchy(train_hier);
        require(h.num_leaves() == ds.num_classes(), "hierarchy covers " + std::to_string(h.num_leaves()) +
                                                        " leaves but the dataset has " +
                                                        std::to_string(ds.num_classes()) + " classes");
        model.model = fit_hierarchical(ds, h, budget.coarse_trees, budget.fine_trees, budget.hier_depth, seed,
                                       g.threads);
      }
      save_model(model, output_path(g, train_out));
    } else if (*pred) {
      const SavedModel model = load_model(pred_model);
      const LabeledDataset ds = load_dataset_with_vocabulary(pred_input, label_column, model.class_names);
      require(static_cast<int>(ds.dim()) == model.feature_dim(),
              "input has " + std::to_string(ds.dim()) + " features but the model expects " +
                  std::to_string(model.feature_dim()));
      const Matrix post = model.predict_posteriors(ds.features());
      std::ostringstream out;
      out << "row_id,predicted_leaf";
      for (const auto& name : model.class_names) out << ',' << csv::escape("p_" + name);
      out << '\n';
      for (Eigen::Index i = 0; i < post.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < post.cols(); ++c) {
          if (post(i, c) > post(i, best)) best = c;
        }
        out << i << ',' << csv::escape(model.class_names[static_cast<std::size_t>(best)]);
        for (Eigen::Index c = 0; c < post.cols(); ++c) out << ',' << csv::format_double(post(i, c));
        out << '\n';
      }
      write_text(output_path(g, pred_out), out.str());
    } else if (*eval) {
      // Predictions are matched to labels by class token.
      auto read_predictions = [](const std::string& path) {
        std::istringstream in(read_text(path));
        const auto records = csv::read_all(in);
        if (records.empty() || records.front().fields.size() < 2 || records.front().fields[1] != "predicted_leaf") {
          fail(ErrorCode::kParse, path + ": expected a predictions CSV with a predicted_leaf column");
        }
        std::vector<std::string> tokens;
        for (std::size_t i = 1; i < records.size(); ++i) {
          if (records[i].fields.size() < 2) {
            fail(ErrorCode::kParse, path + " line " + std::to_string(records[i].line) + ": missing fields");
          }
          tokens.push_back(records[i].fields[1]);
        }
        return tokens;
      };
      const LabeledDataset ds = load_dataset(eval_input, label_column);
      auto encode = [&](const std::vector<std::string>& tokens, const std::string& path) {
        require(tokens.size() == ds.size(), path + " has " + std::to_string(tokens.size()) +
                                                " predictions for " + std::to_string(ds.size()) + " rows");
        std::vector<int> ids;
        for (const auto& t : tokens) {
          const auto& names = ds.class_names();
          auto it = std::find(names.begin(), names.end(), t);
          ids.push_back(it == names.end() ? -1 : static_cast<int>(it - names.begin()));
        }
        return ids;
      };
      const EvalRecord rec = empirical_risk(encode(read_predictions(eval_pred), eval_pred), ds.labels(), eval_method);
      std::ostringstream out;
      out << "method,accuracy,risk,n_test" << (eval_ref.empty() ? "" : ",reference_risk,le") << '\n';
      out << csv::escape(rec.method) << ',' << csv::format_double(rec.accuracy) << ','
          << csv::format_double(rec.risk) << ',' << rec.n_test;
      if (!eval_ref.empty()) {
        const EvalRecord ref = empirical_risk(encode(read_predictions(eval_ref), eval_ref), ds.labels(), "reference");
        out << ',' << csv::format_double(ref.risk) << ',' << csv::format_double(learning_efficiency(ref.risk, rec.risk));
      }
      out << '\n';
      if (eval_out.empty()) {
        std::cout << out.str();
      } else {
        write_text(output_path(g, eval_out), out.str());
      }
    } else if (*sweep) {
      sweep_cfg.seed = g.seed;
      sweep_cfg.threads = g.threads;
      const ExperimentReport report = run_sim_sweep(sweep_cfg);
      write_report(report, g.out_dir, sweep_stem);
    } else if (*exp) {
      exp_flags.apply(exp_cfg.induction);
      exp_cfg.seed = g.seed;
      exp_cfg.threads = g.threads;
      std::optional<std::string> truth;
      if (!exp_truth.empty()) truth = exp_truth;
      const ExperimentReport report = run_feature_experiment(exp_input, label_column, truth, exp_cfg);
      write_report(report, g.out_dir, exp_stem);
    }
  } catch (const Error& e) {
    std::cerr << "error code=" << to_string(e.code()) << " message=" << std::quoted(std::string(e.what())) << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error code=internal message=" << std::quoted(std::string(e.what())) << '\n';
    return 1;
  }
  return 0;
}
