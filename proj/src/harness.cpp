#include "hierind/harness.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "hierind/csv.hpp"
#include "hierind/error.hpp"
#include "hierind/parallel.hpp"
#include "hierind/simgen.hpp"

namespace hierind {

namespace {

using Clock = std::chrono::steady_clock;

// Values of one replicate keyed by (method, metric), in insertion order.
struct ReplicateOutcome {
  std::vector<std::tuple<std::string, std::string, double>> values;
  std::map<std::string, int> coarse_labels;
  std::vector<std::string> notes;

  void put(const std::string& method, const std::string& metric, double v) {
    values.emplace_back(method, metric, v);
  }
};

std::string describe(RngSeed s) {
  return "(seed=" + std::to_string(s.seed) + ", stream=" + std::to_string(s.stream) + ")";
}

// Rows in method-major order (method order from `methods`, metric order of
// first appearance), aggregated over the outcomes of one group.
void append_rows(ExperimentReport& report, std::optional<double> gamma0,
                 const std::vector<ReplicateOutcome>& outcomes) {
  std::vector<std::string> metric_order;
  std::map<std::pair<std::string, std::string>, std::vector<double>> series;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    for (const auto& [method, metric, v] : outcomes[r].values) {
      if (std::find(metric_order.begin(), metric_order.end(), metric) == metric_order.end()) {
        metric_order.push_back(metric);
      }
      series[{method, metric}].push_back(v);
      report.replicate_values.push_back({gamma0, static_cast<int>(r), method, metric, v});
    }
  }
  for (const auto& method : report.methods) {
    for (const auto& metric : metric_order) {
      auto it = series.find({method, metric});
      if (it == series.end()) continue;
      report.rows.push_back({gamma0, method, metric, aggregate(it->second)});
    }
  }
}

void add_ledger(ExperimentReport& report, const std::string& method, int coarse, int fine, int flat,
                int depth, const std::vector<ReplicateOutcome>& outcomes) {
  TreeLedgerEntry e;
  e.method = method;
  e.coarse_trees = coarse;
  e.fine_trees_per_coarse = fine;
  e.flat_trees = flat;
  e.max_depth = depth;
  if (flat > 0) {
    e.mean_total_trees = flat;
  } else {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& o : outcomes) {
      auto it = o.coarse_labels.find(method);
      if (it == o.coarse_labels.end()) continue;
      sum += it->second;
      ++count;
    }
    e.mean_coarse_labels = count ? sum / static_cast<double>(count) : 0.0;
    e.mean_total_trees = coarse + fine * e.mean_coarse_labels;
  }
  report.tree_ledger.push_back(e);
}

double accuracy_of(const std::vector<int>& predicted, const LabeledDataset& test,
                   const std::string& method) {
  return empirical_risk(predicted, test.labels(), method).accuracy;
}

}  // namespace

const ReportRow* ExperimentReport::find(const std::string& method, const std::string& metric,
                                        std::optional<double> gamma0) const {
  for (const auto& row : rows) {
    if (row.method == method && row.metric == metric && row.gamma0 == gamma0) return &row;
  }
  return nullptr;
}

void SweepConfig::validate() const {
  require(!gamma0_grid.empty(), "gamma0 grid must be nonempty");
  for (double g : gamma0_grid) require(g > 0.0, "gamma0 grid values must be positive");
  require(gamma1 > 0.0, "gamma1 must be positive");
  require(per_parent >= 1 && n_per_class >= 2, "invalid simulation sizes");
  require(replicates >= 1, "replicates must be at least 1");
  require(coarse_k >= 1 && coarse_k <= kNumParents * per_parent, "coarse_k out of range");
  require(budget.coarse_trees >= 1 && budget.fine_trees >= 1 && budget.flat_trees >= 1,
          "forest budgets must be positive");
  require(budget.hier_depth >= 1 && budget.flat_depth >= 1, "depths must be positive");
}

void ExperimentConfig::validate() const {
  require(fraction > 0.0 && fraction <= 1.0, "fraction must lie in (0, 1]");
  require(replicates >= 1, "replicates must be at least 1");
  require(coarse_trees >= 1 && fine_trees >= 1 && flat_trees >= 1, "forest budgets must be positive");
  require(hier_depth >= 1 && flat_depth >= 1, "depths must be positive");
  induction.validate();
}

// ---------------------------------------------------------------------------

ExperimentReport run_sim_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  const std::size_t n_gamma = cfg.gamma0_grid.size();
  const auto reps = static_cast<std::size_t>(cfg.replicates);
  std::vector<ReplicateOutcome> outcomes(n_gamma * reps);
  const RngSeed root{cfg.seed, 0};

  parallel_for(outcomes.size(), cfg.threads, [&](std::size_t task) {
    const std::size_t gi = task / reps;
    const std::size_t rep = task % reps;
    const RngSeed seed = root.derive(gi, rep);
    try {
      SimConfig sim;
      sim.gamma0 = cfg.gamma0_grid[gi];
      sim.gamma1 = cfg.gamma1;
      sim.per_parent = cfg.per_parent;
      sim.n_per_class = cfg.n_per_class;
      sim.dim = cfg.dim;
      sim.seed = seed.derive(1);
      const SimulatedWorld world = simulate_dataset(sim);
      const LabeledDataset& train = world.dataset;
      const LabeledDataset test =
          sample_patterns(world.class_means, cfg.gamma1, cfg.n_per_class, seed.derive(2));

      InductionConfig ind;
      ind.coarse_k = cfg.coarse_k;
      ind.restarts = cfg.restarts;
      ind.seed = seed.derive(3);
      const Hierarchy induced = induce_cond_mean(train, ind);
      const Hierarchy random = random_matched(induced, seed.derive(4));

      ReplicateOutcome& out = outcomes[task];
      const auto& truth_parent = world.truth.parent_of();
      out.put("cond_mean", "ari", adjusted_rand_index(induced.parent_of(), truth_parent));
      out.put("random_cm", "ari", adjusted_rand_index(random.parent_of(), truth_parent));
      out.put("truth", "ari", 1.0);

      const auto& b = cfg.budget;
      const UncertaintyForest flat = fit_flat(train, b.flat_trees, b.flat_depth, seed.derive(5));
      const double flat_acc = accuracy_of(flat.predict_classes(test.features()), test, "flat");
      out.put("flat", "accuracy", flat_acc);

      const std::pair<const char*, const Hierarchy*> hiers[] = {
          {"cond_mean", &induced}, {"random_cm", &random}, {"truth", &world.truth}};
      for (const auto& [name, h] : hiers) {
        const HierarchicalClassifier hc =
            fit_hierarchical(train, *h, b.coarse_trees, b.fine_trees, b.hier_depth, seed.derive(6));
        const double acc = accuracy_of(hc.predict_classes(test.features()), test, name);
        out.put(name, "accuracy", acc);
        out.put(name, "le", learning_efficiency(1.0 - flat_acc, 1.0 - acc));
        out.coarse_labels[name] = h->num_coarse();
      }
    } catch (const Error& e) {
      throw Error(e.code(), "sweep replicate failed at gamma0=" +
                                csv::format_double(cfg.gamma0_grid[gi]) + " replicate=" +
                                std::to_string(rep) + " " + describe(seed) + ": " + e.what());
    }
  });

  ExperimentReport report;
  report.methods = kSweepMethods;
  for (std::size_t gi = 0; gi < n_gamma; ++gi) {
    const std::vector<ReplicateOutcome> group(outcomes.begin() + static_cast<std::ptrdiff_t>(gi * reps),
                                              outcomes.begin() + static_cast<std::ptrdiff_t>((gi + 1) * reps));
    append_rows(report, cfg.gamma0_grid[gi], group);
  }
  const auto& b = cfg.budget;
  add_ledger(report, "flat", 0, 0, b.flat_trees, b.flat_depth, outcomes);
  for (const char* name : {"cond_mean", "random_cm", "truth"}) {
    add_ledger(report, name, b.coarse_trees, b.fine_trees, 0, b.hier_depth, outcomes);
  }

  std::string grid;
  for (double g : cfg.gamma0_grid) grid += (grid.empty() ? "" : " ") + csv::format_double(g);
  report.config = {{"gamma0_grid", grid},
                   {"gamma1", csv::format_double(cfg.gamma1)},
                   {"per_parent", std::to_string(cfg.per_parent)},
                   {"n_per_class", std::to_string(cfg.n_per_class)},
                   {"dim", std::to_string(cfg.dim)},
                   {"replicates", std::to_string(cfg.replicates)},
                   {"coarse_k", std::to_string(cfg.coarse_k)},
                   {"restarts", std::to_string(cfg.restarts)},
                   {"coarse_trees", std::to_string(b.coarse_trees)},
                   {"fine_trees", std::to_string(b.fine_trees)},
                   {"hier_depth", std::to_string(b.hier_depth)},
                   {"flat_trees", std::to_string(b.flat_trees)},
                   {"flat_depth", std::to_string(b.flat_depth)},
                   {"seed", std::to_string(cfg.seed)}};
  report.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------

ExperimentReport run_feature_experiment(const LabeledDataset& ds, const std::optional<Hierarchy>& truth,
                                        const ExperimentConfig& cfg) {
  cfg.validate();
  require(ds.is_complete(), "every class must appear in the dataset");
  if (truth) {
    require(truth->num_leaves() == ds.num_classes(),
            "truth hierarchy covers " + std::to_string(truth->num_leaves()) + " leaves but the dataset has " +
                std::to_string(ds.num_classes()) + " classes");
  }
  const auto start = Clock::now();
  const auto reps = static_cast<std::size_t>(cfg.replicates);
  std::vector<ReplicateOutcome> outcomes(reps);
  const RngSeed root{cfg.seed, 0};
  // Replicates run in parallel; everything inside a replicate is serial.
  const unsigned inner_threads = 1;

  parallel_for(reps, cfg.threads, [&](std::size_t rep) {
    const RngSeed seed = root.derive(0xe4, rep);
    try {
      ReplicateOutcome& out = outcomes[rep];
      const Subsample split = subsample_fraction(ds, cfg.fraction, seed.derive(1));
      const LabeledDataset& train = split.train;
      const LabeledDataset& test = split.test;
      require(test.size() > 0, "the held-out complement is empty; lower the training fraction");
      if (!split.dropped_classes.empty()) {
        std::string dropped;
        for (int c : split.dropped_classes) dropped += (dropped.empty() ? "" : " ") + std::to_string(c);
        out.notes.push_back("replicate " + std::to_string(rep) + ": classes absent from the training split were dropped: " +
                            dropped);
      }

      std::optional<Hierarchy> kept_truth;
      if (truth) {
        std::vector<int> parent;
        for (int c : split.kept_classes) parent.push_back(truth->parent(c));
        kept_truth = Hierarchy::from_assignment(parent);
      }

      InductionConfig ind = cfg.induction;
      ind.threads = inner_threads;
      if (!ind.coarse_k && kept_truth) ind.coarse_k = std::min(kept_truth->num_coarse(), train.num_classes());

      ind.seed = seed.derive(2);
      const Hierarchy cond_mean = induce_cond_mean(train, ind);
      const Hierarchy random_cm = random_matched(cond_mean, seed.derive(3));
      ind.seed = seed.derive(4);
      const Hierarchy task_sim = induce_task_sim(train, ind);
      const Hierarchy random_ts = random_matched(task_sim, seed.derive(5));

      std::vector<std::pair<std::string, const Hierarchy*>> hiers{{"cond_mean", &cond_mean},
                                                                  {"random_cm", &random_cm},
                                                                  {"task_sim", &task_sim},
                                                                  {"random_ts", &random_ts}};
      if (kept_truth) hiers.emplace_back("truth", &*kept_truth);

      if (kept_truth) {
        for (const auto& [name, h] : hiers) {
          out.put(name, "ari", adjusted_rand_index(h->parent_of(), kept_truth->parent_of()));
        }
      }

      const UncertaintyForest flat = fit_flat(train, cfg.flat_trees, cfg.flat_depth, seed.derive(6), inner_threads);
      const double flat_acc = accuracy_of(flat.predict_classes(test.features()), test, "flat");
      out.put("flat", "accuracy", flat_acc);
      for (const auto& [name, h] : hiers) {
        const HierarchicalClassifier hc = fit_hierarchical(train, *h, cfg.coarse_trees, cfg.fine_trees,
                                                           cfg.hier_depth, seed.derive(7), inner_threads);
        const double acc = accuracy_of(hc.predict_classes(test.features()), test, name);
        out.put(name, "accuracy", acc);
        out.put(name, "le", learning_efficiency(1.0 - flat_acc, 1.0 - acc));
        out.coarse_labels[name] = h->num_coarse();
      }
    } catch (const Error& e) {
      throw Error(e.code(), "experiment replicate " + std::to_string(rep) + " failed " + describe(seed) + ": " +
                                e.what());
    }
  });

  ExperimentReport report;
  for (const auto& m : kExperimentMethods) {
    if (m == "truth" && !truth) continue;
    report.methods.push_back(m);
  }
  append_rows(report, std::nullopt, outcomes);

  // Ratio of average errors, flat over method.
  const ReportRow* flat_row = report.find("flat", "accuracy");
  std::vector<ReportRow> ratio_rows;
  for (const auto& m : report.methods) {
    const ReportRow* row = report.find(m, "accuracy");
    if (!row || !flat_row) continue;
    const double method_err = 1.0 - row->value.mean;
    ReportRow r{std::nullopt, m, "le_avg_error", {}};
    r.value.mean = m == "flat" ? 1.0 : learning_efficiency(1.0 - flat_row->value.mean, method_err);
    r.value.reps = row->value.reps;
    ratio_rows.push_back(r);
  }
  report.rows.insert(report.rows.end(), ratio_rows.begin(), ratio_rows.end());

  add_ledger(report, "flat", 0, 0, cfg.flat_trees, cfg.flat_depth, outcomes);
  for (const auto& m : report.methods) {
    if (m != "flat") add_ledger(report, m, cfg.coarse_trees, cfg.fine_trees, 0, cfg.hier_depth, outcomes);
  }
  for (const auto& o : outcomes) report.notes.insert(report.notes.end(), o.notes.begin(), o.notes.end());
  report.notes.push_back(
      "hierarchical budgets (coarse_trees + fine_trees * c) are not matched to the flat budget; see tree_ledger.csv");

  const auto& ic = cfg.induction;
  report.config = {{"fraction", csv::format_double(cfg.fraction)},
                   {"replicates", std::to_string(cfg.replicates)},
                   {"pca_dim", std::to_string(ic.pca_dim)},
                   {"embed_dim", std::to_string(ic.embed_dim)},
                   {"coarse_k", ic.coarse_k ? std::to_string(*ic.coarse_k) : (truth ? "truth" : "bic")},
                   {"n_refs", std::to_string(ic.n_refs)},
                   {"covariance", to_string(ic.mode)},
                   {"restarts", std::to_string(ic.restarts)},
                   {"coarse_trees", std::to_string(cfg.coarse_trees)},
                   {"fine_trees", std::to_string(cfg.fine_trees)},
                   {"hier_depth", std::to_string(cfg.hier_depth)},
                   {"flat_trees", std::to_string(cfg.flat_trees)},
                   {"flat_depth", std::to_string(cfg.flat_depth)},
                   {"seed", std::to_string(cfg.seed)}};
  report.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

ExperimentReport run_feature_experiment(const std::string& dataset_path, const std::string& label_column,
                                        const std::optional<std::string>& truth_path,
                                        const ExperimentConfig& cfg) {
  const LabeledDataset ds = load_dataset(dataset_path, label_column);
  std::optional<Hierarchy> truth;
  if (truth_path) truth = load_hierarchy(*truth_path);
  return run_feature_experiment(ds, truth, cfg);
}

// ---------------------------------------------------------------------------

std::string emit_plot_data(const ExperimentReport& report) {
  std::ostringstream out;
  out << "gamma0,method,metric,mean,se,reps\n";
  for (const auto& row : report.rows) {
    out << (row.gamma0 ? csv::format_double(*row.gamma0) : "") << ',' << csv::escape(row.method) << ','
        << csv::escape(row.metric) << ',' << csv::format_double(row.value.mean) << ','
        << csv::format_double(row.value.se) << ',' << row.value.reps << '\n';
  }
  return out.str();
}

std::vector<ReportRow> parse_plot_data(const std::string& csv_text) {
  std::istringstream in(csv_text);
  const auto records = csv::read_all(in);
  if (records.empty() || records.front().fields !=
                             std::vector<std::string>{"gamma0", "method", "metric", "mean", "se", "reps"}) {
    fail(ErrorCode::kParse, "plot data: unexpected header");
  }
  std::vector<ReportRow> rows;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i].fields;
    const std::string where = "plot data line " + std::to_string(records[i].line);
    if (f.size() != 6) fail(ErrorCode::kParse, where + ": expected 6 fields");
    ReportRow row;
    if (!f[0].empty()) {
      double g = 0.0;
      if (!csv::parse_double(f[0], g)) fail(ErrorCode::kParse, where + ": bad gamma0");
      row.gamma0 = g;
    }
    row.method = f[1];
    row.metric = f[2];
    long long reps = 0;
    if (!csv::parse_double(f[3], row.value.mean) || !csv::parse_double(f[4], row.value.se) ||
        !csv::parse_int(f[5], reps)) {
      fail(ErrorCode::kParse, where + ": bad numeric field");
    }
    row.value.reps = static_cast<std::size_t>(reps);
    rows.push_back(row);
  }
  return rows;
}

std::string emit_replicates(const ExperimentReport& report) {
  std::ostringstream out;
  out << "gamma0,replicate,method,metric,value\n";
  for (const auto& v : report.replicate_values) {
    out << (v.gamma0 ? csv::format_double(*v.gamma0) : "") << ',' << v.replicate << ',' << v.method << ','
        << v.metric << ',' << csv::format_double(v.value) << '\n';
  }
  return out.str();
}

std::string emit_tree_ledger(const ExperimentReport& report) {
  std::ostringstream out;
  out << "method,coarse_trees,fine_trees_per_coarse,flat_trees,max_depth,mean_coarse_labels,mean_total_trees\n";
  for (const auto& e : report.tree_ledger) {
    out << e.method << ',' << e.coarse_trees << ',' << e.fine_trees_per_coarse << ',' << e.flat_trees << ','
        << e.max_depth << ',' << csv::format_double(e.mean_coarse_labels) << ','
        << csv::format_double(e.mean_total_trees) << '\n';
  }
  return out.str();
}

std::string emit_metadata(const ExperimentReport& report) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  for (const auto& [key, value] : report.config) config[key] = value;
  doc["config"] = config;
  doc["methods"] = report.methods;
  doc["notes"] = report.notes;
  doc["wall_seconds"] = report.wall_seconds;
  return doc.dump(2) + "\n";
}

void write_report(const ExperimentReport& report, const std::string& out_dir, const std::string& stem) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create '" + out_dir + "': " + ec.message());
  auto write = [&](const std::string& name, const std::string& text) {
    const auto path = (std::filesystem::path(out_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
    out << text;
  };
  write(stem + ".csv", emit_plot_data(report));
  write(stem + "_replicates.csv", emit_replicates(report));
  write("tree_ledger.csv", emit_tree_ledger(report));
  write("metadata.json", emit_metadata(report));
}

}  // namespace hierind
