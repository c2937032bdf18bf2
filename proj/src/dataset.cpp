#include "hierind/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "hierind/csv.hpp"
#include "hierind/error.hpp"

namespace hierind {

LabeledDataset::LabeledDataset(RowMatrix features, std::vector<int> labels,
                               int num_classes,
                               std::vector<std::string> class_names)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      class_names_(std::move(class_names)) {
  require(features_.cols() >= 1, "d >= 1 violated: dataset has no feature columns");
  require(static_cast<std::size_t>(features_.rows()) == labels_.size(),
          "feature rows and labels differ in length");
  require(num_classes_ >= 1, "dataset needs at least one class");
  require(class_names_.empty() ||
              class_names_.size() == static_cast<std::size_t>(num_classes_),
          "class name count does not match class count");
  require(features_.allFinite(), "non-finite feature value");
  for (int y : labels_) {
    require(y >= 0 && y < num_classes_, "label id out of range");
  }
}

bool LabeledDataset::is_complete() const {
  if (size() < static_cast<std::size_t>(num_classes_)) return false;
  const auto counts = class_counts();
  return std::all_of(counts.begin(), counts.end(),
                     [](std::size_t c) { return c > 0; });
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes_), 0);
  for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

LabeledDataset LabeledDataset::select(const std::vector<std::size_t>& rows) const {
  RowMatrix x(static_cast<Eigen::Index>(rows.size()), features_.cols());
  std::vector<int> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) =
        features_.row(static_cast<Eigen::Index>(rows[i]));
    y[i] = labels_[rows[i]];
  }
  LabeledDataset out;
  out.features_ = std::move(x);
  out.labels_ = std::move(y);
  out.num_classes_ = num_classes_;
  out.class_names_ = class_names_;
  return out;
}

namespace {

struct RawTable {
  std::vector<std::vector<double>> rows;
  std::vector<std::string> tokens;
  std::size_t dim = 0;
  bool has_label = false;
};

RawTable read_table(const std::string& path, const std::string& label_column,
                    bool label_required) {
  const auto records = csv::read_file(path);
  if (records.empty()) fail(ErrorCode::kParse, path + ": missing header row");
  const auto& header = records.front().fields;
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  RawTable table;
  table.has_label = label_it != header.end();
  if (!table.has_label && label_required) {
    fail(ErrorCode::kParse,
         path + ": label column '" + label_column + "' not found in header");
  }
  const std::size_t label_pos =
      table.has_label ? static_cast<std::size_t>(label_it - header.begin())
                      : header.size();
  table.dim = header.size() - (table.has_label ? 1 : 0);
  if (table.dim == 0) {
    fail(ErrorCode::kPrecondition, path + ": d >= 1 violated: no feature columns");
  }
  table.rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = path + ":" + std::to_string(rec.line);
    if (rec.fields.size() != header.size()) {
      fail(ErrorCode::kParse, where + ": expected " + std::to_string(header.size()) +
                                  " fields, found " + std::to_string(rec.fields.size()));
    }
    std::vector<double> row;
    row.reserve(table.dim);
    for (std::size_t c = 0; c < rec.fields.size(); ++c) {
      if (c == label_pos) continue;
      double v = 0.0;
      if (!csv::parse_double(rec.fields[c], v)) {
        fail(ErrorCode::kParse, where + ": non-numeric feature '" + rec.fields[c] +
                                    "' in column '" + header[c] + "'");
      }
      if (!std::isfinite(v)) {
        fail(ErrorCode::kParse, where + ": non-finite feature in column '" + header[c] + "'");
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
    table.tokens.push_back(table.has_label ? rec.fields[label_pos] : std::string());
  }
  return table;
}

RowMatrix to_matrix(const RawTable& table) {
  RowMatrix x(static_cast<Eigen::Index>(table.rows.size()),
              static_cast<Eigen::Index>(table.dim));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    for (std::size_t j = 0; j < table.dim; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = table.rows[i][j];
    }
  }
  return x;
}

}  // namespace

LabeledDataset load_dataset(const std::string& path, const std::string& label_column) {
  RawTable table = read_table(path, label_column, true);
  if (table.rows.empty()) fail(ErrorCode::kParse, path + ": no data rows");
  std::unordered_map<std::string, int> ids;
  std::vector<std::string> names;
  std::vector<int> labels;
  labels.reserve(table.tokens.size());
  for (const auto& token : table.tokens) {
    auto [it, inserted] = ids.emplace(token, static_cast<int>(names.size()));
    if (inserted) names.push_back(token);
    labels.push_back(it->second);
  }
  const int k = static_cast<int>(names.size());
  return LabeledDataset(to_matrix(table), std::move(labels), k, std::move(names));
}

LabeledDataset load_dataset_with_vocabulary(const std::string& path,
                                            const std::string& label_column,
                                            const std::vector<std::string>& vocabulary,
                                            bool* has_labels) {
  require(!vocabulary.empty(), "empty label vocabulary");
  RawTable table = read_table(path, label_column, false);
  std::unordered_map<std::string, int> ids;
  for (std::size_t i = 0; i < vocabulary.size(); ++i) {
    ids.emplace(vocabulary[i], static_cast<int>(i));
  }
  std::vector<int> labels(table.tokens.size(), 0);
  if (table.has_label) {
    for (std::size_t i = 0; i < table.tokens.size(); ++i) {
      auto it = ids.find(table.tokens[i]);
      if (it == ids.end()) {
        fail(ErrorCode::kParse, path + ": row " + std::to_string(i + 1) +
                                    " has label '" + table.tokens[i] +
                                    "' unknown to the model");
      }
      labels[i] = it->second;
    }
  }
  if (has_labels) *has_labels = table.has_label;
  return LabeledDataset(to_matrix(table), std::move(labels),
                        static_cast<int>(vocabulary.size()), vocabulary);
}

void save_dataset(const LabeledDataset& ds, const std::string& path,
                  const std::string& label_column) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  for (std::size_t j = 0; j < ds.dim(); ++j) out << 'x' << j << ',';
  out << csv::escape(label_column) << '\n';
  const auto& x = ds.features();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      out << csv::format_double(x(static_cast<Eigen::Index>(i),
                                  static_cast<Eigen::Index>(j)))
          << ',';
    }
    const int y = ds.labels()[i];
    out << (ds.class_names().empty()
                ? std::to_string(y)
                : csv::escape(ds.class_names()[static_cast<std::size_t>(y)]))
        << '\n';
  }
}

Subsample subsample_fraction(const LabeledDataset& ds, double fraction, RngSeed seed) {
  require(fraction > 0.0 && fraction <= 1.0, "fraction must lie in (0, 1]");
  const std::size_t n = ds.size();
  const auto n_train =
      static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  Rng rng(seed);
  std::vector<std::size_t> order = rng.permutation(n);
  std::vector<std::size_t> train_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_rows(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  // Keep source order within each part so downstream results do not depend
  // on the draw order.
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());

  std::vector<bool> present(static_cast<std::size_t>(ds.num_classes()), false);
  for (std::size_t r : train_rows) present[static_cast<std::size_t>(ds.labels()[r])] = true;

  Subsample result;
  std::vector<int> remap(present.size(), -1);
  for (std::size_t c = 0; c < present.size(); ++c) {
    if (present[c]) {
      remap[c] = static_cast<int>(result.kept_classes.size());
      result.kept_classes.push_back(static_cast<int>(c));
    } else {
      result.dropped_classes.push_back(static_cast<int>(c));
    }
  }
  require(!result.kept_classes.empty(), "training split is empty");

  std::vector<std::string> names;
  if (!ds.class_names().empty()) {
    for (int c : result.kept_classes) names.push_back(ds.class_names()[static_cast<std::size_t>(c)]);
  }
  auto build = [&](const std::vector<std::size_t>& rows) {
    std::vector<std::size_t> kept;
    kept.reserve(rows.size());
    for (std::size_t r : rows) {
      if (remap[static_cast<std::size_t>(ds.labels()[r])] >= 0) kept.push_back(r);
    }
    RowMatrix x(static_cast<Eigen::Index>(kept.size()), ds.features().cols());
    std::vector<int> y(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
      x.row(static_cast<Eigen::Index>(i)) = ds.features().row(static_cast<Eigen::Index>(kept[i]));
      y[i] = remap[static_cast<std::size_t>(ds.labels()[kept[i]])];
    }
    return LabeledDataset(std::move(x), std::move(y),
                          static_cast<int>(result.kept_classes.size()), names);
  };
  result.train = build(train_rows);
  result.test = build(test_rows);
  return result;
}

std::vector<RowMatrix> class_conditional_split(const LabeledDataset& ds) {
  const auto counts = ds.class_counts();
  std::vector<RowMatrix> blocks(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    blocks[c].resize(static_cast<Eigen::Index>(counts[c]), ds.features().cols());
  }
  std::vector<Eigen::Index> fill(counts.size(), 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto c = static_cast<std::size_t>(ds.labels()[i]);
    blocks[c].row(fill[c]++) = ds.features().row(static_cast<Eigen::Index>(i));
  }
  return blocks;
}

}  // namespace hierind
