#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "hierind/rng.hpp"

namespace hierind {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Feature matrix with dense integer leaf labels in [0, k).
///
/// Construction validates that d >= 1, every feature is finite and every
/// label lies in [0, k). Training sets produced by `load_dataset` and
/// `subsample_fraction` additionally contain every class at least once
/// (`is_complete()`); held-out complements may not.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(RowMatrix features, std::vector<int> labels, int num_classes,
                 std::vector<std::string> class_names = {});

  const RowMatrix& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<std::string>& class_names() const { return class_names_; }

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features_.cols()); }
  int num_classes() const { return num_classes_; }

  /// n >= k and each label id occurs at least once.
  bool is_complete() const;
  std::vector<std::size_t> class_counts() const;

  /// Rows in the given order (duplicates allowed); labels keep their ids.
  LabeledDataset select(const std::vector<std::size_t>& rows) const;

  friend bool operator==(const LabeledDataset& a, const LabeledDataset& b) {
    return a.num_classes_ == b.num_classes_ && a.labels_ == b.labels_ &&
           a.class_names_ == b.class_names_ && a.features_ == b.features_;
  }

 private:
  RowMatrix features_;
  std::vector<int> labels_;
  int num_classes_ = 0;
  std::vector<std::string> class_names_;
};

/// Loads the dataset CSV: a header row, one label column named
/// `label_column`, every other column numeric. Labels are re-encoded densely
/// in order of first appearance.
LabeledDataset load_dataset(const std::string& path,
                            const std::string& label_column);

/// Same as load_dataset but encodes labels against a fixed vocabulary
/// (e.g. the class names stored in a trained model). Rows whose label is not
/// in the vocabulary are an error. If the label column is absent every label
/// is set to 0 and `has_labels` is false.
LabeledDataset load_dataset_with_vocabulary(
    const std::string& path, const std::string& label_column,
    const std::vector<std::string>& vocabulary, bool* has_labels = nullptr);

/// Writes features with full round-trip precision. Class names default to
/// the dense ids when the dataset carries none.
void save_dataset(const LabeledDataset& ds, const std::string& path,
                  const std::string& label_column = "label");

/// Result of a non-stratified subsample.
struct Subsample {
  LabeledDataset train;
  LabeledDataset test;
  /// kept_classes[new_id] = id in the source dataset. Identity unless a class
  /// vanished from the training split.
  std::vector<int> kept_classes;
  std::vector<int> dropped_classes;
};

/// Draws floor(fraction * n) rows without replacement for training; the
/// complement is returned as the test set. Classes absent from the training
/// split are removed from both parts and the label space is compacted.
Subsample subsample_fraction(const LabeledDataset& ds, double fraction,
                             RngSeed seed);

/// Per-class feature blocks; block i holds exactly the rows labelled i in
/// their original order.
std::vector<RowMatrix> class_conditional_split(const LabeledDataset& ds);

}  // namespace hierind
