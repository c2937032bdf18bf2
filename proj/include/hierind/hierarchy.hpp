#pragma once

#include <string>
#include <vector>

namespace hierind {

/// Two-level label tree: every leaf label maps to exactly one coarse label.
/// Coarse ids are dense in [0, c) and every coarse id has at least one leaf.
class Hierarchy {
 public:
  Hierarchy() = default;
  explicit Hierarchy(std::vector<int> parent_of);

  /// Relabels an arbitrary cluster assignment to dense coarse ids in order of
  /// first appearance over the leaves.
  static Hierarchy from_assignment(const std::vector<int>& assignment);
  static Hierarchy trivial(int num_leaves);
  static Hierarchy singletons(int num_leaves);

  const std::vector<int>& parent_of() const { return parent_of_; }
  int parent(int leaf) const { return parent_of_[static_cast<std::size_t>(leaf)]; }
  int num_leaves() const { return static_cast<int>(parent_of_.size()); }
  int num_coarse() const { return num_coarse_; }

  /// children()[j] lists the leaves under coarse j in ascending order.
  const std::vector<std::vector<int>>& children() const { return children_; }
  std::vector<std::size_t> cluster_sizes() const;

  friend bool operator==(const Hierarchy& a, const Hierarchy& b) {
    return a.parent_of_ == b.parent_of_;
  }

 private:
  std::vector<int> parent_of_;
  int num_coarse_ = 0;
  std::vector<std::vector<int>> children_;
};

/// CSV with header `leaf_id,coarse_id`, one row per leaf in any order.
Hierarchy load_hierarchy(const std::string& path);
void save_hierarchy(const Hierarchy& h, const std::string& path);

}  // namespace hierind
