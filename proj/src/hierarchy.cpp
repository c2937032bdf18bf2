#include "hierind/hierarchy.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "hierind/csv.hpp"
#include "hierind/error.hpp"

namespace hierind {

Hierarchy::Hierarchy(std::vector<int> parent_of)
    : parent_of_(std::move(parent_of)) {
  require(!parent_of_.empty(), "hierarchy needs at least one leaf");
  int max_id = -1;
  for (int p : parent_of_) {
    require(p >= 0, "coarse ids must be nonnegative");
    max_id = std::max(max_id, p);
  }
  num_coarse_ = max_id + 1;
  children_.assign(static_cast<std::size_t>(num_coarse_), {});
  for (std::size_t leaf = 0; leaf < parent_of_.size(); ++leaf) {
    children_[static_cast<std::size_t>(parent_of_[leaf])].push_back(
        static_cast<int>(leaf));
  }
  for (int j = 0; j < num_coarse_; ++j) {
    require(!children_[static_cast<std::size_t>(j)].empty(),
            "coarse label " + std::to_string(j) + " has no leaf children");
  }
}

Hierarchy Hierarchy::from_assignment(const std::vector<int>& assignment) {
  std::unordered_map<int, int> dense;
  std::vector<int> parent;
  parent.reserve(assignment.size());
  for (int a : assignment) {
    auto [it, inserted] = dense.emplace(a, static_cast<int>(dense.size()));
    parent.push_back(it->second);
  }
  return Hierarchy(std::move(parent));
}

Hierarchy Hierarchy::trivial(int num_leaves) {
  return Hierarchy(std::vector<int>(static_cast<std::size_t>(num_leaves), 0));
}

Hierarchy Hierarchy::singletons(int num_leaves) {
  std::vector<int> parent(static_cast<std::size_t>(num_leaves));
  for (int i = 0; i < num_leaves; ++i) parent[static_cast<std::size_t>(i)] = i;
  return Hierarchy(std::move(parent));
}

std::vector<std::size_t> Hierarchy::cluster_sizes() const {
  std::vector<std::size_t> sizes;
  sizes.reserve(children_.size());
  for (const auto& c : children_) sizes.push_back(c.size());
  return sizes;
}

Hierarchy load_hierarchy(const std::string& path) {
  const auto records = csv::read_file(path);
  if (records.empty()) fail(ErrorCode::kParse, path + ": empty hierarchy file");
  const auto& header = records.front().fields;
  if (header.size() != 2 || header[0] != "leaf_id" || header[1] != "coarse_id") {
    fail(ErrorCode::kParse, path + ": expected header 'leaf_id,coarse_id'");
  }
  std::vector<int> parent(records.size() - 1, -1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = path + ":" + std::to_string(rec.line);
    if (rec.fields.size() != 2) fail(ErrorCode::kParse, where + ": expected 2 fields");
    long long leaf = 0;
    long long coarse = 0;
    if (!csv::parse_int(rec.fields[0], leaf) || !csv::parse_int(rec.fields[1], coarse)) {
      fail(ErrorCode::kParse, where + ": non-integer id");
    }
    if (leaf < 0 || leaf >= static_cast<long long>(parent.size())) {
      fail(ErrorCode::kParse, where + ": leaf id out of range");
    }
    if (parent[static_cast<std::size_t>(leaf)] != -1) {
      fail(ErrorCode::kParse, where + ": duplicate leaf id");
    }
    if (coarse < 0) fail(ErrorCode::kParse, where + ": negative coarse id");
    parent[static_cast<std::size_t>(leaf)] = static_cast<int>(coarse);
  }
  return Hierarchy(std::move(parent));
}

void save_hierarchy(const Hierarchy& h, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  out << "leaf_id,coarse_id\n";
  for (int leaf = 0; leaf < h.num_leaves(); ++leaf) {
    out << leaf << ',' << h.parent(leaf) << '\n';
  }
}

}  // namespace hierind
