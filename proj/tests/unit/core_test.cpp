#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "doctest.h"
#include "hierind/csv.hpp"
#include "hierind/dataset.hpp"
#include "hierind/error.hpp"
#include "hierind/hierarchy.hpp"
#include "hierind/simgen.hpp"
#include "test_support.hpp"

using namespace hierind;
using test_support::TempDir;

namespace {

void write(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

LabeledDataset toy(int n, int k) {
  RowMatrix x(n, 2);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    x(i, 0) = i;
    x(i, 1) = -i;
    y[static_cast<std::size_t>(i)] = i % k;
  }
  return LabeledDataset(x, y, k);
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("csv fields and number formatting") {
    std::istringstream in("a,\"b,c\",\"say \"\"hi\"\"\"\r\n\n1,2,3\n");
    const auto records = csv::read_all(in);
    REQUIRE(records.size() == 2);
    CHECK(records[0].fields == std::vector<std::string>{"a", "b,c", "say \"hi\""});
    CHECK(records[1].line == 3);
    CHECK(csv::escape("x,y") == "\"x,y\"");
    CHECK(csv::escape("plain") == "plain");

    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
      double back = 0.0;
      REQUIRE(csv::parse_double(csv::format_double(v), back));
      CHECK(back == v);
    }
    double out = 0.0;
    CHECK_FALSE(csv::parse_double("1.5x", out));
    CHECK_FALSE(csv::parse_double("", out));
    long long i = 0;
    CHECK(csv::parse_int("-42", i));
    CHECK(i == -42);
    CHECK_FALSE(csv::parse_int("4.2", i));
  }

  TEST_CASE("rng streams are reproducible and independent") {
    const RngSeed s{7, 0};
    Rng a(s), b(s), c(s.derive(1));
    std::vector<std::uint64_t> va, vb, vc;
    for (int i = 0; i < 16; ++i) {
      va.push_back(a.next_u64());
      vb.push_back(b.next_u64());
      vc.push_back(c.next_u64());
    }
    CHECK(va == vb);
    CHECK(va != vc);
    CHECK(s.derive(1, 2) == s.derive(1).derive(2));
    CHECK_FALSE(s.derive(1, 2) == s.derive(2, 1));

    Rng r(RngSeed{3, 0});
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double z = r.normal();
      sum += z;
      sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);

    auto perm = Rng(RngSeed{5, 0}).permutation(50);
    std::sort(perm.begin(), perm.end());
    for (std::size_t i = 0; i < perm.size(); ++i) CHECK(perm[i] == i);
  }

  TEST_CASE("load_dataset re-encodes labels densely by first appearance") {
    TempDir dir("core");
    write(dir.file("d.csv"), "f1,label,f2\n1.5,a,2\n2.5,a,3\n3.5,b,4\n4.5,b,5\n");
    const LabeledDataset ds = load_dataset(dir.file("d.csv"), "label");
    CHECK(ds.size() == 4);
    CHECK(ds.dim() == 2);
    CHECK(ds.num_classes() == 2);
    CHECK(ds.labels() == std::vector<int>{0, 0, 1, 1});
    CHECK(ds.features()(2, 0) == 3.5);
    CHECK(ds.features()(2, 1) == 4.0);

    write(dir.file("e.csv"), "x,label\n1,zebra\n2,apple\n3,zebra\n");
    const LabeledDataset e = load_dataset(dir.file("e.csv"), "label");
    CHECK(e.labels() == std::vector<int>{0, 1, 0});
    CHECK(e.class_names() == std::vector<std::string>{"zebra", "apple"});
  }

  TEST_CASE("load_dataset errors") {
    TempDir dir("core");
    write(dir.file("only_label.csv"), "label\na\nb\n");
    CHECK_THROWS_WITH_AS(load_dataset(dir.file("only_label.csv"), "label"),
                         doctest::Contains("d >= 1 violated"), Error);

    write(dir.file("ragged.csv"), "x,y,label\n1,2,a\n3,b\n");
    try {
      load_dataset(dir.file("ragged.csv"), "label");
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kParse);
      CHECK(std::string(e.what()).find("ragged.csv:3:") != std::string::npos);
    }

    write(dir.file("text.csv"), "x,label\n1,a\nhello,b\n");
    CHECK_THROWS_AS(load_dataset(dir.file("text.csv"), "label"), Error);
    write(dir.file("nan.csv"), "x,label\n1,a\nnan,b\n");
    CHECK_THROWS_AS(load_dataset(dir.file("nan.csv"), "label"), Error);
    write(dir.file("nolabel.csv"), "x,y\n1,2\n");
    CHECK_THROWS_AS(load_dataset(dir.file("nolabel.csv"), "label"), Error);
    CHECK_THROWS_AS(load_dataset(dir.file("missing.csv"), "label"), Error);
  }

  TEST_CASE("save/load round trip of a 1000-row simulated dataset") {
    TempDir dir("core");
    SimConfig cfg;
    cfg.per_parent = 5;
    cfg.n_per_class = 50;
    cfg.seed = RngSeed{11, 0};
    const SimulatedWorld world = simulate_dataset(cfg);
    save_dataset(world.dataset, dir.file("sim.csv"));
    const LabeledDataset back = load_dataset(dir.file("sim.csv"), "label");
    CHECK(back.size() == 1000);
    CHECK(back.num_classes() == 20);
    CHECK(back.features() == world.dataset.features());  // bit-exact
    // Classes are written in id order, so first appearance preserves ids.
    CHECK(back.labels() == world.dataset.labels());
  }

  TEST_CASE("subsample_fraction") {
    const LabeledDataset ds = toy(100, 4);
    const Subsample full = subsample_fraction(ds, 1.0, RngSeed{1, 0});
    CHECK(full.train == ds);
    CHECK(full.test.size() == 0);

    const Subsample tenth = subsample_fraction(ds, 0.1, RngSeed{1, 0});
    CHECK(tenth.train.size() == 10);
    CHECK(tenth.test.size() == 90);
    const Subsample again = subsample_fraction(ds, 0.1, RngSeed{1, 0});
    CHECK(again.train == tenth.train);
    CHECK(again.test == tenth.test);
    const Subsample other = subsample_fraction(ds, 0.1, RngSeed{2, 0});
    CHECK_FALSE(other.train == tenth.train);

    // Rows are disjoint and cover the dataset (feature column 0 is the row id).
    std::set<double> seen;
    for (const auto* part : {&tenth.train, &tenth.test}) {
      for (Eigen::Index i = 0; i < part->features().rows(); ++i) seen.insert(part->features()(i, 0));
    }
    CHECK(seen.size() == 100);

    CHECK_THROWS_AS(subsample_fraction(ds, 0.0, RngSeed{}), Error);
    CHECK_THROWS_AS(subsample_fraction(ds, 1.5, RngSeed{}), Error);
  }

  TEST_CASE("subsample_fraction drops classes missing from the training split") {
    // 40 rows of class 0, one row each of classes 1 and 2.
    RowMatrix x(42, 1);
    std::vector<int> y(42, 0);
    for (int i = 0; i < 42; ++i) x(i, 0) = i;
    y[40] = 1;
    y[41] = 2;
    const LabeledDataset ds(x, y, 3);
    bool saw_drop = false;
    for (std::uint64_t s = 0; s < 20 && !saw_drop; ++s) {
      const Subsample sub = subsample_fraction(ds, 0.1, RngSeed{s, 0});
      if (sub.dropped_classes.empty()) continue;
      saw_drop = true;
      CHECK(sub.train.num_classes() == static_cast<int>(sub.kept_classes.size()));
      CHECK(sub.train.is_complete());
      CHECK(sub.kept_classes.size() + sub.dropped_classes.size() == 3);
      for (int label : sub.test.labels()) CHECK(label < sub.train.num_classes());
    }
    CHECK(saw_drop);
  }

  TEST_CASE("class_conditional_split") {
    const LabeledDataset three(RowMatrix::Constant(3, 1, 1.0), {0, 0, 1}, 2);
    const auto sets = class_conditional_split(three);
    REQUIRE(sets.size() == 2);
    CHECK(sets[0].rows() == 2);
    CHECK(sets[1].rows() == 1);

    const LabeledDataset single = toy(5, 1);
    const auto one = class_conditional_split(single);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == single.features());

    SimConfig cfg;
    cfg.seed = RngSeed{4, 0};
    const auto sim = class_conditional_split(simulate_dataset(cfg).dataset);
    REQUIRE(sim.size() == 20);
    Eigen::Index total = 0;
    for (const auto& s : sim) {
      CHECK(s.rows() == 50);
      total += s.rows();
    }
    CHECK(total == 1000);
  }

  TEST_CASE("dataset invariants are enforced") {
    CHECK_THROWS_AS(LabeledDataset(RowMatrix(2, 0), {0, 0}, 1), Error);
    CHECK_THROWS_AS(LabeledDataset(RowMatrix::Zero(2, 1), {0, 2}, 2), Error);
    RowMatrix bad = RowMatrix::Zero(2, 1);
    bad(1, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(LabeledDataset(bad, {0, 1}, 2), Error);
  }

  TEST_CASE("hierarchy validation and round trip") {
    const Hierarchy h({1, 0, 1, 2});
    CHECK(h.num_coarse() == 3);
    CHECK(h.children()[1] == std::vector<int>{0, 2});
    CHECK(h.cluster_sizes() == std::vector<std::size_t>{1, 2, 1});
    CHECK_THROWS_AS(Hierarchy({0, 2}), Error);  // coarse id 1 has no child
    CHECK_THROWS_AS(Hierarchy({0, -1}), Error);
    CHECK(Hierarchy::from_assignment({7, 3, 7}).parent_of() == std::vector<int>{0, 1, 0});
    CHECK(Hierarchy::trivial(3).num_coarse() == 1);
    CHECK(Hierarchy::singletons(3).num_coarse() == 3);

    TempDir dir("core");
    save_hierarchy(h, dir.file("h.csv"));
    CHECK(load_hierarchy(dir.file("h.csv")) == h);
    write(dir.file("bad.csv"), "leaf_id,coarse_id\n0,0\n2,0\n");
    CHECK_THROWS_AS(load_hierarchy(dir.file("bad.csv")), Error);
  }
}
