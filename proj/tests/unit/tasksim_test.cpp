#include "doctest.h"
#include "hierind/error.hpp"
#include "hierind/forest.hpp"
#include "hierind/simgen.hpp"
#include "hierind/tasksim.hpp"
#include "test_support.hpp"

using namespace hierind;
using test_support::gaussian_block;

namespace {

// Held-out accuracy of a forest trained and scored on G vs H directly.
double self_trained_accuracy(const RowMatrix& g, const RowMatrix& h, RngSeed seed) {
  const Eigen::Index half_g = g.rows() / 2, half_h = h.rows() / 2;
  auto task = [](const RowMatrix& pos, const RowMatrix& neg) {
    RowMatrix x(pos.rows() + neg.rows(), pos.cols());
    x << pos, neg;
    std::vector<int> y(static_cast<std::size_t>(x.rows()), 0);
    std::fill(y.begin(), y.begin() + pos.rows(), 1);
    return LabeledDataset(x, y, 2);
  };
  const LabeledDataset train = task(g.topRows(half_g), h.topRows(half_h));
  const LabeledDataset test = task(g.bottomRows(g.rows() - half_g), h.bottomRows(h.rows() - half_h));
  const UncertaintyForest f = fit_forest(train, 10, 10, seed);
  const auto pred = f.predict_classes(test.features());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == test.labels()[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

// Mean processed similarity within and between truth groups.
std::pair<double, double> separation(const Matrix& s, const Hierarchy& truth) {
  double within = 0, between = 0;
  int nw = 0, nb = 0;
  for (int i = 0; i < s.rows(); ++i) {
    for (int j = i + 1; j < s.cols(); ++j) {
      if (truth.parent(i) == truth.parent(j)) {
        within += s(i, j);
        ++nw;
      } else {
        between += s(i, j);
        ++nb;
      }
    }
  }
  return {within / nw, between / nb};
}

}  // namespace

TEST_SUITE("tasksim") {
  TEST_CASE("identical source and target transfer as well as self-training") {
    const RowMatrix g = gaussian_block(100, 2, 0, 0, 1, RngSeed{1, 0});
    const RowMatrix h = gaussian_block(100, 2, 8, 8, 1, RngSeed{2, 0});
    const double ts = task_similarity_directed(g, g, h, RngSeed{3, 0});
    CHECK(ts >= self_trained_accuracy(g, h, RngSeed{4, 0}) - 0.05);
  }

  TEST_CASE("no-signal source task gives chance-level transfer") {
    double sum = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
      const RowMatrix f = gaussian_block(200, 2, 0, 0, 1, RngSeed{s, 1});
      const RowMatrix g = gaussian_block(200, 2, 0, 0, 1, RngSeed{s, 2});
      const RowMatrix h = gaussian_block(200, 2, 0, 0, 1, RngSeed{s, 3});
      sum += task_similarity_directed(f, g, h, RngSeed{s, 4});
    }
    CHECK(std::abs(sum / 5.0 - 0.5) <= 0.1);
  }

  TEST_CASE("nearby tasks against a distant reference are highly similar") {
    const RowMatrix f = gaussian_block(100, 2, 0, 0, 1, RngSeed{5, 0});
    const RowMatrix g = gaussian_block(100, 2, 0.2, 0, 1, RngSeed{6, 0});
    const RowMatrix h = gaussian_block(100, 2, 10, 10, 1, RngSeed{7, 0});
    CHECK(task_similarity_directed(f, g, h, RngSeed{8, 0}) >= 0.9);
  }

  TEST_CASE("symmetrized similarity: swap symmetry, duplicate refs, range") {
    const RowMatrix f = gaussian_block(60, 2, 0, 0, 1, RngSeed{9, 0});
    const RowMatrix g = gaussian_block(60, 2, 1, 0, 1, RngSeed{10, 0});
    const RowMatrix h = gaussian_block(60, 2, 0, 3, 1, RngSeed{11, 0});
    const RowMatrix h2 = gaussian_block(60, 2, -3, 0, 1, RngSeed{12, 0});
    const RngSeed seed{13, 0};
    CHECK(symmetrized_similarity(f, g, {&h, &h2}, seed) == symmetrized_similarity(g, f, {&h, &h2}, seed));
    CHECK(symmetrized_similarity(f, g, {&h}, seed) == symmetrized_similarity(f, g, {&h, &h, &h}, seed));
    for (std::uint64_t s = 0; s < 5; ++s) {
      const double v = symmetrized_similarity(f, g, {&h, &h2}, RngSeed{s, 99});
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK_THROWS_AS(symmetrized_similarity(f, g, {}, seed), Error);
  }

  TEST_CASE("directed similarity rejects tiny sample sets") {
    const RowMatrix big = gaussian_block(20, 2, 0, 0, 1, RngSeed{1, 0});
    const RowMatrix tiny = gaussian_block(2, 2, 0, 0, 1, RngSeed{2, 0});
    CHECK_THROWS_AS(task_similarity_directed(big, big, tiny, RngSeed{}), Error);
    CHECK_THROWS_AS(task_similarity_directed(tiny, big, big, RngSeed{}), Error);
  }

  TEST_CASE("process_matrix") {
    Matrix raw(3, 3);
    raw << 7, 0.0, 1.0, 0.0, 7, 0.3, 1.0, 0.3, 7;
    const SimilarityMatrix same = process_matrix(raw);
    CHECK(same.values(0, 1) == 0.0);
    CHECK(same.values(0, 2) == 1.0);
    CHECK(same.values(1, 2) == doctest::Approx(0.3));
    CHECK(same.values.diagonal() == Vector::Ones(3));

    CHECK(process_matrix(Matrix::Constant(4, 4, 0.8)).values(1, 3) == 0.5);

    raw << 0, 0.4, 0.9, 0.4, 0, 0.65, 0.9, 0.65, 0;
    const SimilarityMatrix s = process_matrix(raw);
    CHECK(s.values(0, 1) == doctest::Approx(0.0));
    CHECK(s.values(0, 2) == doctest::Approx(1.0));
    CHECK(s.values(1, 2) == doctest::Approx(0.5));
    CHECK(s.values == s.values.transpose());

    raw(0, 1) = 0.5;
    CHECK_THROWS_AS(process_matrix(raw), Error);
  }

  TEST_CASE("pairwise matrix with three classes uses the remaining class as reference") {
    RowMatrix x(60, 2);
    x << gaussian_block(20, 2, 0, 0, 1, RngSeed{1, 0}), gaussian_block(20, 2, 1, 0, 1, RngSeed{2, 0}),
        gaussian_block(20, 2, 0, 4, 1, RngSeed{3, 0});
    std::vector<int> y;
    for (int i = 0; i < 60; ++i) y.push_back(i / 20);
    const LabeledDataset ds(x, y, 3);
    const auto blocks = class_conditional_split(ds);
    const RngSeed seed{21, 0};
    Matrix raw;
    const SimilarityMatrix s = pairwise_similarity_matrix(ds, 4, seed, 1, {}, &raw);
    for (int i = 0; i < 3; ++i) {
      for (int j = i + 1; j < 3; ++j) {
        const RowMatrix& other = blocks[static_cast<std::size_t>(3 - i - j)];
        const double want = symmetrized_similarity(blocks[static_cast<std::size_t>(i)],
                                                   blocks[static_cast<std::size_t>(j)],
                                                   {&other, &other, &other, &other}, seed.derive(i, j).derive(1));
        CHECK(raw(i, j) == want);
      }
    }
    CHECK(s.values == s.values.transpose());
    CHECK(s.values.diagonal() == Vector::Ones(3));
    CHECK(s.values.minCoeff() >= 0.0);
    CHECK(s.values.maxCoeff() <= 1.0);
    CHECK(s.n_refs == 4);
    CHECK(pairwise_similarity_matrix(ds, 4, seed, 3).values == s.values);

    const LabeledDataset two(x.topRows(40), std::vector<int>(y.begin(), y.begin() + 40), 2);
    CHECK_THROWS_AS(pairwise_similarity_matrix(two, 1, seed), Error);
  }

  TEST_CASE("simulated world: within-parent similarity exceeds between-parent") {
    SimConfig cfg;
    cfg.gamma0 = 0.25;
    cfg.seed = RngSeed{31, 0};
    const SimulatedWorld world = simulate_dataset(cfg);
    const SimilarityMatrix s = pairwise_similarity_matrix(world.dataset, 10, RngSeed{32, 0});
    const auto [within, between] = separation(s.values, world.truth);
    CHECK(within > between);
  }

  TEST_CASE("separation gap shrinks as gamma0 grows") {
    // 20-replicate means of (within - between) at gamma0 in {0.25, 1, 4};
    // five references per pair keep this affordable.
    std::vector<double> gaps;
    for (double g0 : {0.25, 1.0, 4.0}) {
      double sum = 0.0;
      for (std::uint64_t r = 0; r < 20; ++r) {
        SimConfig cfg;
        cfg.gamma0 = g0;
        cfg.seed = RngSeed{r, 40};
        const SimulatedWorld world = simulate_dataset(cfg);
        const SimilarityMatrix s = pairwise_similarity_matrix(world.dataset, 5, RngSeed{r, 41});
        const auto [within, between] = separation(s.values, world.truth);
        sum += within - between;
      }
      gaps.push_back(sum / 20.0);
    }
    INFO("gaps " << gaps[0] << " " << gaps[1] << " " << gaps[2]);
    CHECK(gaps[0] >= gaps[1]);
    CHECK(gaps[1] >= gaps[2]);
  }
}
