#include <cmath>

#include "doctest.h"
#include "hierind/error.hpp"
#include "hierind/simgen.hpp"

using namespace hierind;

TEST_SUITE("simgen") {
  TEST_CASE("parent centers, padded in higher dimensions") {
    const RowMatrix c2 = parent_centers(2);
    CHECK(c2.rows() == 4);
    CHECK(c2(0, 0) == 1.0);
    CHECK(c2(1, 1) == -1.0);
    CHECK(c2(3, 0) == -1.0);
    const RowMatrix c5 = parent_centers(5);
    CHECK(c5.cols() == 5);
    CHECK(c5.rightCols(3).isZero());
  }

  TEST_CASE("type-II means collapse onto centers as gamma0 -> 0") {
    SimConfig cfg;
    cfg.gamma0 = 1e-12;
    cfg.seed = RngSeed{3, 0};
    const Type2Draw draw = sample_type2_means(cfg);
    for (int i = 0; i < draw.class_means.rows(); ++i) {
      const auto diff = draw.class_means.row(i) - draw.parent_centers.row(draw.truth.parent(i));
      CHECK(diff.cwiseAbs().maxCoeff() < 1e-5);
    }
  }

  TEST_CASE("per_parent = 5 gives 20 classes in 4 groups of 5") {
    SimConfig cfg;
    cfg.per_parent = 5;
    const Type2Draw draw = sample_type2_means(cfg);
    CHECK(draw.class_means.rows() == 20);
    CHECK(draw.truth.num_coarse() == 4);
    CHECK(draw.truth.cluster_sizes() == std::vector<std::size_t>{5, 5, 5, 5});
    for (int pp : {2, 8}) {
      cfg.per_parent = pp;
      CHECK(sample_type2_means(cfg).truth.num_leaves() == 4 * pp);
    }
  }

  TEST_CASE("type-II draws concentrate at the center (law of large numbers)") {
    SimConfig cfg;
    cfg.gamma0 = 0.5;
    cfg.per_parent = 10000;
    cfg.seed = RngSeed{9, 0};
    const Type2Draw draw = sample_type2_means(cfg);
    for (int parent = 0; parent < 4; ++parent) {
      Eigen::RowVector2d mean = Eigen::RowVector2d::Zero();
      for (int leaf : draw.truth.children()[static_cast<std::size_t>(parent)]) mean += draw.class_means.row(leaf);
      mean /= 10000.0;
      const double tol = 3.0 * std::sqrt(cfg.gamma0 / 10000.0);
      CHECK((mean - draw.parent_centers.row(parent)).cwiseAbs().maxCoeff() < tol);
    }
  }

  TEST_CASE("simulate_dataset shape and limits") {
    SimConfig cfg;
    cfg.seed = RngSeed{1, 0};
    const SimulatedWorld world = simulate_dataset(cfg);
    CHECK(world.dataset.size() == 1000);
    CHECK(world.dataset.num_classes() == 20);
    CHECK(world.dataset.is_complete());

    cfg.gamma1 = 1e-12;
    const SimulatedWorld tight = simulate_dataset(cfg);
    const auto& x = tight.dataset.features();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const int y = tight.dataset.labels()[static_cast<std::size_t>(i)];
      CHECK((x.row(i) - tight.class_means.row(y)).cwiseAbs().maxCoeff() < 1e-5);
    }
  }

  TEST_CASE("per-class covariance matches gamma1 at large n") {
    SimConfig cfg;
    cfg.gamma1 = 1.0;
    cfg.per_parent = 1;
    cfg.n_per_class = 5000;
    cfg.seed = RngSeed{21, 0};
    const SimulatedWorld world = simulate_dataset(cfg);
    const auto& x = world.dataset.features();
    for (int c = 0; c < 4; ++c) {
      const Eigen::MatrixXd block = x.middleRows(c * 5000, 5000);
      const Eigen::MatrixXd centered = block.rowwise() - block.colwise().mean();
      const Eigen::MatrixXd cov = centered.transpose() * centered / 4999.0;
      CHECK((cov - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.05);
    }
  }

  TEST_CASE("simulation is reproducible and seed-sensitive") {
    SimConfig cfg;
    cfg.seed = RngSeed{5, 0};
    const SimulatedWorld a = simulate_dataset(cfg);
    const SimulatedWorld b = simulate_dataset(cfg);
    CHECK(a.dataset == b.dataset);
    CHECK(a.class_means == b.class_means);
    cfg.seed = RngSeed{6, 0};
    const SimulatedWorld c = simulate_dataset(cfg);
    CHECK_FALSE(a.dataset == c.dataset);
    CHECK(c.dataset.size() == a.dataset.size());
    CHECK(c.truth == a.truth);
  }

  TEST_CASE("config validation") {
    SimConfig cfg;
    cfg.gamma0 = 0.0;
    CHECK_THROWS_AS(simulate_dataset(cfg), Error);
    cfg = SimConfig{};
    cfg.n_per_class = 1;
    CHECK_THROWS_AS(simulate_dataset(cfg), Error);
    cfg = SimConfig{};
    cfg.per_parent = 0;
    CHECK_THROWS_AS(simulate_dataset(cfg), Error);
  }
}
