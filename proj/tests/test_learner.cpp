#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "lsbd/learner.hpp"
#include "lsbd/metric.hpp"
#include "lsbd/rng.hpp"

using namespace lsbd;
using namespace lsbd::learner;

namespace {

// Torus points for a batch, from per-member angle rows (member x subgroup).
Eigen::MatrixXd ambient_rows(const Eigen::MatrixXd& angles) {
  Eigen::MatrixXd out(angles.rows(), 2 * angles.cols());
  for (Eigen::Index m = 0; m < angles.rows(); ++m)
    out.row(m) = angles_to_ambient(angles.row(m).transpose()).transpose();
  return out;
}

ConstraintBatch random_batch(const GroupGrid& grid, std::size_t m_count, Rng& rng) {
  ConstraintBatch batch;
  m_count = std::min(m_count, grid.size());
  std::vector<std::size_t> pool(grid.size());
  std::iota(pool.begin(), pool.end(), 0);
  rng.shuffle(pool);
  batch.members.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m_count));
  batch.transforms.push_back(grid.identity());
  for (std::size_t m = 1; m < m_count; ++m) {
    Tuple t(static_cast<std::size_t>(grid.k_count()));
    for (int k = 0; k < grid.k_count(); ++k)
      t[static_cast<std::size_t>(k)] =
          static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.subgroups[k].size)));
    batch.transforms.push_back(t);
  }
  return batch;
}

double fd_loss(const GroupGrid& grid, const ConstraintBatch& batch, Eigen::MatrixXd angles,
               Eigen::Index m, Eigen::Index k, double h) {
  angles(m, k) += h;
  return l_lsbd(grid, batch, ambient_rows(angles));
}

}  // namespace

TEST_CASE("project_torus normalizes block-wise") {
  Eigen::VectorXd z(4);
  z << 3.0, 4.0, 0.0, -2.0;
  const Eigen::VectorXd p = project_torus(z);
  CHECK(p[0] == doctest::Approx(0.6));
  CHECK(p[1] == doctest::Approx(0.8));
  CHECK(p[2] == doctest::Approx(0.0));
  CHECK(p[3] == doctest::Approx(-1.0));
  CHECK((project_torus(p) - p).norm() < 1e-15);  // idempotent

  Eigen::VectorXd zero(2);
  zero << 0.0, 0.0;
  CHECK_THROWS_AS(project_torus(zero), DegenerateProjection);
  Eigen::VectorXd odd(3);
  odd << 1.0, 0.0, 1.0;
  CHECK_THROWS_AS(project_torus(odd), InvalidInput);
}

TEST_CASE("loss vanishes on exactly consistent observations") {
  const GroupGrid grid({8, 8});
  ConstraintBatch batch;
  batch.members = {0, 9, 18, 27};
  batch.transforms = {{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  // members placed exactly where the transforms say they should be
  Eigen::MatrixXd angles(4, 2);
  const double base0 = 0.7, base1 = -0.4;
  for (int m = 0; m < 4; ++m) {
    angles(m, 0) = base0 + grid.subgroups[0].angle(m);
    angles(m, 1) = base1 + grid.subgroups[1].angle(m);
  }
  CHECK(l_lsbd(grid, batch, ambient_rows(angles)) <= 1e-18);
}

TEST_CASE("loss matches the frozen two-point value") {
  // two points on one circle, 10 grid steps apart, declared 6 steps apart:
  // the aligned gap is 4 steps = pi/8, so the loss is 2 * (1 - cos(pi/16))
  const GroupGrid grid({64});
  ConstraintBatch batch;
  batch.members = {0, 10};
  batch.transforms = {{0}, {6}};
  Eigen::MatrixXd angles(2, 1);
  angles << 0.0, kTwoPi * 10 / 64;
  const double loss = l_lsbd(grid, batch, ambient_rows(angles));
  CHECK(loss == doctest::Approx(0.038429439193539139).epsilon(1e-12));
}

TEST_CASE("antipodal aligned points have no usable projection") {
  const GroupGrid grid({4});
  ConstraintBatch batch;
  batch.members = {0, 2};
  batch.transforms = {{0}, {0}};
  Eigen::MatrixXd angles(2, 1);
  angles << 0.0, kTwoPi / 2;  // opposite points, identity transforms
  CHECK_THROWS_AS(l_lsbd(grid, batch, ambient_rows(angles)), DegenerateProjection);
}

TEST_CASE("batch validation") {
  const GroupGrid grid({4, 4});
  Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(2, 4);
  CHECK_THROWS_AS(l_lsbd(grid, ConstraintBatch{{0, 0}, {{0, 0}, {1, 0}}}, pts), InvalidInput);
  CHECK_THROWS_AS(l_lsbd(grid, ConstraintBatch{{0, 1}, {{1, 0}, {0, 0}}}, pts), InvalidInput);
  CHECK_THROWS_AS(l_lsbd(grid, ConstraintBatch{{0, 99}, {{0, 0}, {1, 0}}}, pts), InvalidInput);
  CHECK_THROWS_AS(l_lsbd(grid, ConstraintBatch{{0, 1}, {{0, 0}}}, pts), InvalidInput);
  CHECK_THROWS_AS(l_lsbd(grid, ConstraintBatch{{}, {}, }, pts), InvalidInput);
}

TEST_CASE("analytic gradient matches finite differences") {
  Rng rng(404);
  for (int trial = 0; trial < 20; ++trial) {
    const int k_count = 1 + static_cast<int>(rng.below(3));
    std::vector<int> sizes;
    for (int k = 0; k < k_count; ++k) sizes.push_back(4 + static_cast<int>(rng.below(9)));
    const GroupGrid grid(sizes);
    const std::size_t m_count = std::min<std::size_t>(2 + rng.below(5), grid.size());
    const ConstraintBatch batch = random_batch(grid, m_count, rng);
    Eigen::MatrixXd angles(static_cast<Eigen::Index>(m_count), k_count);
    for (Eigen::Index m = 0; m < angles.rows(); ++m)
      for (int k = 0; k < k_count; ++k) angles(m, k) = rng.uniform_angle();

    const Eigen::MatrixXd grad = l_lsbd_grad(grid, batch, angles);
    const double h = 1e-5;
    for (Eigen::Index m = 0; m < angles.rows(); ++m)
      for (int k = 0; k < k_count; ++k) {
        const double fd = (fd_loss(grid, batch, angles, m, k, h) -
                           fd_loss(grid, batch, angles, m, k, -h)) /
                          (2 * h);
        CHECK(std::abs(fd - grad(m, k)) <= 1e-5 * std::max(std::abs(grad(m, k)), 1e-2));
      }
  }
}

TEST_CASE("gradient is zero at a zero-loss configuration") {
  const GroupGrid grid({8, 8});
  ConstraintBatch batch;
  batch.members = {0, 9, 18};
  batch.transforms = {{0, 0}, {1, 1}, {2, 2}};
  Eigen::MatrixXd angles(3, 2);
  for (int m = 0; m < 3; ++m) {
    angles(m, 0) = 1.1 + grid.subgroups[0].angle(m);
    angles(m, 1) = -0.2 + grid.subgroups[1].angle(m);
  }
  CHECK(l_lsbd_grad(grid, batch, angles).norm() <= 1e-10);
}

TEST_CASE("shifting a whole subgroup is a gauge move") {
  Rng rng(55);
  const GroupGrid grid({8, 8});
  const ConstraintBatch batch = random_batch(grid, 5, rng);
  Eigen::MatrixXd angles(5, 2);
  for (Eigen::Index m = 0; m < 5; ++m)
    for (int k = 0; k < 2; ++k) angles(m, k) = rng.uniform_angle();

  const double base = l_lsbd(grid, batch, ambient_rows(angles));
  Eigen::MatrixXd shifted = angles;
  shifted.col(0).array() += 0.83;
  shifted.col(1).array() -= 1.91;
  const double moved = l_lsbd(grid, batch, ambient_rows(shifted));
  CHECK(std::abs(moved - base) <= 1e-10 * (1.0 + base));

  // consequence: the gradient has no component along the gauge direction
  const Eigen::MatrixXd grad = l_lsbd_grad(grid, batch, angles);
  CHECK(std::abs(grad.col(0).sum()) <= 1e-8);
  CHECK(std::abs(grad.col(1).sum()) <= 1e-8);
}

TEST_CASE("make_pairs: disjoint, in range, exact transforms") {
  const GroupGrid grid({6, 6});
  const auto batches = make_pairs(grid, 10, 3);
  REQUIRE(batches.size() == 10);
  std::vector<bool> used(grid.size(), false);
  for (const auto& b : batches) {
    REQUIRE(b.members.size() == 2);
    REQUIRE(b.transforms.size() == 2);
    CHECK(b.transforms[0] == grid.identity());
    for (std::size_t m : b.members) {
      CHECK_FALSE(used[m]);  // disjoint
      used[m] = true;
    }
    // the transform carries member 0's tuple onto member 1's
    CHECK(grid.flatten(grid.compose(b.transforms[1], grid.unflatten(b.members[0]))) ==
          b.members[1]);
  }

  // a full matching uses every element once
  const auto full = make_pairs(grid, 18, 9);
  std::size_t covered_count = coverage(grid, full);
  CHECK(covered_count == 36);

  CHECK(make_pairs(grid, 0, 1).empty());
  CHECK_THROWS_AS(make_pairs(grid, 19, 1), InvalidInput);

  // seeded determinism
  const auto again = make_pairs(grid, 10, 3);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(again[i].members == batches[i].members);
    CHECK(again[i].transforms == batches[i].transforms);
  }
}

TEST_CASE("make_paths: transforms track the walk exactly") {
  const GroupGrid grid({16, 16});
  const PathFixture fx = make_paths(grid, 6, 40, 3, 11, /*connect=*/false);
  REQUIRE(fx.batches.size() == 6);
  for (const auto& b : fx.batches) {
    REQUIRE(!b.members.empty());
    CHECK(b.members.size() <= 41);
    CHECK(b.transforms[0] == grid.identity());
    std::set<std::size_t> distinct(b.members.begin(), b.members.end());
    CHECK(distinct.size() == b.members.size());
    for (std::size_t m = 0; m < b.members.size(); ++m)
      CHECK(grid.flatten(grid.compose(b.transforms[m], grid.unflatten(b.members[0]))) ==
            b.members[m]);
  }
  CHECK(fx.connectors_appended == 0);
  CHECK(fx.components_before > 1);  // 6 short walks cannot cover 256 elements
}

TEST_CASE("make_paths: split mode emits one step per pair") {
  const GroupGrid grid({8, 8});
  const PathFixture fx = make_paths(grid, 3, 25, 3, 5, /*connect=*/false,
                                    /*split_pairs=*/true);
  CHECK(fx.batches.size() <= 75);
  for (const auto& b : fx.batches) {
    REQUIRE(b.members.size() == 2);
    CHECK(b.members[0] != b.members[1]);
    const Tuple a = grid.unflatten(b.members[0]);
    const Tuple c = grid.unflatten(b.members[1]);
    // exactly one coordinate moves, by +-3 mod 8
    int moved = 0;
    for (int k = 0; k < 2; ++k) {
      const int d = ((c[static_cast<std::size_t>(k)] - a[static_cast<std::size_t>(k)]) % 8 + 8) % 8;
      if (d != 0) {
        ++moved;
        CHECK((d == 3 || d == 5));
      }
    }
    CHECK(moved == 1);
    CHECK(grid.flatten(grid.compose(b.transforms[1], a)) == b.members[1]);
  }
}

TEST_CASE("make_paths: zero-length paths are single points") {
  const GroupGrid grid({8, 8});
  const PathFixture fx = make_paths(grid, 4, 0, 1, 2, /*connect=*/false);
  REQUIRE(fx.batches.size() == 4);
  for (const auto& b : fx.batches) {
    CHECK(b.members.size() == 1);
    CHECK(b.transforms[0] == grid.identity());
    // a single point contributes nothing to the loss
    Eigen::MatrixXd angles(1, 2);
    angles << 0.3, 1.2;
    CHECK(l_lsbd(grid, b, ambient_rows(angles)) <= 1e-30);
  }
  CHECK_THROWS_AS(make_paths(grid, 1, 5, 0, 1), InvalidInput);
}

TEST_CASE("make_paths connects everything it did not visit") {
  const GroupGrid grid({16, 16});
  const PathFixture fx = make_paths(grid, 6, 40, 3, 11, /*connect=*/true);
  CHECK(fx.components_before > 1);
  CHECK(fx.connectors_appended == fx.components_before - 1);
  CHECK(coverage(grid, fx.batches) == grid.size());
  CHECK(covered_component_count(grid, fx.batches) == 1);

  // determinism
  const PathFixture fy = make_paths(grid, 6, 40, 3, 11, /*connect=*/true);
  REQUIRE(fy.batches.size() == fx.batches.size());
  for (std::size_t i = 0; i < fx.batches.size(); ++i) {
    CHECK(fy.batches[i].members == fx.batches[i].members);
    CHECK(fy.batches[i].transforms == fx.batches[i].transforms);
  }
}

TEST_CASE("component queries and chain bridging") {
  const GroupGrid grid({8});
  std::vector<ConstraintBatch> batches;
  batches.push_back({{4, 5, 6}, {{0}, {1}, {2}}});
  batches.push_back({{0, 1}, {{0}, {1}}});
  CHECK(coverage(grid, batches) == 5);
  CHECK(covered_component_count(grid, batches) == 2);

  const auto links = bridge_chain(grid, batches);
  REQUIRE(links.size() == 1);
  // larger component first; representatives are least members: 4 -> 0
  CHECK(links[0].members == std::vector<std::size_t>{4, 0});
  CHECK(links[0].transforms[0] == grid.identity());
  CHECK(grid.flatten(grid.compose(links[0].transforms[1], grid.unflatten(4))) == 0);

  batches.push_back(links[0]);
  CHECK(covered_component_count(grid, batches) == 1);
  CHECK(bridge_chain(grid, batches).empty());
}

TEST_CASE("training recovers the torus from connected random walks") {
  const GroupGrid grid({16, 16});
  const PathFixture fx = make_paths(grid, 10, 100, 1, 7);
  CHECK(covered_component_count(grid, fx.batches) == 1);

  TrainConfig config;
  config.seed = 7;
  std::ostringstream log;
  const TrainResult result = train(grid, fx.batches, config, &log);
  CHECK(result.component_count == 1);
  CHECK(result.skipped_steps == 0);
  CHECK(result.total_steps == 1000 * fx.batches.size());
  CHECK(result.final_loss < 1e-4);

  const auto report = metric::d_lsbd(result.embeddings, OmegaRange{});
  CHECK(report.d_lsbd < 0.05);

  // per-epoch log: one line each, non-increasing for >= 95% of transitions
  std::size_t lines = 0, drops = 0;
  std::string line;
  std::istringstream in(log.str());
  double prev = std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    const auto pos = line.find("\"mean_loss\":");
    REQUIRE(pos != std::string::npos);
    const double value = std::strtod(line.c_str() + pos + 12, nullptr);
    if (lines > 0 && value <= prev) ++drops;
    prev = value;
    ++lines;
  }
  CHECK(lines == 1000);
  CHECK(drops >= static_cast<std::size_t>(0.95 * 999));
}

TEST_CASE("training is bit-deterministic per seed") {
  const GroupGrid grid({8, 8});
  const PathFixture fx = make_paths(grid, 5, 40, 1, 3);
  TrainConfig config;
  config.epochs = 50;
  config.seed = 21;
  const TrainResult a = train(grid, fx.batches, config);
  const TrainResult b = train(grid, fx.batches, config);
  CHECK(a.final_loss == b.final_loss);
  CHECK((a.embeddings.data - b.embeddings.data).cwiseAbs().maxCoeff() == 0.0);

  config.seed = 22;
  const TrainResult c = train(grid, fx.batches, config);
  CHECK((a.embeddings.data - c.embeddings.data).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("a lone pair trains to zero loss but no global structure") {
  const GroupGrid grid({16, 16});
  const auto batches = make_pairs(grid, 1, 9);
  TrainConfig config;
  config.epochs = 200;
  config.seed = 9;
  const TrainResult result = train(grid, batches, config);
  CHECK(result.final_loss < 1e-8);
  // 254 of 256 elements never moved off their random start
  const auto report = metric::d_lsbd(result.embeddings, OmegaRange{});
  CHECK(report.d_lsbd > 0.3);
}

TEST_CASE("disconnected constraints still train, and say so") {
  const GroupGrid grid({8, 8});
  std::vector<ConstraintBatch> batches;
  batches.push_back({{0, 1, 2}, {{0, 0}, {0, 1}, {0, 2}}});
  batches.push_back({{40, 41}, {{0, 0}, {0, 1}}});
  TrainConfig config;
  config.epochs = 300;
  config.seed = 4;
  const TrainResult result = train(grid, batches, config);
  CHECK(result.component_count == 2);
  CHECK(result.final_loss < 1e-6);
}

TEST_CASE("training validates its inputs") {
  const GroupGrid grid({4, 4});
  CHECK_THROWS_WITH_AS(train(grid, {}, TrainConfig{}), "no constraints", InvalidInput);
  const auto batches = make_pairs(grid, 2, 1);
  TrainConfig bad;
  bad.epochs = 0;
  CHECK_THROWS_AS(train(grid, batches, bad), InvalidInput);
  bad = TrainConfig{};
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(train(grid, batches, bad), InvalidInput);
  bad = TrainConfig{};
  bad.momentum = 1.0;
  CHECK_THROWS_AS(train(grid, batches, bad), InvalidInput);
}

TEST_CASE("complete pairing converges to a clean torus") {
  // every unordered pair of a 16x16 grid as a two-member batch
  const GroupGrid grid({16, 16});
  std::vector<ConstraintBatch> batches;
  for (std::size_t a = 0; a < grid.size(); ++a)
    for (std::size_t b = a + 1; b < grid.size(); ++b)
      batches.push_back(
          {{a, b},
           {grid.identity(),
            grid.compose(grid.unflatten(b), grid.inverse(grid.unflatten(a)))}});
  TrainConfig config;
  config.epochs = 2000;
  config.seed = 1;
  const TrainResult result = train(grid, batches, config);
  CHECK(result.final_loss < 1e-4);
  CHECK(metric::d_lsbd(result.embeddings, OmegaRange{}).d_lsbd < 0.01);
}
