#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "lsbd/group.hpp"

using namespace lsbd;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("rotation_matrix quarter turn and structure") {
  const Eigen::Matrix2d r = rotation_matrix(kPi / 2);
  CHECK(std::abs(r(0, 0)) < 1e-15);
  CHECK(std::abs(r(1, 1)) < 1e-15);
  CHECK(r(0, 1) == doctest::Approx(-1.0));
  CHECK(r(1, 0) == doctest::Approx(1.0));

  for (double a : {0.0, 0.3, 1.7, -2.9, 6.1}) {
    const Eigen::Matrix2d m = rotation_matrix(a);
    CHECK((m.transpose() * m - Eigen::Matrix2d::Identity()).norm() < 1e-12);
    CHECK(m.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(rotation_matrix(std::nan("")), InvalidInput);
}

TEST_CASE("rep_apply basic actions") {
  const CyclicGrid c4(4);
  Eigen::Vector2d e1(1.0, 0.0);
  // one quarter step at frequency 1
  Eigen::Vector2d v = rep_apply(1, c4, 1, e1);
  CHECK(std::abs(v.x()) < 1e-15);
  CHECK(v.y() == doctest::Approx(1.0));

  // frequency doubling: omega=2 on the 8-grid, one step = quarter turn
  const CyclicGrid c8(8);
  v = rep_apply(2, c8, 1, e1);
  CHECK(std::abs(v.x()) < 1e-15);
  CHECK(v.y() == doctest::Approx(1.0));
}

TEST_CASE("rep_apply against repeated single-step multiplication") {
  // Independent route: accumulate the one-step matrix; after N steps the
  // frequency-omega action must close up to the identity.
  const CyclicGrid c64(64);
  const Eigen::Matrix2d step = rotation_matrix(3 * c64.angle(1));
  Eigen::Matrix2d acc = Eigen::Matrix2d::Identity();
  for (int i = 0; i < 64; ++i) acc = step * acc;
  CHECK((acc - Eigen::Matrix2d::Identity()).norm() < 1e-9);

  // and the j-step action equals the j-fold product, omega = -3, j = 5
  acc = Eigen::Matrix2d::Identity();
  const Eigen::Matrix2d back = rotation_matrix(-3 * c64.angle(1));
  for (int i = 0; i < 5; ++i) acc = back * acc;
  const Eigen::Vector2d probe(0.37, -1.21);
  CHECK((rep_apply(-3, c64, 5, probe) - acc * probe).norm() < 1e-12);
  // direct trigonometric route
  const double a = -3 * 2 * kPi * 5 / 64;
  const Eigen::Vector2d direct(std::cos(a) * probe.x() - std::sin(a) * probe.y(),
                               std::sin(a) * probe.x() + std::cos(a) * probe.y());
  CHECK((rep_apply(-3, c64, 5, probe) - direct).norm() < 1e-12);
}

TEST_CASE("representation is a homomorphism") {
  const CyclicGrid c12(12);
  for (int omega = -5; omega <= 5; ++omega)
    for (int a = 0; a < 12; ++a)
      for (int b = 0; b < 12; ++b) {
        const Eigen::Matrix2d lhs = rotation_matrix(omega * c12.angle(c12.compose(a, b)));
        const Eigen::Matrix2d rhs =
            rotation_matrix(omega * c12.angle(a)) * rotation_matrix(omega * c12.angle(b));
        CHECK((lhs - rhs).norm() < 1e-9);
      }
}

TEST_CASE("cyclic grid composition is regular") {
  const CyclicGrid c6(6);
  for (int a = 0; a < 6; ++a) {
    std::vector<int> row(6, 0), col(6, 0);
    for (int b = 0; b < 6; ++b) {
      ++row[static_cast<std::size_t>(c6.compose(a, b))];
      ++col[static_cast<std::size_t>(c6.compose(b, a))];
    }
    for (int i = 0; i < 6; ++i) {
      CHECK(row[static_cast<std::size_t>(i)] == 1);
      CHECK(col[static_cast<std::size_t>(i)] == 1);
    }
  }
}

TEST_CASE("grid enumeration is row-major, last factor fastest") {
  const GroupGrid grid({2, 3});
  const Tuple expected[] = {{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {1, 2}};
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(grid.unflatten(i) == expected[i]);
    CHECK(grid.flatten(expected[i]) == i);
  }
  CHECK(grid.size() == 6);
  CHECK_THROWS_AS(grid.unflatten(6), InvalidInput);
}

TEST_CASE("tuple compose and inverse") {
  const GroupGrid grid({4, 4});
  CHECK(grid.compose({3, 2}, {2, 3}) == Tuple{1, 1});
  CHECK(grid.identity() == Tuple{0, 0});

  const GroupGrid g43({4, 3});
  for (std::size_t i = 0; i < g43.size(); ++i) {
    const Tuple a = g43.unflatten(i);
    CHECK(g43.compose(a, g43.inverse(a)) == g43.identity());
    CHECK(g43.inverse(g43.inverse(a)) == a);
  }
  CHECK_THROWS_AS(grid.compose({0, 0}, {0, 4}), InvalidInput);
  CHECK_THROWS_AS(grid.compose({0}, {0, 0}), InvalidInput);
}

TEST_CASE("direct_sum_apply acts block-wise") {
  const GroupGrid grid({4, 8});
  const RepParams rep{{1, 3}};
  Eigen::VectorXd z(4);
  z << 0.2, -0.4, 1.5, 0.9;
  const Tuple g{3, 5};
  const Eigen::VectorXd out = direct_sum_apply(rep, grid, g, z);
  CHECK((out.segment<2>(0) - rep_apply(1, grid.subgroups[0], 3, z.segment<2>(0))).norm() <
        1e-15);
  CHECK((out.segment<2>(2) - rep_apply(3, grid.subgroups[1], 5, z.segment<2>(2))).norm() <
        1e-15);

  // homomorphism through the product group
  const Tuple h{1, 7};
  const Eigen::VectorXd lhs = direct_sum_apply(rep, grid, grid.compose(g, h), z);
  const Eigen::VectorXd rhs = direct_sum_apply(rep, grid, g, direct_sum_apply(rep, grid, h, z));
  CHECK((lhs - rhs).norm() < 1e-9);

  Eigen::VectorXd bad(3);
  bad << 1, 2, 3;
  CHECK_THROWS_AS(direct_sum_apply(rep, grid, g, bad), InvalidInput);
  CHECK_THROWS_AS(direct_sum_apply(RepParams{{1}}, grid, g, z), InvalidInput);
}

TEST_CASE("constructor validation") {
  CHECK_THROWS_AS(CyclicGrid(0), InvalidInput);
  CHECK_THROWS_AS(GroupGrid(std::vector<int>{}), InvalidInput);
  CHECK_THROWS_AS(GroupGrid({4, 0}), InvalidInput);
  CHECK_THROWS_AS(OmegaRange(3, 2), InvalidInput);
  CHECK(OmegaRange().count() == 21);
  const CyclicGrid c4(4);
  CHECK_THROWS_AS(c4.angle(4), InvalidInput);
  CHECK_THROWS_AS(c4.angle(-1), InvalidInput);
  CHECK(c4.inverse(0) == 0);
  CHECK(c4.inverse(1) == 3);
}
