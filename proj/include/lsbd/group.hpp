#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "lsbd/errors.hpp"

namespace lsbd {

inline constexpr double kTwoPi = 6.28318530717958647692;

// Group element of a product of cyclic factors: one index per factor.
using Tuple = std::vector<int>;

// The cyclic group of order `size`, sampled as the regular grid of
// angles 2*pi*j/size, j = 0..size-1.
struct CyclicGrid {
  int size = 1;

  explicit CyclicGrid(int n) : size(n) {
    if (n < 1) throw InvalidInput("cyclic grid size must be >= 1");
  }

  double angle(int j) const { return kTwoPi * static_cast<double>(check(j)) / size; }
  int compose(int a, int b) const { return (check(a) + check(b)) % size; }
  int inverse(int j) const { return (size - check(j)) % size; }

 private:
  int check(int j) const {
    if (j < 0 || j >= size) throw InvalidInput("cyclic index out of range");
    return j;
  }
};

// Product of K cyclic grids; element tuples enumerate row-major with the
// last factor fastest.
struct GroupGrid {
  std::vector<CyclicGrid> subgroups;

  GroupGrid() : GroupGrid(std::vector<int>{1}) {}  // trivial group
  explicit GroupGrid(const std::vector<int>& sizes);

  int k_count() const { return static_cast<int>(subgroups.size()); }
  std::size_t size() const { return size_; }

  Tuple identity() const { return Tuple(subgroups.size(), 0); }
  std::size_t flatten(const Tuple& t) const;
  Tuple unflatten(std::size_t index) const;
  Tuple compose(const Tuple& a, const Tuple& b) const;
  Tuple inverse(const Tuple& a) const;

 private:
  std::size_t size_ = 1;
  void check(const Tuple& t) const;
};

// Inclusive integer range of rotation frequencies to search.
struct OmegaRange {
  int lo = -10;
  int hi = 10;

  OmegaRange() = default;
  OmegaRange(int l, int h) : lo(l), hi(h) {
    if (l > h) throw InvalidInput("empty frequency range");
  }
  int count() const { return hi - lo + 1; }
};

// One integer frequency per subgroup: subgroup k acts on its 2-d block by
// rotation through omega_k times the sampled angle.
struct RepParams {
  std::vector<int> omegas;
};

// 2x2 rotation through `angle` radians (counter-clockwise).
Eigen::Matrix2d rotation_matrix(double angle);

// Apply the frequency-omega representation of element j of one cyclic grid.
Eigen::Vector2d rep_apply(int omega, const CyclicGrid& grid, int j,
                          const Eigen::Vector2d& v);

// Apply the block-diagonal product representation of tuple g to a vector of
// dimension 2K (block k = components 2k, 2k+1).
Eigen::VectorXd direct_sum_apply(const RepParams& rep, const GroupGrid& grid,
                                 const Tuple& g, const Eigen::VectorXd& z);

}  // namespace lsbd
