#include "lsbd/group.hpp"

#include <cmath>
#include <limits>

namespace lsbd {

GroupGrid::GroupGrid(const std::vector<int>& sizes) {
  if (sizes.empty()) throw InvalidInput("grid needs at least one factor");
  subgroups.reserve(sizes.size());
  for (int n : sizes) {
    subgroups.emplace_back(n);
    if (size_ > std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(n))
      throw InvalidInput("grid size overflows");
    size_ *= static_cast<std::size_t>(n);
  }
}

void GroupGrid::check(const Tuple& t) const {
  if (t.size() != subgroups.size()) throw InvalidInput("tuple length != factor count");
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k] < 0 || t[k] >= subgroups[k].size)
      throw InvalidInput("tuple index out of range");
}

std::size_t GroupGrid::flatten(const Tuple& t) const {
  check(t);
  std::size_t index = 0;
  for (std::size_t k = 0; k < t.size(); ++k)
    index = index * static_cast<std::size_t>(subgroups[k].size) + static_cast<std::size_t>(t[k]);
  return index;
}

Tuple GroupGrid::unflatten(std::size_t index) const {
  if (index >= size_) throw InvalidInput("flat index out of range");
  Tuple t(subgroups.size());
  for (std::size_t k = subgroups.size(); k-- > 0;) {
    const auto n = static_cast<std::size_t>(subgroups[k].size);
    t[k] = static_cast<int>(index % n);
    index /= n;
  }
  return t;
}

Tuple GroupGrid::compose(const Tuple& a, const Tuple& b) const {
  check(a);
  check(b);
  Tuple c(subgroups.size());
  for (std::size_t k = 0; k < subgroups.size(); ++k)
    c[k] = subgroups[k].compose(a[k], b[k]);
  return c;
}

Tuple GroupGrid::inverse(const Tuple& a) const {
  check(a);
  Tuple c(subgroups.size());
  for (std::size_t k = 0; k < subgroups.size(); ++k) c[k] = subgroups[k].inverse(a[k]);
  return c;
}

Eigen::Matrix2d rotation_matrix(double angle) {
  if (!std::isfinite(angle)) throw InvalidInput("rotation angle must be finite");
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix2d m;
  m << c, -s, s, c;
  return m;
}

Eigen::Vector2d rep_apply(int omega, const CyclicGrid& grid, int j,
                          const Eigen::Vector2d& v) {
  return rotation_matrix(omega * grid.angle(j)) * v;
}

Eigen::VectorXd direct_sum_apply(const RepParams& rep, const GroupGrid& grid,
                                 const Tuple& g, const Eigen::VectorXd& z) {
  const int K = grid.k_count();
  if (static_cast<int>(rep.omegas.size()) != K)
    throw InvalidInput("frequency count != factor count");
  if (z.size() != 2 * K) throw InvalidInput("vector dimension != 2K");
  if (static_cast<int>(g.size()) != K) throw InvalidInput("tuple length != factor count");
  Eigen::VectorXd out(z.size());
  for (int k = 0; k < K; ++k)
    out.segment<2>(2 * k) =
        rep_apply(rep.omegas[k], grid.subgroups[k], g[k], z.segment<2>(2 * k));
  return out;
}

}  // namespace lsbd
