#include "lsbd/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>

#include "lsbd/rng.hpp"

namespace lsbd::learner {

namespace {

struct Dsu {
  std::vector<std::size_t> parent;
  explicit Dsu(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

void check_batch(const GroupGrid& grid, const ConstraintBatch& batch) {
  if (batch.members.empty()) throw InvalidInput("batch has no members");
  if (batch.transforms.size() != batch.members.size())
    throw InvalidInput("batch transform count != member count");
  std::vector<std::size_t> sorted = batch.members;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw InvalidInput("batch members must be distinct");
  if (sorted.back() >= grid.size()) throw InvalidInput("batch member out of range");
  if (batch.transforms[0] != grid.identity())
    throw InvalidInput("first batch transform must be the identity");
  for (const Tuple& t : batch.transforms) grid.flatten(t);  // range-checks
}

// Angles that align member m of the batch: the angle of transform_m's inverse
// per subgroup, added to the member's own angle.
Eigen::MatrixXd inverse_offsets(const GroupGrid& grid, const ConstraintBatch& batch) {
  const int K = grid.k_count();
  Eigen::MatrixXd off(static_cast<Eigen::Index>(batch.members.size()), K);
  for (std::size_t m = 0; m < batch.members.size(); ++m)
    for (int k = 0; k < K; ++k) {
      const CyclicGrid& sub = grid.subgroups[static_cast<std::size_t>(k)];
      off(static_cast<Eigen::Index>(m), k) =
          sub.angle(sub.inverse(batch.transforms[m][static_cast<std::size_t>(k)]));
    }
  return off;
}

Tuple tuple_difference(const GroupGrid& grid, const Tuple& from, const Tuple& to) {
  return grid.compose(to, grid.inverse(from));
}

std::vector<std::vector<std::size_t>> covered_components(
    const GroupGrid& grid, const std::vector<ConstraintBatch>& batches) {
  Dsu dsu(grid.size());
  std::vector<bool> covered(grid.size(), false);
  for (const auto& b : batches) {
    check_batch(grid, b);
    for (std::size_t m = 0; m < b.members.size(); ++m) {
      covered[b.members[m]] = true;
      dsu.unite(b.members[0], b.members[m]);
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> by_root;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (covered[i]) by_root[dsu.find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> comps;
  comps.reserve(by_root.size());
  for (auto& [root, members] : by_root) comps.push_back(std::move(members));
  std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });
  return comps;
}

}  // namespace

Eigen::VectorXd angles_to_ambient(const Eigen::VectorXd& angles) {
  Eigen::VectorXd z(2 * angles.size());
  for (Eigen::Index k = 0; k < angles.size(); ++k) {
    z[2 * k] = std::cos(angles[k]);
    z[2 * k + 1] = std::sin(angles[k]);
  }
  return z;
}

Eigen::VectorXd project_torus(const Eigen::VectorXd& z) {
  if (z.size() % 2 != 0) throw InvalidInput("torus point needs even dimension");
  Eigen::VectorXd out(z.size());
  for (Eigen::Index k = 0; k < z.size() / 2; ++k) {
    const double n = z.segment<2>(2 * k).norm();
    if (n <= 1e-12)
      throw DegenerateProjection("torus block " + std::to_string(k) + " is at the origin");
    out.segment<2>(2 * k) = z.segment<2>(2 * k) / n;
  }
  return out;
}

double l_lsbd(const GroupGrid& grid, const ConstraintBatch& batch,
              const Eigen::MatrixXd& points) {
  check_batch(grid, batch);
  const int K = grid.k_count();
  if (points.rows() != static_cast<Eigen::Index>(batch.members.size()) ||
      points.cols() != 2 * K)
    throw InvalidInput("points must be batch-size x 2K");

  const RepParams rep{std::vector<int>(static_cast<std::size_t>(K), 1)};
  Eigen::MatrixXd aligned(points.rows(), points.cols());
  for (Eigen::Index m = 0; m < points.rows(); ++m)
    aligned.row(m) = direct_sum_apply(
                         rep, grid,
                         grid.inverse(batch.transforms[static_cast<std::size_t>(m)]),
                         points.row(m))
                         .transpose();
  const Eigen::VectorXd mean = aligned.colwise().mean().transpose();
  const Eigen::VectorXd target = project_torus(mean);
  return (aligned.rowwise() - target.transpose()).rowwise().squaredNorm().mean();
}

Eigen::MatrixXd l_lsbd_grad(const GroupGrid& grid, const ConstraintBatch& batch,
                            const Eigen::MatrixXd& angles) {
  check_batch(grid, batch);
  const int K = grid.k_count();
  const auto M = static_cast<Eigen::Index>(batch.members.size());
  if (angles.rows() != M || angles.cols() != K)
    throw InvalidInput("angles must be batch-size x K");

  const Eigen::MatrixXd off = inverse_offsets(grid, batch);
  Eigen::MatrixXd grad(M, K);
  for (int k = 0; k < K; ++k) {
    double sx = 0.0, sy = 0.0;
    for (Eigen::Index m = 0; m < M; ++m) {
      const double a = angles(m, k) + off(m, k);
      sx += std::cos(a);
      sy += std::sin(a);
    }
    const double r = std::hypot(sx, sy) / static_cast<double>(M);
    if (r <= 1e-12)
      throw DegenerateProjection("batch resultant for subgroup-" + std::to_string(k) +
                                 " is zero");
    const double px = sx / (r * static_cast<double>(M));
    const double py = sy / (r * static_cast<double>(M));
    for (Eigen::Index m = 0; m < M; ++m) {
      const double a = angles(m, k) + off(m, k);
      grad(m, k) = 2.0 / static_cast<double>(M) * (std::sin(a) * px - std::cos(a) * py);
    }
  }
  return grad;
}

std::vector<ConstraintBatch> make_pairs(const GroupGrid& grid, std::size_t count,
                                        std::uint64_t seed) {
  if (2 * count > grid.size())
    throw InvalidInput("pair count needs 2L <= grid size");
  Rng rng(seed);
  std::vector<std::size_t> perm(grid.size());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<ConstraintBatch> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t a = perm[2 * i];
    const std::size_t b = perm[2 * i + 1];
    out.push_back({{a, b},
                   {grid.identity(),
                    tuple_difference(grid, grid.unflatten(a), grid.unflatten(b))}});
  }
  return out;
}

PathFixture make_paths(const GroupGrid& grid, std::size_t num_paths, std::size_t path_len,
                       int step_index, std::uint64_t seed, bool connect, bool split_pairs) {
  if (step_index < 1) throw InvalidInput("step index must be >= 1");
  const int K = grid.k_count();
  Rng rng(seed);
  PathFixture fixture;

  for (std::size_t p = 0; p < num_paths; ++p) {
    Tuple cur(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k)
      cur[static_cast<std::size_t>(k)] =
          static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.subgroups[k].size)));
    const Tuple start = cur;

    ConstraintBatch batch;
    std::map<std::size_t, bool> seen;
    auto visit = [&](const Tuple& t) {
      const std::size_t idx = grid.flatten(t);
      if (!split_pairs) {
        if (seen.emplace(idx, true).second) {
          batch.members.push_back(idx);
          batch.transforms.push_back(tuple_difference(grid, start, t));
        }
      }
      return idx;
    };
    std::size_t prev_idx = visit(cur);
    Tuple prev = cur;
    for (std::size_t s = 0; s < path_len; ++s) {
      const auto move = rng.below(static_cast<std::uint64_t>(2 * K));
      const int k = static_cast<int>(move / 2);
      const int n = grid.subgroups[static_cast<std::size_t>(k)].size;
      const int delta = (move % 2 == 0 ? step_index : -step_index) % n;
      Tuple next = prev;
      next[static_cast<std::size_t>(k)] = ((prev[static_cast<std::size_t>(k)] + delta) % n + n) % n;
      const std::size_t next_idx = grid.flatten(next);
      if (split_pairs) {
        if (next_idx != prev_idx)
          fixture.batches.push_back(
              {{prev_idx, next_idx},
               {grid.identity(), tuple_difference(grid, prev, next)}});
      } else {
        visit(next);
      }
      prev = next;
      prev_idx = next_idx;
    }
    if (!split_pairs) fixture.batches.push_back(std::move(batch));
  }

  // Component census over the whole grid: elements no path touched count as
  // singletons, so `connect` always leaves exactly one component.
  Dsu dsu(grid.size());
  for (const auto& b : fixture.batches)
    for (std::size_t m = 1; m < b.members.size(); ++m) dsu.unite(b.members[0], b.members[m]);
  std::map<std::size_t, std::vector<std::size_t>> by_root;
  for (std::size_t i = 0; i < grid.size(); ++i) by_root[dsu.find(i)].push_back(i);
  fixture.components_before = by_root.size();

  if (connect && by_root.size() > 1) {
    std::vector<std::vector<std::size_t>> comps;
    comps.reserve(by_root.size());
    for (auto& [root, members] : by_root) comps.push_back(std::move(members));
    std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
      if (a.size() != b.size()) return a.size() > b.size();
      return a.front() < b.front();
    });
    const std::vector<std::size_t>& primary = comps[0];  // members already ascending
    for (std::size_t c = 1; c < comps.size(); ++c) {
      const std::size_t anchor = primary[(c - 1) % primary.size()];
      const std::size_t rep = comps[c].front();
      fixture.batches.push_back(
          {{anchor, rep},
           {grid.identity(),
            tuple_difference(grid, grid.unflatten(anchor), grid.unflatten(rep))}});
      ++fixture.connectors_appended;
    }
  }
  return fixture;
}

std::size_t coverage(const GroupGrid& grid, const std::vector<ConstraintBatch>& batches) {
  std::vector<bool> covered(grid.size(), false);
  for (const auto& b : batches) {
    check_batch(grid, b);
    for (std::size_t m : b.members) covered[m] = true;
  }
  return static_cast<std::size_t>(std::count(covered.begin(), covered.end(), true));
}

std::size_t covered_component_count(const GroupGrid& grid,
                                    const std::vector<ConstraintBatch>& batches) {
  return covered_components(grid, batches).size();
}

std::vector<ConstraintBatch> bridge_chain(const GroupGrid& grid,
                                          const std::vector<ConstraintBatch>& batches) {
  const auto comps = covered_components(grid, batches);
  std::vector<ConstraintBatch> out;
  for (std::size_t c = 0; c + 1 < comps.size(); ++c) {
    const std::size_t a = comps[c].front();
    const std::size_t b = comps[c + 1].front();
    out.push_back({{a, b},
                   {grid.identity(),
                    tuple_difference(grid, grid.unflatten(a), grid.unflatten(b))}});
  }
  return out;
}

TrainResult train(const GroupGrid& grid, const std::vector<ConstraintBatch>& constraints,
                  const TrainConfig& config, std::ostream* log) {
  if (constraints.empty()) throw InvalidInput("no constraints");
  if (config.epochs < 1) throw InvalidInput("epochs must be >= 1");
  if (!(config.learning_rate > 0.0)) throw InvalidInput("learning rate must be positive");
  if (config.momentum < 0.0 || config.momentum >= 1.0)
    throw InvalidInput("momentum must be in [0, 1)");
  for (const auto& b : constraints) check_batch(grid, b);

  const int K = grid.k_count();
  const auto G = static_cast<Eigen::Index>(grid.size());
  const std::size_t B = constraints.size();

  Rng rng(config.seed);
  Eigen::MatrixXd angles(G, K);
  for (Eigen::Index i = 0; i < G; ++i)
    for (int k = 0; k < K; ++k) angles(i, k) = rng.uniform_angle();
  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(G, K);

  std::vector<Eigen::MatrixXd> offsets;
  offsets.reserve(B);
  for (const auto& b : constraints) offsets.push_back(inverse_offsets(grid, b));

  TrainResult result;
  result.total_steps = static_cast<std::size_t>(config.epochs) * B;

  std::vector<std::size_t> order(B);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> ca, sa, px, py;

  // Evaluates one batch at the current angles and optionally applies the
  // gradient step. A collapsed resultant in ANY subgroup skips the batch
  // before anything is mutated; the caller counts the skip.
  auto batch_step = [&](std::size_t b, bool updating, double& loss_out) {
    const auto& batch = constraints[b];
    const auto M = static_cast<Eigen::Index>(batch.members.size());
    const double dm = static_cast<double>(M);
    const Eigen::MatrixXd& off = offsets[b];
    ca.assign(static_cast<std::size_t>(M * K), 0.0);
    sa.assign(static_cast<std::size_t>(M * K), 0.0);
    px.assign(static_cast<std::size_t>(K), 0.0);
    py.assign(static_cast<std::size_t>(K), 0.0);
    double loss = 0.0;
    for (int k = 0; k < K; ++k) {
      double sx = 0.0, sy = 0.0;
      for (Eigen::Index m = 0; m < M; ++m) {
        const double a = angles(static_cast<Eigen::Index>(batch.members[static_cast<std::size_t>(m)]), k) +
                         off(m, k);
        const double c = std::cos(a);
        const double s = std::sin(a);
        ca[static_cast<std::size_t>(m * K + k)] = c;
        sa[static_cast<std::size_t>(m * K + k)] = s;
        sx += c;
        sy += s;
      }
      const double norm = std::hypot(sx, sy);
      if (norm <= 1e-12 * dm) return false;
      px[static_cast<std::size_t>(k)] = sx / norm;
      py[static_cast<std::size_t>(k)] = sy / norm;
      for (Eigen::Index m = 0; m < M; ++m) {
        const double c = ca[static_cast<std::size_t>(m * K + k)];
        const double s = sa[static_cast<std::size_t>(m * K + k)];
        const double dx = c - px[static_cast<std::size_t>(k)];
        const double dy = s - py[static_cast<std::size_t>(k)];
        loss += (dx * dx + dy * dy) / dm;
      }
    }
    if (updating) {
      for (int k = 0; k < K; ++k)
        for (Eigen::Index m = 0; m < M; ++m) {
          const std::size_t member = batch.members[static_cast<std::size_t>(m)];
          const double g = 2.0 / dm *
                           (sa[static_cast<std::size_t>(m * K + k)] * px[static_cast<std::size_t>(k)] -
                            ca[static_cast<std::size_t>(m * K + k)] * py[static_cast<std::size_t>(k)]);
          double& v = velocity(static_cast<Eigen::Index>(member), k);
          v = config.momentum * v - config.learning_rate * g;
          angles(static_cast<Eigen::Index>(member), k) += v;
        }
    }
    loss_out = loss;
    return true;
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t evaluated = 0;
    for (std::size_t b : order) {
      double loss = 0.0;
      if (batch_step(b, true, loss)) {
        epoch_loss += loss;
        ++evaluated;
      } else {
        ++result.skipped_steps;
      }
    }
    if (log) {
      char line[96];
      std::snprintf(line, sizeof line, "{\"epoch\":%d,\"mean_loss\":%.17g}\n", epoch,
                    evaluated ? epoch_loss / static_cast<double>(evaluated) : 0.0);
      *log << line;
    }
  }

  if (100 * result.skipped_steps > result.total_steps)
    throw TrainFailure("skipped " + std::to_string(result.skipped_steps) + " of " +
                       std::to_string(result.total_steps) + " steps (>1%)");

  double final_loss = 0.0;
  std::size_t evaluated = 0;
  for (std::size_t b = 0; b < B; ++b) {
    double loss = 0.0;
    if (batch_step(b, false, loss)) {
      final_loss += loss;
      ++evaluated;
    }
  }
  result.final_loss = evaluated ? final_loss / static_cast<double>(evaluated) : 0.0;
  result.component_count = covered_component_count(grid, constraints);

  Eigen::MatrixXd data(G, 2 * K);
  for (Eigen::Index i = 0; i < G; ++i)
    data.row(i) = angles_to_ambient(angles.row(i).transpose()).transpose();
  result.embeddings = EmbeddingSet{grid, 2 * K, std::move(data)};
  return result;
}

}  // namespace lsbd::learner
