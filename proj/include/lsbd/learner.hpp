#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "lsbd/group.hpp"
#include "lsbd/synth.hpp"

namespace lsbd::learner {

using synth::EmbeddingSet;

// K torus angles -> 2K ambient coordinates (unit circle per block).
Eigen::VectorXd angles_to_ambient(const Eigen::VectorXd& angles);

// Nearest torus point: normalize each 2-d block. Throws DegenerateProjection
// when a block sits (numerically) at the origin.
Eigen::VectorXd project_torus(const Eigen::VectorXd& z);

// A group of grid elements observed together: members[0] is the reference,
// transforms[m] the group element carrying the reference to members[m]
// (so transforms[0] is the identity).
struct ConstraintBatch {
  std::vector<std::size_t> members;
  std::vector<Tuple> transforms;
};

// Alignment loss of one batch of torus points (rows of `points`, dim 2K,
// ordered as batch.members): align each by the inverse action of its
// transform, project the aligned mean back to the torus, and measure the mean
// squared distance of aligned points to that projection.
double l_lsbd(const GroupGrid& grid, const ConstraintBatch& batch,
              const Eigen::MatrixXd& points);

// Analytic gradient of l_lsbd with respect to the members' torus angles
// (rows of `angles`: batch member index, columns: subgroup). The projection
// is a constrained minimizer of the loss, so its own sensitivity drops out.
Eigen::MatrixXd l_lsbd_grad(const GroupGrid& grid, const ConstraintBatch& batch,
                            const Eigen::MatrixXd& angles);

// L disjoint random pairs (2L distinct elements) with relative transforms.
std::vector<ConstraintBatch> make_pairs(const GroupGrid& grid, std::size_t count,
                                        std::uint64_t seed);

struct PathFixture {
  std::vector<ConstraintBatch> batches;
  std::size_t components_before = 0;   // over all grid elements
  std::size_t connectors_appended = 0;
};

// Seeded random walks: each path starts at a uniform element and takes
// `path_len` moves of +-step_index along one uniformly chosen subgroup.
// A path becomes one batch over its distinct elements (first-visit order),
// or one pair per move when split_pairs is set. When `connect` is on and the
// batches leave the grid disconnected, pair constraints are appended linking
// each secondary component (largest first) to a distinct element of the
// primary component, so the fixture always constrains one connected piece.
PathFixture make_paths(const GroupGrid& grid, std::size_t num_paths, std::size_t path_len,
                       int step_index, std::uint64_t seed, bool connect = true,
                       bool split_pairs = false);

// Constraint-graph queries over the elements that appear in some batch.
std::size_t coverage(const GroupGrid& grid, const std::vector<ConstraintBatch>& batches);
std::size_t covered_component_count(const GroupGrid& grid,
                                    const std::vector<ConstraintBatch>& batches);

// Pair constraints chaining the covered components (largest first, then
// smallest member index; representative = smallest member) into one piece.
std::vector<ConstraintBatch> bridge_chain(const GroupGrid& grid,
                                          const std::vector<ConstraintBatch>& batches);

struct TrainConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  int epochs = 1000;
  std::uint64_t seed = 0;
};

struct TrainResult {
  EmbeddingSet embeddings;       // dim 2K, every grid element
  double final_loss = 0.0;       // mean batch loss at the final parameters
  std::size_t component_count = 0;  // covered constraint-graph components
  std::size_t skipped_steps = 0;
  std::size_t total_steps = 0;
};

// Momentum gradient descent on per-element torus angles, one update per batch
// in a freshly shuffled order each epoch. Angles start uniform on [0, 2*pi).
// Batches whose aligned resultant collapses are skipped and counted; the run
// fails (TrainFailure) if more than 1% of steps skip. Strictly serial: the
// result depends only on inputs and config.seed. When `log` is given, one
// JSON line {"epoch":..,"mean_loss":..} is written per epoch.
TrainResult train(const GroupGrid& grid, const std::vector<ConstraintBatch>& constraints,
                  const TrainConfig& config, std::ostream* log = nullptr);

}  // namespace lsbd::learner
