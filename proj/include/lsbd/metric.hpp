#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lsbd/group.hpp"
#include "lsbd/synth.hpp"

#include "json.hpp"

namespace lsbd::metric {

using synth::EmbeddingSet;

// ---- reference metric against a caller-supplied representation ----

struct SimpleMetricResult {
  double value = 0.0;        // mean squared deviation of aligned points
  Eigen::VectorXd m_star;    // mean of the aligned points
};

// Align every embedding by the inverse action of its own grid element under
// the given block-rotation representation, then measure dispersion around the
// aligned mean. Zero iff the encoder is exactly equivariant with `rep`.
SimpleMetricResult simple_metric(const EmbeddingSet& set, const RepParams& rep);

// Same quantity computed as (1 / 2N^2) * sum over all ordered pairs of the
// squared distance between aligned points; kept as an independent route.
double pairwise_metric(const EmbeddingSet& set, const RepParams& rep);

// ---- learned-frequency metric pipeline ----

// Embeddings with the subgroup-k orbit structure centered out: the mean over
// each k-orbit is subtracted from its members. `source_msn` is the mean
// squared row norm of the original set (scale reference for degeneracy).
struct CenteredOrbitSet {
  int k = 0;
  Eigen::MatrixXd vectors;  // |G| x D, rows in grid enumeration order
  double source_msn = 0.0;
};

CenteredOrbitSet center_subgroup(const EmbeddingSet& set, int k);

// Top principal plane of a centered set, with a basis canonicalized so that
// repeated eigenvalues still yield a deterministic, input-order-free frame.
struct ProjectedOrbitSet {
  int k = 0;
  Eigen::MatrixXd coords;       // |G| x 2, in the canonical plane basis
  Eigen::MatrixXd basis;        // D x 2, orthonormal columns
  Eigen::VectorXd eigenvalues;  // all D, nonincreasing, clamped at 0
  double explained_fraction = 0.0;
  bool rank_deficient = false;  // second eigenvalue ~ 0: plane is a line
};

// Throws DegenerateProjection when the centered set has (numerically) zero
// variability: trace(cov) <= 1e-24 * source_msn.
ProjectedOrbitSet pca_project(const CenteredOrbitSet& centered);

// Dispersion of the projected subgroup-k coordinates after aligning each row
// by the frequency-omega rotation of its element's inverse.
double dispersion_for_omega(const ProjectedOrbitSet& projected, const GroupGrid& grid,
                            int omega);

// ---- full report ----

enum class Normalization { off, lambda };

struct SubgroupReport {
  int k = 0;
  bool degenerate = false;
  std::optional<int> omega_star;      // absent iff zero-variability subgroup
  double d_k = 0.0;
  double explained_fraction = 0.0;
  std::map<int, double> dispersion_curve;  // omega -> dispersion (normalized if on)
  std::optional<double> lambda_k;     // present iff normalization == lambda
};

struct MetricReport {
  double d_lsbd = 0.0;
  Normalization normalization = Normalization::off;
  OmegaRange omega_range;
  std::vector<SubgroupReport> per_subgroup;
};

// Full pipeline: per subgroup, center -> project -> search the frequency
// range for the best-aligned rotation; d_lsbd is the mean of the per-subgroup
// minima. `threads` caps worker threads (<=1 means serial); results do not
// depend on it.
MetricReport d_lsbd(const EmbeddingSet& set, const OmegaRange& range,
                    Normalization norm = Normalization::off, int threads = 1);

nlohmann::json report_to_json(const MetricReport& report);

// Frequencies attaining the per-subgroup minimum (absolute values, sorted,
// deduplicated; ties within 1e-12 all reported). Empty for zero-variability.
struct OmegaRecovery {
  int k = 0;
  bool degenerate = false;
  std::vector<int> abs_omegas;
};

std::vector<OmegaRecovery> omega_recovery(const EmbeddingSet& set, const OmegaRange& range);

// Mean d_lsbd over several sets scored with one configuration.
struct CollectionReport {
  double d_lsbd = 0.0;
  Normalization normalization = Normalization::off;
  OmegaRange omega_range;
  std::vector<std::pair<std::string, MetricReport>> objects;  // name -> report
};

CollectionReport metric_over_collection(
    const std::vector<std::pair<std::string, const EmbeddingSet*>>& sets,
    const OmegaRange& range, Normalization norm, int threads = 1);

nlohmann::json collection_to_json(const CollectionReport& report);

}  // namespace lsbd::metric
