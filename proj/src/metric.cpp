#include "lsbd/metric.hpp"

#include <algorithm>
#include <atomic>
#include <cfloat>
#include <cmath>
#include <functional>
#include <thread>

namespace lsbd::metric {

namespace {

void run_tasks(std::vector<std::function<void()>>& tasks, int threads) {
  if (threads <= 1 || tasks.size() <= 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
      tasks[i]();
  };
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(threads), tasks.size());
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

Eigen::MatrixXd aligned_rows(const EmbeddingSet& set, const RepParams& rep) {
  const int K = set.grid.k_count();
  if (set.dim != 2 * K) throw InvalidInput("representation alignment needs dim == 2K");
  Eigen::MatrixXd aligned(set.data.rows(), set.data.cols());
  for (std::size_t i = 0; i < set.grid.size(); ++i) {
    const Tuple inv = set.grid.inverse(set.grid.unflatten(i));
    aligned.row(static_cast<Eigen::Index>(i)) =
        direct_sum_apply(rep, set.grid, inv, set.data.row(static_cast<Eigen::Index>(i)))
            .transpose();
  }
  return aligned;
}

void sign_fix(Eigen::VectorXd& v) {
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > best) {
      best = a;
      arg = i;
    }
  }
  if (v[arg] < 0.0) v = -v;
}

// Lexicographic on entries rounded to 12 decimals, raw entries as tiebreak.
// Rounding keeps the order independent of ~1e-16 arithmetic residue.
bool rounded_lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double ra = std::round(a[i] * 1e12) / 1e12;
    const double rb = std::round(b[i] * 1e12) / 1e12;
    if (ra != rb) return ra < rb;
  }
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return a[i] < b[i];
  return false;
}

// Deterministic orthonormal basis for one eigenvalue cluster. For a repeated
// eigenvalue the solver's vectors are an arbitrary frame of the eigenspace;
// any orthonormal basis of that space is equally valid, so pick the one the
// coordinate axes induce: Gram-Schmidt the axis projections through the
// cluster projector, sign-fix, sort. Depends only on the subspace.
std::vector<Eigen::VectorXd> canonical_cluster_basis(const Eigen::MatrixXd& cluster_vecs) {
  const Eigen::Index dim = cluster_vecs.rows();
  const Eigen::Index want = cluster_vecs.cols();
  const Eigen::MatrixXd projector = cluster_vecs * cluster_vecs.transpose();
  std::vector<Eigen::VectorXd> basis;
  for (Eigen::Index ax = 0; ax < dim && static_cast<Eigen::Index>(basis.size()) < want; ++ax) {
    Eigen::VectorXd c = projector.col(ax);
    for (const auto& u : basis) c -= u.dot(c) * u;
    const double n = c.norm();
    if (n > 1e-6) basis.push_back(c / n);
  }
  // Spanning fallback (axis projections can in principle all collapse).
  for (Eigen::Index j = 0; j < want && static_cast<Eigen::Index>(basis.size()) < want; ++j) {
    Eigen::VectorXd c = cluster_vecs.col(j);
    for (const auto& u : basis) c -= u.dot(c) * u;
    const double n = c.norm();
    if (n > 1e-12) basis.push_back(c / n);
  }
  for (auto& v : basis) sign_fix(v);
  std::sort(basis.begin(), basis.end(), rounded_lex_less);
  return basis;
}

struct SubgroupWork {
  SubgroupReport report;
  double d_k_raw = 0.0;
};

SubgroupWork score_subgroup(const EmbeddingSet& set, int k, const OmegaRange& range,
                            Normalization norm) {
  SubgroupWork w;
  w.report.k = k;
  const CenteredOrbitSet centered = center_subgroup(set, k);
  ProjectedOrbitSet projected;
  try {
    projected = pca_project(centered);
  } catch (const DegenerateProjection&) {
    w.report.degenerate = true;
    w.report.d_k = 0.0;
    w.report.explained_fraction = 0.0;
    if (norm == Normalization::lambda) w.report.lambda_k = 1.0;
    return w;
  }
  w.report.degenerate = projected.rank_deficient;
  w.report.explained_fraction = projected.explained_fraction;

  double lambda = 1.0;
  if (norm == Normalization::lambda) {
    const double msn =
        projected.coords.squaredNorm() / static_cast<double>(projected.coords.rows());
    lambda = msn > 0.0 ? msn : 1.0;
    w.report.lambda_k = lambda;
  }

  double best = std::numeric_limits<double>::infinity();
  for (int omega = range.lo; omega <= range.hi; ++omega) {
    const double value = dispersion_for_omega(projected, set.grid, omega) / lambda;
    w.report.dispersion_curve[omega] = value;
    best = std::min(best, value);
  }
  w.report.d_k = best;
  w.d_k_raw = best;

  int star = 0;
  bool have = false;
  for (const auto& [omega, value] : w.report.dispersion_curve) {
    if (value > best + 1e-12) continue;
    if (!have || std::abs(omega) < std::abs(star) ||
        (std::abs(omega) == std::abs(star) && omega > star)) {
      star = omega;
      have = true;
    }
  }
  w.report.omega_star = star;
  return w;
}

nlohmann::json subgroup_to_json(const SubgroupReport& s) {
  nlohmann::json j;
  j["k"] = s.k;
  j["degenerate"] = s.degenerate;
  j["d_k"] = s.d_k;
  j["explained_fraction"] = s.explained_fraction;
  if (s.omega_star) j["omega_star"] = *s.omega_star;
  if (s.lambda_k) j["lambda_k"] = *s.lambda_k;
  nlohmann::json curve = nlohmann::json::object();
  for (const auto& [omega, value] : s.dispersion_curve)
    curve[std::to_string(omega)] = value;
  j["dispersion_curve"] = std::move(curve);
  return j;
}

}  // namespace

SimpleMetricResult simple_metric(const EmbeddingSet& set, const RepParams& rep) {
  const Eigen::MatrixXd aligned = aligned_rows(set, rep);
  SimpleMetricResult r;
  r.m_star = aligned.colwise().mean().transpose();
  r.value = (aligned.rowwise() - r.m_star.transpose()).rowwise().squaredNorm().mean();
  return r;
}

double pairwise_metric(const EmbeddingSet& set, const RepParams& rep) {
  const Eigen::MatrixXd aligned = aligned_rows(set, rep);
  const Eigen::Index n = aligned.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      total += (aligned.row(i) - aligned.row(j)).squaredNorm();
  return total / (2.0 * static_cast<double>(n) * static_cast<double>(n));
}

CenteredOrbitSet center_subgroup(const EmbeddingSet& set, int k) {
  const int K = set.grid.k_count();
  if (k < 0 || k >= K) throw InvalidInput("subgroup index out of range");
  CenteredOrbitSet out;
  out.k = k;
  out.source_msn = set.data.rows() > 0
                       ? set.data.squaredNorm() / static_cast<double>(set.data.rows())
                       : 0.0;

  // Orbit id: the element's tuple with coordinate k zeroed.
  const std::size_t n = set.grid.size();
  std::vector<std::size_t> orbit(n);
  const std::size_t orbit_count = n / static_cast<std::size_t>(set.grid.subgroups[k].size);
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(orbit_count), set.dim);
  std::vector<Eigen::Index> orbit_slot(n, -1);
  Eigen::Index next_slot = 0;
  std::vector<double> counts(orbit_count, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    Tuple t = set.grid.unflatten(i);
    t[static_cast<std::size_t>(k)] = 0;
    const std::size_t oid = set.grid.flatten(t);
    if (orbit_slot[oid] < 0) orbit_slot[oid] = next_slot++;
    orbit[i] = static_cast<std::size_t>(orbit_slot[oid]);
    sums.row(orbit_slot[oid]) += set.data.row(static_cast<Eigen::Index>(i));
    counts[orbit[i]] += 1.0;
  }
  out.vectors = set.data;
  for (std::size_t i = 0; i < n; ++i)
    out.vectors.row(static_cast<Eigen::Index>(i)) -=
        sums.row(static_cast<Eigen::Index>(orbit[i])) / counts[orbit[i]];
  return out;
}

ProjectedOrbitSet pca_project(const CenteredOrbitSet& centered) {
  if (centered.vectors.cols() < 2) throw InvalidInput("projection needs dim >= 2");
  if (centered.vectors.rows() < 1) throw InvalidInput("projection needs at least one row");
  const Eigen::Index dim = centered.vectors.cols();
  const double n = static_cast<double>(centered.vectors.rows());

  Eigen::MatrixXd z = centered.vectors;
  const Eigen::RowVectorXd mean = z.colwise().mean();
  z.rowwise() -= mean;  // orbit centering already implies this; make it exact

  const Eigen::MatrixXd cov = z.transpose() * z / n;
  if (cov.trace() <= 1e-24 * centered.source_msn)
    throw DegenerateProjection("subgroup-" + std::to_string(centered.k) +
                               " variability is zero");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw DegenerateProjection("eigen decomposition failed");

  // Descending order, round-off negatives clamped (covariance is PSD).
  Eigen::VectorXd values(dim);
  Eigen::MatrixXd vectors(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    values[i] = std::max(solver.eigenvalues()[dim - 1 - i], 0.0);
    vectors.col(i) = solver.eigenvectors().col(dim - 1 - i);
  }

  // Canonicalize cluster by cluster so repeated eigenvalues cannot leak the
  // solver's arbitrary in-cluster frame into the result.
  const double tie_tol = 1e-9 * std::max(values[0], DBL_MIN);
  Eigen::MatrixXd canonical(dim, dim);
  Eigen::Index start = 0;
  while (start < dim) {
    Eigen::Index stop = start + 1;
    while (stop < dim && values[start] - values[stop] <= tie_tol) ++stop;
    if (stop - start == 1) {
      Eigen::VectorXd v = vectors.col(start);
      sign_fix(v);
      canonical.col(start) = v;
    } else {
      const auto basis = canonical_cluster_basis(vectors.middleCols(start, stop - start));
      if (static_cast<Eigen::Index>(basis.size()) != stop - start)
        throw DegenerateProjection("eigenspace basis construction failed");
      for (Eigen::Index j = 0; j < stop - start; ++j)
        canonical.col(start + j) = basis[static_cast<std::size_t>(j)];
    }
    start = stop;
  }

  ProjectedOrbitSet out;
  out.k = centered.k;
  out.basis = canonical.leftCols(2);
  out.coords = z * out.basis;
  out.eigenvalues = values;
  const double total = values.sum();
  out.explained_fraction = total > 0.0 ? (values[0] + values[1]) / total : 0.0;
  out.rank_deficient = values[1] <= 1e-12 * std::max(values[0], DBL_MIN);
  return out;
}

double dispersion_for_omega(const ProjectedOrbitSet& projected, const GroupGrid& grid,
                            int omega) {
  const int k = projected.k;
  if (k < 0 || k >= grid.k_count()) throw InvalidInput("subgroup index out of range");
  const CyclicGrid& sub = grid.subgroups[static_cast<std::size_t>(k)];
  if (static_cast<std::size_t>(projected.coords.rows()) != grid.size())
    throw InvalidInput("row count != grid size");

  std::vector<Eigen::Matrix2d> rot(static_cast<std::size_t>(sub.size));
  for (int j = 0; j < sub.size; ++j)
    rot[static_cast<std::size_t>(j)] = rotation_matrix(omega * sub.angle(sub.inverse(j)));

  Eigen::MatrixXd aligned(projected.coords.rows(), 2);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const int j = grid.unflatten(i)[static_cast<std::size_t>(k)];
    aligned.row(static_cast<Eigen::Index>(i)) =
        (rot[static_cast<std::size_t>(j)] *
         projected.coords.row(static_cast<Eigen::Index>(i)).transpose())
            .transpose();
  }
  const Eigen::RowVector2d mean = aligned.colwise().mean();
  return (aligned.rowwise() - mean).rowwise().squaredNorm().mean();
}

MetricReport d_lsbd(const EmbeddingSet& set, const OmegaRange& range, Normalization norm,
                    int threads) {
  if (set.dim < 2) throw InvalidInput("metric needs dim >= 2");
  if (set.data.rows() != static_cast<Eigen::Index>(set.grid.size()))
    throw InvalidInput("row count != grid size");
  const int K = set.grid.k_count();

  MetricReport report;
  report.normalization = norm;
  report.omega_range = range;
  report.per_subgroup.resize(static_cast<std::size_t>(K));

  std::vector<std::function<void()>> tasks;
  tasks.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k)
    tasks.push_back([&, k] {
      report.per_subgroup[static_cast<std::size_t>(k)] =
          score_subgroup(set, k, range, norm).report;
    });
  run_tasks(tasks, threads);

  double total = 0.0;
  for (const auto& s : report.per_subgroup) total += s.d_k;
  report.d_lsbd = total / static_cast<double>(K);
  return report;
}

nlohmann::json report_to_json(const MetricReport& report) {
  nlohmann::json j;
  j["d_lsbd"] = report.d_lsbd;
  j["normalization"] = report.normalization == Normalization::lambda ? "lambda" : "off";
  j["omega_range"] = nlohmann::json::array({report.omega_range.lo, report.omega_range.hi});
  nlohmann::json subs = nlohmann::json::array();
  for (const auto& s : report.per_subgroup) subs.push_back(subgroup_to_json(s));
  j["per_subgroup"] = std::move(subs);
  return j;
}

std::vector<OmegaRecovery> omega_recovery(const EmbeddingSet& set, const OmegaRange& range) {
  const MetricReport report = d_lsbd(set, range, Normalization::off, 1);
  std::vector<OmegaRecovery> out;
  for (const auto& s : report.per_subgroup) {
    OmegaRecovery rec;
    rec.k = s.k;
    rec.degenerate = !s.omega_star.has_value();
    if (s.omega_star) {
      for (const auto& [omega, value] : s.dispersion_curve)
        if (value <= s.d_k + 1e-12) rec.abs_omegas.push_back(std::abs(omega));
      std::sort(rec.abs_omegas.begin(), rec.abs_omegas.end());
      rec.abs_omegas.erase(std::unique(rec.abs_omegas.begin(), rec.abs_omegas.end()),
                           rec.abs_omegas.end());
    }
    out.push_back(std::move(rec));
  }
  return out;
}

CollectionReport metric_over_collection(
    const std::vector<std::pair<std::string, const EmbeddingSet*>>& sets,
    const OmegaRange& range, Normalization norm, int threads) {
  if (sets.empty()) throw InvalidInput("collection is empty");
  CollectionReport out;
  out.normalization = norm;
  out.omega_range = range;
  out.objects.resize(sets.size());

  std::vector<std::function<void()>> tasks;
  tasks.reserve(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i)
    tasks.push_back([&, i] {
      out.objects[i] = {sets[i].first, d_lsbd(*sets[i].second, range, norm, 1)};
    });
  run_tasks(tasks, threads);

  double total = 0.0;
  for (const auto& [name, report] : out.objects) total += report.d_lsbd;
  out.d_lsbd = total / static_cast<double>(out.objects.size());
  return out;
}

nlohmann::json collection_to_json(const CollectionReport& report) {
  nlohmann::json j;
  j["d_lsbd"] = report.d_lsbd;
  j["normalization"] = report.normalization == Normalization::lambda ? "lambda" : "off";
  j["omega_range"] = nlohmann::json::array({report.omega_range.lo, report.omega_range.hi});
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& [name, rep] : report.objects) {
    nlohmann::json o;
    o["name"] = name;
    o["report"] = report_to_json(rep);
    objects.push_back(std::move(o));
  }
  j["objects"] = std::move(objects);
  return j;
}

}  // namespace lsbd::metric
