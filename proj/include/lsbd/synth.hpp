#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lsbd/group.hpp"

namespace lsbd::synth {

enum class OracleKind { perfect, noisy, entangled_linear, sum_coupled, random };

const char* oracle_name(OracleKind kind);
OracleKind oracle_from_name(const std::string& name);

// Recipe for a synthetic encoder sampled over a full factorial grid.
// Empty omegas/radius/phases mean "default for every subgroup" (1 / 1 / 0).
struct OracleSpec {
  std::vector<int> grid_sizes;
  OracleKind kind = OracleKind::perfect;
  std::vector<int> omegas;
  std::vector<double> radius;
  std::vector<double> phases;
  double noise_sigma = 0.0;
  std::optional<Eigen::MatrixXd> mix;  // entangled_linear only; D x D, invertible
  std::uint64_t seed = 0;
};

// Embeddings of every grid element, rows in grid enumeration order.
struct EmbeddingSet {
  GroupGrid grid;
  int dim = 0;
  Eigen::MatrixXd data;  // grid.size() x dim
};

EmbeddingSet generate(const OracleSpec& spec);

// CSV with two comment headers:
//   # lsbd-grid: N1,N2,...,NK
//   # dim: D
// then one row per grid element, "j1,...,jK,z1,...,zD", floats at 17
// significant digits, rows in enumeration order.
void write_csv(const EmbeddingSet& set, const std::string& path);
EmbeddingSet read_csv(const std::string& path);

}  // namespace lsbd::synth
