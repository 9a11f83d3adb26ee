#include "lsbd/synth.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lsbd/rng.hpp"

namespace lsbd::synth {

namespace {

std::vector<int> resolve_omegas(const OracleSpec& spec, int K) {
  if (spec.omegas.empty()) return std::vector<int>(K, 1);
  if (static_cast<int>(spec.omegas.size()) != K)
    throw InvalidInput("frequency count != factor count");
  return spec.omegas;
}

std::vector<double> resolve_radius(const OracleSpec& spec, int K) {
  std::vector<double> r = spec.radius.empty() ? std::vector<double>(K, 1.0) : spec.radius;
  if (static_cast<int>(r.size()) != K) throw InvalidInput("radius count != factor count");
  for (double v : r)
    if (!(v > 0.0)) throw InvalidInput("radius must be positive");
  return r;
}

std::vector<double> resolve_phases(const OracleSpec& spec, int K) {
  std::vector<double> p = spec.phases.empty() ? std::vector<double>(K, 0.0) : spec.phases;
  if (static_cast<int>(p.size()) != K) throw InvalidInput("phase count != factor count");
  return p;
}

// Clean circle rows first, noise afterwards, so the sigma=0 noisy oracle is
// bit-identical to perfect.
Eigen::MatrixXd circle_rows(const GroupGrid& grid, const std::vector<int>& om,
                            const std::vector<double>& rad, const std::vector<double>& ph,
                            bool couple_first_block) {
  const int K = grid.k_count();
  Eigen::MatrixXd data(static_cast<Eigen::Index>(grid.size()), 2 * K);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Tuple t = grid.unflatten(i);
    for (int k = 0; k < K; ++k) {
      double theta = grid.subgroups[k].angle(t[k]);
      if (couple_first_block && k == 0) theta += grid.subgroups[1].angle(t[1]);
      const double a = om[k] * theta + ph[k];
      data(static_cast<Eigen::Index>(i), 2 * k) = rad[k] * std::cos(a);
      data(static_cast<Eigen::Index>(i), 2 * k + 1) = rad[k] * std::sin(a);
    }
  }
  return data;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    std::string field = line.substr(start, pos == std::string::npos ? pos : pos - start);
    const std::size_t a = field.find_first_not_of(" \t\r");
    const std::size_t b = field.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? std::string() : field.substr(a, b - a + 1));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

int parse_int(const std::string& s, std::size_t line_no) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("line " + std::to_string(line_no) + ": cannot parse '" + s +
                     "' as integer");
  return v;
}

double parse_double(const std::string& s, std::size_t line_no) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
    throw ParseError("line " + std::to_string(line_no) + ": cannot parse '" + s +
                     "' as number");
  return v;
}

}  // namespace

const char* oracle_name(OracleKind kind) {
  switch (kind) {
    case OracleKind::perfect: return "perfect";
    case OracleKind::noisy: return "noisy";
    case OracleKind::entangled_linear: return "entangled_linear";
    case OracleKind::sum_coupled: return "sum_coupled";
    case OracleKind::random: return "random";
  }
  throw InvalidInput("unknown oracle kind");
}

OracleKind oracle_from_name(const std::string& name) {
  for (OracleKind k : {OracleKind::perfect, OracleKind::noisy, OracleKind::entangled_linear,
                       OracleKind::sum_coupled, OracleKind::random})
    if (name == oracle_name(k)) return k;
  throw InvalidInput("unknown oracle '" + name + "'");
}

EmbeddingSet generate(const OracleSpec& spec) {
  GroupGrid grid(spec.grid_sizes);
  const int K = grid.k_count();
  const int D = 2 * K;
  if (spec.noise_sigma < 0.0) throw InvalidInput("noise sigma must be >= 0");
  const auto rad = resolve_radius(spec, K);
  const auto ph = resolve_phases(spec, K);

  Eigen::MatrixXd data;
  switch (spec.kind) {
    case OracleKind::perfect:
      data = circle_rows(grid, resolve_omegas(spec, K), rad, ph, false);
      break;
    case OracleKind::noisy: {
      data = circle_rows(grid, resolve_omegas(spec, K), rad, ph, false);
      Rng rng(spec.seed);
      for (Eigen::Index i = 0; i < data.rows(); ++i)
        for (Eigen::Index j = 0; j < data.cols(); ++j)
          data(i, j) += spec.noise_sigma * rng.gaussian();
      break;
    }
    case OracleKind::entangled_linear: {
      if (!spec.mix) throw InvalidInput("entangled_linear needs a mixing matrix");
      if (spec.mix->rows() != D || spec.mix->cols() != D)
        throw InvalidInput("mixing matrix must be DxD");
      Eigen::FullPivLU<Eigen::MatrixXd> lu(*spec.mix);
      if (!lu.isInvertible()) throw InvalidInput("mixing matrix is singular");
      data = circle_rows(grid, resolve_omegas(spec, K), rad, ph, false) * spec.mix->transpose();
      break;
    }
    case OracleKind::sum_coupled:
      if (K != 2) throw UnsupportedSpec("sum_coupled requires K=2");
      data = circle_rows(grid, resolve_omegas(spec, K), rad, ph, true);
      break;
    case OracleKind::random: {
      data.resize(static_cast<Eigen::Index>(grid.size()), D);
      Rng rng(spec.seed);
      for (Eigen::Index i = 0; i < data.rows(); ++i)
        for (Eigen::Index j = 0; j < data.cols(); ++j) data(i, j) = rng.gaussian();
      break;
    }
  }
  return EmbeddingSet{std::move(grid), D, std::move(data)};
}

void write_csv(const EmbeddingSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  out << "# lsbd-grid: ";
  for (int k = 0; k < set.grid.k_count(); ++k)
    out << (k ? "," : "") << set.grid.subgroups[k].size;
  out << "\n# dim: " << set.dim << "\n";
  for (std::size_t i = 0; i < set.grid.size(); ++i) {
    const Tuple t = set.grid.unflatten(i);
    for (std::size_t k = 0; k < t.size(); ++k) out << (k ? "," : "") << t[k];
    for (int j = 0; j < set.dim; ++j)
      out << ',' << format_double(set.data(static_cast<Eigen::Index>(i), j));
    out << '\n';
  }
  if (!out) throw InvalidInput("write to '" + path + "' failed");
}

EmbeddingSet read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  std::string line;

  if (!std::getline(in, line) || line.rfind("# lsbd-grid:", 0) != 0)
    throw ParseError("line 1: expected '# lsbd-grid: N1,...,NK'");
  std::vector<int> sizes;
  for (const auto& f : split_fields(line.substr(12))) sizes.push_back(parse_int(f, 1));

  if (!std::getline(in, line) || line.rfind("# dim:", 0) != 0)
    throw ParseError("line 2: expected '# dim: D'");
  const int dim = parse_int(split_fields(line.substr(6)).at(0), 2);
  if (dim < 1) throw ParseError("line 2: dim must be >= 1");

  GroupGrid grid(sizes);
  const int K = grid.k_count();
  Eigen::MatrixXd data(static_cast<Eigen::Index>(grid.size()), dim);
  std::size_t row = 0;
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    if (fields.size() != static_cast<std::size_t>(K + dim))
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(K + dim) + " fields, got " +
                       std::to_string(fields.size()));
    if (row >= grid.size())
      throw IncompleteGrid("row count " + std::to_string(row + 1) + "+ != " +
                           std::to_string(grid.size()));
    const Tuple expected = grid.unflatten(row);
    for (int k = 0; k < K; ++k)
      if (parse_int(fields[static_cast<std::size_t>(k)], line_no) != expected[k])
        throw ParseError("line " + std::to_string(line_no) +
                         ": grid tuple out of enumeration order");
    for (int j = 0; j < dim; ++j)
      data(static_cast<Eigen::Index>(row), j) =
          parse_double(fields[static_cast<std::size_t>(K + j)], line_no);
    ++row;
  }
  if (row != grid.size())
    throw IncompleteGrid("row count " + std::to_string(row) + " != " +
                         std::to_string(grid.size()));
  return EmbeddingSet{std::move(grid), dim, std::move(data)};
}

}  // namespace lsbd::synth
