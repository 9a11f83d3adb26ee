#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "lsbd/errors.hpp"
#include "lsbd/learner.hpp"
#include "lsbd/metric.hpp"
#include "lsbd/rng.hpp"
#include "lsbd/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& cli_seed) {
  if (cli_seed) return *cli_seed;
  if (const char* env = std::getenv("LSBD_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0' && end != env) return v;
    throw lsbd::InvalidInput("LSBD_SEED is not an unsigned integer");
  }
  return 42;
}

lsbd::OmegaRange parse_range(const std::string& text) {
  const std::size_t colon = text.find(':');
  if (colon == std::string::npos)
    throw lsbd::InvalidInput("frequency range must look like LO:HI");
  try {
    const int lo = std::stoi(text.substr(0, colon));
    const int hi = std::stoi(text.substr(colon + 1));
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw lsbd::InvalidInput("frequency range must look like LO:HI");
  }
}

lsbd::metric::Normalization parse_normalization(const std::string& name) {
  if (name == "off") return lsbd::metric::Normalization::off;
  if (name == "lambda") return lsbd::metric::Normalization::lambda;
  throw lsbd::InvalidInput("normalization must be 'off' or 'lambda'");
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// With --out-dir, outputs keep their file name but move into the directory.
std::string map_out(const std::optional<std::string>& out_dir, const std::string& path) {
  if (!out_dir) return path;
  return (fs::path(*out_dir) / fs::path(path).filename()).string();
}

void write_manifest(const std::string& primary_output, const std::string& command,
                    json parameters, std::uint64_t seed, json inputs, json outputs,
                    double duration) {
  json m;
  m["command"] = command;
  m["tool_version"] = kVersion;
  m["parameters"] = std::move(parameters);
  m["seed"] = seed;
  m["inputs"] = std::move(inputs);
  m["outputs"] = std::move(outputs);
  m["duration_seconds"] = duration;
  const std::string path = primary_output + ".manifest.json";
  std::ofstream out(path);
  if (!out) throw lsbd::InvalidInput("cannot open '" + path + "' for writing");
  out << m.dump(2) << '\n';
}

void print_report_table(const lsbd::metric::MetricReport& report) {
  std::printf("subgroup  omega*  d_k           explained  degenerate\n");
  for (const auto& s : report.per_subgroup) {
    char omega[16];
    if (s.omega_star)
      std::snprintf(omega, sizeof omega, "%d", *s.omega_star);
    else
      std::snprintf(omega, sizeof omega, "-");
    std::printf("%-8d  %-6s  %-12.6g  %-9.4f  %s\n", s.k, omega, s.d_k,
                s.explained_fraction, s.degenerate ? "yes" : "no");
  }
}

// ---- gen ----

struct GenParams {
  std::vector<int> grid;
  std::string oracle = "perfect";
  std::vector<int> omegas;
  std::vector<double> radius;
  std::vector<double> phases;
  double noise = 0.0;
  std::string mix = "orthogonal";
  std::uint64_t seed = 42;
  std::string out;
};

Eigen::MatrixXd derive_mix(const std::string& kind, int dim, std::uint64_t seed) {
  lsbd::Rng rng(seed);
  Eigen::MatrixXd g(dim, dim);
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = rng.gaussian();
  if (kind == "general") return g;
  if (kind != "orthogonal") throw lsbd::InvalidInput("mix must be 'orthogonal' or 'general'");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

int run_gen(const GenParams& p) {
  Timer timer;
  lsbd::synth::OracleSpec spec;
  spec.grid_sizes = p.grid;
  spec.kind = lsbd::synth::oracle_from_name(p.oracle);
  spec.omegas = p.omegas;
  spec.radius = p.radius;
  spec.phases = p.phases;
  spec.noise_sigma = p.noise;
  spec.seed = p.seed;
  if (spec.kind == lsbd::synth::OracleKind::entangled_linear)
    spec.mix = derive_mix(p.mix, 2 * static_cast<int>(p.grid.size()), p.seed);
  const lsbd::synth::EmbeddingSet set = lsbd::synth::generate(spec);
  lsbd::synth::write_csv(set, p.out);

  json params;
  params["grid"] = p.grid;
  params["oracle"] = p.oracle;
  params["omegas"] = p.omegas;
  params["radius"] = p.radius;
  params["phases"] = p.phases;
  params["noise"] = p.noise;
  if (spec.kind == lsbd::synth::OracleKind::entangled_linear)
    params["mix"] = p.mix;
  else
    params["mix"] = nullptr;
  params["out"] = p.out;
  write_manifest(p.out, "gen", params, p.seed, json::array(), json::array({p.out}),
                 timer.seconds());
  std::printf("wrote %s (%zu rows, dim %d)\n", p.out.c_str(), set.grid.size(), set.dim);
  return 0;
}

// ---- metric ----

struct MetricParams {
  std::optional<std::string> in;
  std::optional<std::string> collection;
  std::string omega_range = "-10:10";
  std::string normalize = "off";
  std::optional<std::string> out;
  int threads = 0;
  bool pretty = false;
};

int run_metric(const MetricParams& p) {
  Timer timer;
  const lsbd::OmegaRange range = parse_range(p.omega_range);
  const lsbd::metric::Normalization norm = parse_normalization(p.normalize);
  const int threads =
      p.threads > 0 ? p.threads : static_cast<int>(std::thread::hardware_concurrency());
  if (static_cast<bool>(p.in) == static_cast<bool>(p.collection))
    throw lsbd::InvalidInput("give exactly one of --in or --collection");

  json inputs = json::array();
  json out_json;
  double headline = 0.0;
  std::string out_path;

  if (p.in) {
    const lsbd::synth::EmbeddingSet set = lsbd::synth::read_csv(*p.in);
    const lsbd::metric::MetricReport report = lsbd::metric::d_lsbd(set, range, norm, threads);
    out_json = lsbd::metric::report_to_json(report);
    headline = report.d_lsbd;
    inputs.push_back(*p.in);
    out_path = p.out ? *p.out : *p.in + ".report.json";
    if (p.pretty) print_report_table(report);
  } else {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(*p.collection))
      if (entry.is_regular_file() && entry.path().extension() == ".csv")
        files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw lsbd::InvalidInput("no .csv files in '" + *p.collection + "'");
    std::vector<lsbd::synth::EmbeddingSet> sets;
    sets.reserve(files.size());
    for (const auto& f : files) sets.push_back(lsbd::synth::read_csv(f));
    std::vector<std::pair<std::string, const lsbd::synth::EmbeddingSet*>> named;
    named.reserve(files.size());
    for (std::size_t i = 0; i < files.size(); ++i)
      named.emplace_back(fs::path(files[i]).filename().string(), &sets[i]);
    const lsbd::metric::CollectionReport report =
        lsbd::metric::metric_over_collection(named, range, norm, threads);
    out_json = lsbd::metric::collection_to_json(report);
    headline = report.d_lsbd;
    for (const auto& f : files) inputs.push_back(f);
    out_path = p.out ? *p.out : (fs::path(*p.collection) / "collection_report.json").string();
    if (p.pretty)
      for (const auto& [name, rep] : report.objects) {
        std::printf("%s  d_lsbd=%s\n", name.c_str(), format_g17(rep.d_lsbd).c_str());
        print_report_table(rep);
      }
  }

  {
    std::ofstream out(out_path);
    if (!out) throw lsbd::InvalidInput("cannot open '" + out_path + "' for writing");
    out << out_json.dump(2) << '\n';
  }

  json params;
  params["in"] = p.in ? json(*p.in) : json(nullptr);
  params["collection"] = p.collection ? json(*p.collection) : json(nullptr);
  params["omega_range"] = p.omega_range;
  params["normalize"] = p.normalize;
  params["out"] = out_path;
  params["threads"] = threads;
  write_manifest(out_path, "metric", params, 0, inputs, json::array({out_path}),
                 timer.seconds());
  std::printf("%s\n", format_g17(headline).c_str());
  return 0;
}

// ---- learn ----

struct LearnParams {
  std::vector<int> grid;
  std::optional<std::size_t> pairs;
  std::optional<std::size_t> paths;
  std::size_t path_len = 100;
  int step = 3;
  bool split_pairs = false;
  bool bridge = false;
  int epochs = 1000;
  double learning_rate = 0.1;
  double momentum = 0.9;
  std::string omega_range = "-10:10";
  std::string normalize = "off";
  std::uint64_t seed = 42;
  std::string out = "learned";
  int threads = 0;
  bool pretty = false;
};

int run_learn(const LearnParams& p) {
  Timer timer;
  const lsbd::OmegaRange range = parse_range(p.omega_range);
  const lsbd::metric::Normalization norm = parse_normalization(p.normalize);
  const int threads =
      p.threads > 0 ? p.threads : static_cast<int>(std::thread::hardware_concurrency());
  if (static_cast<bool>(p.pairs) == static_cast<bool>(p.paths))
    throw lsbd::InvalidInput("give exactly one of --pairs or --paths");

  lsbd::GroupGrid grid(p.grid);
  std::vector<lsbd::learner::ConstraintBatch> constraints;
  if (p.pairs) {
    if (*p.pairs == 0) throw lsbd::InvalidInput("no constraints (--pairs 0)");
    constraints = lsbd::learner::make_pairs(grid, *p.pairs, p.seed);
  } else {
    if (*p.paths == 0) throw lsbd::InvalidInput("no constraints (--paths 0)");
    constraints = lsbd::learner::make_paths(grid, *p.paths, p.path_len, p.step, p.seed,
                                            /*connect=*/true, p.split_pairs)
                      .batches;
  }

  const std::size_t covered = lsbd::learner::coverage(grid, constraints);
  if (covered < grid.size())
    std::fprintf(stderr,
                 "warning: only %zu of %zu grid elements are constrained; the rest keep "
                 "their random initialization\n",
                 covered, grid.size());

  std::size_t components = lsbd::learner::covered_component_count(grid, constraints);
  if (components > 1) {
    if (p.bridge) {
      auto links = lsbd::learner::bridge_chain(grid, constraints);
      constraints.insert(constraints.end(), links.begin(), links.end());
      components = lsbd::learner::covered_component_count(grid, constraints);
    } else {
      std::fprintf(stderr,
                   "error: constraint graph has %zu components over the constrained "
                   "elements; re-run with --bridge\n",
                   components);
      return 4;
    }
  }

  lsbd::learner::TrainConfig config;
  config.learning_rate = p.learning_rate;
  config.momentum = p.momentum;
  config.epochs = p.epochs;
  config.seed = p.seed;

  const std::string log_path = p.out + ".log.jsonl";
  const std::string csv_path = p.out + ".csv";
  const std::string report_path = p.out + ".report.json";
  lsbd::learner::TrainResult result;
  {
    std::ofstream log(log_path);
    if (!log) throw lsbd::InvalidInput("cannot open '" + log_path + "' for writing");
    result = lsbd::learner::train(grid, constraints, config, &log);
  }
  lsbd::synth::write_csv(result.embeddings, csv_path);
  const lsbd::metric::MetricReport report =
      lsbd::metric::d_lsbd(result.embeddings, range, norm, threads);
  {
    std::ofstream out(report_path);
    if (!out) throw lsbd::InvalidInput("cannot open '" + report_path + "' for writing");
    out << lsbd::metric::report_to_json(report).dump(2) << '\n';
  }

  json params;
  params["grid"] = p.grid;
  params["mode"] = p.pairs ? "pairs" : "paths";
  params["pairs"] = p.pairs ? json(*p.pairs) : json(nullptr);
  params["paths"] = p.paths ? json(*p.paths) : json(nullptr);
  params["path_len"] = p.path_len;
  params["step"] = p.step;
  params["split_pairs"] = p.split_pairs;
  params["bridge"] = p.bridge;
  params["epochs"] = p.epochs;
  params["learning_rate"] = p.learning_rate;
  params["momentum"] = p.momentum;
  params["omega_range"] = p.omega_range;
  params["normalize"] = p.normalize;
  params["out"] = p.out;
  params["threads"] = threads;
  write_manifest(p.out, "learn", params, p.seed, json::array(),
                 json::array({csv_path, report_path, log_path}), timer.seconds());

  if (p.pretty) {
    std::printf("coverage   %zu / %zu\ncomponents %zu\nfinal_loss %s\nskipped    %zu / %zu\n",
                covered, grid.size(), result.component_count,
                format_g17(result.final_loss).c_str(), result.skipped_steps,
                result.total_steps);
    print_report_table(report);
  }
  std::printf("%s\n", format_g17(report.d_lsbd).c_str());
  return 0;
}

// ---- replay ----

int run_replay(const std::string& manifest_path, const std::optional<std::string>& out_dir) {
  std::ifstream in(manifest_path);
  if (!in) throw lsbd::InvalidInput("cannot open '" + manifest_path + "'");
  json m;
  try {
    m = json::parse(in);
  } catch (const json::parse_error& e) {
    throw lsbd::ParseError(std::string("manifest: ") + e.what());
  }
  if (out_dir) fs::create_directories(*out_dir);

  const std::string command = m.at("command").get<std::string>();
  const json& params = m.at("parameters");
  if (command == "gen") {
    GenParams p;
    p.grid = params.at("grid").get<std::vector<int>>();
    p.oracle = params.at("oracle").get<std::string>();
    p.omegas = params.at("omegas").get<std::vector<int>>();
    p.radius = params.at("radius").get<std::vector<double>>();
    p.phases = params.at("phases").get<std::vector<double>>();
    p.noise = params.at("noise").get<double>();
    if (!params.at("mix").is_null()) p.mix = params.at("mix").get<std::string>();
    p.seed = m.at("seed").get<std::uint64_t>();
    p.out = map_out(out_dir, params.at("out").get<std::string>());
    return run_gen(p);
  }
  if (command == "metric") {
    MetricParams p;
    if (!params.at("in").is_null()) p.in = params.at("in").get<std::string>();
    if (!params.at("collection").is_null())
      p.collection = params.at("collection").get<std::string>();
    p.omega_range = params.at("omega_range").get<std::string>();
    p.normalize = params.at("normalize").get<std::string>();
    p.out = map_out(out_dir, params.at("out").get<std::string>());
    p.threads = params.at("threads").get<int>();
    return run_metric(p);
  }
  if (command == "learn") {
    LearnParams p;
    p.grid = params.at("grid").get<std::vector<int>>();
    if (!params.at("pairs").is_null()) p.pairs = params.at("pairs").get<std::size_t>();
    if (!params.at("paths").is_null()) p.paths = params.at("paths").get<std::size_t>();
    p.path_len = params.at("path_len").get<std::size_t>();
    p.step = params.at("step").get<int>();
    p.split_pairs = params.at("split_pairs").get<bool>();
    p.bridge = params.at("bridge").get<bool>();
    p.epochs = params.at("epochs").get<int>();
    p.learning_rate = params.at("learning_rate").get<double>();
    p.momentum = params.at("momentum").get<double>();
    p.omega_range = params.at("omega_range").get<std::string>();
    p.normalize = params.at("normalize").get<std::string>();
    p.seed = m.at("seed").get<std::uint64_t>();
    p.out = map_out(out_dir, params.at("out").get<std::string>());
    p.threads = params.at("threads").get<int>();
    return run_learn(p);
  }
  throw lsbd::InvalidInput("manifest command '" + command + "' is not replayable");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"torus-equivariance toolkit: synthetic encoders, the d_lsbd score, and "
               "torus embedding learning"};
  app.require_subcommand(1);

  GenParams gen;
  std::optional<std::uint64_t> gen_seed;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic embedding set");
  gen_cmd->add_option("--grid", gen.grid, "cyclic grid sizes, e.g. 16,16")
      ->required()
      ->delimiter(',');
  gen_cmd->add_option("--oracle", gen.oracle,
                      "perfect|noisy|entangled_linear|sum_coupled|random");
  gen_cmd->add_option("--omega", gen.omegas, "per-subgroup frequency (default 1)")
      ->delimiter(',');
  gen_cmd->add_option("--radius", gen.radius, "per-subgroup radius (default 1)")
      ->delimiter(',');
  gen_cmd->add_option("--phase", gen.phases, "per-subgroup phase (default 0)")
      ->delimiter(',');
  gen_cmd->add_option("--noise", gen.noise, "noise sigma for the noisy oracle");
  gen_cmd->add_option("--mix", gen.mix, "entangling matrix kind: orthogonal|general");
  gen_cmd->add_option("--seed", gen_seed, "RNG seed (default $LSBD_SEED, then 42)");
  gen_cmd->add_option("--out", gen.out, "output CSV path")->required();

  MetricParams met;
  CLI::App* met_cmd = app.add_subcommand("metric", "score embeddings");
  met_cmd->add_option("--in", met.in, "embedding CSV");
  met_cmd->add_option("--collection", met.collection, "directory of embedding CSVs");
  met_cmd->add_option("--omega-range", met.omega_range, "frequency search range LO:HI");
  met_cmd->add_option("--normalize", met.normalize, "off|lambda");
  met_cmd->add_option("--out", met.out, "report path (default <in>.report.json)");
  met_cmd->add_option("--threads", met.threads, "worker cap (default: all cores)");
  met_cmd->add_flag("--pretty", met.pretty, "print a per-subgroup table");

  LearnParams lrn;
  std::optional<std::uint64_t> lrn_seed;
  CLI::App* lrn_cmd = app.add_subcommand("learn", "fit torus embeddings to constraints");
  lrn_cmd->add_option("--grid", lrn.grid, "cyclic grid sizes, e.g. 16,16")
      ->required()
      ->delimiter(',');
  auto* pairs_opt = lrn_cmd->add_option("--pairs", lrn.pairs, "number of random pairs");
  auto* paths_opt =
      lrn_cmd->add_option("--paths", lrn.paths, "number of random walks");
  pairs_opt->excludes(paths_opt);
  lrn_cmd->add_option("--path-len", lrn.path_len, "moves per walk (default 100)");
  lrn_cmd->add_option("--step", lrn.step, "walk step in grid indices (default 3)");
  lrn_cmd->add_flag("--split-pairs", lrn.split_pairs,
                    "one pair per walk move instead of one batch per walk");
  lrn_cmd->add_flag("--bridge", lrn.bridge,
                    "chain disconnected constraint components together");
  lrn_cmd->add_option("--epochs", lrn.epochs, "training epochs (default 1000)");
  lrn_cmd->add_option("--lr", lrn.learning_rate, "learning rate (default 0.1)");
  lrn_cmd->add_option("--momentum", lrn.momentum, "momentum (default 0.9)");
  lrn_cmd->add_option("--omega-range", lrn.omega_range, "frequency search range LO:HI");
  lrn_cmd->add_option("--normalize", lrn.normalize, "off|lambda");
  lrn_cmd->add_option("--seed", lrn_seed, "RNG seed (default $LSBD_SEED, then 42)");
  lrn_cmd->add_option("--out", lrn.out, "output prefix (default 'learned')");
  lrn_cmd->add_option("--threads", lrn.threads, "worker cap (default: all cores)");
  lrn_cmd->add_flag("--pretty", lrn.pretty, "print a run summary table");

  std::string replay_manifest;
  std::optional<std::string> replay_out_dir;
  CLI::App* rep_cmd = app.add_subcommand("replay", "re-run a recorded manifest");
  rep_cmd->add_option("manifest", replay_manifest, "manifest JSON path")->required();
  rep_cmd->add_option("--out-dir", replay_out_dir, "redirect outputs into this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(gen_cmd)) {
      gen.seed = resolve_seed(gen_seed);
      return run_gen(gen);
    }
    if (app.got_subcommand(met_cmd)) return run_metric(met);
    if (app.got_subcommand(lrn_cmd)) {
      lrn.seed = resolve_seed(lrn_seed);
      return run_learn(lrn);
    }
    if (app.got_subcommand(rep_cmd)) return run_replay(replay_manifest, replay_out_dir);
  } catch (const lsbd::IncompleteGrid& e) {
    std::fprintf(stderr, "error: incomplete factorial grid: %s\n", e.what());
    return 3;
  } catch (const lsbd::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const lsbd::UnsupportedSpec& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const lsbd::InvalidInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
