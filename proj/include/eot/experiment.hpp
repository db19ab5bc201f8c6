#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "eot/dtracker.hpp"
#include "eot/gwmetric.hpp"

namespace eot {

/// Invalid configuration; `field` is the offending key path, e.g.
/// "scenario.rate".
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(std::string field_, const std::string& why)
      : std::runtime_error(field_ + ": " + why), field(std::move(field_)) {}
};

/// Flatten an INI-style stream ("[section]" headers, "key = value" lines,
/// '#' or ';' comments) into "section.key" -> value.
[[nodiscard]] std::map<std::string, std::string> parse_ini(std::istream& is);

struct NetworkConfig {
  int nodes = 20;
  double side = 2.5;
  double radius = 0.8;
  std::string edge_list;  // when non-empty, loaded instead of generated
};

struct ExperimentConfig {
  ScenarioConfig scenario = scenario_defaults("S1");
  NetworkConfig network;
  std::vector<std::string> variant_names = {"dvbeot"};
  int vb_iters = 20;
  int consensus_rounds = 30;
  double rho = 0.5;
  double vb_tol = 1e-6;  // centralized / per-node early stop; 0 disables
  double init_extent_scale = 1e5;  // per-scan extent reset V0 = scale * I
  double init_noise_scale = 1e4;  // initial noise scale U0 = scale * I
  int runs = 1;
  std::uint64_t seed = 1;
  std::string out_dir = "results";
  int threads = 0;  // Monte Carlo workers; 0 picks the hardware count
  bool trace_vb = false;
  int trace_node = 1;  // 1-indexed probe for the per-refinement trace
};

/// Defaults overlaid with the file's sections; unknown keys are rejected.
[[nodiscard]] ExperimentConfig config_from_ini(std::istream& is);
[[nodiscard]] ExperimentConfig load_config(const std::string& path);

/// Field-by-field sanity check; throws ConfigError.
void validate_config(const ExperimentConfig& cfg);

/// One (run, scan, node, variant) estimate next to its error. Written to
/// records.csv with full-precision floats.
struct ResultRecord {
  int run = 0;   // 1-indexed
  int scan = 0;  // 1-indexed
  int node = 0;  // 1-indexed
  std::string variant;
  Vector center;
  Matrix extent;
  Matrix noise;
  double gwd2 = 0.0;
};

struct RgweRow {
  int scan = 0;
  std::string variant;
  double value = 0.0;
};

struct ExperimentResults {
  std::vector<std::string> variants;
  std::vector<RgweRow> rgwe_by_scan;
  std::map<std::string, double> overall_rgwe;
  std::string records_path;
  std::string rgwe_path;
  std::string summary_path;
  std::string trace_path;    // empty unless trace_vb
  std::string truth_path;
  std::string network_path;
};

/// Full Monte-Carlo study: one network and ground-truth pass, `runs`
/// independently seeded measurement streams, every variant tracked over
/// each stream. Writes records.csv, rgwe_by_scan.csv, truth_ellipses.csv,
/// network.txt, summary.json (and vb_trace.csv when tracing) under
/// cfg.out_dir. Identical configurations rewrite identical bytes.
ExperimentResults run_experiment(const ExperimentConfig& cfg);

// Post-processors over a results directory. Each writes one delimited file.
void emit_rgwe_vs_scan(const std::string& results_dir, const std::string& out_path);
void emit_rgwe_vs_vb_iteration(const std::string& results_dir, const std::string& out_path);
void emit_rgwe_vs_consensus_rounds(const std::vector<std::string>& results_dirs,
                                   const std::string& out_path);
void emit_confidence_ellipses(const std::string& results_dir, const std::string& out_path,
                              int run, int node, int scan_stride, double coverage = 0.9);

/// Boundary polyline of the `coverage` confidence region of N(mu, shape)
/// for d == 2: n_points + 1 vertices, the first repeated at the end.
[[nodiscard]] std::vector<Vector> confidence_ellipse(const Vector& mu, const Matrix& shape,
                                                     double coverage, int n_points = 64);

}  // namespace eot
