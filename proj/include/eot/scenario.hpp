#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "eot/consensus.hpp"
#include "eot/motion.hpp"

namespace eot {

enum class ScatterModel { uniform_ellipse, gaussian };

/// One piece of a constant-speed trajectory. angle == 0 is a straight leg;
/// otherwise a constant-rate turn through `angle` radians over `duration`
/// seconds (turn radius = speed * duration / |angle|).
struct Segment {
  double duration = 0.0;
  double angle = 0.0;
};

/// Everything the simulator needs for one scenario. The two built-in
/// configurations are
///   S1: one extended elliptic object (group scatter, Poisson batch sizes),
///   S2: a rigid formation of point targets with per-target detection,
///       splitting apart after the last turn.
struct ScenarioConfig {
  std::string id = "S1";
  int d = 2;
  double s = 0.25;
  MotionParams motion;

  // trajectory
  double speed = 13.89;  // m/s
  double heading = 0.0;  // initial course, radians
  Vector start_pos;      // d, defaults to the origin
  std::vector<Segment> segments;
  int scan_count = 147;

  // measurement generation
  double rate = 20.0;  // Poisson mean per node and scan (extended object)
  Matrix r_true;       // sensor noise covariance
  double detect_prob = 1.0;  // per-target detection probability (formation)
  ScatterModel scatter = ScatterModel::uniform_ellipse;

  // extended-object geometry (S1-style)
  double semi_major = 170.0;  // m, aligned with the heading
  double semi_minor = 40.0;   // m

  // formation geometry (S2-style)
  int n_targets = 5;
  double spacing = 500.0;     // m between neighbors, abreast of the heading
  double split_angle = 15.0 * 3.14159265358979323846 / 180.0;

  // optional noisy extent evolution for custom studies: the true extent is
  // dragged through a Wishart transition with dof extension_dof instead of
  // following the heading deterministically
  bool stochastic_extent = false;
  std::uint64_t truth_seed = 0;

  /// Filter-side view of the shared dimensions.
  [[nodiscard]] ModelConfig model() const { return ModelConfig{d, s, motion}; }
};

/// Defaults for "S1" or "S2"; "custom" starts from the S1 values.
[[nodiscard]] ScenarioConfig scenario_defaults(const std::string& id);

/// True object summary at one scan. For a formation, `targets` holds the
/// individual positions and `extent` is their spatial covariance scaled by
/// 1/s, which makes the elliptic comparison against filter output
/// well-defined; it is only positive semidefinite while the formation is
/// collinear.
struct GroundTruthScan {
  Vector pos;      // centroid position
  Vector vel;      // centroid velocity
  Matrix extent;   // d x d PSD
  std::vector<Vector> targets;  // empty for an extended object
};

struct GroundTruth {
  std::vector<GroundTruthScan> scans;
};

[[nodiscard]] GroundTruth gen_trajectory_s1(const ScenarioConfig& cfg);
[[nodiscard]] GroundTruth gen_trajectory_s2(const ScenarioConfig& cfg);
[[nodiscard]] GroundTruth gen_trajectory(const ScenarioConfig& cfg);  // dispatch on cfg.id

/// Measurements of one scan, grouped by node.
struct ScanBatches {
  std::vector<std::vector<Vector>> per_node;

  [[nodiscard]] int total() const {
    int n = 0;
    for (const auto& b : per_node) n += static_cast<int>(b.size());
    return n;
  }
};

using MeasurementStream = std::vector<ScanBatches>;

/// Draw one scan. Extended object: per node a Poisson(rate) batch of scatter
/// points (uniform over the extent ellipse, rescaled so the scatter
/// covariance equals s X exactly, or Gaussian N(c, s X)) plus sensor noise.
/// Formation: per node and target one Bernoulli(detect_prob) measurement
/// with sensor noise. One engine per node keeps the draws of different
/// nodes in independent substreams.
[[nodiscard]] ScanBatches sample_scan(const GroundTruthScan& truth, const SensorNetwork& net,
                                      const ScenarioConfig& cfg,
                                      std::vector<std::mt19937_64>& node_rngs);

/// Whole-stream convenience: node k draws from substream derive_seed(seed, k).
[[nodiscard]] MeasurementStream sample_measurements(const GroundTruth& truth,
                                                    const SensorNetwork& net,
                                                    const ScenarioConfig& cfg,
                                                    std::uint64_t seed);

// Line-oriented measurement format: a "T N d" header, then one line
// "scan node y_1 .. y_d" per measurement (scan and node 1-indexed). Floats
// are written with 17 significant digits and round-trip bit-exactly.
void write_measurements(std::ostream& os, const MeasurementStream& stream, int n_nodes, int d);
[[nodiscard]] MeasurementStream read_measurements(std::istream& is);

// Ground-truth lines: "scan pos vel extent-row-major [target coords...]".
void write_ground_truth(std::ostream& os, const GroundTruth& truth);

}  // namespace eot
