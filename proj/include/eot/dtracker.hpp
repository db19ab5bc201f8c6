#pragma once

#include <functional>
#include <string_view>

#include "eot/consensus.hpp"
#include "eot/scenario.hpp"
#include "eot/vbfilter.hpp"

namespace eot {

/// One node's belief pair: the state/extent block and the noise block.
struct NodeBelief {
  GIWState state;
  NoiseBelief noise;
};

enum class VariantKind {
  dvbeot,           // consensus fusion, noise covariance estimated
  known_noise,      // consensus fusion, true noise covariance substituted
  no_noise,         // consensus fusion, noise-free measurement model
  non_cooperative,  // each node fuses only its own batch
  centralized,      // all batches pooled at a fusion center
};

struct AlgorithmVariant {
  VariantKind kind = VariantKind::dvbeot;
  Matrix r_true;  // known_noise only

  [[nodiscard]] static AlgorithmVariant dvbeot() { return {VariantKind::dvbeot, {}}; }
  [[nodiscard]] static AlgorithmVariant known_noise(Matrix r) {
    return {VariantKind::known_noise, std::move(r)};
  }
  [[nodiscard]] static AlgorithmVariant no_noise() { return {VariantKind::no_noise, {}}; }
  [[nodiscard]] static AlgorithmVariant non_cooperative() {
    return {VariantKind::non_cooperative, {}};
  }
  [[nodiscard]] static AlgorithmVariant centralized() { return {VariantKind::centralized, {}}; }

  [[nodiscard]] std::string_view name() const;
};

/// Parse "dvbeot" | "known-r" | "no-r" | "non-coop" | "centralized";
/// known-r takes its covariance from the caller afterwards.
[[nodiscard]] AlgorithmVariant variant_from_name(std::string_view name);

struct DistOptions {
  int vb_iters = 20;         // fixed refinement count per scan
  int consensus_rounds = 30; // message exchanges per refinement
  double rho = 0.5;
  double vb_tol = 1e-6;      // early-stop for the centralized/per-node paths
  AlgorithmVariant variant{};
  bool shared_init = false;     // diagnostic: seed every node from the pooled mean
  bool exact_consensus = false; // diagnostic: replace message passing by the exact average
  // Diffuse-prior scales for targets measured in metres. The per-scan extent
  // reset V0 = init_extent_scale * I implies a one-kilometre-radius circle.
  // The noise scale U0 = init_noise_scale * I must sit near the expected total
  // measurement spread (extent plus noise); starting it orders of magnitude
  // below that pins the latents to the raw measurements and the noise estimate
  // never recovers, because a too-confident noise prior is self-reinforcing.
  double init_extent_scale = 1e5;
  double init_noise_scale = 1e4;
};

/// Per-refinement hook; receives the refinement index (1-based) and the
/// current per-node beliefs. Only the consensus variants invoke it.
using IterationObserver = std::function<void(int, const std::vector<NodeBelief>&)>;

/// Time update of one node (the noise block is static).
[[nodiscard]] NodeBelief local_predict(const NodeBelief& belief, const ModelConfig& cfg);

/// One scan of the distributed filter: every node refreshes latent
/// statistics from its own batch, the raw sums travel through consensus
/// averaging, and each node reassembles global statistics (count scaled by
/// the node count, mean and spread from the averaged sums) for its block
/// updates, all anchored at its predicted prior. Nodes with empty batches
/// contribute zero sums but still participate. If the global count
/// reconstructs to zero the predictions are kept.
[[nodiscard]] std::vector<NodeBelief> distributed_vb_update(
    const std::vector<NodeBelief>& predicted, const ScanBatches& batches,
    const SensorNetwork& net, const ModelConfig& cfg, const DistOptions& opts,
    const IterationObserver& observer = {});

/// Whole-pass tracker: position blocks are seeded from the first scan's
/// measurement means, then scans alternate distributed_vb_update and
/// local_predict. posteriors[t][k] is node k's belief after scan t.
struct TrackResult {
  std::vector<std::vector<NodeBelief>> posteriors;
};

using ScanObserver = std::function<void(int scan, int iter, const std::vector<NodeBelief>&)>;

[[nodiscard]] TrackResult track(const MeasurementStream& stream, const SensorNetwork& net,
                                const ModelConfig& cfg, const DistOptions& opts,
                                const ScanObserver& observer = {});

}  // namespace eot
