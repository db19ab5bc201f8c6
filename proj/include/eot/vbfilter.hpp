#pragma once

#include <span>
#include <vector>

#include "eot/matstat.hpp"
#include "eot/motion.hpp"

namespace eot {

/// Gaussian inverse-Wishart belief over kinematic state and object extent:
/// x | X ~ N(m, P (x) X), X ~ IW(nu, V). P is the per-coordinate kinematic
/// factor, shared across coordinates; V is the d x d extent scale.
struct GIWState {
  Vector m;           // length 3 d
  Eigen::Matrix3d P;  // kinematic covariance factor
  double nu = 0.0;    // extent dof, must stay > d + 1
  Matrix V;           // extent scale

  [[nodiscard]] int dim() const { return static_cast<int>(V.rows()); }
  [[nodiscard]] Vector position() const { return m.head(V.rows()); }
  [[nodiscard]] Matrix extent_mean() const;       // V / (nu - d - 1)
  [[nodiscard]] Matrix extent_precision() const;  // nu V^{-1}
};

/// Inverse-Wishart belief over the sensor noise covariance R.
struct NoiseBelief {
  double upsilon = 0.0;
  Matrix U;

  [[nodiscard]] Matrix mean() const;            // U / (upsilon - d - 1)
  [[nodiscard]] Matrix precision_mean() const;  // upsilon U^{-1}
};

/// Gaussian posterior over one measurement's noise-free source point.
struct LatentPosterior {
  Vector mu;
  Matrix Sigma;
};

/// Scan-level statistics of the latent posteriors. `S` is the latent spread
/// already normalized by `count`; `residual` is the unnormalized sum of
/// expected measurement-minus-latent outer products.
struct SufficientStats {
  double count = 0.0;
  Vector zbar;
  Matrix S;
  Matrix residual;
};

/// Time update. Kinematics follow build_F/build_Q per coordinate; the extent
/// dof decays toward d + 3 with time constant extension_decay while the
/// extent mean is left unchanged. Throws std::domain_error if nu <= d + 1.
[[nodiscard]] GIWState predict(const GIWState& prior, const ModelConfig& cfg);

struct LatentUpdate {
  std::vector<LatentPosterior> latents;
  SufficientStats stats;
};

/// Latent source-point posteriors for one batch. All latents share the
/// covariance (noise_prec + extent_prec/s)^{-1}; each mean blends the
/// measurement with the current position estimate, weighted by the two
/// precisions. `state` and `noise` are the current iterates.
[[nodiscard]] LatentUpdate update_latents(std::span<const Vector> batch, const GIWState& state,
                                          const NoiseBelief& noise, const ModelConfig& cfg);

/// Same with a fixed noise precision instead of an estimated one.
[[nodiscard]] LatentUpdate update_latents_known_noise(std::span<const Vector> batch,
                                                      const GIWState& state,
                                                      const Matrix& noise_precision,
                                                      const ModelConfig& cfg);

/// Vanishing-noise limit: latents coincide with the measurements and carry
/// zero covariance, so the residual sum vanishes.
[[nodiscard]] LatentUpdate update_latents_exact(std::span<const Vector> batch, int d);

/// Statistics of update_latents* without materializing the per-measurement
/// list (the hot path for large batches).
[[nodiscard]] SufficientStats latent_stats(std::span<const Vector> batch, const GIWState& state,
                                           const Matrix& noise_precision, const ModelConfig& cfg);
[[nodiscard]] SufficientStats latent_stats_exact(std::span<const Vector> batch, int d);

/// Measurement update of the state/extent block given latent statistics,
/// anchored at the predicted prior. count == 0 returns the prior unchanged.
[[nodiscard]] GIWState update_state(const GIWState& prior_pred, const SufficientStats& stats,
                                    const ModelConfig& cfg);

/// Measurement update of the noise block: dof grows by the measurement count
/// and the scale absorbs the residual sum.
[[nodiscard]] NoiseBelief update_noise(const NoiseBelief& prior, const SufficientStats& stats);

enum class NoiseMode {
  estimate,  // noise covariance treated as unknown and estimated
  known,     // fixed noise covariance substituted for the estimate
  none,      // noise-free model; latents equal the measurements
};

struct VbOptions {
  int max_iters = 20;
  double tol = 1e-6;  // relative parameter change; 0 disables early stop
  bool warm_start_extent = false;  // start the extent block from the prediction
  bool record_trace = false;       // keep per-iteration deltas in diagnostics
  NoiseMode noise_mode = NoiseMode::estimate;
  Matrix known_noise;  // R when noise_mode == known
  // Scale of the per-scan extent reset V0 = init_extent_scale * I. The
  // default is diffuse for targets measured in metres: the implied extent
  // mean is a circle of one kilometre radius.
  double init_extent_scale = 1e5;
};

struct VbDiagnostics {
  int iterations = 0;
  bool converged = false;
  std::vector<double> deltas;  // filled when record_trace
};

struct VbResult {
  GIWState state;
  NoiseBelief noise;
  VbDiagnostics diag;
};

/// Full scan update by coordinate ascent: alternate latent refresh and the
/// state/extent and noise block updates until the parameter change falls
/// below tol or max_iters is reached. The iterate starts from the batch
/// mean position, the predicted kinematic factor, a reset extent block
/// (V = init_extent_scale I, nu = d + 1.1 unless warm_start_extent) and the
/// carried-over noise belief. An empty batch returns the inputs unchanged.
[[nodiscard]] VbResult vb_measurement_update(const GIWState& pred, const NoiseBelief& noise_prior,
                                             std::span<const Vector> batch,
                                             const ModelConfig& cfg, const VbOptions& opts);

}  // namespace eot
