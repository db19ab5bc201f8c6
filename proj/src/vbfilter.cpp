#include "eot/vbfilter.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace eot {

namespace {

int checked_dim(const GIWState& st, const char* who) {
  const int d = st.dim();
  if (d < 1 || st.V.cols() != d)
    throw std::invalid_argument(std::string(who) + ": extent scale must be square");
  if (st.m.size() != 3 * d)
    throw std::invalid_argument(std::string(who) + ": state length must be 3 d");
  return d;
}

void check_batch(std::span<const Vector> batch, int d, const char* who) {
  for (const auto& y : batch)
    if (y.size() != d) throw std::invalid_argument(std::string(who) + ": measurement dimension mismatch");
}

double rel_change(const Vector& prev, const Vector& next) {
  return (next - prev).norm() / std::max(1.0, prev.norm());
}

double rel_change(const Matrix& prev, const Matrix& next) {
  return (next - prev).norm() / std::max(1.0, prev.norm());
}

/// Shared per-batch quantities of the latent refresh: the common posterior
/// covariance and the affine map y -> mu.
struct LatentContext {
  Matrix sigma;
  Matrix gain;    // sigma * noise_precision
  Vector offset;  // sigma * (extent_precision / s) * current position
};

LatentContext make_latent_context(const GIWState& state, const Matrix& noise_precision,
                                  const ModelConfig& cfg) {
  const int d = state.dim();
  if (noise_precision.rows() != d || noise_precision.cols() != d)
    throw std::invalid_argument("update_latents: noise precision dimension mismatch");
  const Matrix scatter_prec = state.extent_precision() / cfg.s;
  LatentContext ctx;
  ctx.sigma = spd_inverse(noise_precision + scatter_prec);
  ctx.gain = ctx.sigma * noise_precision;
  ctx.offset = ctx.sigma * (scatter_prec * state.position());
  return ctx;
}

SufficientStats zero_stats(int d) {
  SufficientStats st;
  st.count = 0.0;
  st.zbar = Vector::Zero(d);
  st.S = Matrix::Zero(d, d);
  st.residual = Matrix::Zero(d, d);
  return st;
}

template <typename Sink>
SufficientStats accumulate_latents(std::span<const Vector> batch, int d, const LatentContext& ctx,
                                   Sink&& sink) {
  SufficientStats st = zero_stats(d);
  st.count = static_cast<double>(batch.size());
  if (batch.empty()) return st;
  Vector mu(d), resid(d);
  Matrix second = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    mu.noalias() = ctx.gain * batch[i];
    mu += ctx.offset;
    resid = batch[i] - mu;
    st.zbar += mu;
    second.noalias() += mu * mu.transpose();
    st.residual.noalias() += resid * resid.transpose();
    sink(i, mu);
  }
  st.zbar /= st.count;
  st.S = symmetrize(ctx.sigma + second / st.count - st.zbar * st.zbar.transpose());
  st.residual = symmetrize(st.residual + st.count * ctx.sigma);
  return st;
}

}  // namespace

Matrix GIWState::extent_mean() const {
  const int d = dim();
  if (!(nu > d + 1)) throw std::domain_error("extent_mean: dof must exceed d + 1");
  return V / (nu - d - 1);
}

Matrix GIWState::extent_precision() const { return nu * spd_inverse(V); }

Matrix NoiseBelief::mean() const {
  const int d = static_cast<int>(U.rows());
  if (!(upsilon > d + 1)) throw std::domain_error("NoiseBelief::mean: dof must exceed d + 1");
  return U / (upsilon - d - 1);
}

Matrix NoiseBelief::precision_mean() const { return upsilon * spd_inverse(U); }

GIWState predict(const GIWState& prior, const ModelConfig& cfg) {
  const int d = checked_dim(prior, "predict");
  if (d != cfg.d) throw std::invalid_argument("predict: config dimension mismatch");
  if (!(prior.nu > d + 1)) throw std::domain_error("predict: extent dof must exceed d + 1");
  const Eigen::Matrix3d f = build_F(cfg.motion);
  GIWState out;
  out.m = kron_apply(f, prior.m, d);
  out.P = f * prior.P * f.transpose() + build_Q(cfg.motion);
  out.P = 0.5 * (out.P + out.P.transpose());
  const double decay = std::exp(-cfg.motion.scan_time / cfg.motion.extension_decay);
  out.nu = d + 3 + decay * (prior.nu - d - 3);
  out.V = ((out.nu - d - 1) / (prior.nu - d - 1)) * prior.V;
  return out;
}

LatentUpdate update_latents(std::span<const Vector> batch, const GIWState& state,
                            const NoiseBelief& noise, const ModelConfig& cfg) {
  return update_latents_known_noise(batch, state, noise.precision_mean(), cfg);
}

LatentUpdate update_latents_known_noise(std::span<const Vector> batch, const GIWState& state,
                                        const Matrix& noise_precision, const ModelConfig& cfg) {
  const int d = checked_dim(state, "update_latents");
  check_batch(batch, d, "update_latents");
  LatentUpdate out;
  if (batch.empty()) {
    out.stats = zero_stats(d);
    return out;
  }
  const LatentContext ctx = make_latent_context(state, noise_precision, cfg);
  out.latents.resize(batch.size());
  out.stats = accumulate_latents(batch, d, ctx, [&](std::size_t i, const Vector& mu) {
    out.latents[i] = LatentPosterior{mu, ctx.sigma};
  });
  return out;
}

LatentUpdate update_latents_exact(std::span<const Vector> batch, int d) {
  check_batch(batch, d, "update_latents_exact");
  LatentUpdate out;
  out.stats = latent_stats_exact(batch, d);
  out.latents.reserve(batch.size());
  const Matrix zero = Matrix::Zero(d, d);
  for (const auto& y : batch) out.latents.push_back(LatentPosterior{y, zero});
  return out;
}

SufficientStats latent_stats(std::span<const Vector> batch, const GIWState& state,
                             const Matrix& noise_precision, const ModelConfig& cfg) {
  const int d = checked_dim(state, "latent_stats");
  check_batch(batch, d, "latent_stats");
  if (batch.empty()) return zero_stats(d);
  const LatentContext ctx = make_latent_context(state, noise_precision, cfg);
  return accumulate_latents(batch, d, ctx, [](std::size_t, const Vector&) {});
}

SufficientStats latent_stats_exact(std::span<const Vector> batch, int d) {
  check_batch(batch, d, "latent_stats_exact");
  SufficientStats st = zero_stats(d);
  st.count = static_cast<double>(batch.size());
  if (batch.empty()) return st;
  Matrix second = Matrix::Zero(d, d);
  for (const auto& y : batch) {
    st.zbar += y;
    second.noalias() += y * y.transpose();
  }
  st.zbar /= st.count;
  st.S = symmetrize(second / st.count - st.zbar * st.zbar.transpose());
  return st;
}

GIWState update_state(const GIWState& prior_pred, const SufficientStats& stats,
                      const ModelConfig& cfg) {
  const int d = checked_dim(prior_pred, "update_state");
  if (stats.count <= 0.0) return prior_pred;
  if (stats.zbar.size() != d || stats.S.rows() != d)
    throw std::invalid_argument("update_state: statistics dimension mismatch");
  const double b = cfg.s / stats.count + prior_pred.P(0, 0);
  const Eigen::Vector3d w = prior_pred.P.col(0) / b;
  const Vector innovation = stats.zbar - prior_pred.position();
  GIWState out;
  out.m = prior_pred.m + kron_lift(w, innovation);
  out.P = prior_pred.P - b * w * w.transpose();
  out.P = 0.5 * (out.P + out.P.transpose());
  out.nu = prior_pred.nu + stats.count;
  out.V = symmetrize(prior_pred.V + (stats.count / cfg.s) * stats.S +
                     innovation * innovation.transpose() / b);
  return out;
}

NoiseBelief update_noise(const NoiseBelief& prior, const SufficientStats& stats) {
  if (stats.count <= 0.0) return prior;
  if (stats.residual.rows() != prior.U.rows())
    throw std::invalid_argument("update_noise: residual dimension mismatch");
  return NoiseBelief{prior.upsilon + stats.count, symmetrize(prior.U + stats.residual)};
}

VbResult vb_measurement_update(const GIWState& pred, const NoiseBelief& noise_prior,
                               std::span<const Vector> batch, const ModelConfig& cfg,
                               const VbOptions& opts) {
  const int d = checked_dim(pred, "vb_measurement_update");
  check_batch(batch, d, "vb_measurement_update");
  VbResult res{pred, noise_prior, {}};
  if (batch.empty()) return res;
  if (opts.max_iters < 1)
    throw std::invalid_argument("vb_measurement_update: max_iters must be positive");

  Vector ybar = Vector::Zero(d);
  for (const auto& y : batch) ybar += y;
  ybar /= static_cast<double>(batch.size());

  GIWState cur = pred;
  cur.m = Vector::Zero(3 * d);
  cur.m.head(d) = ybar;
  if (!opts.warm_start_extent) {
    cur.V = opts.init_extent_scale * Matrix::Identity(d, d);
    cur.nu = d + 1.1;
  }
  NoiseBelief noise_cur = noise_prior;

  Matrix known_precision;
  SufficientStats exact;
  if (opts.noise_mode == NoiseMode::known) known_precision = spd_inverse(opts.known_noise);
  if (opts.noise_mode == NoiseMode::none) exact = latent_stats_exact(batch, d);

  // With noise-free latents the statistics never change, so one pass suffices.
  const int iters = opts.noise_mode == NoiseMode::none ? 1 : opts.max_iters;

  Vector prev_m = cur.m;
  Matrix prev_extent = cur.V / (cur.nu - d - 1);
  Matrix prev_noise_mean = noise_cur.U / std::max(noise_cur.upsilon - d - 1, 0.1);

  for (int n = 1; n <= iters; ++n) {
    SufficientStats stats;
    switch (opts.noise_mode) {
      case NoiseMode::estimate:
        stats = latent_stats(batch, cur, noise_cur.precision_mean(), cfg);
        break;
      case NoiseMode::known:
        stats = latent_stats(batch, cur, known_precision, cfg);
        break;
      case NoiseMode::none:
        stats = exact;
        break;
    }
    cur = update_state(pred, stats, cfg);
    if (opts.noise_mode == NoiseMode::estimate) noise_cur = update_noise(noise_prior, stats);

    const Matrix extent = cur.V / (cur.nu - d - 1);
    double delta = std::max(rel_change(prev_m, cur.m), rel_change(prev_extent, extent));
    if (opts.noise_mode == NoiseMode::estimate) {
      const Matrix noise_mean = noise_cur.U / (noise_cur.upsilon - d - 1);
      delta = std::max(delta, rel_change(prev_noise_mean, noise_mean));
      prev_noise_mean = noise_mean;
    }
    prev_m = cur.m;
    prev_extent = extent;

    res.diag.iterations = n;
    if (opts.record_trace) res.diag.deltas.push_back(delta);
    if (opts.noise_mode == NoiseMode::none || (opts.tol > 0.0 && delta < opts.tol)) {
      res.diag.converged = true;
      break;
    }
  }
  res.state = std::move(cur);
  res.noise = std::move(noise_cur);
  return res;
}

}  // namespace eot
