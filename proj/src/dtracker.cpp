#include "eot/dtracker.hpp"

#include <stdexcept>

namespace eot {

std::string_view AlgorithmVariant::name() const {
  switch (kind) {
    case VariantKind::dvbeot: return "dvbeot";
    case VariantKind::known_noise: return "known-r";
    case VariantKind::no_noise: return "no-r";
    case VariantKind::non_cooperative: return "non-coop";
    case VariantKind::centralized: return "centralized";
  }
  return "dvbeot";
}

AlgorithmVariant variant_from_name(std::string_view name) {
  if (name == "dvbeot") return AlgorithmVariant::dvbeot();
  if (name == "known-r") return AlgorithmVariant::known_noise({});
  if (name == "no-r") return AlgorithmVariant::no_noise();
  if (name == "non-coop") return AlgorithmVariant::non_cooperative();
  if (name == "centralized") return AlgorithmVariant::centralized();
  throw std::invalid_argument("unknown algorithm variant: " + std::string(name));
}

NodeBelief local_predict(const NodeBelief& belief, const ModelConfig& cfg) {
  return NodeBelief{predict(belief.state, cfg), belief.noise};
}

namespace {

StatPack to_raw(const SufficientStats& st, int d) {
  StatPack p;
  p.count = st.count;
  if (st.count <= 0.0) {
    p.z_sum = Vector::Zero(d);
    p.zz_sum = Matrix::Zero(d, d);
    p.resid_sum = Matrix::Zero(d, d);
    return p;
  }
  p.z_sum = st.count * st.zbar;
  p.zz_sum = st.count * (st.S + st.zbar * st.zbar.transpose());
  p.resid_sum = st.residual;
  return p;
}

/// Rebuild scan-level statistics from the network average of raw sums:
/// the global count is the node count times the averaged per-node count,
/// the mean and spread renormalize by the averaged count, and the residual
/// sum rescales back to a network total.
SufficientStats from_consensus(const StatPack& avg, int n_nodes, int d) {
  SufficientStats st;
  const double total = n_nodes * avg.count;
  if (total < 0.5) {
    st.count = 0.0;
    st.zbar = Vector::Zero(d);
    st.S = Matrix::Zero(d, d);
    st.residual = Matrix::Zero(d, d);
    return st;
  }
  st.count = total;
  st.zbar = avg.z_sum / avg.count;
  st.S = symmetrize(avg.zz_sum / avg.count - st.zbar * st.zbar.transpose());
  st.residual = n_nodes * avg.resid_sum;
  return st;
}

Vector batch_mean(const std::vector<Vector>& batch, int d) {
  Vector mean = Vector::Zero(d);
  for (const auto& y : batch) mean += y;
  if (!batch.empty()) mean /= static_cast<double>(batch.size());
  return mean;
}

std::vector<Vector> pooled(const ScanBatches& batches) {
  std::vector<Vector> all;
  all.reserve(batches.total());
  for (const auto& b : batches.per_node) all.insert(all.end(), b.begin(), b.end());
  return all;
}

VbOptions to_vb_options(const DistOptions& opts) {
  VbOptions vbo;
  vbo.max_iters = opts.vb_iters;
  vbo.tol = opts.vb_tol;
  vbo.init_extent_scale = opts.init_extent_scale;
  return vbo;
}

}  // namespace

std::vector<NodeBelief> distributed_vb_update(const std::vector<NodeBelief>& predicted,
                                              const ScanBatches& batches,
                                              const SensorNetwork& net, const ModelConfig& cfg,
                                              const DistOptions& opts,
                                              const IterationObserver& observer) {
  const int n = net.n_nodes;
  const int d = cfg.d;
  if (static_cast<int>(predicted.size()) != n ||
      static_cast<int>(batches.per_node.size()) != n)
    throw std::invalid_argument("distributed_vb_update: one belief and batch per node required");
  if (!is_connected(net))
    throw std::invalid_argument("distributed_vb_update: network must be connected");
  if (opts.vb_iters < 1)
    throw std::invalid_argument("distributed_vb_update: vb_iters must be positive");

  const VariantKind kind = opts.variant.kind;

  if (kind == VariantKind::centralized) {
    const auto all = pooled(batches);
    const VbResult res =
        vb_measurement_update(predicted[0].state, predicted[0].noise, all, cfg, to_vb_options(opts));
    return std::vector<NodeBelief>(n, NodeBelief{res.state, res.noise});
  }

  if (kind == VariantKind::non_cooperative) {
    std::vector<NodeBelief> out;
    out.reserve(n);
    for (int k = 0; k < n; ++k) {
      const VbResult res = vb_measurement_update(predicted[k].state, predicted[k].noise,
                                                 batches.per_node[k], cfg, to_vb_options(opts));
      out.push_back(NodeBelief{res.state, res.noise});
    }
    return out;
  }

  if (batches.total() == 0) return predicted;

  Matrix known_precision;
  if (kind == VariantKind::known_noise) {
    if (opts.variant.r_true.rows() != d)
      throw std::invalid_argument("distributed_vb_update: known noise covariance required");
    known_precision = spd_inverse(opts.variant.r_true);
  }

  // refinement iterates; the kinematic/extent block restarts from the batch
  // mean and a reset extent, the noise block carries over
  std::vector<NodeBelief> iterates = predicted;
  Vector shared_mean;
  if (opts.shared_init) shared_mean = batch_mean(pooled(batches), d);
  for (int k = 0; k < n; ++k) {
    auto& st = iterates[k].state;
    st.m = Vector::Zero(3 * d);
    if (opts.shared_init && batches.total() > 0)
      st.m.head(d) = shared_mean;
    else if (!batches.per_node[k].empty())
      st.m.head(d) = batch_mean(batches.per_node[k], d);
    else
      st.m.head(d) = predicted[k].state.position();
    st.V = opts.init_extent_scale * Matrix::Identity(d, d);
    st.nu = d + 1.1;
  }

  // noise-free latents never change, so one refinement settles everything
  const int iters = kind == VariantKind::no_noise ? 1 : opts.vb_iters;

  std::vector<StatPack> raw(n);
  if (kind == VariantKind::no_noise)
    for (int k = 0; k < n; ++k)
      raw[k] = to_raw(latent_stats_exact(batches.per_node[k], d), d);

  std::vector<Vector> omega(n);
  for (int it = 1; it <= iters; ++it) {
    for (int k = 0; k < n; ++k) {
      switch (kind) {
        case VariantKind::dvbeot:
          raw[k] = to_raw(latent_stats(batches.per_node[k], iterates[k].state,
                                       iterates[k].noise.precision_mean(), cfg),
                          d);
          break;
        case VariantKind::known_noise:
          raw[k] = to_raw(
              latent_stats(batches.per_node[k], iterates[k].state, known_precision, cfg), d);
          break;
        default:
          break;  // no_noise: already filled
      }
      omega[k] = pack_stats(raw[k]);
    }
    const std::vector<Vector> phi = opts.exact_consensus
                                        ? exact_consensus(omega)
                                        : run_consensus(net, omega, opts.rho, opts.consensus_rounds);
    for (int k = 0; k < n; ++k) {
      const SufficientStats stats = from_consensus(unpack_stats(phi[k], d), n, d);
      if (stats.count <= 0.0) {
        iterates[k] = predicted[k];
        continue;
      }
      iterates[k].state = update_state(predicted[k].state, stats, cfg);
      if (kind == VariantKind::dvbeot)
        iterates[k].noise = update_noise(predicted[k].noise, stats);
    }
    if (observer) observer(it, iterates);
  }
  return iterates;
}

TrackResult track(const MeasurementStream& stream, const SensorNetwork& net,
                  const ModelConfig& cfg, const DistOptions& opts, const ScanObserver& observer) {
  const int n = net.n_nodes;
  const int d = cfg.d;
  if (stream.empty()) throw std::invalid_argument("track: empty measurement stream");

  std::vector<NodeBelief> beliefs(n);
  const bool centralized = opts.variant.kind == VariantKind::centralized;
  Vector pooled_mean;
  if (centralized) pooled_mean = batch_mean(pooled(stream.front()), d);
  for (int k = 0; k < n; ++k) {
    auto& b = beliefs[k];
    b.state.m = Vector::Zero(3 * d);
    b.state.m.head(d) =
        centralized ? pooled_mean : batch_mean(stream.front().per_node[k], d);
    b.state.P = Eigen::Matrix3d::Identity();
    b.state.nu = d + 1.1;
    b.state.V = opts.init_extent_scale * Matrix::Identity(d, d);
    b.noise.upsilon = d + 1;
    b.noise.U = opts.init_noise_scale * Matrix::Identity(d, d);
  }

  TrackResult out;
  out.posteriors.reserve(stream.size());
  for (std::size_t t = 0; t < stream.size(); ++t) {
    IterationObserver it_obs;
    if (observer)
      it_obs = [&observer, t](int it, const std::vector<NodeBelief>& bs) {
        observer(static_cast<int>(t) + 1, it, bs);
      };
    beliefs = distributed_vb_update(beliefs, stream[t], net, cfg, opts, it_obs);
    out.posteriors.push_back(beliefs);
    if (t + 1 < stream.size())
      for (auto& b : beliefs) b = local_predict(b, cfg);
  }
  return out;
}

}  // namespace eot
