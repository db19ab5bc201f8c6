#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "eot/dtracker.hpp"
#include "eot/gwmetric.hpp"
#include "test_util.hpp"

using namespace eot;
using testutil::rel_err;

namespace {

struct SmallRun {
  ScenarioConfig sc;
  SensorNetwork net;
  GroundTruth truth;
  MeasurementStream stream;
};

SmallRun make_small_run(int scans, int nodes, double rate, std::uint64_t seed,
                        bool complete = true) {
  SmallRun r;
  r.sc = scenario_defaults("S1");
  r.sc.scan_count = scans;
  r.sc.rate = rate;
  if (complete) {
    r.net = complete_graph(nodes);
  } else {
    std::mt19937_64 rng(seed + 1);
    r.net = generate_network(nodes, 2.5, 0.8, rng);
  }
  r.truth = gen_trajectory(r.sc);
  r.stream = sample_measurements(r.truth, r.net, r.sc, seed);
  return r;
}

std::vector<NodeBelief> diffuse_beliefs(int n, const Vector& pos) {
  const int d = static_cast<int>(pos.size());
  std::vector<NodeBelief> out(n);
  for (auto& b : out) {
    b.state.m = Vector::Zero(3 * d);
    b.state.m.head(d) = pos;
    b.state.P = Eigen::Matrix3d::Identity();
    b.state.nu = d + 1.1;
    b.state.V = 1e5 * Matrix::Identity(d, d);
    b.noise.upsilon = d + 1;
    b.noise.U = 1e4 * Matrix::Identity(d, d);
  }
  return out;
}

std::vector<Vector> pooled_batch(const ScanBatches& batches) {
  std::vector<Vector> all;
  for (const auto& b : batches.per_node) all.insert(all.end(), b.begin(), b.end());
  return all;
}

bool beliefs_bitwise_equal(const TrackResult& a, const TrackResult& b) {
  if (a.posteriors.size() != b.posteriors.size()) return false;
  for (std::size_t t = 0; t < a.posteriors.size(); ++t) {
    if (a.posteriors[t].size() != b.posteriors[t].size()) return false;
    for (std::size_t k = 0; k < a.posteriors[t].size(); ++k) {
      const NodeBelief& x = a.posteriors[t][k];
      const NodeBelief& y = b.posteriors[t][k];
      if ((x.state.m - y.state.m).norm() != 0.0) return false;
      if ((x.state.P - y.state.P).norm() != 0.0) return false;
      if (x.state.nu != y.state.nu) return false;
      if ((x.state.V - y.state.V).norm() != 0.0) return false;
      if (x.noise.upsilon != y.noise.upsilon) return false;
      if ((x.noise.U - y.noise.U).norm() != 0.0) return false;
    }
  }
  return true;
}

}  // namespace

TEST_SUITE("dtracker") {

TEST_CASE("variant names round trip") {
  for (const char* name : {"dvbeot", "known-r", "no-r", "non-coop", "centralized"}) {
    CHECK(variant_from_name(name).name() == name);
  }
  CHECK_THROWS_AS((void)variant_from_name("kochhh"), std::invalid_argument);
}

TEST_CASE("local prediction advances the state and keeps the noise") {
  ModelConfig cfg = scenario_defaults("S1").model();
  NodeBelief b = diffuse_beliefs(1, Vector::Zero(2))[0];
  b.state.nu = 9.0;
  NodeBelief pred = local_predict(b, cfg);
  GIWState direct = predict(b.state, cfg);
  CHECK((pred.state.m - direct.m).norm() == 0.0);
  CHECK(pred.state.nu == direct.nu);
  CHECK(pred.noise.upsilon == b.noise.upsilon);
  CHECK((pred.noise.U - b.noise.U).norm() == 0.0);
}

TEST_CASE("exact averaging with a shared start reproduces the pooled update") {
  SmallRun r = make_small_run(1, 5, 8.0, 201);
  ModelConfig cfg = r.sc.model();
  std::vector<NodeBelief> predicted = diffuse_beliefs(5, r.truth.scans[0].pos);

  DistOptions opts;
  opts.variant = AlgorithmVariant::dvbeot();
  opts.shared_init = true;
  opts.exact_consensus = true;
  std::vector<NodeBelief> post = distributed_vb_update(predicted, r.stream[0], r.net, cfg, opts);

  VbOptions vbo;
  vbo.max_iters = opts.vb_iters;
  vbo.tol = 0.0;  // the distributed loop always runs the full refinement count
  vbo.init_extent_scale = opts.init_extent_scale;
  VbResult oracle = vb_measurement_update(predicted[0].state, predicted[0].noise,
                                          pooled_batch(r.stream[0]), cfg, vbo);
  CHECK(oracle.diag.iterations == opts.vb_iters);
  for (int k = 0; k < 5; ++k) {
    CHECK(rel_err(post[k].state.m, oracle.state.m) < 1e-9);
    CHECK(rel_err(post[k].state.V, oracle.state.V) < 1e-9);
    CHECK(rel_err(post[k].state.nu, oracle.state.nu) < 1e-12);
    CHECK(rel_err(post[k].noise.U, oracle.noise.U) < 1e-9);
    CHECK(rel_err(post[k].noise.upsilon, oracle.noise.upsilon) < 1e-12);
  }
}

TEST_CASE("noise-free variant with exact averaging is the pooled moment update") {
  SmallRun r = make_small_run(1, 4, 12.0, 202);
  ModelConfig cfg = r.sc.model();
  std::vector<NodeBelief> predicted = diffuse_beliefs(4, r.truth.scans[0].pos);
  DistOptions opts;
  opts.variant = AlgorithmVariant::no_noise();
  opts.exact_consensus = true;
  std::vector<NodeBelief> post = distributed_vb_update(predicted, r.stream[0], r.net, cfg, opts);
  const std::vector<Vector> all = pooled_batch(r.stream[0]);
  for (int k = 0; k < 4; ++k) {
    GIWState oracle = update_state(predicted[k].state, latent_stats_exact(all, 2), cfg);
    CHECK(rel_err(post[k].state.m, oracle.m) < 1e-8);
    CHECK(rel_err(post[k].state.V, oracle.V) < 1e-8);
    CHECK(post[k].state.nu == doctest::Approx(oracle.nu).epsilon(1e-12));
    // the noise block must ride through untouched
    CHECK(post[k].noise.upsilon == predicted[k].noise.upsilon);
    CHECK((post[k].noise.U - predicted[k].noise.U).norm() == 0.0);
  }
}

TEST_CASE("a single-node network makes the cooperative and solo variants agree") {
  SmallRun r = make_small_run(1, 1, 25.0, 203);
  ModelConfig cfg = r.sc.model();
  std::vector<NodeBelief> predicted = diffuse_beliefs(1, r.truth.scans[0].pos);
  DistOptions coop;
  coop.variant = AlgorithmVariant::dvbeot();
  coop.exact_consensus = true;
  coop.vb_tol = 0.0;
  DistOptions solo = coop;
  solo.variant = AlgorithmVariant::non_cooperative();
  std::vector<NodeBelief> a = distributed_vb_update(predicted, r.stream[0], r.net, cfg, coop);
  std::vector<NodeBelief> b = distributed_vb_update(predicted, r.stream[0], r.net, cfg, solo);
  CHECK(rel_err(a[0].state.m, b[0].state.m) < 1e-9);
  CHECK(rel_err(a[0].state.V, b[0].state.V) < 1e-9);
  CHECK(rel_err(a[0].noise.U, b[0].noise.U) < 1e-9);
  CHECK(rel_err(a[0].state.nu, b[0].state.nu) < 1e-12);
}

TEST_CASE("thirty message rounds bring the nodes into agreement") {
  SmallRun r = make_small_run(1, 20, 20.0, 204, /*complete=*/false);
  ModelConfig cfg = r.sc.model();
  std::vector<NodeBelief> predicted = diffuse_beliefs(20, r.truth.scans[0].pos);
  DistOptions opts;
  opts.variant = AlgorithmVariant::dvbeot();
  opts.consensus_rounds = 30;
  std::vector<NodeBelief> post = distributed_vb_update(predicted, r.stream[0], r.net, cfg, opts);
  double worst = 0.0;
  double scale = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Matrix xk = post[k].state.extent_mean();
    scale = std::max(scale, xk.norm());
    for (int j = k + 1; j < 20; ++j) {
      worst = std::max(worst, (xk - post[j].state.extent_mean()).norm());
    }
  }
  CHECK(worst < 0.03 * scale);
}

TEST_CASE("the pooled tracker is the plain filter loop in disguise") {
  SmallRun r = make_small_run(6, 3, 10.0, 205);
  ModelConfig cfg = r.sc.model();
  DistOptions opts;
  opts.variant = AlgorithmVariant::centralized();
  TrackResult res = track(r.stream, r.net, cfg, opts);

  VbOptions vbo;
  vbo.max_iters = opts.vb_iters;
  vbo.tol = opts.vb_tol;
  vbo.init_extent_scale = opts.init_extent_scale;
  const std::vector<Vector> first = pooled_batch(r.stream[0]);
  Vector mean = Vector::Zero(2);
  for (const auto& y : first) mean += y;
  mean /= static_cast<double>(first.size());
  NodeBelief belief;
  belief.state.m = Vector::Zero(6);
  belief.state.m.head(2) = mean;
  belief.state.P = Eigen::Matrix3d::Identity();
  belief.state.nu = 2 + 1.1;
  belief.state.V = opts.init_extent_scale * Matrix::Identity(2, 2);
  belief.noise.upsilon = 2 + 1;
  belief.noise.U = opts.init_noise_scale * Matrix::Identity(2, 2);
  for (std::size_t t = 0; t < r.stream.size(); ++t) {
    const std::vector<Vector> all = pooled_batch(r.stream[t]);
    VbResult vb = vb_measurement_update(belief.state, belief.noise, all, cfg, vbo);
    belief = NodeBelief{vb.state, vb.noise};
    const NodeBelief& got = res.posteriors[t][0];
    CHECK((got.state.m - belief.state.m).norm() == 0.0);
    CHECK((got.state.V - belief.state.V).norm() == 0.0);
    CHECK((got.noise.U - belief.noise.U).norm() == 0.0);
    if (t + 1 < r.stream.size()) belief = local_predict(belief, cfg);
  }
}

TEST_CASE("tracking output is finite, positive definite and deterministic") {
  SmallRun r = make_small_run(10, 5, 10.0, 206, /*complete=*/false);
  ModelConfig cfg = r.sc.model();
  DistOptions opts;
  opts.variant = AlgorithmVariant::dvbeot();
  TrackResult a = track(r.stream, r.net, cfg, opts);
  TrackResult b = track(r.stream, r.net, cfg, opts);
  CHECK(beliefs_bitwise_equal(a, b));
  std::vector<double> squares;
  for (std::size_t t = 0; t < a.posteriors.size(); ++t) {
    for (const auto& nb : a.posteriors[t]) {
      CHECK(nb.state.m.allFinite());
      CHECK(is_spd(nb.state.V));
      CHECK(is_spd(nb.noise.U));
      EllipseEstimate est{nb.state.position(), cfg.s * nb.state.extent_mean()};
      EllipseEstimate tru{r.truth.scans[t].pos, cfg.s * r.truth.scans[t].extent};
      squares.push_back(gwd_squared(est, tru));
    }
  }
  const double err = rgwe(squares);
  CHECK(std::isfinite(err));
  CHECK(err > 0.0);
  CHECK(err < 500.0);
}

TEST_CASE("a silent scan passes the predictions through") {
  SmallRun r = make_small_run(3, 3, 10.0, 207);
  ModelConfig cfg = r.sc.model();
  for (auto& batch : r.stream[1].per_node) batch.clear();
  DistOptions opts;
  opts.variant = AlgorithmVariant::dvbeot();
  TrackResult res = track(r.stream, r.net, cfg, opts);
  for (int k = 0; k < 3; ++k) {
    NodeBelief expected = local_predict(res.posteriors[0][k], cfg);
    CHECK((res.posteriors[1][k].state.m - expected.state.m).norm() == 0.0);
    CHECK((res.posteriors[1][k].state.V - expected.state.V).norm() == 0.0);
    CHECK(res.posteriors[1][k].noise.upsilon == expected.noise.upsilon);
  }
}

TEST_CASE("update rejects malformed inputs") {
  SmallRun r = make_small_run(1, 3, 5.0, 208);
  ModelConfig cfg = r.sc.model();
  std::vector<NodeBelief> two = diffuse_beliefs(2, r.truth.scans[0].pos);
  DistOptions opts;
  CHECK_THROWS_AS((void)distributed_vb_update(two, r.stream[0], r.net, cfg, opts),
                  std::invalid_argument);
  std::vector<NodeBelief> three = diffuse_beliefs(3, r.truth.scans[0].pos);
  DistOptions bad = opts;
  bad.vb_iters = 0;
  CHECK_THROWS_AS((void)distributed_vb_update(three, r.stream[0], r.net, cfg, bad),
                  std::invalid_argument);
  SensorNetwork split;
  split.n_nodes = 3;
  split.adjacency = {{1}, {0}, {}};
  CHECK_THROWS_AS((void)distributed_vb_update(three, r.stream[0], split, cfg, opts),
                  std::invalid_argument);
  DistOptions kr = opts;
  kr.variant = AlgorithmVariant::known_noise({});
  CHECK_THROWS_AS((void)distributed_vb_update(three, r.stream[0], r.net, cfg, kr),
                  std::invalid_argument);
}

}  // TEST_SUITE
