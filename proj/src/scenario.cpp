#include "eot/scenario.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "eot/textio.hpp"

namespace eot {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Vector2d course(double psi) { return {std::cos(psi), std::sin(psi)}; }

/// Piecewise constant-speed planar path: straight legs and constant-rate
/// turns, continuing straight past the last segment.
struct PlanarPath {
  double speed = 0.0;
  std::vector<Segment> segments;
  std::vector<double> t0;              // segment start times
  std::vector<Eigen::Vector2d> p0;     // segment start positions
  std::vector<double> psi0;            // segment start headings
  double t_end = 0.0;
  Eigen::Vector2d p_end;
  double psi_end = 0.0;

  PlanarPath(const ScenarioConfig& cfg) {
    speed = cfg.speed;
    segments = cfg.segments;
    Eigen::Vector2d p = cfg.start_pos.size() == 2
                            ? Eigen::Vector2d(cfg.start_pos(0), cfg.start_pos(1))
                            : Eigen::Vector2d::Zero();
    double psi = cfg.heading;
    double t = 0.0;
    for (const auto& seg : segments) {
      if (!(seg.duration > 0.0))
        throw std::invalid_argument("gen_trajectory: segment durations must be positive");
      t0.push_back(t);
      p0.push_back(p);
      psi0.push_back(psi);
      if (seg.angle == 0.0) {
        p += speed * seg.duration * course(psi);
      } else {
        const double w = seg.angle / seg.duration;
        p += (speed / w) * Eigen::Vector2d(std::sin(psi + seg.angle) - std::sin(psi),
                                           -std::cos(psi + seg.angle) + std::cos(psi));
        psi += seg.angle;
      }
      t += seg.duration;
    }
    t_end = t;
    p_end = p;
    psi_end = psi;
  }

  void eval(double t, Eigen::Vector2d& p, double& psi) const {
    if (t >= t_end) {
      psi = psi_end;
      p = p_end + speed * (t - t_end) * course(psi);
      return;
    }
    std::size_t i = 0;
    while (i + 1 < segments.size() && t >= t0[i + 1]) ++i;
    const double tau = t - t0[i];
    if (segments[i].angle == 0.0) {
      psi = psi0[i];
      p = p0[i] + speed * tau * course(psi);
    } else {
      const double w = segments[i].angle / segments[i].duration;
      psi = psi0[i] + w * tau;
      p = p0[i] + (speed / w) * Eigen::Vector2d(std::sin(psi) - std::sin(psi0[i]),
                                                -std::cos(psi) + std::cos(psi0[i]));
    }
  }
};

void check_trajectory_config(const ScenarioConfig& cfg, const char* who) {
  if (cfg.d != 2) throw std::invalid_argument(std::string(who) + ": trajectories are planar (d == 2)");
  if (cfg.scan_count < 1) throw std::invalid_argument(std::string(who) + ": scan_count must be >= 1");
  if (!(cfg.speed > 0.0)) throw std::invalid_argument(std::string(who) + ": speed must be positive");
  if (!(cfg.motion.scan_time > 0.0))
    throw std::invalid_argument(std::string(who) + ": scan_time must be positive");
  if (!(cfg.s > 0.0)) throw std::invalid_argument(std::string(who) + ": s must be positive");
}

Matrix heading_aligned_extent(double psi, double semi_major, double semi_minor) {
  Eigen::Matrix2d rot;
  rot << std::cos(psi), -std::sin(psi), std::sin(psi), std::cos(psi);
  Eigen::Matrix2d ax = Eigen::Vector2d(semi_major * semi_major, semi_minor * semi_minor).asDiagonal();
  return rot * ax * rot.transpose();
}

}  // namespace

ScenarioConfig scenario_defaults(const std::string& id) {
  ScenarioConfig cfg;
  cfg.motion = MotionParams{10.0, 40.0, kGravity, 10.0, 50.0};
  if (id == "S1" || id == "custom") {
    cfg.id = id;
    cfg.speed = 13.89;
    cfg.scan_count = 147;
    cfg.rate = 20.0;
    cfg.r_true = 2500.0 * Matrix::Identity(2, 2);
    cfg.detect_prob = 1.0;
    cfg.scatter = ScatterModel::uniform_ellipse;
    cfg.semi_major = 170.0;
    cfg.semi_minor = 40.0;
    cfg.start_pos = Vector::Zero(2);
    // straight legs joined by a 45 degree and two 90 degree turns; the turn
    // onsets land on scans 40, 80 and 110 of the 147-scan pass
    cfg.segments = {{390.0, 0.0},          {100.0, kPi / 4}, {300.0, 0.0},
                    {100.0, -kPi / 2},     {200.0, 0.0},     {100.0, -kPi / 2}};
    return cfg;
  }
  if (id == "S2") {
    cfg.id = id;
    cfg.speed = 300.0;
    cfg.scan_count = 110;
    cfg.rate = 20.0;  // unused by the formation sampler
    cfg.r_true = Matrix::Zero(2, 2);
    cfg.r_true(0, 0) = 500.0 * 500.0;
    cfg.r_true(1, 1) = 100.0 * 100.0;
    cfg.detect_prob = 0.8;
    cfg.n_targets = 5;
    cfg.spacing = 500.0;
    cfg.split_angle = 15.0 * kPi / 180.0;
    cfg.start_pos = Vector::Zero(2);
    // turn durations follow from the radial accelerations (2g, 2g, 1g):
    // duration = angle * speed / accel, so the 2g turn radius is
    // speed^2 / (2g) and the formation splits once the last turn is done
    const double v = cfg.speed;
    cfg.segments = {{200.0, 0.0},
                    {(kPi / 4) * v / (2.0 * kGravity), kPi / 4},
                    {250.0, 0.0},
                    {(kPi / 2) * v / (2.0 * kGravity), -kPi / 2},
                    {250.0, 0.0},
                    {(kPi / 2) * v / kGravity, kPi / 2},
                    {100.0, 0.0}};
    return cfg;
  }
  throw std::invalid_argument("scenario_defaults: unknown id " + id);
}

GroundTruth gen_trajectory_s1(const ScenarioConfig& cfg) {
  check_trajectory_config(cfg, "gen_trajectory_s1");
  const PlanarPath path(cfg);
  GroundTruth truth;
  truth.scans.resize(cfg.scan_count);
  std::mt19937_64 rng(derive_seed(cfg.truth_seed, 17));
  Matrix extent;
  for (int k = 0; k < cfg.scan_count; ++k) {
    const double t = k * cfg.motion.scan_time;
    Eigen::Vector2d p;
    double psi;
    path.eval(t, p, psi);
    auto& scan = truth.scans[k];
    scan.pos = p;
    scan.vel = cfg.speed * course(psi);
    if (!cfg.stochastic_extent) {
      scan.extent = heading_aligned_extent(psi, cfg.semi_major, cfg.semi_minor);
    } else if (k == 0) {
      extent = heading_aligned_extent(psi, cfg.semi_major, cfg.semi_minor);
      scan.extent = extent;
    } else {
      const double eta = cfg.motion.extension_dof;
      extent = sample_wishart(WishartParams{eta, extent / eta}, rng);
      scan.extent = extent;
    }
  }
  return truth;
}

GroundTruth gen_trajectory_s2(const ScenarioConfig& cfg) {
  check_trajectory_config(cfg, "gen_trajectory_s2");
  if (cfg.n_targets < 2) throw std::invalid_argument("gen_trajectory_s2: need at least two targets");
  const PlanarPath path(cfg);
  const int n = cfg.n_targets;
  const double t_split = path.t_end;

  // formation offsets abreast of the course, symmetric about the centroid
  std::vector<double> offsets(n);
  for (int j = 0; j < n; ++j) offsets[j] = cfg.spacing * (j - 0.5 * (n - 1));

  // per-target state at the split: position, and the post-split course with
  // the outermost pair diverging by +/- split_angle
  Eigen::Vector2d p_split;
  double psi_split;
  path.eval(t_split, p_split, psi_split);
  const Eigen::Vector2d normal_split(-std::sin(psi_split), std::cos(psi_split));
  std::vector<double> split_course(n, psi_split);
  split_course.front() = psi_split - cfg.split_angle;
  split_course.back() = psi_split + cfg.split_angle;

  GroundTruth truth;
  truth.scans.resize(cfg.scan_count);
  for (int k = 0; k < cfg.scan_count; ++k) {
    const double t = k * cfg.motion.scan_time;
    auto& scan = truth.scans[k];
    scan.targets.resize(n);
    std::vector<Eigen::Vector2d> vels(n);
    if (t < t_split) {
      Eigen::Vector2d p;
      double psi;
      path.eval(t, p, psi);
      const Eigen::Vector2d normal(-std::sin(psi), std::cos(psi));
      for (int j = 0; j < n; ++j) {
        scan.targets[j] = p + offsets[j] * normal;
        vels[j] = cfg.speed * course(psi);
      }
    } else {
      for (int j = 0; j < n; ++j) {
        const Eigen::Vector2d at_split = p_split + offsets[j] * normal_split;
        scan.targets[j] =
            at_split + cfg.speed * (t - t_split) * course(split_course[j]);
        vels[j] = cfg.speed * course(split_course[j]);
      }
    }
    Vector centroid = Vector::Zero(2);
    Vector vel = Vector::Zero(2);
    for (int j = 0; j < n; ++j) {
      centroid += scan.targets[j];
      vel += vels[j];
    }
    centroid /= n;
    vel /= n;
    Matrix cov = Matrix::Zero(2, 2);
    for (int j = 0; j < n; ++j) {
      const Vector dev = scan.targets[j] - centroid;
      cov += dev * dev.transpose();
    }
    cov /= n;
    scan.pos = centroid;
    scan.vel = vel;
    scan.extent = cov / cfg.s;
  }
  return truth;
}

GroundTruth gen_trajectory(const ScenarioConfig& cfg) {
  return cfg.id == "S2" ? gen_trajectory_s2(cfg) : gen_trajectory_s1(cfg);
}

ScanBatches sample_scan(const GroundTruthScan& truth, const SensorNetwork& net,
                        const ScenarioConfig& cfg, std::vector<std::mt19937_64>& node_rngs) {
  if (static_cast<int>(node_rngs.size()) != net.n_nodes)
    throw std::invalid_argument("sample_scan: one engine per node required");
  const int d = cfg.d;
  ScanBatches out;
  out.per_node.resize(net.n_nodes);

  const bool noisy = cfg.r_true.size() > 0 && cfg.r_true.cwiseAbs().maxCoeff() > 0.0;
  Matrix noise_root;
  if (noisy) noise_root = Matrix(spd_llt(cfg.r_true).matrixL());

  const bool formation = !truth.targets.empty();
  Matrix scatter_root;
  if (!formation) scatter_root = Matrix(spd_llt(truth.extent).matrixL());

  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (int k = 0; k < net.n_nodes; ++k) {
    auto& rng = node_rngs[k];
    auto& batch = out.per_node[k];
    auto noise_draw = [&](Vector& y) {
      if (!noisy) return;
      Vector g(d);
      for (int i = 0; i < d; ++i) g(i) = gauss(rng);
      y += noise_root * g;
    };
    if (formation) {
      for (const auto& target : truth.targets) {
        if (unif(rng) >= cfg.detect_prob) continue;
        Vector y = target;
        noise_draw(y);
        batch.push_back(std::move(y));
      }
    } else {
      std::poisson_distribution<int> count(cfg.rate);
      const int n = count(rng);
      batch.reserve(n);
      for (int i = 0; i < n; ++i) {
        Vector g(d);
        for (int j = 0; j < d; ++j) g(j) = gauss(rng);
        Vector y = truth.pos;
        if (cfg.scatter == ScatterModel::uniform_ellipse) {
          // direction from a normalized Gaussian, radius from the inverse-cdf
          // transform; the 2 sqrt(s) rescale makes the scatter covariance
          // exactly s X (and is the identity at s = 1/4, where the support
          // is the extent ellipse itself)
          const double r = std::pow(unif(rng), 1.0 / d);
          g *= r / g.norm();
          y += 2.0 * std::sqrt(cfg.s) * (scatter_root * g);
        } else {
          y += std::sqrt(cfg.s) * (scatter_root * g);
        }
        noise_draw(y);
        batch.push_back(std::move(y));
      }
    }
  }
  return out;
}

MeasurementStream sample_measurements(const GroundTruth& truth, const SensorNetwork& net,
                                      const ScenarioConfig& cfg, std::uint64_t seed) {
  std::vector<std::mt19937_64> rngs;
  rngs.reserve(net.n_nodes);
  for (int k = 0; k < net.n_nodes; ++k) rngs.emplace_back(derive_seed(seed, k));
  MeasurementStream stream;
  stream.reserve(truth.scans.size());
  for (const auto& scan : truth.scans) stream.push_back(sample_scan(scan, net, cfg, rngs));
  return stream;
}

void write_measurements(std::ostream& os, const MeasurementStream& stream, int n_nodes, int d) {
  os << stream.size() << " " << n_nodes << " " << d << "\n";
  for (std::size_t t = 0; t < stream.size(); ++t) {
    const auto& per_node = stream[t].per_node;
    for (std::size_t k = 0; k < per_node.size(); ++k)
      for (const auto& y : per_node[k]) {
        os << t + 1 << " " << k + 1;
        for (int i = 0; i < y.size(); ++i) os << " " << fmt_full(y(i));
        os << "\n";
      }
  }
}

MeasurementStream read_measurements(std::istream& is) {
  std::size_t n_scans = 0;
  int n_nodes = 0, d = 0;
  if (!(is >> n_scans >> n_nodes >> d) || n_nodes < 1 || d < 1)
    throw std::runtime_error("read_measurements: bad header");
  MeasurementStream stream(n_scans);
  for (auto& scan : stream) scan.per_node.resize(n_nodes);
  std::size_t t = 0;
  int k = 0;
  while (is >> t >> k) {
    if (t < 1 || t > n_scans || k < 1 || k > n_nodes)
      throw std::runtime_error("read_measurements: scan or node index out of range");
    Vector y(d);
    for (int i = 0; i < d; ++i)
      if (!(is >> y(i))) throw std::runtime_error("read_measurements: truncated record");
    stream[t - 1].per_node[k - 1].push_back(std::move(y));
  }
  return stream;
}

void write_ground_truth(std::ostream& os, const GroundTruth& truth) {
  for (std::size_t t = 0; t < truth.scans.size(); ++t) {
    const auto& scan = truth.scans[t];
    os << t + 1;
    for (int i = 0; i < scan.pos.size(); ++i) os << " " << fmt_full(scan.pos(i));
    for (int i = 0; i < scan.vel.size(); ++i) os << " " << fmt_full(scan.vel(i));
    for (int i = 0; i < scan.extent.rows(); ++i)
      for (int j = 0; j < scan.extent.cols(); ++j) os << " " << fmt_full(scan.extent(i, j));
    for (const auto& target : scan.targets)
      for (int i = 0; i < target.size(); ++i) os << " " << fmt_full(target(i));
    os << "\n";
  }
}

}  // namespace eot
