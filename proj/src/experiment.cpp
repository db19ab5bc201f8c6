#include "eot/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <climits>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>
#include <utility>

#include <json.hpp>

#include "eot/matstat.hpp"
#include "eot/textio.hpp"

#ifndef EOT_PROVENANCE
#define EOT_PROVENANCE "unversioned"
#endif

namespace eot {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto next = s.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
}

double to_double(const std::string& field, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError(field, "not a number: '" + text + "'");
  }
  if (used != text.size()) throw ConfigError(field, "trailing junk in '" + text + "'");
  if (!std::isfinite(v)) throw ConfigError(field, "must be finite");
  return v;
}

long long to_ll(const std::string& field, const std::string& text) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    throw ConfigError(field, "not an integer: '" + text + "'");
  }
  if (used != text.size()) throw ConfigError(field, "trailing junk in '" + text + "'");
  return v;
}

int to_int(const std::string& field, const std::string& text) {
  long long v = to_ll(field, text);
  if (v < INT_MIN || v > INT_MAX) throw ConfigError(field, "out of range");
  return static_cast<int>(v);
}

std::uint64_t to_seed(const std::string& field, const std::string& text) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    throw ConfigError(field, "not a seed value: '" + text + "'");
  }
  if (used != text.size()) throw ConfigError(field, "trailing junk in '" + text + "'");
  return v;
}

bool to_bool(const std::string& field, const std::string& text) {
  std::string t;
  for (char c : text) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(field, "expected a boolean, got '" + text + "'");
}

/// Key/value view over a parsed file that tracks which keys were consumed,
/// so leftovers can be reported as typos.
class KvReader {
 public:
  explicit KvReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  [[nodiscard]] bool has(const std::string& key) const { return kv_.count(key) != 0; }

  [[nodiscard]] std::string str(const std::string& key, const std::string& fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    used_.insert(key);
    return it->second;
  }

  [[nodiscard]] double num(const std::string& key, double fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    used_.insert(key);
    return to_double(key, it->second);
  }

  [[nodiscard]] int integer(const std::string& key, int fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    used_.insert(key);
    return to_int(key, it->second);
  }

  [[nodiscard]] std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    used_.insert(key);
    return to_seed(key, it->second);
  }

  [[nodiscard]] bool flag(const std::string& key, bool fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    used_.insert(key);
    return to_bool(key, it->second);
  }

  void reject_unknown() const {
    for (const auto& [key, value] : kv_) {
      if (used_.count(key) == 0) throw ConfigError(key, "unknown key");
    }
  }

 private:
  std::map<std::string, std::string> kv_;
  std::set<std::string> used_;
};

std::vector<Segment> parse_segments(const std::string& field, const std::string& text) {
  std::vector<Segment> out;
  for (const auto& raw : split(text, ',')) {
    std::string token = trim(raw);
    if (token.empty()) continue;
    auto parts = split(token, ':');
    if (parts.size() == 2 && trim(parts[0]) == "straight") {
      out.push_back({to_double(field, trim(parts[1])), 0.0});
    } else if (parts.size() == 3 && trim(parts[0]) == "turn") {
      double deg = to_double(field, trim(parts[1]));
      double dur = to_double(field, trim(parts[2]));
      out.push_back({dur, deg * kPi / 180.0});
    } else {
      throw ConfigError(field, "expected straight:<sec> or turn:<deg>:<sec>, got '" + token + "'");
    }
  }
  if (out.empty()) throw ConfigError(field, "no segments given");
  return out;
}

std::vector<std::string> parse_variant_list(const std::string& field, const std::string& text) {
  std::vector<std::string> out;
  for (const auto& raw : split(text, ',')) {
    std::string name = trim(raw);
    if (name.empty()) continue;
    out.push_back(name);
  }
  if (out.empty()) throw ConfigError(field, "no variants given");
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_ini(std::istream& is) {
  std::map<std::string, std::string> out;
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto cut = line.find_first_of("#;");
    if (cut != std::string::npos) line.erase(cut);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError("line " + std::to_string(lineno), "malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw ConfigError("line " + std::to_string(lineno), "empty section name");
      }
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno), "expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno), "empty key");
    std::string full = section.empty() ? key : section + "." + key;
    if (out.count(full) != 0) throw ConfigError(full, "duplicate key");
    out[full] = value;
  }
  return out;
}

ExperimentConfig config_from_ini(std::istream& is) {
  KvReader kv(parse_ini(is));
  ExperimentConfig cfg;

  std::string id = kv.str("scenario.id", "S1");
  try {
    cfg.scenario = scenario_defaults(id);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("scenario.id", e.what());
  }
  ScenarioConfig& sc = cfg.scenario;
  sc.scan_count = kv.integer("scenario.scan_count", sc.scan_count);
  sc.motion.scan_time = kv.num("scenario.scan_time", sc.motion.scan_time);
  sc.rate = kv.num("scenario.rate", sc.rate);
  sc.detect_prob = kv.num("scenario.detect_prob", sc.detect_prob);
  sc.s = kv.num("scenario.s", sc.s);
  sc.speed = kv.num("scenario.speed", sc.speed);
  sc.heading = kv.num("scenario.heading_deg", sc.heading * 180.0 / kPi) * kPi / 180.0;
  sc.start_pos.x() = kv.num("scenario.start_x", sc.start_pos.x());
  sc.start_pos.y() = kv.num("scenario.start_y", sc.start_pos.y());
  if (kv.has("scenario.noise_sigma_x") || kv.has("scenario.noise_sigma_y")) {
    double sx = std::sqrt(sc.r_true(0, 0));
    double sy = std::sqrt(sc.r_true(1, 1));
    sx = kv.num("scenario.noise_sigma_x", sx);
    sy = kv.num("scenario.noise_sigma_y", sy);
    sc.r_true = Matrix::Zero(sc.d, sc.d);
    sc.r_true(0, 0) = sx * sx;
    sc.r_true(1, 1) = sy * sy;
  }
  if (kv.has("scenario.scatter")) {
    std::string scatter = kv.str("scenario.scatter", "");
    if (scatter == "uniform-ellipse") {
      sc.scatter = ScatterModel::uniform_ellipse;
    } else if (scatter == "gaussian") {
      sc.scatter = ScatterModel::gaussian;
    } else {
      throw ConfigError("scenario.scatter", "expected uniform-ellipse or gaussian");
    }
  }
  sc.semi_major = kv.num("scenario.semi_major", sc.semi_major);
  sc.semi_minor = kv.num("scenario.semi_minor", sc.semi_minor);
  sc.n_targets = kv.integer("scenario.n_targets", sc.n_targets);
  sc.spacing = kv.num("scenario.spacing", sc.spacing);
  sc.split_angle = kv.num("scenario.split_angle_deg", sc.split_angle * 180.0 / kPi) * kPi / 180.0;
  sc.motion.maneuver_correlation = kv.num("scenario.theta", sc.motion.maneuver_correlation);
  sc.motion.accel_rms = kv.num("scenario.accel_rms_g", sc.motion.accel_rms / kGravity) * kGravity;
  sc.motion.extension_decay = kv.num("scenario.tau", sc.motion.extension_decay);
  sc.motion.extension_dof = kv.num("scenario.eta", sc.motion.extension_dof);
  sc.stochastic_extent = kv.flag("scenario.stochastic_extent", sc.stochastic_extent);
  sc.truth_seed = kv.seed("scenario.truth_seed", sc.truth_seed);
  if (kv.has("scenario.segments")) {
    sc.segments = parse_segments("scenario.segments", kv.str("scenario.segments", ""));
  }

  cfg.network.nodes = kv.integer("network.nodes", cfg.network.nodes);
  cfg.network.side = kv.num("network.side", cfg.network.side);
  cfg.network.radius = kv.num("network.radius", cfg.network.radius);
  cfg.network.edge_list = kv.str("network.edge_list", cfg.network.edge_list);

  cfg.vb_iters = kv.integer("filter.vb_iters", cfg.vb_iters);
  cfg.consensus_rounds = kv.integer("filter.consensus_rounds", cfg.consensus_rounds);
  cfg.rho = kv.num("filter.rho", cfg.rho);
  cfg.vb_tol = kv.num("filter.vb_tol", cfg.vb_tol);
  cfg.init_extent_scale = kv.num("filter.init_extent_scale", cfg.init_extent_scale);
  cfg.init_noise_scale = kv.num("filter.init_noise_scale", cfg.init_noise_scale);

  cfg.runs = kv.integer("experiment.runs", cfg.runs);
  cfg.seed = kv.seed("experiment.seed", cfg.seed);
  cfg.out_dir = kv.str("experiment.out", cfg.out_dir);
  cfg.threads = kv.integer("experiment.threads", cfg.threads);
  cfg.trace_vb = kv.flag("experiment.trace_vb", cfg.trace_vb);
  cfg.trace_node = kv.integer("experiment.trace_node", cfg.trace_node);
  if (kv.has("experiment.variants")) {
    cfg.variant_names =
        parse_variant_list("experiment.variants", kv.str("experiment.variants", ""));
  }

  kv.reject_unknown();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  return config_from_ini(in);
}

void validate_config(const ExperimentConfig& cfg) {
  const ScenarioConfig& sc = cfg.scenario;
  const int d = sc.d;
  if (d < 1) throw ConfigError("scenario.d", "must be positive");
  if (sc.s <= 0.0) throw ConfigError("scenario.s", "must be positive");
  if (sc.scan_count < 1) throw ConfigError("scenario.scan_count", "need at least one scan");
  if (sc.motion.scan_time <= 0.0) throw ConfigError("scenario.scan_time", "must be positive");
  if (sc.motion.maneuver_correlation <= 0.0) throw ConfigError("scenario.theta", "must be positive");
  if (sc.motion.accel_rms < 0.0) throw ConfigError("scenario.accel_rms_g", "must be nonnegative");
  if (sc.motion.extension_decay <= 0.0) throw ConfigError("scenario.tau", "must be positive");
  if (sc.stochastic_extent && sc.motion.extension_dof <= d + 1) {
    throw ConfigError("scenario.eta", "stochastic extent needs dof above d + 1");
  }
  if (sc.rate <= 0.0) throw ConfigError("scenario.rate", "must be positive");
  if (!(sc.detect_prob > 0.0 && sc.detect_prob <= 1.0)) {
    throw ConfigError("scenario.detect_prob", "must be in (0, 1]");
  }
  if (sc.speed <= 0.0) throw ConfigError("scenario.speed", "must be positive");
  if (sc.start_pos.size() != d) throw ConfigError("scenario.start_x", "position dimension mismatch");
  if (sc.segments.empty()) throw ConfigError("scenario.segments", "no segments given");
  for (const Segment& seg : sc.segments) {
    if (seg.duration <= 0.0) throw ConfigError("scenario.segments", "segment durations must be positive");
  }
  if (sc.semi_major <= 0.0) throw ConfigError("scenario.semi_major", "must be positive");
  if (sc.semi_minor <= 0.0) throw ConfigError("scenario.semi_minor", "must be positive");
  if (sc.n_targets < 1) throw ConfigError("scenario.n_targets", "need at least one target");
  if (sc.spacing < 0.0) throw ConfigError("scenario.spacing", "must be nonnegative");

  if (sc.r_true.rows() != d || sc.r_true.cols() != d) {
    throw ConfigError("scenario.noise_sigma_x", "noise covariance dimension mismatch");
  }
  const double rscale = std::max(1.0, sc.r_true.cwiseAbs().maxCoeff());
  if ((sc.r_true - sc.r_true.transpose()).cwiseAbs().maxCoeff() > 1e-9 * rscale) {
    throw ConfigError("scenario.noise_sigma_x", "noise covariance must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(sc.r_true));
  if (es.eigenvalues().minCoeff() < -1e-9 * rscale) {
    throw ConfigError("scenario.noise_sigma_x", "noise covariance must be positive semidefinite");
  }

  if (cfg.network.edge_list.empty()) {
    if (cfg.network.nodes < 2) throw ConfigError("network.nodes", "need at least two nodes");
    if (cfg.network.side <= 0.0) throw ConfigError("network.side", "must be positive");
    if (cfg.network.radius <= 0.0) throw ConfigError("network.radius", "must be positive");
  }

  if (cfg.vb_iters < 1) throw ConfigError("filter.vb_iters", "need at least one refinement");
  if (cfg.consensus_rounds < 1) throw ConfigError("filter.consensus_rounds", "need at least one round");
  if (cfg.rho <= 0.0) throw ConfigError("filter.rho", "must be positive");
  if (cfg.vb_tol < 0.0) throw ConfigError("filter.vb_tol", "must be nonnegative");
  if (cfg.init_extent_scale <= 0.0) throw ConfigError("filter.init_extent_scale", "must be positive");
  if (cfg.init_noise_scale <= 0.0) throw ConfigError("filter.init_noise_scale", "must be positive");

  if (cfg.runs < 1) throw ConfigError("experiment.runs", "need at least one run");
  if (cfg.out_dir.empty()) throw ConfigError("experiment.out", "output directory missing");
  if (cfg.threads < 0) throw ConfigError("experiment.threads", "must be nonnegative");
  if (cfg.trace_node < 1) throw ConfigError("experiment.trace_node", "nodes are 1-indexed");
  if (cfg.variant_names.empty()) throw ConfigError("experiment.variants", "no variants given");
  std::set<std::string> seen;
  for (const std::string& name : cfg.variant_names) {
    if (!seen.insert(name).second) throw ConfigError("experiment.variants", "duplicate '" + name + "'");
    AlgorithmVariant var;
    try {
      var = variant_from_name(name);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("experiment.variants", e.what());
    }
    if (var.kind == VariantKind::known_noise && !is_spd(symmetrize(sc.r_true))) {
      throw ConfigError("experiment.variants",
                        "known-r needs a positive definite noise covariance");
    }
  }
}

namespace {

struct LeanRecord {
  int scan = 0;
  int node = 0;
  int variant = 0;
  Vector center;
  Matrix extent;
  Matrix noise;
  double gwd2 = 0.0;
};

struct TraceRow {
  int scan = 0;
  int iter = 0;
  int variant = 0;
  double gwd2 = 0.0;
};

struct RunOutput {
  std::vector<LeanRecord> records;
  std::vector<TraceRow> traces;
};

Matrix noise_mean_or_zero(const NoiseBelief& nb, int d) {
  if (nb.upsilon > d + 1 + 1e-12) return nb.mean();
  return Matrix::Zero(d, d);
}

AlgorithmVariant make_variant(const std::string& name, const ScenarioConfig& sc) {
  AlgorithmVariant var = variant_from_name(name);
  if (var.kind == VariantKind::known_noise) var.r_true = symmetrize(sc.r_true);
  return var;
}

std::vector<EllipseEstimate> truth_ellipses(const GroundTruth& truth, double s) {
  std::vector<EllipseEstimate> out;
  out.reserve(truth.scans.size());
  for (const auto& scan : truth.scans) out.push_back({scan.pos, s * scan.extent});
  return out;
}

RunOutput simulate_run(int run_idx, const ExperimentConfig& cfg, const SensorNetwork& net,
                       const GroundTruth& truth, const std::vector<EllipseEstimate>& truth_ell) {
  const ScenarioConfig& sc = cfg.scenario;
  const int d = sc.d;
  MeasurementStream stream =
      sample_measurements(truth, net, sc, derive_seed(cfg.seed, 1000 + run_idx));

  RunOutput out;
  out.records.reserve(stream.size() * net.n_nodes * cfg.variant_names.size());
  for (int vi = 0; vi < static_cast<int>(cfg.variant_names.size()); ++vi) {
    DistOptions opts;
    opts.vb_iters = cfg.vb_iters;
    opts.consensus_rounds = cfg.consensus_rounds;
    opts.rho = cfg.rho;
    opts.vb_tol = cfg.vb_tol;
    opts.init_extent_scale = cfg.init_extent_scale;
    opts.init_noise_scale = cfg.init_noise_scale;
    opts.variant = make_variant(cfg.variant_names[vi], sc);

    ScanObserver observer;
    if (cfg.trace_vb) {
      int probe = cfg.trace_node - 1;
      observer = [&, vi, probe](int scan, int iter, const std::vector<NodeBelief>& beliefs) {
        const GIWState& st = beliefs[probe].state;
        EllipseEstimate est{st.position(), sc.s * st.extent_mean()};
        out.traces.push_back({scan, iter, vi, gwd_squared(est, truth_ell[scan - 1])});
      };
    }

    TrackResult result = track(stream, net, sc.model(), opts, observer);
    for (int t = 0; t < static_cast<int>(result.posteriors.size()); ++t) {
      for (int k = 0; k < net.n_nodes; ++k) {
        const NodeBelief& nb = result.posteriors[t][k];
        LeanRecord rec;
        rec.scan = t + 1;
        rec.node = k + 1;
        rec.variant = vi;
        rec.center = nb.state.position();
        rec.extent = nb.state.extent_mean();
        rec.noise = noise_mean_or_zero(nb.noise, d);
        rec.gwd2 = gwd_squared({rec.center, sc.s * rec.extent}, truth_ell[t]);
        out.records.push_back(std::move(rec));
      }
    }
  }
  return out;
}

void write_records_csv(const std::string& path, const std::vector<RunOutput>& outs,
                       const std::vector<std::string>& variants, int d) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "run,scan,node,variant";
  for (int i = 1; i <= d; ++i) os << ",center_" << i;
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j <= d; ++j) os << ",extent_" << i << "_" << j;
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j <= d; ++j) os << ",noise_" << i << "_" << j;
  os << ",gwd2\n";
  for (int r = 0; r < static_cast<int>(outs.size()); ++r) {
    for (const LeanRecord& rec : outs[r].records) {
      os << (r + 1) << ',' << rec.scan << ',' << rec.node << ',' << variants[rec.variant];
      for (int i = 0; i < d; ++i) os << ',' << fmt_full(rec.center(i));
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) os << ',' << fmt_full(rec.extent(i, j));
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) os << ',' << fmt_full(rec.noise(i, j));
      os << ',' << fmt_full(rec.gwd2) << '\n';
    }
  }
}

void write_trace_csv(const std::string& path, const std::vector<RunOutput>& outs,
                     const std::vector<std::string>& variants) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "run,scan,iteration,variant,gwd2\n";
  for (int r = 0; r < static_cast<int>(outs.size()); ++r) {
    for (const TraceRow& row : outs[r].traces) {
      os << (r + 1) << ',' << row.scan << ',' << row.iter << ',' << variants[row.variant] << ','
         << fmt_full(row.gwd2) << '\n';
    }
  }
}

void write_truth_csv(const std::string& path, const std::vector<EllipseEstimate>& ells, int d) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "scan";
  for (int i = 1; i <= d; ++i) os << ",center_" << i;
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j <= d; ++j) os << ",shape_" << i << "_" << j;
  os << '\n';
  for (int t = 0; t < static_cast<int>(ells.size()); ++t) {
    os << (t + 1);
    for (int i = 0; i < d; ++i) os << ',' << fmt_full(ells[t].center(i));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) os << ',' << fmt_full(ells[t].shape(i, j));
    os << '\n';
  }
}

}  // namespace

ExperimentResults run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const ScenarioConfig& sc = cfg.scenario;
  const int d = sc.d;

  SensorNetwork net;
  if (!cfg.network.edge_list.empty()) {
    net = load_network(cfg.network.edge_list);
  } else {
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x6e657477));
    net = generate_network(cfg.network.nodes, cfg.network.side, cfg.network.radius, rng);
  }
  if (cfg.trace_node > net.n_nodes) {
    throw ConfigError("experiment.trace_node", "exceeds node count");
  }

  GroundTruth truth = gen_trajectory(sc);
  std::vector<EllipseEstimate> truth_ell = truth_ellipses(truth, sc.s);

  std::vector<RunOutput> outs(cfg.runs);
  int workers = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, cfg.runs);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    while (true) {
      int r = next.fetch_add(1);
      if (r >= cfg.runs) return;
      try {
        outs[r] = simulate_run(r, cfg, net, truth, truth_ell);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int i = 0; i < workers; ++i) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  const int n_variants = static_cast<int>(cfg.variant_names.size());
  std::vector<std::vector<double>> sums(n_variants, std::vector<double>(sc.scan_count, 0.0));
  std::vector<std::vector<long>> counts(n_variants, std::vector<long>(sc.scan_count, 0));
  std::vector<double> total_sum(n_variants, 0.0);
  std::vector<long> total_count(n_variants, 0);
  for (const RunOutput& out : outs) {
    for (const LeanRecord& rec : out.records) {
      sums[rec.variant][rec.scan - 1] += rec.gwd2;
      counts[rec.variant][rec.scan - 1] += 1;
      total_sum[rec.variant] += rec.gwd2;
      total_count[rec.variant] += 1;
    }
  }

  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  auto join = [&](const char* name) { return (fs::path(cfg.out_dir) / name).string(); };

  ExperimentResults res;
  res.variants = cfg.variant_names;
  res.records_path = join("records.csv");
  res.rgwe_path = join("rgwe_by_scan.csv");
  res.summary_path = join("summary.json");
  res.truth_path = join("truth_ellipses.csv");
  res.network_path = join("network.txt");

  write_records_csv(res.records_path, outs, cfg.variant_names, d);
  write_truth_csv(res.truth_path, truth_ell, d);
  save_network(res.network_path, net);
  if (cfg.trace_vb) {
    res.trace_path = join("vb_trace.csv");
    write_trace_csv(res.trace_path, outs, cfg.variant_names);
  }

  {
    std::ofstream os(res.rgwe_path);
    if (!os) throw std::runtime_error("cannot write " + res.rgwe_path);
    os << "scan,variant,rgwe\n";
    for (int t = 0; t < sc.scan_count; ++t) {
      for (int vi = 0; vi < n_variants; ++vi) {
        double rg = std::sqrt(sums[vi][t] / static_cast<double>(counts[vi][t]));
        os << (t + 1) << ',' << cfg.variant_names[vi] << ',' << fmt_full(rg) << '\n';
        res.rgwe_by_scan.push_back({t + 1, cfg.variant_names[vi], rg});
      }
    }
  }
  for (int vi = 0; vi < n_variants; ++vi) {
    res.overall_rgwe[cfg.variant_names[vi]] =
        std::sqrt(total_sum[vi] / static_cast<double>(total_count[vi]));
  }

  nlohmann::json j;
  j["provenance"] = EOT_PROVENANCE;
  auto& jsc = j["config"]["scenario"];
  jsc["id"] = sc.id;
  jsc["d"] = sc.d;
  jsc["s"] = sc.s;
  jsc["scan_count"] = sc.scan_count;
  jsc["scan_time"] = sc.motion.scan_time;
  jsc["rate"] = sc.rate;
  jsc["detect_prob"] = sc.detect_prob;
  jsc["speed"] = sc.speed;
  auto& jnet = j["config"]["network"];
  jnet["nodes"] = net.n_nodes;
  std::size_t endpoints = 0;
  for (const auto& nbrs : net.adjacency) endpoints += nbrs.size();
  jnet["edges"] = static_cast<int>(endpoints / 2);
  if (!cfg.network.edge_list.empty()) {
    jnet["edge_list"] = cfg.network.edge_list;
  } else {
    jnet["side"] = cfg.network.side;
    jnet["radius"] = cfg.network.radius;
  }
  auto& jfil = j["config"]["filter"];
  jfil["vb_iters"] = cfg.vb_iters;
  jfil["consensus_rounds"] = cfg.consensus_rounds;
  jfil["rho"] = cfg.rho;
  jfil["vb_tol"] = cfg.vb_tol;
  jfil["init_extent_scale"] = cfg.init_extent_scale;
  jfil["init_noise_scale"] = cfg.init_noise_scale;
  auto& jexp = j["config"]["experiment"];
  jexp["runs"] = cfg.runs;
  jexp["seed"] = cfg.seed;
  jexp["variants"] = cfg.variant_names;
  jexp["threads"] = cfg.threads;
  jexp["trace_vb"] = cfg.trace_vb;
  jexp["trace_node"] = cfg.trace_node;
  j["overall_rgwe"] = res.overall_rgwe;
  j["files"]["records"] = "records.csv";
  j["files"]["rgwe_by_scan"] = "rgwe_by_scan.csv";
  j["files"]["truth_ellipses"] = "truth_ellipses.csv";
  j["files"]["network"] = "network.txt";
  if (cfg.trace_vb) j["files"]["vb_trace"] = "vb_trace.csv";
  {
    std::ofstream os(res.summary_path);
    if (!os) throw std::runtime_error("cannot write " + res.summary_path);
    os << j.dump(2) << '\n';
  }
  return res;
}

namespace {

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] int col(const std::string& name) const {
    for (int i = 0; i < static_cast<int>(header.size()); ++i) {
      if (header[i] == name) return i;
    }
    throw std::runtime_error("missing column '" + name + "'");
  }
};

Csv read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Csv out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (first) {
      out.header = std::move(cells);
      first = false;
    } else {
      out.rows.push_back(std::move(cells));
    }
  }
  if (first) throw std::runtime_error("empty file " + path);
  return out;
}

nlohmann::json read_summary(const std::string& results_dir) {
  std::string path = (std::filesystem::path(results_dir) / "summary.json").string();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return nlohmann::json::parse(in);
}

/// First-seen order over a column of labels.
std::vector<std::string> label_order(const Csv& csv, int col) {
  std::vector<std::string> order;
  for (const auto& row : csv.rows) {
    if (std::find(order.begin(), order.end(), row[col]) == order.end()) order.push_back(row[col]);
  }
  return order;
}

}  // namespace

void emit_rgwe_vs_scan(const std::string& results_dir, const std::string& out_path) {
  Csv csv = read_csv((std::filesystem::path(results_dir) / "records.csv").string());
  int c_scan = csv.col("scan");
  int c_var = csv.col("variant");
  int c_gwd = csv.col("gwd2");

  std::vector<std::string> variants = label_order(csv, c_var);
  std::map<std::pair<int, int>, std::pair<double, long>> acc;
  int max_scan = 0;
  for (const auto& row : csv.rows) {
    int scan = to_int("scan", row[c_scan]);
    int vi = static_cast<int>(std::find(variants.begin(), variants.end(), row[c_var]) -
                              variants.begin());
    auto& slot = acc[{scan, vi}];
    slot.first += to_double("gwd2", row[c_gwd]);
    slot.second += 1;
    max_scan = std::max(max_scan, scan);
  }

  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot write " + out_path);
  os << "scan,variant,rgwe\n";
  for (int t = 1; t <= max_scan; ++t) {
    for (int vi = 0; vi < static_cast<int>(variants.size()); ++vi) {
      auto it = acc.find({t, vi});
      if (it == acc.end()) continue;
      os << t << ',' << variants[vi] << ','
         << fmt_full(std::sqrt(it->second.first / static_cast<double>(it->second.second))) << '\n';
    }
  }
}

void emit_rgwe_vs_vb_iteration(const std::string& results_dir, const std::string& out_path) {
  std::string path = (std::filesystem::path(results_dir) / "vb_trace.csv").string();
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("no vb_trace.csv in " + results_dir +
                             "; rerun with experiment.trace_vb = true");
  }
  Csv csv = read_csv(path);
  int c_scan = csv.col("scan");
  int c_iter = csv.col("iteration");
  int c_var = csv.col("variant");
  int c_gwd = csv.col("gwd2");

  std::vector<std::string> variants = label_order(csv, c_var);
  std::map<std::tuple<int, int, int>, std::pair<double, long>> acc;
  for (const auto& row : csv.rows) {
    auto key = std::make_tuple(to_int("scan", row[c_scan]),
                               static_cast<int>(std::find(variants.begin(), variants.end(),
                                                          row[c_var]) -
                                                variants.begin()),
                               to_int("iteration", row[c_iter]));
    auto& slot = acc[key];
    slot.first += to_double("gwd2", row[c_gwd]);
    slot.second += 1;
  }

  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot write " + out_path);
  os << "scan,variant,iteration,rgwe\n";
  for (const auto& [key, slot] : acc) {
    os << std::get<0>(key) << ',' << variants[std::get<1>(key)] << ',' << std::get<2>(key) << ','
       << fmt_full(std::sqrt(slot.first / static_cast<double>(slot.second))) << '\n';
  }
}

void emit_rgwe_vs_consensus_rounds(const std::vector<std::string>& results_dirs,
                                   const std::string& out_path) {
  if (results_dirs.empty()) throw std::invalid_argument("no results directories given");
  std::vector<std::tuple<int, std::string, double>> rows;
  for (const std::string& dir : results_dirs) {
    nlohmann::json j = read_summary(dir);
    int rounds = j.at("config").at("filter").at("consensus_rounds").get<int>();
    for (const auto& [name, value] : j.at("overall_rgwe").items()) {
      rows.emplace_back(rounds, name, value.get<double>());
    }
  }
  std::sort(rows.begin(), rows.end());
  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot write " + out_path);
  os << "consensus_rounds,variant,rgwe\n";
  for (const auto& [rounds, name, value] : rows) {
    os << rounds << ',' << name << ',' << fmt_full(value) << '\n';
  }
}

std::vector<Vector> confidence_ellipse(const Vector& mu, const Matrix& shape, double coverage,
                                       int n_points) {
  if (mu.size() != 2 || shape.rows() != 2 || shape.cols() != 2) {
    throw std::invalid_argument("confidence_ellipse: planar ellipses only");
  }
  if (!(coverage > 0.0 && coverage < 1.0)) {
    throw std::invalid_argument("confidence_ellipse: coverage must be in (0, 1)");
  }
  if (n_points < 3) throw std::invalid_argument("confidence_ellipse: need at least 3 points");
  const double c = std::sqrt(-2.0 * std::log1p(-coverage));
  const Matrix root = spd_sqrt(shape);
  std::vector<Vector> pts;
  pts.reserve(n_points + 1);
  for (int i = 0; i <= n_points; ++i) {
    double theta = 2.0 * kPi * static_cast<double>(i % n_points) / n_points;
    Vector dir(2);
    dir << std::cos(theta), std::sin(theta);
    pts.push_back(mu + c * (root * dir));
  }
  return pts;
}

void emit_confidence_ellipses(const std::string& results_dir, const std::string& out_path,
                              int run, int node, int scan_stride, double coverage) {
  if (scan_stride < 1) throw std::invalid_argument("scan stride must be positive");
  nlohmann::json summary = read_summary(results_dir);
  const int d = summary.at("config").at("scenario").at("d").get<int>();
  if (d != 2) throw std::runtime_error("confidence ellipses are planar only");
  const double s = summary.at("config").at("scenario").at("s").get<double>();

  auto keep = [&](int scan) { return (scan - 1) % scan_stride == 0; };
  auto write_poly = [&](std::ofstream& os, const std::string& series, int scan, const Vector& mu,
                        const Matrix& shape) {
    auto pts = confidence_ellipse(mu, shape, coverage);
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
      os << series << ',' << scan << ',' << i << ',' << fmt_full(pts[i].x()) << ','
         << fmt_full(pts[i].y()) << '\n';
    }
  };

  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot write " + out_path);
  os << "series,scan,point,x,y\n";

  Csv truth = read_csv((std::filesystem::path(results_dir) / "truth_ellipses.csv").string());
  int tc_scan = truth.col("scan");
  int tc_c1 = truth.col("center_1");
  int tc_s11 = truth.col("shape_1_1");
  for (const auto& row : truth.rows) {
    int scan = to_int("scan", row[tc_scan]);
    if (!keep(scan)) continue;
    Vector mu(2);
    mu << to_double("x", row[tc_c1]), to_double("y", row[tc_c1 + 1]);
    Matrix shape(2, 2);
    shape << to_double("s", row[tc_s11]), to_double("s", row[tc_s11 + 1]),
        to_double("s", row[tc_s11 + 2]), to_double("s", row[tc_s11 + 3]);
    write_poly(os, "truth", scan, mu, symmetrize(shape));
  }

  Csv records = read_csv((std::filesystem::path(results_dir) / "records.csv").string());
  int c_run = records.col("run");
  int c_scan = records.col("scan");
  int c_node = records.col("node");
  int c_var = records.col("variant");
  int c_c1 = records.col("center_1");
  int c_e11 = records.col("extent_1_1");
  bool matched = false;
  for (const auto& row : records.rows) {
    if (to_int("run", row[c_run]) != run || to_int("node", row[c_node]) != node) continue;
    matched = true;
    int scan = to_int("scan", row[c_scan]);
    if (!keep(scan)) continue;
    Vector mu(2);
    mu << to_double("x", row[c_c1]), to_double("y", row[c_c1 + 1]);
    Matrix extent(2, 2);
    extent << to_double("e", row[c_e11]), to_double("e", row[c_e11 + 1]),
        to_double("e", row[c_e11 + 2]), to_double("e", row[c_e11 + 3]);
    write_poly(os, row[c_var], scan, mu, s * symmetrize(extent));
  }
  if (!matched) {
    throw std::runtime_error("no records for run " + std::to_string(run) + ", node " +
                             std::to_string(node));
  }
}

}  // namespace eot
