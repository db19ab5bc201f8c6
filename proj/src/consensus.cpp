#include "eot/consensus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace eot {

bool is_connected(const SensorNetwork& net) {
  if (net.n_nodes <= 0) return false;
  std::vector<char> seen(net.n_nodes, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    const int k = stack.back();
    stack.pop_back();
    for (int j : net.adjacency[k])
      if (!seen[j]) {
        seen[j] = 1;
        ++reached;
        stack.push_back(j);
      }
  }
  return reached == net.n_nodes;
}

SensorNetwork generate_network(int n, double side, double radius, std::mt19937_64& rng) {
  if (n < 2) throw std::invalid_argument("generate_network: need at least two nodes");
  if (!(side > 0.0) || !(radius > 0.0))
    throw std::invalid_argument("generate_network: side and radius must be positive");
  std::uniform_real_distribution<double> coord(0.0, side);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    SensorNetwork net;
    net.n_nodes = n;
    net.adjacency.assign(n, {});
    net.positions.resize(n);
    for (int k = 0; k < n; ++k) {
      const double x = coord(rng);
      const double y = coord(rng);
      net.positions[k] = Eigen::Vector2d(x, y);
    }
    for (int k = 0; k < n; ++k)
      for (int l = k + 1; l < n; ++l)
        if ((net.positions[k] - net.positions[l]).norm() <= radius) {
          net.adjacency[k].push_back(l);
          net.adjacency[l].push_back(k);
        }
    if (is_connected(net)) return net;
  }
  throw std::runtime_error("generate_network: no connected draw within 1000 attempts");
}

SensorNetwork complete_graph(int n) {
  if (n < 1) throw std::invalid_argument("complete_graph: need at least one node");
  SensorNetwork net;
  net.n_nodes = n;
  net.adjacency.assign(n, {});
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      if (l != k) net.adjacency[k].push_back(l);
  return net;
}

int stat_vector_length(int d) { return d + 2 * d * d + 1; }

Vector pack_stats(const StatPack& p) {
  const int d = static_cast<int>(p.z_sum.size());
  if (p.zz_sum.rows() != d || p.resid_sum.rows() != d)
    throw std::invalid_argument("pack_stats: block dimension mismatch");
  Vector v(stat_vector_length(d));
  v.head(d) = p.z_sum;
  int at = d;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) v(at++) = p.zz_sum(i, j);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) v(at++) = p.resid_sum(i, j);
  v(at) = p.count;
  return v;
}

StatPack unpack_stats(const Vector& v, int d) {
  if (v.size() != stat_vector_length(d))
    throw std::invalid_argument("unpack_stats: payload length mismatch");
  StatPack p;
  p.z_sum = v.head(d);
  p.zz_sum.resize(d, d);
  p.resid_sum.resize(d, d);
  int at = d;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) p.zz_sum(i, j) = v(at++);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) p.resid_sum(i, j) = v(at++);
  p.count = v(at);
  p.zz_sum = symmetrize(p.zz_sum);
  p.resid_sum = symmetrize(p.resid_sum);
  return p;
}

namespace {

void check_payloads(const SensorNetwork& net, const std::vector<Vector>& omega) {
  if (static_cast<int>(omega.size()) != net.n_nodes)
    throw std::invalid_argument("consensus: one payload per node required");
  for (const auto& w : omega)
    if (w.size() != omega.front().size())
      throw std::invalid_argument("consensus: payload lengths differ");
}

}  // namespace

AdmmState make_admm_state(const std::vector<Vector>& omega, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("make_admm_state: rho must be positive");
  AdmmState st;
  st.rho = rho;
  st.phi = omega;
  st.lambda.assign(omega.size(), Vector::Zero(omega.empty() ? 0 : omega.front().size()));
  return st;
}

void admm_round(AdmmState& state, const SensorNetwork& net, const std::vector<Vector>& omega) {
  check_payloads(net, omega);
  if (state.phi.size() != omega.size() || state.lambda.size() != omega.size())
    throw std::invalid_argument("admm_round: state size mismatch");
  const double rho = state.rho;
  std::vector<Vector> next(net.n_nodes);
  for (int k = 0; k < net.n_nodes; ++k) {
    Vector acc = omega[k] - 2.0 * state.lambda[k];
    for (int j : net.adjacency[k]) acc += rho * (state.phi[k] + state.phi[j]);
    next[k] = acc / (1.0 + 2.0 * rho * net.degree(k));
  }
  for (int k = 0; k < net.n_nodes; ++k) {
    Vector dual = Vector::Zero(omega.front().size());
    for (int j : net.adjacency[k]) dual += next[k] - next[j];
    state.lambda[k] += 0.5 * rho * dual;
  }
  state.phi = std::move(next);
}

std::vector<Vector> run_consensus(const SensorNetwork& net, const std::vector<Vector>& omega,
                                  double rho, int rounds) {
  check_payloads(net, omega);
  if (rounds < 1) throw std::invalid_argument("run_consensus: rounds must be positive");
  AdmmState st = make_admm_state(omega, rho);
  for (int l = 0; l < rounds; ++l) admm_round(st, net, omega);
  return st.phi;
}

std::vector<Vector> exact_consensus(const std::vector<Vector>& omega) {
  if (omega.empty()) throw std::invalid_argument("exact_consensus: empty payload set");
  Vector mean = Vector::Zero(omega.front().size());
  for (const auto& w : omega) mean += w;
  mean /= static_cast<double>(omega.size());
  return std::vector<Vector>(omega.size(), mean);
}

void write_edge_list(std::ostream& os, const SensorNetwork& net) {
  os << net.n_nodes << "\n";
  for (int k = 0; k < net.n_nodes; ++k)
    for (int l : net.adjacency[k])
      if (l > k) os << k + 1 << " " << l + 1 << "\n";
  char buf[96];
  for (std::size_t k = 0; k < net.positions.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu %.17g %.17g", k + 1, net.positions[k].x(),
                  net.positions[k].y());
    os << buf << "\n";
  }
}

SensorNetwork read_edge_list(std::istream& is) {
  std::string line;
  SensorNetwork net;
  bool have_count = false;
  std::vector<Eigen::Vector2d> positions;
  std::vector<char> has_position;
  int positions_seen = 0;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    if (!have_count) {
      int n = 0;
      if (!(ls >> n)) continue;  // skip leading blanks/comments
      if (n < 1) throw std::runtime_error("read_edge_list: node count must be positive");
      net.n_nodes = n;
      net.adjacency.assign(n, {});
      positions.assign(n, Eigen::Vector2d::Zero());
      has_position.assign(n, 0);
      have_count = true;
      continue;
    }
    double a, b, c;
    ls >> a >> b;
    if (!ls) continue;  // blank line
    if (ls >> c) {
      // three numbers: a node position "k x y"
      const int k = static_cast<int>(a);
      if (k < 1 || k > net.n_nodes || a != k)
        throw std::runtime_error("read_edge_list: bad node index in position line");
      positions[k - 1] = Eigen::Vector2d(b, c);
      has_position[k - 1] = 1;
      ++positions_seen;
      continue;
    }
    const int k = static_cast<int>(a);
    const int l = static_cast<int>(b);
    if (k != a || l != b || k < 1 || l < 1 || k > net.n_nodes || l > net.n_nodes || k == l)
      throw std::runtime_error("read_edge_list: bad edge line");
    net.adjacency[k - 1].push_back(l - 1);
    net.adjacency[l - 1].push_back(k - 1);
  }
  if (!have_count) throw std::runtime_error("read_edge_list: missing node count");
  for (auto& nbrs : net.adjacency) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  if (positions_seen == net.n_nodes) net.positions = std::move(positions);
  if (!is_connected(net)) throw std::runtime_error("read_edge_list: graph is not connected");
  return net;
}

void save_network(const std::string& path, const SensorNetwork& net) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_network: cannot open " + path);
  write_edge_list(os, net);
}

SensorNetwork load_network(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_network: cannot open " + path);
  return read_edge_list(is);
}

}  // namespace eot
