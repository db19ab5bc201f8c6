#pragma once

#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "eot/matstat.hpp"

namespace eot {

/// Undirected communication graph. Nodes are 0-indexed in memory and
/// 1-indexed in the edge-list file format.
struct SensorNetwork {
  int n_nodes = 0;
  std::vector<std::vector<int>> adjacency;  // sorted neighbor lists, no self loops
  std::vector<Eigen::Vector2d> positions;   // empty when geometry is unknown

  [[nodiscard]] int degree(int k) const { return static_cast<int>(adjacency[k].size()); }
};

[[nodiscard]] bool is_connected(const SensorNetwork& net);

/// Random geometric graph: n nodes uniform on [0, side]^2, an edge whenever
/// two nodes are within `radius`. Redraws until connected, up to 1000
/// attempts, then throws std::runtime_error.
[[nodiscard]] SensorNetwork generate_network(int n, double side, double radius,
                                             std::mt19937_64& rng);

[[nodiscard]] SensorNetwork complete_graph(int n);

/// Raw per-node scan sums exchanged over the network: sum of latent means,
/// sum of latent second moments, sum of expected measurement residual outer
/// products, and the measurement count.
struct StatPack {
  Vector z_sum;
  Matrix zz_sum;
  Matrix resid_sum;
  double count = 0.0;
};

/// Consensus payload length: d + 2 d^2 + 1.
[[nodiscard]] int stat_vector_length(int d);

/// Flatten to [z_sum | zz_sum row-major | resid_sum row-major | count].
[[nodiscard]] Vector pack_stats(const StatPack& p);

/// Inverse of pack_stats; the matrix blocks are symmetrized on the way out.
[[nodiscard]] StatPack unpack_stats(const Vector& v, int d);

/// Synchronous ADMM averaging state: per-node primal iterate and
/// accumulated dual, plus the penalty parameter.
struct AdmmState {
  std::vector<Vector> phi;
  std::vector<Vector> lambda;
  double rho = 0.5;
};

[[nodiscard]] AdmmState make_admm_state(const std::vector<Vector>& omega, double rho);

/// One synchronous sweep: every node refreshes its primal from last round's
/// neighborhood, then the duals absorb the remaining disagreement.
void admm_round(AdmmState& state, const SensorNetwork& net, const std::vector<Vector>& omega);

/// Run `rounds` sweeps from phi = omega, lambda = 0; returns the primal
/// iterates, which converge to the network-wide average of omega.
[[nodiscard]] std::vector<Vector> run_consensus(const SensorNetwork& net,
                                                const std::vector<Vector>& omega, double rho,
                                                int rounds);

/// The infinite-round limit: every node gets the exact average.
[[nodiscard]] std::vector<Vector> exact_consensus(const std::vector<Vector>& omega);

// Edge-list text format: an integer node count on the first line, then one
// "k l" pair per edge (1-indexed, k < l) and optionally one "k x y" line per
// node position. '#' starts a comment. See the README for examples.
void write_edge_list(std::ostream& os, const SensorNetwork& net);
[[nodiscard]] SensorNetwork read_edge_list(std::istream& is);
void save_network(const std::string& path, const SensorNetwork& net);
[[nodiscard]] SensorNetwork load_network(const std::string& path);

}  // namespace eot
