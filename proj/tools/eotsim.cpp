#include <cstdint>
#include <cstdio>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eot/consensus.hpp"
#include "eot/experiment.hpp"
#include "eot/matstat.hpp"

namespace {

std::vector<std::string> split_names(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    auto next = csv.find(',', pos);
    if (next == std::string::npos) next = csv.size();
    std::string token = csv.substr(pos, next - pos);
    auto b = token.find_first_not_of(" \t");
    auto e = token.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(token.substr(b, e - b + 1));
    pos = next + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed extended-object tracking simulator"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "execute a Monte-Carlo experiment");
  std::string run_config;
  std::string run_scenario;
  std::string run_variants;
  std::string run_out;
  std::uint64_t run_seed = 1;
  int run_runs = 1;
  int run_threads = -1;
  bool run_trace = false;
  int run_trace_node = 0;
  run_cmd->add_option("--config", run_config, "experiment file; flags override its values");
  run_cmd->add_option("--seed", run_seed, "master seed")->required();
  run_cmd->add_option("--scenario", run_scenario, "S1, S2 or custom")->required();
  run_cmd->add_option("--variants", run_variants,
                      "comma list: dvbeot,known-r,no-r,non-coop,centralized")
      ->required();
  run_cmd->add_option("--runs", run_runs, "Monte-Carlo repetitions")->required();
  run_cmd->add_option("--out", run_out, "results directory")->required();
  run_cmd->add_option("--threads", run_threads, "worker threads (0 = hardware count)");
  run_cmd->add_flag("--trace-vb", run_trace, "record per-refinement errors at one node");
  run_cmd->add_option("--trace-node", run_trace_node, "probe node for --trace-vb (1-indexed)");
  run_cmd->callback([&] {
    eot::ExperimentConfig cfg;
    if (!run_config.empty()) cfg = eot::load_config(run_config);
    if (run_scenario != cfg.scenario.id) {
      try {
        cfg.scenario = eot::scenario_defaults(run_scenario);
      } catch (const std::invalid_argument& e) {
        throw eot::ConfigError("--scenario", e.what());
      }
    }
    cfg.seed = run_seed;
    cfg.variant_names = split_names(run_variants);
    cfg.runs = run_runs;
    cfg.out_dir = run_out;
    if (run_threads >= 0) cfg.threads = run_threads;
    if (run_trace) cfg.trace_vb = true;
    if (run_trace_node > 0) cfg.trace_node = run_trace_node;

    eot::ExperimentResults res = eot::run_experiment(cfg);
    std::printf("wrote %s and companions under %s\n", res.records_path.c_str(),
                cfg.out_dir.c_str());
    std::printf("overall rgwe over %d run(s):\n", cfg.runs);
    for (const std::string& name : res.variants) {
      std::printf("  %-12s %.6g\n", name.c_str(), res.overall_rgwe.at(name));
    }
  });

  // plot-data
  auto* plot_cmd = app.add_subcommand("plot-data", "post-process a results directory");
  std::vector<std::string> plot_results;
  std::string plot_kind;
  std::string plot_out;
  int plot_run = 1;
  int plot_node = 1;
  int plot_stride = 10;
  double plot_coverage = 0.9;
  plot_cmd->add_option("--results", plot_results, "results directory (repeatable for rgwe-vs-rounds)")
      ->required();
  plot_cmd
      ->add_option("--kind", plot_kind,
                   "rgwe-vs-scan | rgwe-vs-iteration | rgwe-vs-rounds | confidence-ellipse")
      ->required();
  plot_cmd->add_option("--out", plot_out, "output file")->required();
  plot_cmd->add_option("--run", plot_run, "confidence-ellipse: run selector (1-indexed)");
  plot_cmd->add_option("--node", plot_node, "confidence-ellipse: node selector (1-indexed)");
  plot_cmd->add_option("--stride", plot_stride, "confidence-ellipse: keep every n-th scan");
  plot_cmd->add_option("--coverage", plot_coverage, "confidence-ellipse: probability mass");
  plot_cmd->callback([&] {
    auto single_dir = [&]() -> const std::string& {
      if (plot_results.size() != 1) {
        throw eot::ConfigError("--results", "this kind takes exactly one directory");
      }
      return plot_results.front();
    };
    if (plot_kind == "rgwe-vs-scan") {
      eot::emit_rgwe_vs_scan(single_dir(), plot_out);
    } else if (plot_kind == "rgwe-vs-iteration") {
      eot::emit_rgwe_vs_vb_iteration(single_dir(), plot_out);
    } else if (plot_kind == "rgwe-vs-rounds") {
      eot::emit_rgwe_vs_consensus_rounds(plot_results, plot_out);
    } else if (plot_kind == "confidence-ellipse") {
      eot::emit_confidence_ellipses(single_dir(), plot_out, plot_run, plot_node, plot_stride,
                                    plot_coverage);
    } else {
      throw eot::ConfigError("--kind", "unknown kind '" + plot_kind + "'");
    }
    std::printf("wrote %s\n", plot_out.c_str());
  });

  // gen-network
  auto* net_cmd = app.add_subcommand("gen-network", "draw a random geometric sensor network");
  int net_nodes = 20;
  double net_side = 2.5;
  double net_radius = 0.8;
  std::uint64_t net_seed = 1;
  std::string net_out;
  net_cmd->add_option("--nodes", net_nodes, "node count");
  net_cmd->add_option("--side", net_side, "deployment square side, km");
  net_cmd->add_option("--radius", net_radius, "communication radius, km");
  net_cmd->add_option("--seed", net_seed, "placement seed");
  net_cmd->add_option("--out", net_out, "edge-list file")->required();
  net_cmd->callback([&] {
    std::mt19937_64 rng(net_seed);
    eot::SensorNetwork net = eot::generate_network(net_nodes, net_side, net_radius, rng);
    eot::save_network(net_out, net);
    std::printf("wrote %s: %d nodes, %d edges\n", net_out.c_str(), net.n_nodes,
                static_cast<int>(net.adjacency.size() / 2));
  });

  // validate
  auto* check_cmd = app.add_subcommand("validate", "check an experiment file");
  std::string check_config;
  check_cmd->add_option("--config", check_config, "experiment file")->required();
  check_cmd->callback([&] {
    eot::ExperimentConfig cfg = eot::load_config(check_config);
    eot::validate_config(cfg);
    std::string names;
    for (const std::string& n : cfg.variant_names) {
      if (!names.empty()) names += ",";
      names += n;
    }
    std::printf("%s: ok (scenario %s, %d scans, %d run(s), variants %s)\n", check_config.c_str(),
                cfg.scenario.id.c_str(), cfg.scenario.scan_count, cfg.runs, names.c_str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const eot::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
