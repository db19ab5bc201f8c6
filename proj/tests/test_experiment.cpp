#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eot/experiment.hpp"
#include "eot/textio.hpp"

using namespace eot;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("eot_test_" + tag);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  [[nodiscard]] std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(static_cast<bool>(in), "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string cell;
  while (std::getline(in, cell, ',')) out.push_back(cell);
  return out;
}

ExperimentConfig tiny_config(const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.scenario.scan_count = 5;
  cfg.scenario.rate = 6.0;
  cfg.network.nodes = 5;
  cfg.network.side = 1.5;
  cfg.network.radius = 0.8;
  cfg.runs = 2;
  cfg.seed = 7;
  cfg.threads = 1;
  cfg.variant_names = {"dvbeot", "known-r", "no-r", "centralized"};
  cfg.out_dir = out_dir;
  return cfg;
}

std::string thrown_field(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.field;
  }
  return "<no throw>";
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("ini parsing flattens sections and strips comments") {
  std::istringstream in(
      "top = 1\n"
      "[scenario]\n"
      "rate = 12.5  # trailing comment\n"
      "id = S1 ; other comment style\n"
      "\n"
      "  [ experiment ]\n"
      "runs = 3\n");
  auto kv = parse_ini(in);
  CHECK(kv.at("top") == "1");
  CHECK(kv.at("scenario.rate") == "12.5");
  CHECK(kv.at("scenario.id") == "S1");
  CHECK(kv.at("experiment.runs") == "3");
  CHECK(kv.size() == 4);
}

TEST_CASE("ini parsing reports the offending line or key") {
  std::istringstream dup(
      "[scenario]\n"
      "rate = 1\n"
      "rate = 2\n");
  CHECK(thrown_field([&] { (void)parse_ini(dup); }) == "scenario.rate");

  std::istringstream junk(
      "[scenario]\n"
      "what is this\n");
  CHECK(thrown_field([&] { (void)parse_ini(junk); }) == "line 2");

  std::istringstream header("[scenario\n");
  CHECK(thrown_field([&] { (void)parse_ini(header); }) == "line 1");

  std::istringstream nokey("= 5\n");
  CHECK(thrown_field([&] { (void)parse_ini(nokey); }) == "line 1");
}

TEST_CASE("config overlay fills every section") {
  std::istringstream in(
      "[scenario]\n"
      "id = S1\n"
      "scan_count = 12\n"
      "rate = 7.5\n"
      "heading_deg = 90\n"
      "noise_sigma_x = 30\n"
      "noise_sigma_y = 40\n"
      "accel_rms_g = 2\n"
      "segments = straight:100, turn:45:50\n"
      "[network]\n"
      "nodes = 6\n"
      "radius = 1.1\n"
      "[filter]\n"
      "vb_iters = 9\n"
      "consensus_rounds = 17\n"
      "init_noise_scale = 5000\n"
      "[experiment]\n"
      "runs = 4\n"
      "seed = 99\n"
      "trace_vb = yes\n"
      "variants = dvbeot, known-r\n");
  ExperimentConfig cfg = config_from_ini(in);
  CHECK(cfg.scenario.scan_count == 12);
  CHECK(cfg.scenario.rate == 7.5);
  CHECK(cfg.scenario.heading == doctest::Approx(kPi / 2).epsilon(1e-14));
  CHECK(cfg.scenario.r_true(0, 0) == 900.0);
  CHECK(cfg.scenario.r_true(1, 1) == 1600.0);
  CHECK(cfg.scenario.r_true(0, 1) == 0.0);
  CHECK(cfg.scenario.motion.accel_rms == doctest::Approx(2.0 * kGravity).epsilon(1e-14));
  REQUIRE(cfg.scenario.segments.size() == 2);
  CHECK(cfg.scenario.segments[0].duration == 100.0);
  CHECK(cfg.scenario.segments[0].angle == 0.0);
  CHECK(cfg.scenario.segments[1].duration == 50.0);
  CHECK(cfg.scenario.segments[1].angle == doctest::Approx(kPi / 4).epsilon(1e-14));
  CHECK(cfg.network.nodes == 6);
  CHECK(cfg.network.radius == 1.1);
  CHECK(cfg.vb_iters == 9);
  CHECK(cfg.consensus_rounds == 17);
  CHECK(cfg.init_noise_scale == 5000.0);
  CHECK(cfg.runs == 4);
  CHECK(cfg.seed == 99);
  CHECK(cfg.trace_vb);
  CHECK(cfg.variant_names == std::vector<std::string>{"dvbeot", "known-r"});
}

TEST_CASE("config rejects typos and malformed values") {
  std::istringstream typo("[filter]\nvb_itters = 3\n");
  CHECK(thrown_field([&] { (void)config_from_ini(typo); }) == "filter.vb_itters");

  std::istringstream text("[scenario]\nrate = fast\n");
  CHECK(thrown_field([&] { (void)config_from_ini(text); }) == "scenario.rate");

  std::istringstream seg("[scenario]\nsegments = loop:10\n");
  CHECK(thrown_field([&] { (void)config_from_ini(seg); }) == "scenario.segments");

  std::istringstream scatter("[scenario]\nscatter = square\n");
  CHECK(thrown_field([&] { (void)config_from_ini(scatter); }) == "scenario.scatter");

  std::istringstream id("[scenario]\nid = S9\n");
  CHECK(thrown_field([&] { (void)config_from_ini(id); }) == "scenario.id");
}

TEST_CASE("validation pins down the offending field") {
  TempDir tmp("validate");
  ExperimentConfig good = tiny_config(tmp.sub("out"));
  CHECK_NOTHROW(validate_config(good));

  ExperimentConfig bad = good;
  bad.scenario.rate = 0.0;
  CHECK(thrown_field([&] { validate_config(bad); }) == "scenario.rate");

  bad = good;
  bad.network.nodes = 1;
  CHECK(thrown_field([&] { validate_config(bad); }) == "network.nodes");

  bad = good;
  bad.rho = 0.0;
  CHECK(thrown_field([&] { validate_config(bad); }) == "filter.rho");

  bad = good;
  bad.variant_names = {"dvbeot", "dvbeot"};
  CHECK(thrown_field([&] { validate_config(bad); }) == "experiment.variants");

  bad = good;
  bad.variant_names = {"known-r"};
  bad.scenario.r_true = Matrix::Zero(2, 2);
  CHECK(thrown_field([&] { validate_config(bad); }) == "experiment.variants");

  bad = good;
  bad.trace_node = 0;
  CHECK(thrown_field([&] { validate_config(bad); }) == "experiment.trace_node");
}

TEST_CASE("loading a missing config names the file") {
  TempDir tmp("missing");
  CHECK(thrown_field([&] { (void)load_config(tmp.sub("nope.ini")); }) == "config");
}

TEST_CASE("a small study writes the full result set") {
  TempDir tmp("study");
  ExperimentConfig cfg = tiny_config(tmp.sub("out"));
  ExperimentResults res = run_experiment(cfg);

  CHECK(res.variants == cfg.variant_names);
  const int expected_rows = cfg.runs * cfg.scenario.scan_count * cfg.network.nodes *
                            static_cast<int>(cfg.variant_names.size());
  auto records = lines_of(slurp(res.records_path));
  REQUIRE(static_cast<int>(records.size()) == expected_rows + 1);
  CHECK(records[0] ==
        "run,scan,node,variant,center_1,center_2,extent_1_1,extent_1_2,extent_2_1,extent_2_2,"
        "noise_1_1,noise_1_2,noise_2_1,noise_2_2,gwd2");

  auto rgwe_lines = lines_of(slurp(res.rgwe_path));
  REQUIRE(static_cast<int>(rgwe_lines.size()) ==
          cfg.scenario.scan_count * static_cast<int>(cfg.variant_names.size()) + 1);
  CHECK(static_cast<int>(res.rgwe_by_scan.size()) ==
        cfg.scenario.scan_count * static_cast<int>(cfg.variant_names.size()));

  auto truth_lines = lines_of(slurp(res.truth_path));
  CHECK(static_cast<int>(truth_lines.size()) == cfg.scenario.scan_count + 1);

  SensorNetwork net = load_network(res.network_path);
  CHECK(net.n_nodes == cfg.network.nodes);

  // the summary mirrors the in-memory aggregate
  nlohmann::json j = nlohmann::json::parse(slurp(res.summary_path));
  CHECK(j.at("files").at("records").get<std::string>() == "records.csv");
  CHECK(j.at("config").at("experiment").at("runs").get<int>() == cfg.runs);
  for (const auto& name : cfg.variant_names) {
    const double overall = res.overall_rgwe.at(name);
    CHECK(std::isfinite(overall));
    CHECK(overall > 0.0);
    CHECK(j.at("overall_rgwe").at(name).get<double>() == doctest::Approx(overall).epsilon(1e-12));
  }

  // recompute the overall error from the records file
  std::map<std::string, std::pair<double, long>> acc;
  for (std::size_t i = 1; i < records.size(); ++i) {
    auto cells = split_csv(records[i]);
    REQUIRE(cells.size() == 15);
    auto& slot = acc[cells[3]];
    slot.first += std::strtod(cells.back().c_str(), nullptr);
    slot.second += 1;
  }
  for (const auto& name : cfg.variant_names) {
    const auto& slot = acc.at(name);
    CHECK(std::sqrt(slot.first / static_cast<double>(slot.second)) ==
          doctest::Approx(res.overall_rgwe.at(name)).epsilon(1e-12));
  }
}

TEST_CASE("identical configurations rewrite identical bytes") {
  TempDir tmp("repeat");
  ExperimentConfig a = tiny_config(tmp.sub("a"));
  ExperimentConfig b = tiny_config(tmp.sub("b"));
  ExperimentResults ra = run_experiment(a);
  ExperimentResults rb = run_experiment(b);
  CHECK(slurp(ra.records_path) == slurp(rb.records_path));
  CHECK(slurp(ra.rgwe_path) == slurp(rb.rgwe_path));
  CHECK(slurp(ra.truth_path) == slurp(rb.truth_path));
  CHECK(slurp(ra.network_path) == slurp(rb.network_path));
  CHECK(slurp(ra.summary_path) == slurp(rb.summary_path));
}

TEST_CASE("the worker count never changes the numbers") {
  TempDir tmp("threads");
  ExperimentConfig one = tiny_config(tmp.sub("one"));
  ExperimentConfig two = tiny_config(tmp.sub("two"));
  two.threads = 2;
  ExperimentResults r1 = run_experiment(one);
  ExperimentResults r2 = run_experiment(two);
  CHECK(slurp(r1.records_path) == slurp(r2.records_path));
  CHECK(slurp(r1.rgwe_path) == slurp(r2.rgwe_path));
}

TEST_CASE("full precision floats survive the text round trip") {
  for (double v : {3.141592653589793, 1.0 / 3.0, 1e-300, 6.02214076e23, -0.1, 12345.6789}) {
    CHECK(std::strtod(fmt_full(v).c_str(), nullptr) == v);
  }
}

TEST_CASE("the per-scan curve derives verbatim from the records") {
  TempDir tmp("curve");
  ExperimentConfig cfg = tiny_config(tmp.sub("out"));
  ExperimentResults res = run_experiment(cfg);
  const std::string out = tmp.sub("curve.csv");
  emit_rgwe_vs_scan(cfg.out_dir, out);
  CHECK(slurp(out) == slurp(res.rgwe_path));
}

TEST_CASE("refinement traces gate the per-iteration curve") {
  TempDir tmp("trace");
  ExperimentConfig cfg = tiny_config(tmp.sub("out"));
  cfg.variant_names = {"dvbeot"};
  cfg.runs = 1;
  cfg.trace_vb = true;
  cfg.trace_node = 2;
  ExperimentResults res = run_experiment(cfg);
  REQUIRE(!res.trace_path.empty());
  auto trace_lines = lines_of(slurp(res.trace_path));
  CHECK(static_cast<int>(trace_lines.size()) == cfg.scenario.scan_count * cfg.vb_iters + 1);
  CHECK(trace_lines[0] == "run,scan,iteration,variant,gwd2");

  const std::string out = tmp.sub("iters.csv");
  emit_rgwe_vs_vb_iteration(cfg.out_dir, out);
  auto curve_lines = lines_of(slurp(out));
  CHECK(static_cast<int>(curve_lines.size()) == cfg.scenario.scan_count * cfg.vb_iters + 1);
  CHECK(curve_lines[0] == "scan,variant,iteration,rgwe");
  for (std::size_t i = 1; i < curve_lines.size(); ++i) {
    auto cells = split_csv(curve_lines[i]);
    REQUIRE(cells.size() == 4);
    CHECK(cells[1] == "dvbeot");
    CHECK(std::strtod(cells[3].c_str(), nullptr) > 0.0);
  }

  // a directory without traces explains how to get them
  ExperimentConfig plain = tiny_config(tmp.sub("plain"));
  plain.variant_names = {"dvbeot"};
  plain.runs = 1;
  (void)run_experiment(plain);
  bool told = false;
  try {
    emit_rgwe_vs_vb_iteration(plain.out_dir, tmp.sub("never.csv"));
  } catch (const std::runtime_error& e) {
    told = std::string(e.what()).find("experiment.trace_vb") != std::string::npos;
  }
  CHECK(told);
}

TEST_CASE("round sweeps collate overall errors across directories") {
  TempDir tmp("rounds");
  ExperimentConfig five = tiny_config(tmp.sub("c5"));
  five.variant_names = {"dvbeot"};
  five.runs = 1;
  five.scenario.scan_count = 3;
  five.consensus_rounds = 5;
  ExperimentConfig thirty = five;
  thirty.out_dir = tmp.sub("c30");
  thirty.consensus_rounds = 30;
  ExperimentResults r5 = run_experiment(five);
  ExperimentResults r30 = run_experiment(thirty);

  const std::string out = tmp.sub("rounds.csv");
  emit_rgwe_vs_consensus_rounds({thirty.out_dir, five.out_dir}, out);
  auto rows = lines_of(slurp(out));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "consensus_rounds,variant,rgwe");
  auto first = split_csv(rows[1]);
  auto second = split_csv(rows[2]);
  CHECK(first[0] == "5");
  CHECK(second[0] == "30");
  CHECK(std::strtod(first[2].c_str(), nullptr) ==
        doctest::Approx(r5.overall_rgwe.at("dvbeot")).epsilon(1e-12));
  CHECK(std::strtod(second[2].c_str(), nullptr) ==
        doctest::Approx(r30.overall_rgwe.at("dvbeot")).epsilon(1e-12));
}

TEST_CASE("confidence contours close on themselves at the right radius") {
  Vector mu = Vector::Zero(2);
  Matrix shape = Matrix::Identity(2, 2);
  auto pts = confidence_ellipse(mu, shape, 0.9, 64);
  REQUIRE(pts.size() == 65);
  CHECK((pts.front() - pts.back()).norm() == 0.0);
  for (const auto& p : pts) {
    CHECK(p.norm() == doctest::Approx(2.1459660262893476).epsilon(1e-12));
  }
  CHECK_THROWS_AS((void)confidence_ellipse(mu, shape, 1.0, 64), std::invalid_argument);
  CHECK_THROWS_AS((void)confidence_ellipse(Vector::Zero(3), shape, 0.9, 64),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)confidence_ellipse(mu, shape, 0.9, 2), std::invalid_argument);
}

TEST_CASE("ellipse exports cover truth and estimates scan by scan") {
  TempDir tmp("ellipses");
  ExperimentConfig cfg = tiny_config(tmp.sub("out"));
  cfg.variant_names = {"dvbeot"};
  cfg.runs = 1;
  (void)run_experiment(cfg);

  const std::string out = tmp.sub("ellipses.csv");
  emit_confidence_ellipses(cfg.out_dir, out, 1, 2, 2);
  auto rows = lines_of(slurp(out));
  CHECK(rows[0] == "series,scan,point,x,y");
  int truth_rows = 0;
  int est_rows = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    auto cells = split_csv(rows[i]);
    REQUIRE(cells.size() == 5);
    if (cells[0] == "truth") {
      ++truth_rows;
    } else {
      CHECK(cells[0] == "dvbeot");
      ++est_rows;
    }
    CHECK(std::isfinite(std::strtod(cells[3].c_str(), nullptr)));
    CHECK(std::isfinite(std::strtod(cells[4].c_str(), nullptr)));
  }
  // scans 1, 3, 5 survive the stride; each contour has 65 vertices
  CHECK(truth_rows == 3 * 65);
  CHECK(est_rows == 3 * 65);

  CHECK_THROWS_AS(emit_confidence_ellipses(cfg.out_dir, tmp.sub("never.csv"), 9, 1, 1),
                  std::runtime_error);
}

TEST_CASE("a network file on disk takes precedence over generation") {
  TempDir tmp("edges");
  const std::string net_path = tmp.sub("net.txt");
  save_network(net_path, complete_graph(4));
  ExperimentConfig cfg = tiny_config(tmp.sub("out"));
  cfg.variant_names = {"dvbeot"};
  cfg.runs = 1;
  cfg.network.edge_list = net_path;
  ExperimentResults res = run_experiment(cfg);
  nlohmann::json j = nlohmann::json::parse(slurp(res.summary_path));
  CHECK(j.at("config").at("network").at("edge_list").get<std::string>() == net_path);
  CHECK(j.at("config").at("network").at("nodes").get<int>() == 4);
  CHECK(j.at("config").at("network").at("edges").get<int>() == 6);

  ExperimentConfig probe = cfg;
  probe.out_dir = tmp.sub("probe");
  probe.trace_node = 99;
  CHECK(thrown_field([&] { (void)run_experiment(probe); }) == "experiment.trace_node");
}

}  // TEST_SUITE
