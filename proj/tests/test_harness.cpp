#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "partcert/harness.hpp"
#include "partcert/io.hpp"
#include "partcert/oracles.hpp"
#include "partcert/util.hpp"

using namespace partcert;

namespace {

std::string fixture(const std::string& name) {
  return std::string(PARTCERT_FIXTURE_DIR) + "/" + name;
}

Eigen::VectorXd vec(std::initializer_list<double> vals) {
  Eigen::VectorXd v((int)vals.size());
  int i = 0;
  for (double x : vals) v(i++) = x;
  return v;
}

// mirrors the harness' seeded gaussian draws
Eigen::VectorXd normal_vec(std::uint64_t seed, int dim) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = dist(gen);
  return v;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() / "partcert_harness_test";
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string prefix(const std::string& name) const { return (path / name).string(); }
};

// value cells keyed by (first key column, method column)
std::map<std::pair<std::string, std::string>, double> value_map(const ResultTable& t,
                                                               int key_col, int method_col,
                                                               int value_col) {
  std::map<std::pair<std::string, std::string>, double> out;
  for (const auto& row : t.rows)
    out[{row[key_col], row[method_col]}] = std::stod(row[value_col]);
  return out;
}

}  // namespace

TEST_CASE("experiment names round trip") {
  for (Experiment e : {Experiment::Pointwise, Experiment::WidthSweep, Experiment::DepthSweep,
                       Experiment::NpFixture})
    CHECK(experiment_from_name(experiment_name(e)) == e);
  CHECK(experiment_name(Experiment::WidthSweep) == "width-sweep");
  CHECK_THROWS_AS(experiment_from_name("pointwise-sweep"), std::invalid_argument);
}

TEST_CASE("config json round trip and validation") {
  const std::string text = R"({
    "version": 1,
    "experiment": "pointwise",
    "network": "net.json",
    "nominal_count": 4,
    "epsilon": 0.25,
    "threshold": -0.5,
    "methods": ["baseline", "lp", "plp-subopt-2"],
    "seed": 42,
    "output": "out/run",
    "workers": 3,
    "dataset": "data.csv",
    "part_mode": "interval",
    "lp_solver": {"opt_tol": 1e-6},
    "sdp_solver": {"max_iters": 50}
  })";
  RunConfig cfg = config_from_json(text);
  CHECK(cfg.experiment == Experiment::Pointwise);
  CHECK(cfg.network_file == "net.json");
  CHECK(cfg.nominal_count == 4);
  CHECK(cfg.epsilon == 0.25);
  CHECK(cfg.threshold == -0.5);
  CHECK(cfg.methods == std::vector<std::string>{"baseline", "lp", "plp-subopt-2"});
  CHECK(cfg.seed == 42);
  CHECK(cfg.output == "out/run");
  CHECK(cfg.workers == 3);
  CHECK(cfg.dataset_file == "data.csv");
  REQUIRE(cfg.part_mode.has_value());
  CHECK(*cfg.part_mode == BoundMode::Interval);
  CHECK(cfg.lp_solver.opt_tol == 1e-6);
  CHECK(cfg.lp_solver.feas_tol == lp_cert_config().feas_tol);
  CHECK(cfg.sdp_solver.max_iters == 50);

  const std::string sweep = R"({
    "experiment": "width-sweep",
    "widths": [2, 3],
    "sweep_hidden": 4,
    "depths": [1, 2],
    "np_trials": 5,
    "shape": [3, 4, 2],
    "dist": "uniform",
    "cost": [1.0, -1.0],
    "nominals": [[0.5, 0.5, 0.5]]
  })";
  RunConfig sc = config_from_json(sweep);
  CHECK(sc.widths == std::vector<int>{2, 3});
  CHECK(sc.sweep_hidden == 4);
  CHECK(sc.depths == std::vector<int>{1, 2});
  CHECK(sc.np_trials == 5);
  CHECK(sc.shape == std::vector<int>{3, 4, 2});
  CHECK(sc.dist == WeightDist::Uniform);
  CHECK(sc.cost.size() == 2);
  CHECK(sc.nominals.size() == 1);
}

TEST_CASE("config json rejects malformed input") {
  CHECK_THROWS_AS(config_from_json("not json"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json("[1,2]"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"experiment":"pointwise","version":2})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"seed":1})"), std::invalid_argument);  // no experiment
  CHECK_THROWS_AS(config_from_json(R"({"experiment":"sideways"})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"experiment":"pointwise","frobnicate":1})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"experiment":"pointwise","methods":["warp"]})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"experiment":"pointwise","dist":"cauchy"})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"experiment":"pointwise","part_mode":"loose"})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"experiment":"pointwise","lp_solver":{"gap":1}})"),
                  std::invalid_argument);
  // sweeps only accept partitioned-method overrides
  CHECK_THROWS_AS(config_from_json(R"({"experiment":"width-sweep","methods":["lp"]})"),
                  std::invalid_argument);
  CHECK_NOTHROW(config_from_json(R"({"experiment":"width-sweep","methods":["plp-subopt-1"]})"));
}

TEST_CASE("run config validation") {
  RunConfig cfg;
  cfg.experiment = Experiment::Pointwise;
  cfg.network_file = "net.json";
  CHECK_NOTHROW(cfg.validate());
  RunConfig bad = cfg;
  bad.workers = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.epsilon = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.methods = {"plp-subopt-0"};  // ranks start at 1
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.methods = {"plp-recursive-1"};  // budgets start at 2
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.methods = {"psdp-uniform-x"};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.nominals = {vec({0.0, 0.0})};
  bad.dataset_file = "d.csv";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.shape = {4};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.nominal_count = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.widths = {};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("run_method covers every tag on a one-layer instance") {
  ReluNetwork net = random_network({2, 3}, WeightDist::Normal, 11);
  Eigen::VectorXd xbar = vec({0.3, -0.2});
  PolytopeSet input = polytope_from_box(box_from_nominal(xbar, 0.4));
  Eigen::VectorXd c = vec({1.0, -0.7, 0.4});
  CertProblem problem{net, input, c, 0.0};
  RunConfig cfg;
  cfg.experiment = Experiment::Pointwise;
  LayerBounds bounds = propagate_bounds(net, input, BoundMode::LpTight, 1);

  auto run = [&](const std::string& tag) { return run_method(problem, bounds, tag, cfg, 9); };
  MethodOutcome base = run("baseline");
  MethodOutcome lp = run("lp");
  MethodOutcome sdp = run("sdp");
  MethodOutcome plp = run("plp-opt");
  MethodOutcome plp1 = run("plp-subopt-1");
  MethodOutcome plpm = run("plp-motivating");
  MethodOutcome plpr = run("plp-recursive-3");
  MethodOutcome psdp = run("psdp-opt");
  MethodOutcome psdp3 = run("psdp-uniform-3");
  for (const MethodOutcome* o : {&base, &lp, &sdp, &plp, &plp1, &plpm, &plpr, &psdp, &psdp3}) {
    CHECK(o->ok);
    CHECK(std::isfinite(o->value));
    CHECK(o->time_s >= 0.0);
  }
  const double slack = 1e-6;
  for (const MethodOutcome* o : {&lp, &sdp, &plp, &plp1, &plpm, &plpr, &psdp, &psdp3})
    CHECK(base.value <= o->value + slack);  // relaxations upper-bound any attained value
  CHECK(plp.value <= lp.value + slack);
  CHECK(plp1.value <= lp.value + slack);
  CHECK(plpm.value <= lp.value + slack);
  CHECK(plpr.value <= lp.value + slack);
  CHECK(psdp.value <= sdp.value + slack);
  CHECK(psdp3.value <= sdp.value + slack);
  // the exact optimum sits between the baseline and every relaxation
  OracleResult oracle = activation_pattern_oracle(problem);
  CHECK(oracle.value <= lp.value + slack);
  CHECK(oracle.value <= psdp.value + slack);
  CHECK(base.value <= oracle.value + slack);

  MethodOutcome unknown = run_method(problem, bounds, "warp", cfg, 9);
  CHECK_FALSE(unknown.ok);
  CHECK(std::isnan(unknown.value));
  CHECK(unknown.note.find("unknown method") != std::string::npos);
}

TEST_CASE("run_method falls back to the plain lp when no row is unstable") {
  ReluNetwork net = random_network({2, 3}, WeightDist::Uniform, 4);  // positive weights
  Eigen::VectorXd xbar = vec({2.0, 2.0});
  PolytopeSet input = polytope_from_box(box_from_nominal(xbar, 0.05));
  CertProblem problem{net, input, vec({1.0, 1.0, 1.0}), 0.0};
  RunConfig cfg;
  cfg.experiment = Experiment::Pointwise;
  LayerBounds bounds = propagate_bounds(net, input, BoundMode::LpTight, 1);
  REQUIRE(bounds.lower(1).minCoeff() > 0.0);  // every preactivation strictly positive
  MethodOutcome lp = run_method(problem, bounds, "lp", cfg, 1);
  MethodOutcome plp = run_method(problem, bounds, "plp-opt", cfg, 1);
  CHECK(plp.ok);
  CHECK(plp.note.find("plain lp") != std::string::npos);
  CHECK(plp.value == doctest::Approx(lp.value).epsilon(1e-9));
}

TEST_CASE("run_method on deep nets uses the surrogate row choice") {
  ReluNetwork net = random_network({3, 6, 6, 4}, WeightDist::Normal, 21);
  Eigen::VectorXd xbar = normal_vec(77, 3);
  PolytopeSet input = polytope_from_box(box_from_nominal(xbar, 0.2));
  CertProblem problem{net, input, normal_vec(78, 4), 0.0};
  RunConfig cfg;
  cfg.experiment = Experiment::Pointwise;
  LayerBounds bounds = propagate_bounds(net, input, BoundMode::LpTight, 1);
  MethodOutcome lp = run_method(problem, bounds, "lp", cfg, 2);
  MethodOutcome plp = run_method(problem, bounds, "plp-opt", cfg, 2);
  MethodOutcome base = run_method(problem, bounds, "baseline", cfg, 2);
  REQUIRE(lp.ok);
  REQUIRE(plp.ok);
  CHECK(plp.value <= lp.value + 1e-6);
  CHECK(base.value <= plp.value + 1e-6);
  // motivating partitions exist for one-layer networks only
  MethodOutcome plpm = run_method(problem, bounds, "plp-motivating", cfg, 2);
  CHECK_FALSE(plpm.ok);
  CHECK_FALSE(plpm.note.empty());
}

TEST_CASE("pointwise run on the shipped classifier and dataset") {
  RunConfig cfg;
  cfg.experiment = Experiment::Pointwise;
  cfg.network_file = fixture("iris_net.json");
  cfg.dataset_file = fixture("iris.csv");
  cfg.nominal_count = 10;
  cfg.epsilon = 0.1;
  cfg.methods = {"lp", "plp-opt"};
  cfg.seed = 3;

  ResultTable table = run_pointwise(cfg);
  CHECK(table.columns ==
        std::vector<std::string>{"nominal", "method", "value", "certified", "note"});
  CHECK(table.timing_columns == std::vector<std::string>{"nominal", "method", "time_s"});
  REQUIRE(table.rows.size() == 20);  // 10 nominals x 2 methods
  CHECK(table.timing_rows.size() == 20);
  // 3-class outputs: two challengers per nominal in the long table
  CHECK(table.long_rows.size() == 40);

  auto values = value_map(table, 0, 1, 2);
  for (int i = 0; i < 10; ++i) {
    const double lp = values.at({std::to_string(i), "lp"});
    const double plp = values.at({std::to_string(i), "plp-opt"});
    CHECK(plp <= lp + 1e-6);  // partitioning never loosens the row
  }
  for (const auto& row : table.rows) {
    CHECK((row[3] == "yes" || row[3] == "no"));
    CHECK(std::isfinite(std::stod(row[2])));
  }
  CHECK(table.manifest.find("experiment: pointwise") != std::string::npos);
  CHECK(table.manifest.find("epsilon: 0.1") != std::string::npos);
  CHECK(table.manifest.find("result rows: 20") != std::string::npos);

  // same config, fresh run: value rows and manifest reproduce exactly
  ResultTable again = run_pointwise(cfg);
  CHECK(again.rows == table.rows);
  CHECK(again.long_rows == table.long_rows);
  CHECK(again.manifest == table.manifest);

  // worker count must not change any emitted value
  RunConfig par = cfg;
  par.workers = 3;
  ResultTable parallel = run_pointwise(par);
  CHECK(parallel.rows == table.rows);
  CHECK(parallel.long_rows == table.long_rows);
}

TEST_CASE("pointwise baseline stays below every relaxation row") {
  RunConfig cfg;
  cfg.experiment = Experiment::Pointwise;
  cfg.shape = {3, 6, 3};
  cfg.dist = WeightDist::Normal;
  cfg.seed = 12;
  cfg.epsilon = 0.3;
  cfg.nominals = {vec({0.2, -0.4, 0.7}), vec({-0.5, 0.1, 0.0}), vec({1.0, 0.3, -0.8}),
                  vec({0.0, 0.0, 0.0})};
  cfg.methods = {"baseline", "lp", "plp-opt", "plp-subopt-1", "plp-subopt-2", "sdp"};

  ResultTable table = run_pointwise(cfg);
  REQUIRE(table.rows.size() == cfg.nominals.size() * cfg.methods.size());
  auto values = value_map(table, 0, 1, 2);
  for (size_t i = 0; i < cfg.nominals.size(); ++i) {
    const std::string key = std::to_string(i);
    const double base = values.at({key, "baseline"});
    for (const auto& tag : cfg.methods)
      if (tag != "baseline") CHECK(base <= values.at({key, tag}) + 1e-6);
  }
  for (const auto& row : table.rows)
    if (row[1] == "baseline") CHECK((row[3] == "falsified" || row[3].empty()));
  // the split-quality ordering is reported for the standard tag trio
  CHECK(table.manifest.find("ordering plp-opt <= plp-subopt-1 <= plp-subopt-2:") !=
        std::string::npos);
}

TEST_CASE("pointwise rejects impossible configurations") {
  RunConfig cfg;
  cfg.experiment = Experiment::Pointwise;
  cfg.network_file = fixture("iris_net.json");
  CHECK_THROWS_WITH_AS(run_pointwise(cfg), doctest::Contains("no nominal points"),
                       std::invalid_argument);
  cfg.nominals = {vec({0.1, 0.2})};  // wrong input dimension
  CHECK_THROWS_AS(run_pointwise(cfg), std::invalid_argument);
  cfg.nominals = {vec({5.1, 3.5, 1.4, 0.2})};
  cfg.cost = vec({1.0, -1.0});  // wrong output dimension
  CHECK_THROWS_AS(run_pointwise(cfg), std::invalid_argument);
  RunConfig single;
  single.experiment = Experiment::Pointwise;
  single.shape = {2, 3, 1};
  single.nominals = {vec({0.0, 0.0})};
  CHECK_THROWS_WITH_AS(run_pointwise(single), doctest::Contains("two outputs"),
                       std::invalid_argument);
  RunConfig toomany;
  toomany.experiment = Experiment::Pointwise;
  toomany.network_file = fixture("iris_net.json");
  toomany.dataset_file = fixture("iris.csv");
  toomany.nominal_count = 151;
  CHECK_THROWS_WITH_AS(run_pointwise(toomany), doctest::Contains("exceeds"),
                       std::invalid_argument);
}

TEST_CASE("width sweep emits the table-shaped report") {
  RunConfig cfg;
  cfg.experiment = Experiment::WidthSweep;
  cfg.widths = {2, 3};
  cfg.sweep_hidden = 4;
  cfg.seed = 5;

  ResultTable table = run_width_sweep(cfg);
  CHECK(table.columns == std::vector<std::string>{"input_size", "hidden_layers", "dist", "lp",
                                                  "plp", "pct_lp", "sdp", "psdp", "pct_sdp"});
  REQUIRE(table.rows.size() == 4);  // 2 widths x 2 distributions
  CHECK(table.rows[0][2] == "normal");
  CHECK(table.rows[2][2] == "uniform");
  CHECK(table.rows[0][0] == "2");
  CHECK(table.rows[1][0] == "3");
  for (const auto& row : table.rows) {
    CHECK(row[1] == "1");  // one hidden layer throughout
    for (int col : {3, 4, 6, 7}) CHECK(std::isfinite(std::stod(row[col])));
    CHECK(std::stod(row[5]) >= -0.01);  // partitioning never loosens, up to solver slack
    CHECK(std::stod(row[8]) >= -0.01);
  }
  CHECK(table.long_rows.size() == 16);  // 4 methods per cell
  CHECK(table.manifest.find("experiment: width-sweep") != std::string::npos);
  CHECK(table.manifest.find("epsilon: 0.5") != std::string::npos);  // sweep default

  ResultTable again = run_width_sweep(cfg);
  CHECK(again.rows == table.rows);
  CHECK(again.manifest == table.manifest);

  RunConfig par = cfg;
  par.workers = 4;
  CHECK(run_width_sweep(par).rows == table.rows);
}

TEST_CASE("depth sweep shares the sweep schema and matches pointwise at depth one") {
  RunConfig cfg;
  cfg.experiment = Experiment::DepthSweep;
  cfg.depths = {1, 2};
  cfg.seed = 8;

  ResultTable table = run_depth_sweep(cfg);
  ResultTable width = run_width_sweep([] {
    RunConfig w;
    w.experiment = Experiment::WidthSweep;
    w.widths = {2};
    w.sweep_hidden = 3;
    return w;
  }());
  CHECK(table.columns == width.columns);  // identical csv schema across sweeps
  CHECK(table.timing_columns == width.timing_columns);
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0][0] == "5");
  CHECK(table.rows[0][1] == "1");
  CHECK(table.rows[1][1] == "2");
  for (const auto& row : table.rows) {
    CHECK(std::stod(row[5]) >= -0.01);
    CHECK(std::stod(row[8]) >= -0.01);
  }

  // rebuild the depth-1 cell by hand and certify the same instance pointwise
  ReluNetwork net = random_network({5, 10, 5}, WeightDist::Normal, derive_seed(cfg.seed, 2000));
  Eigen::VectorXd xbar = normal_vec(derive_seed(cfg.seed, 2001), 5);
  Eigen::VectorXd cost = normal_vec(derive_seed(cfg.seed, 2002), 5);
  TempDir tmp;
  const std::string net_path = tmp.prefix("depth1_net.json");
  save_network(net_path, net);
  RunConfig pw;
  pw.experiment = Experiment::Pointwise;
  pw.network_file = net_path;
  pw.nominals = {xbar};
  pw.cost = cost;
  pw.epsilon = 0.5;
  pw.part_mode = BoundMode::Interval;  // the sweep restriction mode
  pw.methods = {"lp", "plp-opt", "sdp", "psdp-opt"};
  ResultTable point = run_pointwise(pw);
  REQUIRE(point.rows.size() == 4);
  std::map<std::string, std::string> by_method;
  for (const auto& row : point.rows) by_method[row[1]] = row[2];
  CHECK(by_method.at("lp") == table.rows[0][3]);
  CHECK(by_method.at("plp-opt") == table.rows[0][4]);
  CHECK(by_method.at("sdp") == table.rows[0][6]);
  CHECK(by_method.at("psdp-opt") == table.rows[0][7]);

  ResultTable again = run_depth_sweep(cfg);
  CHECK(again.rows == table.rows);
}

TEST_CASE("np fixture trials verify the counting identity") {
  RunConfig cfg;
  cfg.experiment = Experiment::NpFixture;
  cfg.np_trials = 6;
  cfg.seed = 3;

  ResultTable table = run_np_fixture(cfg);
  CHECK(table.columns == std::vector<std::string>{"trial", "n_sets", "universe", "k", "subsets",
                                                  "max_dev", "pass", "minku_match"});
  REQUIRE(table.rows.size() == 6);
  for (const auto& row : table.rows) {
    CHECK(row[6] == "1");
    CHECK(row[7] == "1");
    CHECK(std::stod(row[5]) <= 1e-4);
  }
  // trial 0 pins the degenerate k = n case: the only subset is empty
  CHECK(table.rows[0][3] == table.rows[0][1]);
  CHECK(table.rows[0][4] == "1");
  CHECK(table.manifest.find("identity pass: 6/6") != std::string::npos);
  CHECK(table.manifest.find("min-k-union match: 6/6") != std::string::npos);

  ResultTable again = run_np_fixture(cfg);
  CHECK(again.rows == table.rows);
  RunConfig par = cfg;
  par.workers = 3;
  CHECK(run_np_fixture(par).rows == table.rows);
}

TEST_CASE("run_experiment writes the documented files") {
  TempDir tmp;
  RunConfig cfg;
  cfg.experiment = Experiment::NpFixture;
  cfg.np_trials = 2;
  cfg.seed = 3;
  cfg.output = tmp.prefix("np/run");
  ResultTable table = run_experiment(cfg);
  CHECK(std::filesystem::exists(cfg.output + "_results.csv"));
  CHECK(std::filesystem::exists(cfg.output + "_timings.csv"));
  CHECK(std::filesystem::exists(cfg.output + "_manifest.txt"));
  CHECK_FALSE(std::filesystem::exists(cfg.output + "_long.csv"));  // np has no long format
  CHECK(read_text_file(cfg.output + "_manifest.txt") == table.manifest);
  const std::string csv = read_text_file(cfg.output + "_results.csv");
  CHECK(csv.rfind("trial,n_sets,universe,k,subsets,max_dev,pass,minku_match\n", 0) == 0);

  RunConfig pw;
  pw.experiment = Experiment::Pointwise;
  pw.network_file = fixture("iris_net.json");
  pw.nominals = {vec({5.1, 3.5, 1.4, 0.2})};
  pw.methods = {"lp"};
  pw.output = tmp.prefix("pw/run");
  run_experiment(pw);
  CHECK(std::filesystem::exists(pw.output + "_long.csv"));
  const std::string long_csv = read_text_file(pw.output + "_long.csv");
  CHECK(long_csv.rfind("nominal,method,challenger,value\n", 0) == 0);
}
