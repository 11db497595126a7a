#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "partcert/bounds.hpp"
#include "partcert/lp_cert.hpp"
#include "partcert/network.hpp"
#include "partcert/sdp_cert.hpp"
#include "partcert/sets.hpp"

namespace partcert {

inline constexpr const char* kPartcertVersion = "0.1.0";

enum class Experiment { Pointwise, WidthSweep, DepthSweep, NpFixture };

std::string experiment_name(Experiment e);
Experiment experiment_from_name(const std::string& name);

/* One experiment run.  Sources left empty fall back to per-experiment
 * defaults (methods, epsilon, partition bound mode); see the manifest echo
 * of a run for the resolved values. */
struct RunConfig {
  Experiment experiment = Experiment::Pointwise;

  std::string network_file;  // or a random spec via shape+dist
  std::vector<int> shape;
  WeightDist dist = WeightDist::Normal;

  std::vector<Eigen::VectorXd> nominals;  // inline points
  std::string dataset_file;               // or rows drawn from a dataset csv
  int nominal_count = 10;
  Eigen::VectorXd cost;  // empty: one problem per challenger label

  double epsilon = 0.0;  // 0 picks 0.1 (pointwise) or 0.5 (sweeps)
  double threshold = 0.0;
  std::vector<std::string> methods;
  std::uint64_t seed = 1;
  std::string output;  // path prefix for csv/manifest files; empty writes none
  int workers = 1;

  std::vector<int> widths = {5, 10, 20};
  int sweep_hidden = 20;
  std::vector<int> depths = {1, 2, 3, 4};
  int np_trials = 20;

  std::optional<BoundMode> part_mode;  // restriction mode for partition parts
  SolverConfig lp_solver = lp_cert_config();
  SolverConfig sdp_solver = sdp_cert_config();

  void validate() const;
};

RunConfig config_from_json(const std::string& text);

/* Value rows are fully deterministic for a fixed config (byte-identical csv
 * on re-runs); wall-clock timings live in their own table. */
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> timing_columns;
  std::vector<std::vector<std::string>> timing_rows;
  std::vector<std::string> long_columns;  // figure-ready long format
  std::vector<std::vector<std::string>> long_rows;
  std::string manifest;
};

ResultTable run_pointwise(const RunConfig& cfg);
ResultTable run_width_sweep(const RunConfig& cfg);
ResultTable run_depth_sweep(const RunConfig& cfg);
ResultTable run_np_fixture(const RunConfig& cfg);

// dispatch on cfg.experiment; writes files under cfg.output when set
ResultTable run_experiment(const RunConfig& cfg);

// <prefix>_results.csv, <prefix>_timings.csv, <prefix>_manifest.txt, and
// <prefix>_long.csv when long rows exist
void write_table(const ResultTable& table, const std::string& prefix);

struct MethodOutcome {
  double value = std::numeric_limits<double>::quiet_NaN();
  double time_s = 0.0;
  bool ok = false;
  std::string note;
};

/* One method on one prepared problem.  Tags: baseline, lp, plp-opt,
 * plp-subopt-K, plp-motivating, plp-recursive-B, sdp, psdp-opt,
 * psdp-uniform-P.  Partitioned tags fall back to the plain relaxation (with a
 * note) when no unstable first-layer row exists to split on. */
MethodOutcome run_method(const CertProblem& problem, const LayerBounds& bounds,
                         const std::string& method, const RunConfig& cfg, std::uint64_t seed);

}  // namespace partcert
