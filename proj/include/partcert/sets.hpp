#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "partcert/conic.hpp"
#include "partcert/network.hpp"

namespace partcert {

struct BoxSet {
  Eigen::VectorXd lower, upper;

  int dim() const { return (int)lower.size(); }
  void validate() const;  // throws on lower > upper / size mismatch / non-finite
  bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const;
  Eigen::VectorXd center() const { return 0.5 * (lower + upper); }
};

BoxSet box_from_nominal(const Eigen::VectorXd& xbar, double eps);

struct Halfspace {
  Eigen::VectorXd a;  // a . x <= beta
  double beta = 0.0;
};

/* Bounded polytope: a box plus optional halfspace cuts.  Nonemptiness is
 * decided by the Chebyshev-radius LP; sets with inscribed radius below
 * `thin_tol` count as empty (thin slices never carry a strict maximum that
 * their full-dimensional neighbors miss). */
struct PolytopeSet {
  BoxSet box;
  std::vector<Halfspace> halfspaces;

  int dim() const { return box.dim(); }
  void validate() const;
  bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const;
};

PolytopeSet polytope_from_box(const BoxSet& b);

inline constexpr double kThinTol = 1e-9;

// largest inscribed-ball radius (negative when infeasible; pinned coordinates
// are substituted out first so degenerate boxes are not mistaken for empty)
double chebyshev_radius(const PolytopeSet& set, const SolverConfig& cfg = {});
bool set_is_empty(const PolytopeSet& set, const SolverConfig& cfg = {});

/* A sign restriction a partition part imposes on one preactivation row:
 * sign=+1 means zhat[layer]_row >= 0 on the part, sign=-1 means <= 0.
 * Bound restriction clamps the corresponding bound at zero. */
struct Clamp {
  int layer = 1;  // 1-based, matching zhat[k]
  int row = 0;
  int sign = +1;
};

struct PartitionPart {
  PolytopeSet set;
  std::vector<Clamp> clamps;
};

struct PartitionPlan {
  std::vector<PartitionPart> parts;
  std::string provenance;  // "two-part", "multi-row", "motivating", ...
  std::vector<std::string> notes;   // dropped-part records etc.
};

/* Two closed parts split on  w . x + offset >= 0  /  <= 0.  Empty (or thin)
 * sides are dropped with a note.  When `row` >= 0 the parts carry the
 * matching first-layer clamp. */
PartitionPlan row_halfspace_partition(const PolytopeSet& set, const Eigen::VectorXd& w,
                                      double offset = 0.0, int row = -1, int layer = 1);

struct CoverageReport {
  double covered_fraction = 0.0;
  double overlap_fraction = 0.0;
  std::optional<Eigen::VectorXd> witness;  // an uncovered parent point, if any
  bool pass = false;
};

/* Sampling check that the parts cover the parent (rejection sampling from the
 * parent box).  Deterministic for a fixed seed. */
CoverageReport validate_partition(const PolytopeSet& parent, const PartitionPlan& plan,
                                  int n_samples = 10000, std::uint64_t seed = 0);

struct CertProblem {
  ReluNetwork net;
  PolytopeSet input;
  Eigen::VectorXd c;
  double d = 0.0;  // certified when the optimal value stays below d

  void validate() const;
};

/* One relaxation outcome.  `value` is the certified upper bound reported by
 * the method; optimizers are the relaxation's input/output blocks. */
struct RelaxResult {
  double value = 0.0;
  Eigen::VectorXd input_point;
  Eigen::VectorXd output_point;
  SolveStatus status = SolveStatus::NumericalFailure;
  double wall_time_s = 0.0;
  double primal_value = 0.0;  // attained objective; value carries the certified bound
  double rel_gap = 0.0;
  bool bounds_warning = false;

  bool ok() const { return status == SolveStatus::Optimal; }
};

struct PartitionedResult {
  double value = 0.0;
  int winning_part = -1;
  std::vector<double> part_values;
  RelaxResult winner;
  int parts = 0;
  double wall_time_s = 0.0;
  bool bounds_warning = false;

  bool ok() const { return winner.status == SolveStatus::Optimal && winning_part >= 0; }
};

}  // namespace partcert
