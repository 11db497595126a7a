#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace partcert {

/* A desk-scale conic program:
 *
 *   max / min   c_lin . v  +  <C_psd, P>
 *   subject to  linear rows over (v, P)   (<= or =)
 *               P symmetric PSD           (optional, one block)
 *
 * v are free scalar variables.  PSD coefficients address the upper triangle
 * (i <= j); a coefficient val on (i, j) means the row contains val * P_ij with
 * P_ij = P_ji counted once.
 */
struct LinTerm {
  int idx;
  double val;
};
struct PsdTerm {
  int i, j;
  double val;
};
struct ConicRow {
  std::vector<LinTerm> lin;
  std::vector<PsdTerm> psd;
  double rhs = 0.0;
};

struct ConicProgram {
  int n_vars = 0;
  int psd_dim = 0;
  bool maximize = true;
  Eigen::VectorXd c_lin;          // size n_vars (zero-initialized via resize)
  std::vector<PsdTerm> c_psd;
  std::vector<ConicRow> le_rows;  // lhs <= rhs
  std::vector<ConicRow> eq_rows;  // lhs == rhs

  void set_sizes(int nv, int pd);
  void validate() const;  // throws std::invalid_argument
};

struct SolverConfig {
  double feas_tol = 1e-8;
  double opt_tol = 1e-8;
  int max_iters = 100;
  double time_limit_s = 60.0;
};

enum class SolveStatus {
  Optimal,
  Infeasible,
  Unbounded,
  IterLimit,
  TimeLimit,
  NumericalFailure,
};

const char* to_string(SolveStatus s);

struct ConicSolution {
  SolveStatus status = SolveStatus::NumericalFailure;
  double obj = 0.0;        // in the program's own sense (max or min)
  double dual_obj = 0.0;   // certified bound from the dual (>= obj for max programs)
  Eigen::VectorXd v;
  Eigen::MatrixXd psd;     // empty when psd_dim == 0
  Eigen::VectorXd dual_le; // one multiplier per le_row, >= 0
  Eigen::VectorXd dual_eq;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double rel_gap = 0.0;
  double comp_res = 0.0;   // max complementary-slackness residual over le rows
  int iters = 0;
  double wall_time_s = 0.0;

  bool ok() const { return status == SolveStatus::Optimal; }
};

ConicSolution solve(const ConicProgram& prog, const SolverConfig& cfg = {});

/* Program dump for offline cross-checking: a stable JSON text with the
 * objective, constraint triplets and cone tags.  parse_program inverts it. */
std::string dump_program(const ConicProgram& prog);
ConicProgram parse_program(const std::string& text);

/* Internal engines, exposed for tests.  solve() dispatches between them. */
namespace detail {
struct LpData {
  // min c.v  s.t.  G v <= h, A v = b
  Eigen::VectorXd c;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};
struct LpResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  double obj = 0.0;
  double dual_obj = 0.0;
  Eigen::VectorXd v, s, z, y;
  double primal_res = 0.0, dual_res = 0.0, rel_gap = 0.0;
  int iters = 0;
};
LpResult solve_lp(const LpData& d, const SolverConfig& cfg);
}  // namespace detail

}  // namespace partcert
