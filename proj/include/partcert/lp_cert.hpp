#pragma once

#include <cstdint>

#include "partcert/bounds.hpp"
#include "partcert/relax_rows.hpp"
#include "partcert/sets.hpp"

namespace partcert {

SolverConfig lp_cert_config();

/* The stacked LP relaxation over variables (x, x^[1], ..., x^[K]): input
 * membership rows, per-layer relu envelope rows (exact equalities for stable
 * neurons), objective c on the output block. */
struct LpRelaxation {
  ConicProgram prog;
  std::vector<int> var_offset;
  LpBuildInfo info;
};

LpRelaxation build_lp(const CertProblem& problem, const LayerBounds& bounds,
                      const std::vector<ExactRelu>& exact = {});

/* value is the certified upper bound (dual objective); primal_value the
 * attained relaxation objective; the two agree to the solver gap. */
RelaxResult solve_lp(const LpRelaxation& relax, const SolverConfig& cfg = lp_cert_config());

// build + solve over freshly restricted bounds per part; overall = max over parts
PartitionedResult partitioned_lp(const CertProblem& problem, const PartitionPlan& plan,
                                 const LayerBounds& parent, BoundMode mode = BoundMode::LpTight,
                                 const SolverConfig& cfg = lp_cert_config(), int workers = 1);

/* Sign-pattern partition of a one-layer network's input set: one part per
 * orthant of the first-layer preactivations, empty parts dropped.  The
 * partitioned relaxation over this plan is exact. */
PartitionPlan motivating_partition(const CertProblem& problem, int cap = 12);

struct RowChoice {
  int row = -1;
  double score = 0.0;
  bool all_stable = false;
};

/* Lowest-index minimizer of relu(c_i) u_i l_i / (u_i - l_i) over unstable
 * rows (l_i < 0 < u_i); all_stable set when no row qualifies. */
RowChoice optimal_two_part_row(const Eigen::VectorXd& c, const Eigen::VectorXd& l,
                               const Eigen::VectorXd& u);

// worst-case two-part value: drops term i from the full relaxation bound
double two_part_bound(const Eigen::VectorXd& c, const Eigen::VectorXd& l,
                      const Eigen::VectorXd& u, int i);

// the n_p lowest-score unstable rows, score order then index order
std::vector<int> lowest_score_rows(const Eigen::VectorXd& c, const Eigen::VectorXd& l,
                                   const Eigen::VectorXd& u, int n_p);

/* 2^{n_p}-part sign-cell plan over the given first-layer rows; c_score ranks
 * the rows (pass the problem cost for one-layer nets, a surrogate otherwise). */
PartitionPlan multi_row_partition(const CertProblem& problem, const LayerBounds& bounds,
                                  const Eigen::VectorXd& c_score, int n_p, long cap = 4096);

struct RefineResult {
  PartitionPlan plan;
  std::vector<double> trace;  // overall value after 0, 1, 2, ... splits
  PartitionedResult result;
};

/* Repeatedly splits the worst part on its own optimal row (scores from the
 * part's restricted bounds) until `budget` parts exist or nothing splits. */
RefineResult recursive_refine(const CertProblem& problem, int budget,
                              BoundMode mode = BoundMode::LpTight,
                              const SolverConfig& cfg = lp_cert_config(), int workers = 1);

/* A-priori relaxation error bound at radius eps:
 *   sum_i relu(c_i) (u_i/(u_i-l_i)) (min{eps r_i, u_i} - l_i)
 *        + relu(-c_i) min{eps r_i, u_i}
 * with r_i the dual norm of row i; bounds are normalized to l <= 0 <= u
 * first, so stable rows contribute nothing at eps = 0. */
double worst_case_lp_bound(const Eigen::VectorXd& c, const Eigen::VectorXd& l,
                           const Eigen::VectorXd& u, const Eigen::VectorXd& row_dual_norms,
                           double eps);

/* Surrogate first-layer cost e_j - e_i: i the argmax of the nominal layer-1
 * activation, j the deterministic runner-up (or a seeded random j != i). */
Eigen::VectorXd surrogate_cost(const ReluNetwork& net, const Eigen::VectorXd& xbar);
Eigen::VectorXd surrogate_cost_random(const ReluNetwork& net, const Eigen::VectorXd& xbar,
                                      std::uint64_t seed);

/* Value of the partitioned relaxation that makes the relu exact on the given
 * first-layer rows: max over that subset's nonempty sign cells, every cell
 * solved with the same fixed `bounds`. */
double subset_partition_value(const CertProblem& problem, const LayerBounds& bounds,
                              const std::vector<int>& rows,
                              const SolverConfig& cfg = lp_cert_config());

struct SubsetOutcome {
  std::vector<int> rows;
  double value = 0.0;
};

struct ExhaustiveResult {
  std::vector<int> best_rows;
  double best_value = 0.0;
  std::vector<SubsetOutcome> all;
};

// enumerate every size-n_p row subset; minimizer (first in lexicographic order)
ExhaustiveResult exhaustive_first_layer_partition(const CertProblem& problem,
                                                  const LayerBounds& bounds, int n_p,
                                                  long cap = 4096,
                                                  const SolverConfig& cfg = lp_cert_config(),
                                                  int workers = 1);

/* Hardness-reduction instance: identity / membership / identity network over
 * [-1,1]^n with prescribed loose bounds.  For any row subset J_p of size
 * n - k, 16 (subset_partition_value(J_p) - f_bar) counts the elements covered
 * by the sets outside J_p. */
struct NpGadget {
  ReluNetwork net;
  PolytopeSet input;
  Eigen::VectorXd c;
  LayerBounds bounds;
  double f_bar = 0.0;
  int n = 0, m = 0, k_param = 0;
  std::vector<std::vector<int>> sets;

  CertProblem problem() const;
  int union_size(const std::vector<int>& subset) const;
  int union_size_outside(const std::vector<int>& rows_inside) const;
};

NpGadget np_gadget(const std::vector<std::vector<int>>& sets, int m, int k);

}  // namespace partcert
