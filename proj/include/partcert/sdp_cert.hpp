#pragma once

#include "partcert/bounds.hpp"
#include "partcert/sets.hpp"

namespace partcert {

SolverConfig sdp_cert_config();

/* Layout of one lifted block (the input x^[0], a hidden activation, or the
 * output).  Coordinates whose bounds pin them to a single value are folded
 * out of the PSD matrix: a pinned coordinate leaves the cone without a strict
 * interior, so the solver would sit on the boundary from the start.  `keep`
 * lists the surviving original indices, `pos` maps original index to kept
 * position (-1 when folded), `fixed` carries the pinned values. */
struct SdpBlockLayout {
  int offset = 0;  // column of the first kept coordinate in P
  int dim_full = 0;
  std::vector<int> keep;
  std::vector<int> pos;
  std::vector<char> pinned;
  Eigen::VectorXd fixed;
};

/* Moment matrix over (1, x^[0], ..., x^[K]).  Accessors reinflate folded
 * coordinates with their rank-1 completion, so every block comes back at its
 * full size regardless of folding. */
struct SdpMatrix {
  Eigen::MatrixXd P;
  std::vector<SdpBlockLayout> blocks;

  double P1() const { return P(0, 0); }
  Eigen::VectorXd block_vec(int k) const;          // P[0, block k]
  Eigen::MatrixXd block_mat(int k, int q) const;   // cross moments of two blocks
  Eigen::VectorXd Px() const { return block_vec(0); }
  Eigen::VectorXd Pz() const { return block_vec((int)blocks.size() - 1); }
  Eigen::MatrixXd Pxx() const { return block_mat(0, 0); }
  Eigen::MatrixXd Pzz() const;
  Eigen::MatrixXd Pxz() const;  // input rows, output columns
};

/* The lifted relaxation: one PSD variable, P_1 = 1, per layer the linear
 * relu blocks (z >= 0, z >= Wx + b, diag equality) and a quadratic box row
 * per kept coordinate of each relu-input block, plus any input polytope rows
 * applied to the P_x block. */
struct SdpRelaxation {
  ConicProgram prog;
  std::vector<SdpBlockLayout> blocks;
  int diag_eq_rows = 0;
  int box_quad_rows = 0;
};

// one weight layer only; l, u bound the input set
SdpRelaxation build_sdp(const CertProblem& problem, const Eigen::VectorXd& l,
                        const Eigen::VectorXd& u);

// any depth; hidden blocks take their box rows from the propagated bounds
SdpRelaxation build_multilayer_sdp(const CertProblem& problem, const LayerBounds& bounds);

struct SdpResult {
  RelaxResult res;
  SdpMatrix P;

  bool ok() const { return res.ok(); }
};

SdpResult solve_sdp(const SdpRelaxation& relax, const SolverConfig& cfg = sdp_cert_config());

// per-part solve over freshly restricted bounds; overall = max over parts
PartitionedResult partitioned_sdp(const CertProblem& problem, const PartitionPlan& plan,
                                  const LayerBounds& parent, BoundMode mode = BoundMode::LpTight,
                                  const SolverConfig& cfg = sdp_cert_config(), int workers = 1);

// tr(P_xx) - |P_x|^2, computed blockwise; nonnegative for feasible P
double rank1_gap(const SdpMatrix& P);

// (1/4) sum_i max_j (u_i^(j) - l_i^(j))^2 over the partition's input boxes
double rank1_gap_bound(const std::vector<BoxSet>& part_bounds);

// p equal-width slabs along one coordinate, other coordinates untouched
PartitionPlan uniform_partition(const BoxSet& box, int coordinate, int parts);

struct SdpCoordChoice {
  int index = -1;
  double score = 0.0;             // max{|l|, |u|} at the chosen coordinate
  bool symmetric_limits = false;  // |l| = |u| there; the strictness assumption fails
  bool tied = false;              // another coordinate attains the same score
};

// lowest-index argmax of max{|l_k|, |u_k|}
SdpCoordChoice optimal_sdp_coordinate(const Eigen::VectorXd& l, const Eigen::VectorXd& u);

// q(l, u) = max_k max{|l_k|, |u_k|}
double q_factor(const Eigen::VectorXd& l, const Eigen::VectorXd& u);

/* A-priori SDP relaxation error bound at radius eps:
 *   sum_i relu(c_i) q(l, u) + relu(-c_i) min{uhat_i, eps r_i}
 * with uhat the preactivation uppers and r_i the dual norm of row i.  Rows
 * must be l1-normalized (box uncertainty pairs the l-inf primal norm with the
 * l1 dual), so each r_i must equal 1. */
double worst_case_sdp_bound(const Eigen::VectorXd& c, const Eigen::VectorXd& l,
                            const Eigen::VectorXd& u, const Eigen::VectorXd& uhat,
                            const Eigen::VectorXd& row_dual_norms, double eps);

struct PsdElementReport {
  bool pass = true;
  int i = -1, j = -1;       // worst offending pair
  double violation = 0.0;   // max over pairs of |P_ij| - (P_ii + P_jj)/2
};

// every element of a PSD matrix obeys |P_ij| <= (P_ii + P_jj)/2
PsdElementReport psd_element_check(const Eigen::MatrixXd& P, double tol = 1e-9);

}  // namespace partcert
