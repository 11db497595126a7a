#pragma once

#include <tuple>
#include <utility>
#include <vector>

#include "partcert/conic.hpp"

namespace partcert::detail {

/* Standard-form SDP data shared by the converter and the engine:
 * min <C,X>, <A_i,X> = b_i, X = blkdiag(dense PSD of order N, diag block L).
 * PsdEntry (i, j, v) with i <= j stores the symmetric entry B_ij = B_ji = v. */
using PsdEntry = std::tuple<int, int, double>;
using DiagEntry = std::pair<int, double>;

struct SdpCon {
  std::vector<PsdEntry> B;
  std::vector<DiagEntry> a;
  double b = 0.0;
};

struct SdpData {
  int N = 0;
  int L = 0;
  std::vector<SdpCon> cons;
  std::vector<PsdEntry> C_B;
  Eigen::VectorXd c_d;
  // split free-variable pairs occupy d-indices [split_base, L) as (v+, v-)
  bool split_pairs = false;
  int split_base = 0;
};

struct SdpResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  double pobj = 0.0;
  double dobj = 0.0;
  Eigen::MatrixXd X;
  Eigen::VectorXd xd;
  Eigen::VectorXd y;
  double primal_res = 0.0, dual_res = 0.0, rel_gap = 0.0;
  int iters = 0;
  double wall_time_s = 0.0;
};

SdpResult solve_sdp(const SdpData& data, const SolverConfig& cfg);

}  // namespace partcert::detail
