#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "partcert/conic_sdp_internal.hpp"

/* Dense primal-dual interior-point method (HKM direction, Mehrotra
 * predictor-corrector) for the standard primal form
 *
 *   min <C, X>   s.t.  <A_i, X> = b_i,   X >= 0,
 *
 * where X is block-diagonal: one dense PSD block of order N and one
 * nonnegative diagonal block of length L (slacks / split free variables).
 * The Schur complement M_ij = tr(A_i X A_j Z^-1) is m x m, formed from the
 * sparse constraint matrices.  Deterministic throughout.
 */

namespace partcert::detail {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// tr(B M) for sparse symmetric B (upper-triplet storage) and any dense M
double inner_psd(const std::vector<PsdEntry>& B, const MatrixXd& M) {
  double acc = 0.0;
  for (const auto& [i, j, v] : B) {
    acc += v * M(i, j);
    if (i != j) acc += v * M(j, i);
  }
  return acc;
}

void add_scaled(const std::vector<PsdEntry>& B, double coef, MatrixXd& out) {
  for (const auto& [i, j, v] : B) {
    out(i, j) += coef * v;
    if (i != j) out(j, i) += coef * v;
  }
}

double max_abs_entry(const std::vector<PsdEntry>& B) {
  double m = 0.0;
  for (const auto& [i, j, v] : B) m = std::max(m, std::abs(v));
  return m;
}

double diag_step_len(const VectorXd& x, const VectorXd& dx) {
  double a = std::numeric_limits<double>::infinity();
  for (int i = 0; i < x.size(); ++i)
    if (dx(i) < 0) a = std::min(a, -x(i) / dx(i));
  return a;
}

// largest a with X + a*D >= 0, given X > 0 (exact via generalized eigmin)
double psd_step_len(const MatrixXd& X, const MatrixXd& D) {
  if (X.rows() == 0) return std::numeric_limits<double>::infinity();
  Eigen::LLT<MatrixXd> llt(X);
  MatrixXd L = llt.matrixL();
  MatrixXd W = L.triangularView<Eigen::Lower>().solve(D);
  W = L.triangularView<Eigen::Lower>().solve(W.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (W + W.transpose()),
                                             Eigen::EigenvaluesOnly);
  double lam = es.eigenvalues()(0);
  if (lam >= -1e-14) return std::numeric_limits<double>::infinity();
  return -1.0 / lam;
}

}  // namespace

SdpResult solve_sdp(const SdpData& data, const SolverConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const int N = data.N;
  const int L = data.L;
  const int m = (int)data.cons.size();
  const int ntot = N + L;

  SdpResult out;
  out.status = SolveStatus::IterLimit;
  SdpResult best;
  double best_score = std::numeric_limits<double>::infinity();
  int stall_count = 0;

  // scale-aware identity start
  double bmax = 0.0, anorm = 1.0;
  for (const auto& con : data.cons) {
    double an = max_abs_entry(con.B);
    for (const auto& [k, v] : con.a) an = std::max(an, std::abs(v));
    anorm = std::max(anorm, an);
    bmax = std::max(bmax, std::abs(con.b) / (1.0 + an));
  }
  double cmax = max_abs_entry(data.C_B);
  if (L > 0) cmax = std::max(cmax, data.c_d.cwiseAbs().maxCoeff());
  const double tau_p = std::max({10.0, std::sqrt((double)ntot), (double)ntot * bmax});
  const double tau_d = std::max({10.0, std::sqrt((double)ntot), cmax, anorm});

  MatrixXd X = tau_p * MatrixXd::Identity(N, N);
  VectorXd xd = tau_p * VectorXd::Ones(L);
  MatrixXd Z = tau_d * MatrixXd::Identity(N, N);
  VectorXd zd = tau_d * VectorXd::Ones(L);
  VectorXd y = VectorXd::Zero(m);

  double bn = 1.0, cn = 1.0 + cmax;
  for (const auto& con : data.cons) bn = std::max(bn, 1.0 + std::abs(con.b));

  MatrixXd Zinv(N, N), Rd(N, N), Gm(N, N), dZ(N, N), dX(N, N), dZa(N, N), dXa(N, N);
  VectorXd zinv_d(L), rd_d(L), gm_d(L), dzd(L), dxd(L), dzda(L), dxda(L);
  MatrixXd M(m, m);
  VectorXd rp(m), rhs(m), dy(m), dya(m);
  std::vector<MatrixXd> Ublocks;  // U_j = X A_j Zinv, reused predictor/corrector
  Ublocks.assign(m, MatrixXd());
  std::vector<VectorXd> ud(m);
  VectorXd scratch(L);

  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  for (int it = 0; it <= cfg.max_iters; ++it) {
    // residuals
    double pobj = inner_psd(data.C_B, X) + (L > 0 ? data.c_d.dot(xd) : 0.0);
    double dobj = 0.0;
    for (int i = 0; i < m; ++i) dobj += y(i) * data.cons[i].b;

    Rd.setZero();
    add_scaled(data.C_B, 1.0, Rd);
    Rd -= Z;
    rd_d = -zd;
    if (L > 0)
      for (int k = 0; k < L; ++k) rd_d(k) += data.c_d(k);
    double prim_inf = 0.0;
    for (int i = 0; i < m; ++i) {
      const auto& con = data.cons[i];
      double ax = inner_psd(con.B, X);
      for (const auto& [k, v] : con.a) ax += v * xd(k);
      rp(i) = con.b - ax;
      prim_inf = std::max(prim_inf, std::abs(rp(i)));
      add_scaled(con.B, -y(i), Rd);
      for (const auto& [k, v] : con.a) rd_d(k) -= y(i) * v;
    }
    double dual_inf = Rd.cwiseAbs().maxCoeff();
    if (L > 0) dual_inf = std::max(dual_inf, rd_d.cwiseAbs().maxCoeff());

    double mu = ((X.cwiseProduct(Z)).sum() + (L > 0 ? xd.dot(zd) : 0.0)) / ntot;
    mu = std::max(mu, 1e-300);
    double relgap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));

    out.iters = it;
    out.primal_res = prim_inf / bn;
    out.dual_res = dual_inf / cn;
    out.rel_gap = relgap;
    out.pobj = pobj;
    out.dobj = dobj;

    if (out.primal_res <= cfg.feas_tol && out.dual_res <= cfg.feas_tol &&
        (relgap <= cfg.opt_tol || mu / (1.0 + std::abs(pobj)) <= cfg.opt_tol)) {
      out.status = SolveStatus::Optimal;
      break;
    }
    double score = std::max({out.primal_res, out.dual_res, relgap});
    if (std::isfinite(score) && score < best_score) {
      best_score = score;
      best = out;
      best.X = X;
      best.xd = xd;
      best.y = y;
    }
    if (it == cfg.max_iters) break;
    if (elapsed() > cfg.time_limit_s) {
      out.status = SolveStatus::TimeLimit;
      break;
    }
    if (!std::isfinite(pobj) || !std::isfinite(mu) || prim_inf > 1e14 * bn || dual_inf > 1e14 * cn) {
      out.status = SolveStatus::NumericalFailure;
      break;
    }

    // Z^-1 via Cholesky (diagonal bump on rounding trouble)
    {
      MatrixXd Zw = Z;
      Eigen::LLT<MatrixXd> llt(Zw);
      int tries = 0;
      double zbump = 1e-15 * (1.0 + Zw.diagonal().cwiseAbs().maxCoeff());
      while (llt.info() != Eigen::Success && tries < 12) {
        Zw.diagonal().array() += zbump;
        llt.compute(Zw);
        zbump *= 100.0;
        ++tries;
      }
      if (llt.info() != Eigen::Success) {
        out.status = SolveStatus::NumericalFailure;
        break;
      }
      Zinv = llt.solve(MatrixXd::Identity(N, N));
      Zinv = 0.5 * (Zinv + Zinv.transpose()).eval();
    }
    for (int k = 0; k < L; ++k) zinv_d(k) = 1.0 / zd(k);

    // Schur complement M_ij = tr(A_i X A_j Z^-1) + sum_k a_i a_j x_k / z_k
    for (int j = 0; j < m; ++j) {
      const auto& cj = data.cons[j];
      MatrixXd& U = Ublocks[j];
      U.setZero(N, N);
      // T = A_j Zinv has nonzero rows only on A_j's support; U = X T
      for (const auto& [r, q, v] : cj.B) {
        U.noalias() += (v * X.col(q)) * Zinv.row(r);
        if (r != q) U.noalias() += (v * X.col(r)) * Zinv.row(q);
      }
      ud[j].setZero(L);
      for (const auto& [k, v] : cj.a) ud[j](k) = v * xd(k) * zinv_d(k);
    }
    for (int i = 0; i < m; ++i) {
      const auto& ci = data.cons[i];
      for (int j = 0; j <= i; ++j) {
        double acc = inner_psd(ci.B, Ublocks[j]);
        for (const auto& [k, v] : ci.a) acc += v * ud[j](k);
        M(i, j) = acc;
        M(j, i) = acc;
      }
    }

    if (!M.allFinite()) {
      out.status = SolveStatus::NumericalFailure;
      break;
    }
    Eigen::LLT<MatrixXd> Mllt(M);
    if (Mllt.info() != Eigen::Success) {
      MatrixXd Mw = M;
      double bump = 1e-14 * (1.0 + M.diagonal().cwiseAbs().maxCoeff());
      int tries = 0;
      while (Mllt.info() != Eigen::Success && tries < 14) {
        Mw.diagonal().array() += bump;
        Mllt.compute(Mw);
        bump *= 100.0;
        ++tries;
      }
      if (Mllt.info() != Eigen::Success) {
        out.status = SolveStatus::NumericalFailure;
        break;
      }
    }

    // F = X Rd Zinv appears in every right-hand side this iteration
    MatrixXd F = X * Rd * Zinv;
    VectorXd fd(L);
    for (int k = 0; k < L; ++k) fd(k) = xd(k) * rd_d(k) * zinv_d(k);

    auto solve_dir = [&](const MatrixXd& Rc, const VectorXd& rc_d, VectorXd& oy, MatrixXd& oZ,
                         VectorXd& ozd, MatrixXd& oX, VectorXd& oxd) {
      Gm = F - Rc;
      for (int k = 0; k < L; ++k) gm_d(k) = fd(k) - rc_d(k);
      for (int i = 0; i < m; ++i) {
        const auto& ci = data.cons[i];
        double acc = inner_psd(ci.B, Gm);
        for (const auto& [k, v] : ci.a) acc += v * gm_d(k);
        rhs(i) = rp(i) + acc;
      }
      oy = Mllt.solve(rhs);
      oZ = Rd;
      ozd = rd_d;
      for (int i = 0; i < m; ++i) {
        add_scaled(data.cons[i].B, -oy(i), oZ);
        for (const auto& [k, v] : data.cons[i].a) ozd(k) -= oy(i) * v;
      }
      oX = Rc - X * oZ * Zinv;
      oX = 0.5 * (oX + oX.transpose()).eval();
      for (int k = 0; k < L; ++k) oxd(k) = rc_d(k) - xd(k) * ozd(k) * zinv_d(k);
    };

    // predictor (sigma = 0)
    MatrixXd Rc = -X;
    VectorXd rc_d = -xd;
    solve_dir(Rc, rc_d, dya, dZa, dzda, dXa, dxda);
    double ap = std::min(1.0, 0.99 * std::min(psd_step_len(X, dXa), diag_step_len(xd, dxda)));
    double ad = std::min(1.0, 0.99 * std::min(psd_step_len(Z, dZa), diag_step_len(zd, dzda)));
    double mu_aff = ((X + ap * dXa).cwiseProduct(Z + ad * dZa).sum() +
                     (L > 0 ? (xd + ap * dxda).dot(zd + ad * dzda) : 0.0)) /
                    ntot;
    double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3.0);

    // corrector
    Rc = sigma * mu * Zinv - X - dXa * dZa * Zinv;
    for (int k = 0; k < L; ++k) rc_d(k) = sigma * mu * zinv_d(k) - xd(k) - dxda(k) * dzda(k) * zinv_d(k);
    solve_dir(Rc, rc_d, dy, dZ, dzd, dX, dxd);

    double gamma = mu < 1e-5 ? 0.98 : 0.9;
    ap = std::min(1.0, gamma * std::min(psd_step_len(X, dX), diag_step_len(xd, dxd)));
    ad = std::min(1.0, gamma * std::min(psd_step_len(Z, dZ), diag_step_len(zd, dzd)));
    if (!dX.allFinite() || !dZ.allFinite() || !dy.allFinite()) {
      out.status = SolveStatus::NumericalFailure;
      break;
    }

    if (std::min(ap, ad) < 1e-10) {
      if (++stall_count >= 3) break;  // leaves IterLimit / best-so-far
    } else {
      stall_count = 0;
    }

    X += ap * dX;
    X = 0.5 * (X + X.transpose()).eval();
    xd += ap * dxd;
    Z += ad * dZ;
    Z = 0.5 * (Z + Z.transpose()).eval();
    zd += ad * dzd;
    y += ad * dy;

    // recenter split free-variable pairs drifting up together (they enter as
    // consecutive (v+, v-) entries; a joint shift leaves v = v+ - v- intact)
    if (data.split_pairs)
      for (int k = data.split_base; k + 1 < L; k += 2) {
        double dmin = std::min(xd(k), xd(k + 1));
        double keep = 1.0 + std::abs(xd(k) - xd(k + 1));
        if (dmin > 10.0 * keep) {
          xd(k) -= dmin - keep;
          xd(k + 1) -= dmin - keep;
        }
      }
  }

  if (out.status != SolveStatus::Optimal && best_score < std::numeric_limits<double>::infinity() &&
      best_score <= std::max({out.primal_res, out.dual_res, out.rel_gap})) {
    SolveStatus st = out.status;
    out = best;
    out.status = st;
    if (out.primal_res <= cfg.feas_tol && out.dual_res <= cfg.feas_tol &&
        out.rel_gap <= cfg.opt_tol)
      out.status = SolveStatus::Optimal;
  } else {
    out.X = X;
    out.xd = xd;
    out.y = y;
  }
  out.wall_time_s = elapsed();
  return out;
}

}  // namespace partcert::detail
