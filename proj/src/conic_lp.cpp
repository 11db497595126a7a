#include <algorithm>
#include <cmath>
#include <limits>

#include "partcert/conic.hpp"

/* Dense primal-dual interior-point method (Mehrotra predictor-corrector) for
 * inequality-form LPs with free variables:
 *
 *   min c.v   s.t.  G v + s = h,  A v = b,  s >= 0.
 *
 * The Newton steps are taken on the condensed KKT system
 *
 *   [ G' D G   A' ] [dv]   with D = diag(z / s),
 *   [   A      0  ] [dy]
 *
 * factored with partial-pivoted LU (quasi-definite, desk scale) and polished
 * with one round of iterative refinement.  Deterministic throughout.
 */

namespace partcert::detail {
namespace {

double step_len(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) {
  double a = std::numeric_limits<double>::infinity();
  for (int i = 0; i < x.size(); ++i)
    if (dx(i) < 0) a = std::min(a, -x(i) / dx(i));
  return a;
}

struct Kkt {
  Eigen::MatrixXd K0;  // true Newton matrix; refinement target
  Eigen::MatrixXd K;   // statically regularized copy that gets factored
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  int n, p;

  /* The static shift must stay far below the smallest curvature of G'DG
   * (which shrinks like mu on the inactive subspace) or the dual iterates
   * stall; an absolute 1e-13 on equilibrated data is safe, and refinement
   * runs against the unshifted K0.  On a singular factorization the shift is
   * escalated. */
  void factor(const Eigen::MatrixXd& G, const Eigen::MatrixXd& A, const Eigen::VectorXd& d) {
    n = (int)G.cols();
    p = (int)A.rows();
    K0.setZero(n + p, n + p);
    K0.topLeftCorner(n, n) = G.transpose() * d.asDiagonal() * G;
    if (p > 0) {
      K0.topRightCorner(n, p) = A.transpose();
      K0.bottomLeftCorner(p, n) = A;
    }
    double reg = 1e-13;
    for (int attempt = 0; attempt < 5; ++attempt) {
      K = K0;
      K.topLeftCorner(n, n).diagonal().array() += reg;
      if (p > 0) K.bottomRightCorner(p, p).diagonal().array() -= reg;
      lu.compute(K);
      Eigen::VectorXd probe = lu.solve(Eigen::VectorXd::Ones(n + p));
      if (probe.allFinite()) return;
      reg *= 1e3;
    }
  }

  void solve(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, Eigen::VectorXd& dv,
             Eigen::VectorXd& dy) const {
    Eigen::VectorXd rhs(n + p);
    rhs.head(n) = r1;
    rhs.tail(p) = r2;
    Eigen::VectorXd sol = lu.solve(rhs);
    const double rn = rhs.cwiseAbs().maxCoeff() + 1e-300;
    double prev = std::numeric_limits<double>::infinity();
    for (int round = 0; round < 5; ++round) {
      Eigen::VectorXd res = rhs - K0 * sol;
      double rc = res.cwiseAbs().maxCoeff();
      if (!std::isfinite(rc) || rc >= prev || rc <= 1e-14 * rn) break;
      prev = rc;
      sol += lu.solve(res);
    }
    dv = sol.head(n);
    dy = sol.tail(p);
  }
};

}  // namespace

LpResult solve_lp(const LpData& data, const SolverConfig& cfg) {
  const int n = (int)data.c.size();
  const int m = (int)data.G.rows();
  const int p = (int)data.A.rows();

  // row equilibration (inf-norm) for conditioning; duals are unscaled on exit
  Eigen::MatrixXd G = data.G;
  Eigen::VectorXd h = data.h;
  Eigen::MatrixXd A = data.A;
  Eigen::VectorXd b = data.b;
  const Eigen::VectorXd& c = data.c;
  Eigen::VectorXd rg = Eigen::VectorXd::Ones(m), ra = Eigen::VectorXd::Ones(p);
  for (int i = 0; i < m; ++i) {
    double s = G.row(i).cwiseAbs().maxCoeff();
    if (s > 0) {
      rg(i) = 1.0 / s;
      G.row(i) *= rg(i);
      h(i) *= rg(i);
    }
  }
  for (int i = 0; i < p; ++i) {
    double s = A.row(i).cwiseAbs().maxCoeff();
    if (s > 0) {
      ra(i) = 1.0 / s;
      A.row(i) *= ra(i);
      b(i) *= ra(i);
    }
  }

  LpResult out;
  out.iters = 0;

  if (m == 0) {
    // equality-only: optimal iff c lies in range(A'); else unbounded
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n), y = Eigen::VectorXd::Zero(p);
    if (p > 0) {
      v = A.completeOrthogonalDecomposition().solve(b);
      y = A.transpose().completeOrthogonalDecomposition().solve(-c);
    }
    double dres = (c + A.transpose() * y).cwiseAbs().maxCoeff() / (1.0 + c.cwiseAbs().maxCoeff());
    double pres = p > 0 ? (A * v - b).cwiseAbs().maxCoeff() / (1.0 + b.cwiseAbs().maxCoeff()) : 0.0;
    out.v = v;
    out.y = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < p; ++i) out.y(i) = y(i) * ra(i);
    out.s.resize(0);
    out.z.resize(0);
    out.obj = c.dot(v);
    out.dual_obj = out.obj;
    out.primal_res = pres;
    out.dual_res = dres;
    out.rel_gap = 0.0;
    if (pres > cfg.feas_tol)
      out.status = SolveStatus::Infeasible;
    else if (dres > 1e-7)
      out.status = SolveStatus::Unbounded;
    else
      out.status = SolveStatus::Optimal;
    return out;
  }

  // starting point: least-squares v, shifted slacks, unit-scale duals
  Eigen::VectorXd v;
  {
    Eigen::MatrixXd S(m + p, n);
    S.topRows(m) = G;
    if (p > 0) S.bottomRows(p) = A;
    Eigen::VectorXd r(m + p);
    r.head(m) = h;
    r.tail(p) = b;
    v = S.completeOrthogonalDecomposition().solve(r);
  }
  Eigen::VectorXd s = h - G * v;
  double shift = std::max(0.0, -1.5 * s.minCoeff());
  s.array() += shift + 1.0;
  Eigen::VectorXd z = Eigen::VectorXd::Ones(m);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(p);

  const double hn = 1.0 + h.cwiseAbs().maxCoeff();
  const double bn = 1.0 + (p > 0 ? b.cwiseAbs().maxCoeff() : 0.0);
  const double cn = 1.0 + (n > 0 ? c.cwiseAbs().maxCoeff() : 0.0);

  Kkt kkt;
  Eigen::VectorXd dv(n), dy(p), ds(m), dz(m);
  Eigen::VectorXd dv_a(n), dy_a(p), ds_a(m), dz_a(m);

  // best iterate seen, restored on a numerical dead end
  double best_score = std::numeric_limits<double>::infinity();
  Eigen::VectorXd bv = v, bs = s, bz = z, by = y;
  double best_pres = 1.0, best_dres = 1.0, best_gap = 1.0;

  out.status = SolveStatus::IterLimit;
  for (int it = 0; it <= cfg.max_iters; ++it) {
    Eigen::VectorXd r_d = c + G.transpose() * z + (p > 0 ? (A.transpose() * y).eval() : Eigen::VectorXd::Zero(n));
    Eigen::VectorXd r_p = G * v + s - h;
    Eigen::VectorXd r_e = p > 0 ? (A * v - b).eval() : Eigen::VectorXd();
    double mu = std::max(s.dot(z) / m, 1e-300);

    double pres = r_p.cwiseAbs().maxCoeff() / hn;
    double eres = p > 0 ? r_e.cwiseAbs().maxCoeff() / bn : 0.0;
    double dres = r_d.cwiseAbs().maxCoeff() / cn;
    double pobj = c.dot(v);
    double dobj = -h.dot(z) - (p > 0 ? b.dot(y) : 0.0);
    double relgap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));

    out.iters = it;
    out.primal_res = std::max(pres, eres);
    out.dual_res = dres;
    out.rel_gap = relgap;

    if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(relgap)) break;
    double score = std::max({pres, eres, dres, relgap});
    if (score < best_score) {
      best_score = score;
      bv = v;
      bs = s;
      bz = z;
      by = y;
      best_pres = std::max(pres, eres);
      best_dres = dres;
      best_gap = relgap;
    }

    if (pres <= cfg.feas_tol && eres <= cfg.feas_tol && dres <= cfg.feas_tol &&
        (relgap <= cfg.opt_tol || mu / (1.0 + std::abs(pobj)) <= cfg.opt_tol)) {
      out.status = SolveStatus::Optimal;
      break;
    }
    if (it == cfg.max_iters) break;  // leaves IterLimit

    // Farkas-style certificates from the (scaled) duals
    double dual_scale = z.lpNorm<1>() + (p > 0 ? y.lpNorm<1>() : 0.0);
    if (dual_scale > 1e8) {
      double cert_res = (G.transpose() * z + (p > 0 ? (A.transpose() * y).eval() : Eigen::VectorXd::Zero(n)))
                            .cwiseAbs()
                            .maxCoeff() /
                        dual_scale;
      double cert_val = (h.dot(z) + (p > 0 ? b.dot(y) : 0.0)) / dual_scale;
      if (cert_res < 1e-10 && cert_val < -1e-10) {
        out.status = SolveStatus::Infeasible;
        break;
      }
    }
    if (s.lpNorm<1>() > 1e9 * hn && pres <= cfg.feas_tol && pobj < -1e9 * cn) {
      out.status = SolveStatus::Unbounded;
      break;
    }

    Eigen::VectorXd d = z.cwiseQuotient(s);
    kkt.factor(G, A, d);

    auto newton = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& ov, Eigen::VectorXd& oy,
                      Eigen::VectorXd& os, Eigen::VectorXd& oz) {
      // rc is the complementarity target: Z ds + S dz = rc - s.*z ... here rc
      // already holds the full right-hand side of  Z ds + S dz = rc.
      Eigen::VectorXd tmp = rc.cwiseQuotient(s);  // = rc ./ s
      Eigen::VectorXd r1 = -r_d - G.transpose() * (tmp + d.cwiseProduct(r_p));
      Eigen::VectorXd r2 = p > 0 ? (-r_e).eval() : Eigen::VectorXd();
      kkt.solve(r1, r2, ov, oy);
      os = -r_p - G * ov;
      oz = tmp - d.cwiseProduct(os);
    };

    // predictor
    Eigen::VectorXd rc = -s.cwiseProduct(z);
    newton(rc, dv_a, dy_a, ds_a, dz_a);
    double ap = std::min(1.0, step_len(s, ds_a));
    double ad = std::min(1.0, step_len(z, dz_a));
    double mu_aff = (s + ap * ds_a).dot(z + ad * dz_a) / m;
    double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
    sigma = std::min(sigma, 0.99999);

    // corrector
    rc = -s.cwiseProduct(z) - ds_a.cwiseProduct(dz_a);
    rc.array() += sigma * mu;
    newton(rc, dv, dy, ds, dz);
    if (!dv.allFinite() || !ds.allFinite() || !dz.allFinite() || (p > 0 && !dy.allFinite()))
      break;

    double gamma = (mu < 1e-6) ? 0.999 : 0.99;
    ap = std::min(1.0, gamma * step_len(s, ds));
    ad = std::min(1.0, gamma * step_len(z, dz));

    v += ap * dv;
    s += ap * ds;
    z += ad * dz;
    if (p > 0) y += ad * dy;
  }

  // leave on the best iterate if the last one is worse (or broken)
  {
    double cur = std::max({out.primal_res, out.dual_res, out.rel_gap});
    if (!std::isfinite(cur) || cur > best_score) {
      v = bv;
      s = bs;
      z = bz;
      y = by;
      out.primal_res = best_pres;
      out.dual_res = best_dres;
      out.rel_gap = best_gap;
      if (out.status != SolveStatus::Optimal && best_pres <= cfg.feas_tol &&
          best_dres <= cfg.feas_tol && best_gap <= cfg.opt_tol)
        out.status = SolveStatus::Optimal;
    }
  }

  out.v = v;
  out.s = s.cwiseQuotient(rg);            // slacks of the *original* rows
  out.z = z.cwiseProduct(rg);             // duals of the original rows
  out.y.resize(p);
  for (int i = 0; i < p; ++i) out.y(i) = y(i) * ra(i);
  out.obj = c.dot(v);
  out.dual_obj = -h.dot(z) - (p > 0 ? b.dot(y) : 0.0);
  return out;
}

}  // namespace partcert::detail
