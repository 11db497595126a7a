#include "partcert/sdp_cert.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "partcert/util.hpp"

namespace partcert {

namespace {

constexpr double kPinTol = 1e-10;

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

SdpBlockLayout make_layout(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, bool foldable) {
  SdpBlockLayout b;
  b.dim_full = (int)lo.size();
  b.fixed = Eigen::VectorXd::Zero(b.dim_full);
  b.pinned.assign(b.dim_full, 0);
  b.pos.assign(b.dim_full, -1);
  for (int i = 0; i < b.dim_full; ++i) {
    if (foldable && hi(i) - lo(i) < kPinTol) {
      b.pinned[i] = 1;
      b.fixed(i) = 0.5 * (lo(i) + hi(i));
    } else {
      b.pos[i] = (int)b.keep.size();
      b.keep.push_back(i);
    }
  }
  return b;
}

SdpRelaxation build_core(const CertProblem& problem, const Eigen::VectorXd& l_in,
                         const Eigen::VectorXd& u_in, const LayerBounds* pre) {
  problem.validate();
  const ReluNetwork& net = problem.net;
  const int K = net.depth();
  if (l_in.size() != net.input_dim() || u_in.size() != l_in.size())
    throw std::invalid_argument("sdp build: input bound size mismatch");
  for (int i = 0; i < l_in.size(); ++i) {
    if (!std::isfinite(l_in(i)) || !std::isfinite(u_in(i)) || l_in(i) > u_in(i) + 1e-12)
      throw std::invalid_argument("sdp build: invalid input bounds");
  }

  // per-block bounds: the input box, then the post-activation range of each
  // hidden layer (the relu input of the next layer)
  std::vector<Eigen::VectorXd> lo(K), hi(K);
  lo[0] = l_in;
  hi[0] = u_in;
  for (int k = 1; k < K; ++k) {
    lo[k] = pre->lower(k).cwiseMax(0.0);
    hi[k] = pre->upper(k).cwiseMax(0.0);
  }

  SdpRelaxation out;
  out.blocks.resize(K + 1);
  int off = 1;
  for (int k = 0; k <= K; ++k) {
    if (k < K) {
      out.blocks[k] = make_layout(lo[k], hi[k], true);
    } else {
      // the output block carries no quadratic rows, so it is never degenerate
      Eigen::VectorXd z = Eigen::VectorXd::Zero(net.output_dim());
      out.blocks[k] = make_layout(z, z + Eigen::VectorXd::Ones(z.size()), false);
    }
    out.blocks[k].offset = off;
    off += (int)out.blocks[k].keep.size();
  }

  ConicProgram& prog = out.prog;
  prog.set_sizes(0, off);
  prog.maximize = true;

  ConicRow unit;
  unit.psd.push_back({0, 0, 1.0});
  unit.rhs = 1.0;
  prog.eq_rows.push_back(unit);

  // quadratic box rows on every kept coordinate of the relu-input blocks
  for (int k = 0; k < K; ++k) {
    const SdpBlockLayout& b = out.blocks[k];
    for (int t = 0; t < (int)b.keep.size(); ++t) {
      const int i = b.keep[t];
      const int pi = b.offset + t;
      ConicRow row;
      row.psd.push_back({pi, pi, 1.0});
      row.psd.push_back({0, pi, -(lo[k](i) + hi[k](i))});
      row.rhs = -lo[k](i) * hi[k](i);
      prog.le_rows.push_back(std::move(row));
      ++out.box_quad_rows;
    }
  }

  // input polytope rows act on the P_x block; folded coordinates move to rhs
  const SdpBlockLayout& xb = out.blocks[0];
  for (const Halfspace& h : problem.input.halfspaces) {
    if (h.a.size() != xb.dim_full)
      throw std::invalid_argument("sdp build: halfspace dimension mismatch");
    ConicRow row;
    double rhs = h.beta;
    for (int t = 0; t < (int)xb.keep.size(); ++t) {
      const double a = h.a(xb.keep[t]);
      if (a != 0.0) row.psd.push_back({0, xb.offset + t, a});
    }
    for (int i = 0; i < xb.dim_full; ++i)
      if (xb.pinned[i]) rhs -= h.a(i) * xb.fixed(i);
    row.rhs = rhs;
    if (row.psd.empty()) {
      if (rhs < -1e-9)
        throw std::invalid_argument("sdp build: halfspace infeasible on pinned coordinates");
      continue;
    }
    prog.le_rows.push_back(std::move(row));
  }

  for (int k = 1; k <= K; ++k) {
    const Layer& layer = net.layers[k - 1];
    const SdpBlockLayout& pb = out.blocks[k - 1];
    const SdpBlockLayout& cb = out.blocks[k];
    Eigen::VectorXd beff = layer.b;
    for (int j = 0; j < pb.dim_full; ++j)
      if (pb.pinned[j]) beff += layer.W.col(j) * pb.fixed(j);

    for (int i = 0; i < (int)layer.W.rows(); ++i) {
      auto preact_terms = [&](ConicRow& row) {
        for (int t = 0; t < (int)pb.keep.size(); ++t) {
          const double w = layer.W(i, pb.keep[t]);
          if (w != 0.0) row.psd.push_back({0, pb.offset + t, w});
        }
      };
      if (cb.pinned[i]) {
        // a folded neuron keeps its substituted relu rows on the prior block
        const double val = cb.fixed(i);
        ConicRow le;
        preact_terms(le);
        le.rhs = val - beff(i);
        if (!le.psd.empty())
          prog.le_rows.push_back(std::move(le));
        else if (le.rhs < -1e-9)
          throw std::invalid_argument("sdp build: pinned neuron contradicts its bounds");
        if (val > 0.0) {
          ConicRow eq;
          preact_terms(eq);
          eq.rhs = val - beff(i);
          if (!eq.psd.empty()) prog.eq_rows.push_back(std::move(eq));
        }
        continue;
      }
      const int zi = cb.offset + cb.pos[i];
      {
        ConicRow row;  // P_z >= 0
        row.psd.push_back({0, zi, -1.0});
        prog.le_rows.push_back(std::move(row));
      }
      {
        ConicRow row;  // P_z >= W P_x + b
        preact_terms(row);
        row.psd.push_back({0, zi, -1.0});
        row.rhs = -beff(i);
        prog.le_rows.push_back(std::move(row));
      }
      {
        ConicRow row;  // diag(P_zz) = diag(W P_xz) + b (.) P_z
        row.psd.push_back({zi, zi, 1.0});
        for (int t = 0; t < (int)pb.keep.size(); ++t) {
          const double w = layer.W(i, pb.keep[t]);
          if (w != 0.0) row.psd.push_back({pb.offset + t, zi, -w});
        }
        if (beff(i) != 0.0) row.psd.push_back({0, zi, -beff(i)});
        prog.eq_rows.push_back(std::move(row));
        ++out.diag_eq_rows;
      }
    }
  }

  const SdpBlockLayout& ob = out.blocks[K];
  for (int i = 0; i < ob.dim_full; ++i)
    if (problem.c(i) != 0.0) prog.c_psd.push_back({0, ob.offset + ob.pos[i], problem.c(i)});
  prog.validate();
  return out;
}

}  // namespace

SolverConfig sdp_cert_config() {
  SolverConfig cfg;
  cfg.feas_tol = 1e-7;
  cfg.opt_tol = 1e-7;
  cfg.max_iters = 200;
  cfg.time_limit_s = 120.0;
  return cfg;
}

Eigen::VectorXd SdpMatrix::block_vec(int k) const {
  const SdpBlockLayout& b = blocks.at((size_t)k);
  Eigen::VectorXd v(b.dim_full);
  for (int i = 0; i < b.dim_full; ++i)
    v(i) = b.pinned[i] ? b.fixed(i) : P(0, b.offset + b.pos[i]);
  return v;
}

Eigen::MatrixXd SdpMatrix::block_mat(int k, int q) const {
  const SdpBlockLayout& a = blocks.at((size_t)k);
  const SdpBlockLayout& b = blocks.at((size_t)q);
  const Eigen::VectorXd va = block_vec(k);
  const Eigen::VectorXd vb = block_vec(q);
  Eigen::MatrixXd M(a.dim_full, b.dim_full);
  for (int i = 0; i < a.dim_full; ++i) {
    for (int j = 0; j < b.dim_full; ++j) {
      if (!a.pinned[i] && !b.pinned[j])
        M(i, j) = P(a.offset + a.pos[i], b.offset + b.pos[j]);
      else if (a.pinned[i] && b.pinned[j])
        M(i, j) = a.fixed(i) * b.fixed(j);
      else if (a.pinned[i])
        M(i, j) = a.fixed(i) * vb(j);
      else
        M(i, j) = va(i) * b.fixed(j);
    }
  }
  return M;
}

Eigen::MatrixXd SdpMatrix::Pzz() const {
  const int last = (int)blocks.size() - 1;
  return block_mat(last, last);
}

Eigen::MatrixXd SdpMatrix::Pxz() const { return block_mat(0, (int)blocks.size() - 1); }

SdpRelaxation build_sdp(const CertProblem& problem, const Eigen::VectorXd& l,
                        const Eigen::VectorXd& u) {
  if (problem.net.depth() != 1)
    throw std::invalid_argument("build_sdp needs a one-layer network");
  return build_core(problem, l, u, nullptr);
}

SdpRelaxation build_multilayer_sdp(const CertProblem& problem, const LayerBounds& bounds) {
  if (bounds.depth() != problem.net.depth())
    throw std::invalid_argument("build_multilayer_sdp: bound depth mismatch");
  return build_core(problem, problem.input.box.lower, problem.input.box.upper, &bounds);
}

SdpResult solve_sdp(const SdpRelaxation& relax, const SolverConfig& cfg) {
  SdpResult out;
  ConicSolution sol = solve(relax.prog, cfg);
  out.P.P = sol.psd;
  out.P.blocks = relax.blocks;
  out.res.status = sol.status;
  out.res.wall_time_s = sol.wall_time_s;
  out.res.rel_gap = sol.rel_gap;
  out.res.primal_value = sol.obj;
  out.res.value = sol.ok() ? std::max(sol.obj, sol.dual_obj) : sol.obj;
  if (sol.psd.rows() > 0) {
    out.res.input_point = out.P.Px();
    out.res.output_point = out.P.Pz();
  }
  return out;
}

PartitionedResult partitioned_sdp(const CertProblem& problem, const PartitionPlan& plan,
                                  const LayerBounds& parent, BoundMode mode,
                                  const SolverConfig& cfg, int workers) {
  if (plan.parts.empty()) throw std::invalid_argument("partitioned_sdp: empty plan");
  const double t0 = now_s();
  const int np = (int)plan.parts.size();
  std::vector<RelaxResult> results((size_t)np);
  parallel_for(np, workers, [&](int j) {
    const PartitionPart& part = plan.parts[j];
    LayerBounds rb = restrict_bounds(problem.net, part.set, part.clamps, parent, mode);
    CertProblem sub = problem;
    sub.input = part.set;
    SdpResult r = solve_sdp(build_multilayer_sdp(sub, rb), cfg);
    r.res.bounds_warning = rb.interval_fallback;
    results[j] = std::move(r.res);
  });

  PartitionedResult out;
  out.parts = np;
  out.part_values.resize(np);
  int arg = -1;
  for (int j = 0; j < np; ++j) {
    out.part_values[j] = results[j].value;
    out.bounds_warning = out.bounds_warning || results[j].bounds_warning;
    if (!results[j].ok()) {
      out.winner = results[j];
      out.winning_part = -1;
      out.value = std::numeric_limits<double>::quiet_NaN();
      out.wall_time_s = now_s() - t0;
      return out;
    }
    if (arg < 0 || results[j].value > out.part_values[arg]) arg = j;
  }
  out.winning_part = arg;
  out.winner = results[arg];
  out.value = out.part_values[arg];
  out.wall_time_s = now_s() - t0;
  return out;
}

double rank1_gap(const SdpMatrix& P) {
  return P.Pxx().trace() - P.Px().squaredNorm();
}

double rank1_gap_bound(const std::vector<BoxSet>& part_bounds) {
  if (part_bounds.empty()) throw std::invalid_argument("rank1_gap_bound: no parts");
  const int n = (int)part_bounds.front().lower.size();
  for (const BoxSet& b : part_bounds)
    if ((int)b.lower.size() != n || b.upper.size() != b.lower.size())
      throw std::invalid_argument("rank1_gap_bound: part dimension mismatch");
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double worst = 0.0;
    for (const BoxSet& b : part_bounds) {
      const double w = b.upper(i) - b.lower(i);
      worst = std::max(worst, w * w);
    }
    acc += worst;
  }
  return 0.25 * acc;
}

PartitionPlan uniform_partition(const BoxSet& box, int coordinate, int parts) {
  const int n = (int)box.lower.size();
  if (coordinate < 0 || coordinate >= n)
    throw std::invalid_argument("uniform_partition: coordinate out of range");
  if (parts < 2) throw std::invalid_argument("uniform_partition: need at least two parts");
  const double lk = box.lower(coordinate);
  const double uk = box.upper(coordinate);
  if (!(uk - lk > kPinTol)) throw std::invalid_argument("uniform_partition: degenerate coordinate");

  PartitionPlan plan;
  plan.provenance =
      "uniform(" + std::to_string(coordinate) + "," + std::to_string(parts) + ")";
  for (int j = 0; j < parts; ++j) {
    BoxSet slab = box;
    slab.lower(coordinate) = j == 0 ? lk : lk + (uk - lk) * j / parts;
    slab.upper(coordinate) = j == parts - 1 ? uk : lk + (uk - lk) * (j + 1) / parts;
    PartitionPart part;
    part.set = polytope_from_box(slab);
    plan.parts.push_back(std::move(part));
  }
  return plan;
}

SdpCoordChoice optimal_sdp_coordinate(const Eigen::VectorXd& l, const Eigen::VectorXd& u) {
  if (l.size() != u.size() || l.size() == 0)
    throw std::invalid_argument("optimal_sdp_coordinate: bad bounds");
  SdpCoordChoice out;
  for (int k = 0; k < l.size(); ++k) {
    if (l(k) > u(k) + 1e-12) throw std::invalid_argument("optimal_sdp_coordinate: l > u");
    const double s = std::max(std::abs(l(k)), std::abs(u(k)));
    if (out.index < 0 || s > out.score + 1e-15) {
      out.index = k;
      out.score = s;
      out.tied = false;
    } else if (std::abs(s - out.score) <= 1e-15) {
      out.tied = true;
    }
  }
  out.symmetric_limits =
      std::abs(std::abs(l(out.index)) - std::abs(u(out.index))) <= 1e-12 * (1.0 + out.score);
  return out;
}

double q_factor(const Eigen::VectorXd& l, const Eigen::VectorXd& u) {
  double q = 0.0;
  for (int k = 0; k < std::min(l.size(), u.size()); ++k)
    q = std::max({q, std::abs(l(k)), std::abs(u(k))});
  return q;
}

double worst_case_sdp_bound(const Eigen::VectorXd& c, const Eigen::VectorXd& l,
                            const Eigen::VectorXd& u, const Eigen::VectorXd& uhat,
                            const Eigen::VectorXd& row_dual_norms, double eps) {
  if (c.size() != uhat.size() || c.size() != row_dual_norms.size())
    throw std::invalid_argument("worst_case_sdp_bound: size mismatch");
  if (l.size() != u.size()) throw std::invalid_argument("worst_case_sdp_bound: bad box");
  if (eps < 0.0) throw std::invalid_argument("worst_case_sdp_bound: negative radius");
  for (int i = 0; i < row_dual_norms.size(); ++i)
    if (std::abs(row_dual_norms(i) - 1.0) > 1e-9)
      throw std::invalid_argument(
          "worst_case_sdp_bound: rows must be l1-normalized (see normalize_rows)");
  const double q = q_factor(l, u);
  double acc = 0.0;
  for (int i = 0; i < c.size(); ++i) {
    acc += std::max(c(i), 0.0) * q;
    acc += std::max(-c(i), 0.0) * std::min(uhat(i), eps * row_dual_norms(i));
  }
  return acc;
}

PsdElementReport psd_element_check(const Eigen::MatrixXd& P, double tol) {
  if (P.rows() != P.cols()) throw std::invalid_argument("psd_element_check: not square");
  PsdElementReport rep;
  for (int i = 0; i < P.rows(); ++i) {
    for (int j = i + 1; j < P.cols(); ++j) {
      const double v = std::abs(P(i, j)) - 0.5 * (P(i, i) + P(j, j));
      if (v > rep.violation || rep.i < 0) {
        rep.violation = v;
        rep.i = i;
        rep.j = j;
      }
    }
  }
  if (rep.i < 0) rep.violation = 0.0;
  rep.pass = rep.violation <= tol;
  return rep;
}

}  // namespace partcert
