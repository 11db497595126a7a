#include "partcert/bounds.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "partcert/relax_rows.hpp"
#include "partcert/util.hpp"

namespace partcert {

SolverConfig bound_lp_config() {
  SolverConfig cfg;
  cfg.feas_tol = 1e-9;
  cfg.opt_tol = 1e-9;
  cfg.max_iters = 120;
  return cfg;
}

namespace {

// exact interval image of W x + b over the box part of `set`
void analytic_first(const Layer& L, const BoxSet& box, Eigen::VectorXd& l, Eigen::VectorXd& u) {
  const int n = (int)L.W.rows();
  l = L.b;
  u = L.b;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < L.W.cols(); ++j) {
      const double w = L.W(i, j);
      if (w >= 0.0) {
        l[i] += w * box.lower[j];
        u[i] += w * box.upper[j];
      } else {
        l[i] += w * box.upper[j];
        u[i] += w * box.lower[j];
      }
    }
}

struct FirstLayerOut {
  Eigen::VectorXd l, u;
  int lp_fallbacks = 0;
};

FirstLayerOut first_layer_impl(const ReluNetwork& net, const PolytopeSet& set, int workers) {
  FirstLayerOut out;
  const Layer& L0 = net.layers.front();
  analytic_first(L0, set.box, out.l, out.u);
  if (set.halfspaces.empty()) return out;  // boxes: the analytic interval is exact

  // halfspace cuts present: two tiny LPs per row, clipped into the interval
  ConicProgram base;
  base.set_sizes(set.dim(), 0);
  detail::append_set_rows(base, set, 0);
  const int n = (int)L0.W.rows();
  std::atomic<int> fallbacks{0};
  Eigen::VectorXd lo = out.l, hi = out.u;
  const SolverConfig cfg = bound_lp_config();
  parallel_for(n, workers, [&](int i) {
    ConicProgram p = base;
    for (int j = 0; j < L0.W.cols(); ++j) p.c_lin[j] = L0.W(i, j);
    p.maximize = true;
    ConicSolution mx = solve(p, cfg);
    p.maximize = false;
    ConicSolution mn = solve(p, cfg);
    if (mx.ok()) hi[i] = std::min(hi[i], mx.dual_obj + L0.b[i]);
    if (mn.ok()) lo[i] = std::max(lo[i], mn.dual_obj + L0.b[i]);
    if (!mx.ok() || !mn.ok()) fallbacks.fetch_add(1);
    if (lo[i] > hi[i]) {  // crossed by solver tolerance only
      const double mid = 0.5 * (lo[i] + hi[i]);
      lo[i] = hi[i] = mid;
    }
  });
  out.l = lo;
  out.u = hi;
  out.lp_fallbacks = fallbacks.load();
  return out;
}

void apply_clamps_and_nest(LayerBounds& lb, int layer, const std::vector<Clamp>* clamps,
                           const LayerBounds* parent) {
  Eigen::VectorXd& l = lb.l[layer - 1];
  Eigen::VectorXd& u = lb.u[layer - 1];
  if (clamps) {
    for (const Clamp& c : *clamps) {
      if (c.layer != layer) continue;
      if (c.row < 0 || c.row >= l.size()) throw std::invalid_argument("clamp row out of range");
      if (c.sign > 0) {
        l[c.row] = std::max(l[c.row], 0.0);
        if (u[c.row] < l[c.row]) {
          u[c.row] = l[c.row];
          lb.warnings.push_back("clamp collapsed layer " + std::to_string(layer) + " row " +
                                std::to_string(c.row));
        }
      } else {
        u[c.row] = std::min(u[c.row], 0.0);
        if (l[c.row] > u[c.row]) {
          l[c.row] = u[c.row];
          lb.warnings.push_back("clamp collapsed layer " + std::to_string(layer) + " row " +
                                std::to_string(c.row));
        }
      }
    }
  }
  if (parent) {
    l = l.cwiseMax(parent->l[layer - 1]);
    u = u.cwiseMin(parent->u[layer - 1]);
    for (int i = 0; i < l.size(); ++i)
      if (l[i] > u[i]) {
        const double mid = 0.5 * (l[i] + u[i]);
        l[i] = u[i] = mid;
        lb.warnings.push_back("nest clip collapsed layer " + std::to_string(layer) + " row " +
                              std::to_string(i));
      }
  }
}

LayerBounds propagate_impl(const ReluNetwork& net, const PolytopeSet& set, BoundMode mode,
                           int workers, const std::vector<Clamp>* clamps,
                           const LayerBounds* parent) {
  net.validate();
  set.validate();
  if (set.dim() != net.input_dim())
    throw std::invalid_argument("propagate_bounds: set/network dim mismatch");
  if (parent && parent->depth() != net.depth())
    throw std::invalid_argument("restrict_bounds: parent depth mismatch");

  const int K = net.depth();
  LayerBounds out;
  out.l.resize(K);
  out.u.resize(K);

  // interval-mode restriction stays arithmetic-only: halfspace cuts can only
  // shrink the set, so the plain box interval is sound, and the nest step
  // below inherits the parent's tighter rows anyway
  FirstLayerOut fl;
  if (parent && mode == BoundMode::Interval)
    analytic_first(net.layers.front(), set.box, fl.l, fl.u);
  else
    fl = first_layer_impl(net, set, workers);
  if (fl.lp_fallbacks > 0) {
    out.warnings.push_back("first-layer LP fell back to interval on " +
                           std::to_string(fl.lp_fallbacks) + " rows");
    out.interval_fallback = true;
  }
  out.l[0] = fl.l;
  out.u[0] = fl.u;
  apply_clamps_and_nest(out, 1, clamps, parent);

  const SolverConfig cfg = bound_lp_config();
  for (int k = 2; k <= K; ++k) {
    const Layer& L = net.layers[k - 1];
    const int n = (int)L.W.rows();
    const Eigen::VectorXd al = relu(out.l[k - 2]);
    const Eigen::VectorXd au = relu(out.u[k - 2]);
    Eigen::VectorXd li = L.b, ui = L.b;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < L.W.cols(); ++j) {
        const double w = L.W(i, j);
        if (w >= 0.0) {
          li[i] += w * al[j];
          ui[i] += w * au[j];
        } else {
          li[i] += w * au[j];
          ui[i] += w * al[j];
        }
      }

    if (mode == BoundMode::LpTight) {
      // one stacked-variable LP pair per neuron over the relaxation so far
      detail::VarLayout ly = detail::stacked_layout(net, k - 1);
      ConicProgram base;
      base.set_sizes(ly.total, 0);
      detail::append_set_rows(base, set, 0);
      LpBuildInfo info;
      for (int j = 1; j <= k - 1; ++j)
        detail::append_layer_rows(base, net.layers[j - 1], out.l[j - 1], out.u[j - 1],
                                  ly.offset[j - 1], ly.offset[j], info);
      Eigen::VectorXd lt = li, ut = ui;
      std::atomic<int> fails{0};
      const int prev = ly.offset[k - 1];
      parallel_for(n, workers, [&](int i) {
        ConicProgram p = base;
        for (int j = 0; j < L.W.cols(); ++j) p.c_lin[prev + j] = L.W(i, j);
        p.maximize = true;
        ConicSolution mx = solve(p, cfg);
        p.maximize = false;
        ConicSolution mn = solve(p, cfg);
        if (!mx.ok() || !mn.ok()) {
          fails.fetch_add(1);
          return;
        }
        ut[i] = std::min(ui[i], mx.dual_obj + L.b[i]);
        lt[i] = std::max(li[i], mn.dual_obj + L.b[i]);
        if (lt[i] > ut[i]) {
          const double mid = 0.5 * (lt[i] + ut[i]);
          lt[i] = ut[i] = mid;
        }
      });
      if (fails.load() > 0) {
        out.warnings.push_back("lp-tight fell back to interval at layer " + std::to_string(k));
        out.interval_fallback = true;
      } else {
        li = lt;
        ui = ut;
      }
    }

    out.l[k - 1] = li;
    out.u[k - 1] = ui;
    apply_clamps_and_nest(out, k, clamps, parent);
  }
  return out;
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> first_layer_bounds(const ReluNetwork& net,
                                                               const PolytopeSet& set) {
  net.validate();
  set.validate();
  if (set.dim() != net.input_dim())
    throw std::invalid_argument("first_layer_bounds: set/network dim mismatch");
  FirstLayerOut fl = first_layer_impl(net, set, 1);
  return {fl.l, fl.u};
}

LayerBounds propagate_bounds(const ReluNetwork& net, const PolytopeSet& set, BoundMode mode,
                             int workers) {
  return propagate_impl(net, set, mode, workers, nullptr, nullptr);
}

LayerBounds restrict_bounds(const ReluNetwork& net, const PolytopeSet& part_set,
                            const std::vector<Clamp>& clamps, const LayerBounds& parent,
                            BoundMode mode, int workers) {
  return propagate_impl(net, part_set, mode, workers, &clamps, &parent);
}

}  // namespace partcert
