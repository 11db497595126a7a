#pragma once

#include "partcert/network.hpp"
#include "partcert/sets.hpp"

namespace partcert {

enum class BoundMode { Interval, LpTight };

/* Preactivation bounds l[k] <= zhat[k+1] <= u[k] for k = 0..K-1 (stored
 * 0-based; l[k] bounds layer k+1).  Soundness: every x in the input set keeps
 * its trajectory inside these brackets. */
struct LayerBounds {
  std::vector<Eigen::VectorXd> l, u;
  bool interval_fallback = false;
  std::vector<std::string> warnings;

  int depth() const { return (int)l.size(); }
  const Eigen::VectorXd& lower(int layer1based) const { return l.at(layer1based - 1); }
  const Eigen::VectorXd& upper(int layer1based) const { return u.at(layer1based - 1); }
};

SolverConfig bound_lp_config();

/* Exact first-layer preactivation bounds: analytic over a pure box, per-row
 * LPs when the set carries halfspace cuts. */
std::pair<Eigen::VectorXd, Eigen::VectorXd> first_layer_bounds(const ReluNetwork& net,
                                                               const PolytopeSet& set);

/* Layer-by-layer bounds.  Interval: forward interval arithmetic from the
 * (exact) first layer.  LpTight: per-neuron LPs over the relaxation of all
 * preceding layers; falls back to interval (per layer) on solver trouble and
 * says so in `warnings`.  LpTight results are clipped inside the interval
 * ones, so lp-tight never exceeds interval. */
LayerBounds propagate_bounds(const ReluNetwork& net, const PolytopeSet& set, BoundMode mode,
                             int workers = 1);

/* Bounds for a partition part: recomputed over the part, sign clamps applied
 * at their layer (sign>0 raises l to 0, sign<0 drops u to 0), then clipped to
 * nest inside the parent bounds layer by layer. */
LayerBounds restrict_bounds(const ReluNetwork& net, const PolytopeSet& part_set,
                            const std::vector<Clamp>& clamps, const LayerBounds& parent,
                            BoundMode mode, int workers = 1);

}  // namespace partcert
