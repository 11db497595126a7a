#pragma once

#include "partcert/bounds.hpp"
#include "partcert/conic.hpp"
#include "partcert/network.hpp"
#include "partcert/sets.hpp"

namespace partcert {

/* Force a relu exact on one neuron of one layer: sign>0 pins z = zhat and
 * adds zhat >= 0, sign<0 pins z = 0 and adds zhat <= 0.  Only meaningful when
 * the input set actually lives on that side. */
struct ExactRelu {
  int layer = 1;  // 1-based
  int row = 0;
  int sign = 1;
};

struct LpBuildInfo {
  int envelope_neurons = 0;  // 3 inequality rows each
  int identity_neurons = 0;  // z = zhat equality
  int zero_neurons = 0;      // z = 0 equality
  int fixed_neurons = 0;     // pinned bounds, z = relu(u) equality
};

namespace detail {

/* Variable layout for the stacked vector (x^[0], x^[1], ..., x^[upto]). */
struct VarLayout {
  std::vector<int> offset;  // offset[k] = first index of x^[k]
  int total = 0;
};
VarLayout stacked_layout(const ReluNetwork& net, int upto_layer);

/* Membership rows for `set` on the variable block starting at `off`. */
void append_set_rows(ConicProgram& p, const PolytopeSet& set, int off);

/* Relaxation rows for layer k (1-based) tying block `cur` to block `prev`
 * using preactivation bounds l,u.  Classification per neuron: pinned
 * (u-l < 1e-10) -> z = relu(u); l >= 0 -> identity; u <= 0 -> zero; else the
 * three-row envelope.  `exact_sign`, when nonzero for a row, overrides with
 * the exact relu rows. */
void append_layer_rows(ConicProgram& p, const Layer& layer, const Eigen::VectorXd& l,
                       const Eigen::VectorXd& u, int prev, int cur, LpBuildInfo& info,
                       const std::vector<int>* exact_sign = nullptr);

}  // namespace detail
}  // namespace partcert
