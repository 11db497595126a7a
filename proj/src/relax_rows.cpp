#include "partcert/relax_rows.hpp"

#include <cmath>
#include <stdexcept>

namespace partcert::detail {

VarLayout stacked_layout(const ReluNetwork& net, int upto_layer) {
  if (upto_layer < 0 || upto_layer > net.depth())
    throw std::invalid_argument("stacked_layout: layer out of range");
  VarLayout ly;
  ly.offset.resize(upto_layer + 1);
  int off = 0;
  ly.offset[0] = 0;
  off += net.input_dim();
  for (int k = 1; k <= upto_layer; ++k) {
    ly.offset[k] = off;
    off += (int)net.layers[k - 1].W.rows();
  }
  ly.total = off;
  return ly;
}

void append_set_rows(ConicProgram& p, const PolytopeSet& set, int off) {
  const int n = set.dim();
  for (int j = 0; j < n; ++j) {
    ConicRow up;
    up.lin.push_back({off + j, 1.0});
    up.rhs = set.box.upper[j];
    p.le_rows.push_back(std::move(up));
    ConicRow lo;
    lo.lin.push_back({off + j, -1.0});
    lo.rhs = -set.box.lower[j];
    p.le_rows.push_back(std::move(lo));
  }
  for (const auto& hs : set.halfspaces) {
    ConicRow r;
    for (int j = 0; j < n; ++j)
      if (hs.a[j] != 0.0) r.lin.push_back({off + j, hs.a[j]});
    r.rhs = hs.beta;
    p.le_rows.push_back(std::move(r));
  }
}

namespace {

// lhs terms for zhat_i = W.row(i) . xprev (+ b_i handled by caller via rhs)
void push_w_row(ConicRow& r, const Eigen::MatrixXd& W, int i, int prev, double scale) {
  for (int j = 0; j < W.cols(); ++j)
    if (W(i, j) != 0.0) r.lin.push_back({prev + j, scale * W(i, j)});
}

}  // namespace

void append_layer_rows(ConicProgram& p, const Layer& layer, const Eigen::VectorXd& l,
                       const Eigen::VectorXd& u, int prev, int cur, LpBuildInfo& info,
                       const std::vector<int>* exact_sign) {
  const int n = (int)layer.W.rows();
  if (l.size() != n || u.size() != n)
    throw std::invalid_argument("append_layer_rows: bound size mismatch");
  for (int i = 0; i < n; ++i) {
    if (!(l[i] <= u[i]) || !std::isfinite(l[i]) || !std::isfinite(u[i]))
      throw std::invalid_argument("append_layer_rows: bad bounds");
    const int es = exact_sign ? (*exact_sign)[i] : 0;
    if (es > 0) {
      // z = zhat together with zhat >= 0
      ConicRow eq;
      eq.lin.push_back({cur + i, 1.0});
      push_w_row(eq, layer.W, i, prev, -1.0);
      eq.rhs = layer.b[i];
      p.eq_rows.push_back(std::move(eq));
      ConicRow ge;
      push_w_row(ge, layer.W, i, prev, -1.0);
      ge.rhs = layer.b[i];
      p.le_rows.push_back(std::move(ge));
      ++info.identity_neurons;
      continue;
    }
    if (es < 0) {
      // z = 0 together with zhat <= 0
      ConicRow eq;
      eq.lin.push_back({cur + i, 1.0});
      eq.rhs = 0.0;
      p.eq_rows.push_back(std::move(eq));
      ConicRow le;
      push_w_row(le, layer.W, i, prev, 1.0);
      le.rhs = -layer.b[i];
      p.le_rows.push_back(std::move(le));
      ++info.zero_neurons;
      continue;
    }
    if (u[i] - l[i] < 1e-10) {
      ConicRow eq;
      eq.lin.push_back({cur + i, 1.0});
      eq.rhs = std::max(u[i], 0.0);
      p.eq_rows.push_back(std::move(eq));
      ++info.fixed_neurons;
    } else if (l[i] >= 0.0) {
      ConicRow eq;
      eq.lin.push_back({cur + i, 1.0});
      push_w_row(eq, layer.W, i, prev, -1.0);
      eq.rhs = layer.b[i];
      p.eq_rows.push_back(std::move(eq));
      ++info.identity_neurons;
    } else if (u[i] <= 0.0) {
      ConicRow eq;
      eq.lin.push_back({cur + i, 1.0});
      eq.rhs = 0.0;
      p.eq_rows.push_back(std::move(eq));
      ++info.zero_neurons;
    } else {
      // triangle envelope: z >= 0, z >= zhat, z <= u (zhat - l) / (u - l)
      ConicRow r0;
      r0.lin.push_back({cur + i, -1.0});
      r0.rhs = 0.0;
      p.le_rows.push_back(std::move(r0));
      ConicRow r1;
      r1.lin.push_back({cur + i, -1.0});
      push_w_row(r1, layer.W, i, prev, 1.0);
      r1.rhs = -layer.b[i];
      p.le_rows.push_back(std::move(r1));
      const double s = u[i] / (u[i] - l[i]);
      ConicRow r2;
      r2.lin.push_back({cur + i, 1.0});
      push_w_row(r2, layer.W, i, prev, -s);
      r2.rhs = s * (layer.b[i] - l[i]);
      p.le_rows.push_back(std::move(r2));
      ++info.envelope_neurons;
    }
  }
}

}  // namespace partcert::detail
