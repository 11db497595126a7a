#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace partcert {

struct Layer {
  Eigen::MatrixXd W;  // n_out x n_in
  Eigen::VectorXd b;  // n_out
};

/* Feedforward relu network.  x[0] = x, zhat[k] = W[k-1] x[k-1] + b[k-1],
 * x[k] = relu(zhat[k]), output z = x[K].  The relu is applied at every layer,
 * including the last one. */
struct ReluNetwork {
  std::vector<Layer> layers;

  int input_dim() const { return layers.empty() ? 0 : (int)layers.front().W.cols(); }
  int output_dim() const { return layers.empty() ? 0 : (int)layers.back().W.rows(); }
  int depth() const { return (int)layers.size(); }
  std::vector<int> shape() const;

  void validate() const;  // throws std::invalid_argument on malformed nets
};

struct ForwardTrace {
  std::vector<Eigen::VectorXd> preact;  // zhat[1..K]
  std::vector<Eigen::VectorXd> act;     // x[1..K]
  const Eigen::VectorXd& output() const { return act.back(); }
};

Eigen::VectorXd relu(const Eigen::VectorXd& v);
Eigen::VectorXd forward_eval(const ReluNetwork& net, const Eigen::VectorXd& x);
ForwardTrace forward_trace(const ReluNetwork& net, const Eigen::VectorXd& x);

/* Bias-free normal form: the input gains a trailing coordinate fixed at 1,
 * intermediate layers carry it through a passthrough row, biases move into the
 * appended column.  Output dimension is unchanged. */
ReluNetwork absorb_bias(const ReluNetwork& net);

/* First-layer rows rescaled to unit l1 norm; `scale` holds the original norms
 * so that  f(x) = scale .* relu(W_norm x + b_norm)  for one-layer nets.  Rows
 * that are zero (with zero bias) keep scale 0 and are left untouched. */
struct NormalizedNetwork {
  ReluNetwork net;
  Eigen::VectorXd scale;
};
NormalizedNetwork normalize_rows(const ReluNetwork& net);

/* c = e_challenger - e_{i*} where i* is the argmax of the nominal output
 * (lowest index on ties); certifying sup c.f(x) <= 0 rules out a flip to the
 * challenger.  Throws when challenger is the predicted label itself. */
Eigen::VectorXd classification_cost(const Eigen::VectorXd& nominal_output, int challenger);

/* Rows c_i^T = e_i^T - e_{i*}^T for every i != i*, where i* is the predicted
 * label at xbar (argmax of the output, lowest index on ties). */
struct ClassificationCost {
  int label = -1;
  Eigen::MatrixXd rows;          // (n_z - 1) x n_z
  std::vector<int> challengers;  // rows[r] challenges class challengers[r]
};
ClassificationCost classification_cost(const ReluNetwork& net, const Eigen::VectorXd& xbar);

enum class WeightDist { Normal, Uniform };

/* Deterministic for a fixed seed: the same seed yields bitwise-identical
 * weights within a build.  Biases are zero. */
ReluNetwork random_network(const std::vector<int>& shape, WeightDist dist, std::uint64_t seed);

}  // namespace partcert
