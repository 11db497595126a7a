#include "partcert/network.hpp"

#include <random>
#include <stdexcept>

namespace partcert {

std::vector<int> ReluNetwork::shape() const {
  std::vector<int> s;
  if (layers.empty()) return s;
  s.push_back(input_dim());
  for (const auto& l : layers) s.push_back((int)l.W.rows());
  return s;
}

void ReluNetwork::validate() const {
  if (layers.empty()) throw std::invalid_argument("network has no layers");
  for (size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.W.rows() == 0 || l.W.cols() == 0)
      throw std::invalid_argument("layer " + std::to_string(k) + " has a zero dimension");
    if (l.b.size() != l.W.rows())
      throw std::invalid_argument("layer " + std::to_string(k) + " bias size mismatch");
    if (k > 0 && l.W.cols() != layers[k - 1].W.rows())
      throw std::invalid_argument("layer " + std::to_string(k) + " width does not chain");
    if (!l.W.allFinite() || !l.b.allFinite())
      throw std::invalid_argument("layer " + std::to_string(k) + " has non-finite entries");
  }
}

Eigen::VectorXd relu(const Eigen::VectorXd& v) { return v.cwiseMax(0.0); }

ForwardTrace forward_trace(const ReluNetwork& net, const Eigen::VectorXd& x) {
  if (x.size() != net.input_dim()) throw std::invalid_argument("input dimension mismatch");
  ForwardTrace t;
  Eigen::VectorXd cur = x;
  for (const auto& l : net.layers) {
    Eigen::VectorXd zhat = l.W * cur + l.b;
    t.preact.push_back(zhat);
    cur = relu(zhat);
    t.act.push_back(cur);
  }
  return t;
}

Eigen::VectorXd forward_eval(const ReluNetwork& net, const Eigen::VectorXd& x) {
  if (x.size() != net.input_dim()) throw std::invalid_argument("input dimension mismatch");
  Eigen::VectorXd cur = x;
  for (const auto& l : net.layers) cur = relu(l.W * cur + l.b);
  return cur;
}

ReluNetwork absorb_bias(const ReluNetwork& net) {
  net.validate();
  ReluNetwork out;
  const int K = net.depth();
  for (int k = 0; k < K; ++k) {
    const auto& l = net.layers[k];
    const bool keep_one = k + 1 < K;  // intermediate layers carry the 1 through
    Layer nl;
    nl.W = Eigen::MatrixXd::Zero(l.W.rows() + (keep_one ? 1 : 0), l.W.cols() + 1);
    nl.W.topLeftCorner(l.W.rows(), l.W.cols()) = l.W;
    nl.W.col(l.W.cols()).head(l.W.rows()) = l.b;
    if (keep_one) nl.W(l.W.rows(), l.W.cols()) = 1.0;
    nl.b = Eigen::VectorXd::Zero(nl.W.rows());
    out.layers.push_back(std::move(nl));
  }
  return out;
}

NormalizedNetwork normalize_rows(const ReluNetwork& net) {
  net.validate();
  NormalizedNetwork nn;
  nn.net = net;
  auto& l0 = nn.net.layers[0];
  nn.scale = Eigen::VectorXd::Zero(l0.W.rows());
  for (int i = 0; i < l0.W.rows(); ++i) {
    double s = l0.W.row(i).lpNorm<1>();
    nn.scale(i) = s;
    if (s > 0.0) {
      l0.W.row(i) /= s;
      l0.b(i) /= s;
    }
  }
  return nn;
}

Eigen::VectorXd classification_cost(const Eigen::VectorXd& nominal_output, int challenger) {
  const int n = (int)nominal_output.size();
  if (n < 2) throw std::invalid_argument("classification cost needs >= 2 outputs");
  if (challenger < 0 || challenger >= n) throw std::invalid_argument("challenger out of range");
  int star = 0;
  for (int i = 1; i < n; ++i)
    if (nominal_output(i) > nominal_output(star)) star = i;
  if (challenger == star) throw std::invalid_argument("challenger equals the predicted label");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  c(challenger) = 1.0;
  c(star) = -1.0;
  return c;
}

ClassificationCost classification_cost(const ReluNetwork& net, const Eigen::VectorXd& xbar) {
  Eigen::VectorXd z = forward_eval(net, xbar);
  const int n = (int)z.size();
  if (n < 2) throw std::invalid_argument("classification cost needs >= 2 outputs");
  int star = 0;
  for (int i = 1; i < n; ++i)
    if (z(i) > z(star)) star = i;  // strict: lowest index wins ties
  ClassificationCost cc;
  cc.label = star;
  cc.rows = Eigen::MatrixXd::Zero(n - 1, n);
  int r = 0;
  for (int i = 0; i < n; ++i) {
    if (i == star) continue;
    cc.rows(r, i) = 1.0;
    cc.rows(r, star) = -1.0;
    cc.challengers.push_back(i);
    ++r;
  }
  return cc;
}

ReluNetwork random_network(const std::vector<int>& shape, WeightDist dist, std::uint64_t seed) {
  if (shape.size() < 2) throw std::invalid_argument("shape needs at least input and output widths");
  for (int w : shape)
    if (w <= 0) throw std::invalid_argument("shape widths must be positive");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  ReluNetwork net;
  for (size_t k = 0; k + 1 < shape.size(); ++k) {
    Layer l;
    l.W = Eigen::MatrixXd(shape[k + 1], shape[k]);
    for (int i = 0; i < l.W.rows(); ++i)
      for (int j = 0; j < l.W.cols(); ++j)
        l.W(i, j) = (dist == WeightDist::Normal) ? gauss(gen) : unif(gen);
    l.b = Eigen::VectorXd::Zero(shape[k + 1]);
    net.layers.push_back(std::move(l));
  }
  return net;
}

}  // namespace partcert
