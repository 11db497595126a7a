#include "partcert/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>

#include "partcert/network.hpp"
#include "partcert/util.hpp"

namespace partcert {

namespace {

// clamp to the box, then alternate halfspace/box projections until feasible
Eigen::VectorXd project(const PolytopeSet& set, Eigen::VectorXd x) {
  auto clamp_box = [&](Eigen::VectorXd& v) {
    for (int i = 0; i < v.size(); ++i)
      v(i) = std::min(std::max(v(i), set.box.lower(i)), set.box.upper(i));
  };
  clamp_box(x);
  for (int round = 0; round < 40 && !set.contains(x, 1e-12); ++round) {
    for (const auto& h : set.halfspaces) {
      const double viol = h.a.dot(x) - h.beta;
      const double nn = h.a.squaredNorm();
      if (viol > 0 && nn > 0) x -= (viol / nn) * h.a;
    }
    clamp_box(x);
  }
  return x;
}

// ascent direction of c.f at x; indicator 0 exactly at kinks
Eigen::VectorXd ascent_grad(const CertProblem& problem, const Eigen::VectorXd& x) {
  auto t = forward_trace(problem.net, x);
  Eigen::VectorXd g = problem.c;
  for (int k = problem.net.depth() - 1; k >= 0; --k) {
    for (int i = 0; i < g.size(); ++i)
      if (t.preact[k](i) <= 0.0) g(i) = 0.0;
    g = problem.net.layers[k].W.transpose() * g;
  }
  return g;
}

double objective(const CertProblem& problem, const Eigen::VectorXd& x) {
  return problem.c.dot(forward_eval(problem.net, x));
}

Eigen::VectorXd ascend(const CertProblem& problem, Eigen::VectorXd x) {
  double val = objective(problem, x);
  double step = 0.25 * (problem.input.box.upper - problem.input.box.lower).maxCoeff();
  step = std::max(step, 1e-6);
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd g = ascent_grad(problem, x);
    if (g.lpNorm<Eigen::Infinity>() < 1e-14) break;
    double t = step;
    bool moved = false;
    for (int bt = 0; bt < 30; ++bt) {
      Eigen::VectorXd y = project(problem.input, x + t * g);
      const double vy = objective(problem, y);
      if (vy > val + 1e-14) {
        x = std::move(y);
        val = vy;
        step = t * 2.0;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  return x;
}

}  // namespace

OracleResult multistart_local_search(const CertProblem& problem, int starts, std::uint64_t seed,
                                     int workers) {
  problem.validate();
  if (starts < 1) throw std::invalid_argument("multistart_local_search: starts must be >= 1");
  const int n = problem.input.dim();

  std::vector<Eigen::VectorXd> inits;
  {
    std::mt19937_64 gen(derive_seed(seed, 0xabcdULL));
    std::uniform_real_distribution<double> U(0.0, 1.0);
    int tries = 0;
    while ((int)inits.size() < starts && tries < 200 * starts) {
      ++tries;
      Eigen::VectorXd x(n);
      for (int i = 0; i < n; ++i)
        x(i) = problem.input.box.lower(i) +
               U(gen) * (problem.input.box.upper(i) - problem.input.box.lower(i));
      if (problem.input.contains(x)) inits.push_back(std::move(x));
    }
    while ((int)inits.size() < starts)
      inits.push_back(project(problem.input, problem.input.box.center()));
  }

  std::vector<Eigen::VectorXd> ends((size_t)starts);
  parallel_for(starts, workers, [&](int s) { ends[(size_t)s] = ascend(problem, inits[(size_t)s]); });

  OracleResult best;
  best.method = "multistart-pga";
  best.exact = false;
  best.value = -std::numeric_limits<double>::infinity();
  for (const auto& x : ends) {
    const double v = objective(problem, x);
    if (v > best.value) {
      best.value = v;
      best.witness = x;
    }
  }
  return best;
}

OracleResult activation_pattern_oracle(const CertProblem& problem, int cap,
                                       const SolverConfig& cfg, int workers) {
  problem.validate();
  if (problem.net.depth() != 1)
    throw std::invalid_argument("activation-pattern oracle needs a one-layer network");
  const Layer& L0 = problem.net.layers.front();
  const int n1 = (int)L0.W.rows();
  const int nx = (int)L0.W.cols();
  if (n1 > cap) throw std::invalid_argument("activation-pattern oracle: width exceeds the cap");

  const long n_cells = 1L << n1;
  std::vector<double> vals((size_t)n_cells, -std::numeric_limits<double>::infinity());
  std::vector<Eigen::VectorXd> wits((size_t)n_cells);

  parallel_for((int)n_cells, workers, [&](int mask) {
    PolytopeSet cell = problem.input;
    for (int i = 0; i < n1; ++i) {
      const int sgn = (mask >> i) & 1 ? +1 : -1;
      Halfspace h;
      h.a = (sgn > 0) ? (-L0.W.row(i).transpose()).eval() : L0.W.row(i).transpose().eval();
      h.beta = (sgn > 0) ? L0.b(i) : -L0.b(i);
      cell.halfspaces.push_back(std::move(h));
    }
    if (set_is_empty(cell)) return;  // thin or empty cells contribute nothing

    // on the cell, z_i = w_i.x + b_i for active rows and 0 otherwise, so the
    // objective is affine in x alone
    ConicProgram p;
    p.set_sizes(nx, 0);
    p.maximize = true;
    for (int i = 0; i < n1; ++i)
      if ((mask >> i) & 1) p.c_lin += problem.c(i) * L0.W.row(i).transpose();
    for (int j = 0; j < nx; ++j) {
      p.le_rows.push_back({{{j, 1.0}}, {}, cell.box.upper(j)});
      p.le_rows.push_back({{{j, -1.0}}, {}, -cell.box.lower(j)});
    }
    for (const auto& h : cell.halfspaces) {
      ConicRow r;
      for (int j = 0; j < nx; ++j)
        if (h.a(j) != 0.0) r.lin.push_back({j, h.a(j)});
      r.rhs = h.beta;
      p.le_rows.push_back(std::move(r));
    }
    ConicSolution s = solve(p, cfg);
    if (s.status == SolveStatus::Infeasible) return;
    if (!s.ok()) return;
    Eigen::VectorXd w = project(problem.input, s.v);
    vals[(size_t)mask] = problem.c.dot(forward_eval(problem.net, w));
    wits[(size_t)mask] = std::move(w);
  });

  OracleResult out;
  out.method = "activation-pattern";
  out.exact = true;
  out.value = -std::numeric_limits<double>::infinity();
  for (long mask = 0; mask < n_cells; ++mask)
    if (vals[(size_t)mask] > out.value) {
      out.value = vals[(size_t)mask];
      out.witness = wits[(size_t)mask];
    }
  if (!std::isfinite(out.value)) {
    // every cell thin: fall back to the projected center, still a valid point
    out.witness = project(problem.input, problem.input.box.center());
    out.value = problem.c.dot(forward_eval(problem.net, out.witness));
    out.exact = false;
  }
  return out;
}

MinKUnion brute_force_min_k_union(const std::vector<std::vector<int>>& sets, int m, int k) {
  const int n = (int)sets.size();
  if (n == 0 || n > 20) throw std::invalid_argument("min-k-union: family size out of range");
  if (k < 0 || k > n) throw std::invalid_argument("min-k-union: bad k");
  for (const auto& s : sets)
    for (int e : s)
      if (e < 0 || e >= m) throw std::invalid_argument("min-k-union: element out of range");

  MinKUnion best;
  best.cardinality = m + 1;
  std::vector<int> cur(k);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == k) {
      std::vector<char> hit((size_t)m, 0);
      for (int j : cur)
        for (int e : sets[(size_t)j]) hit[(size_t)e] = 1;
      int card = 0;
      for (char h : hit) card += h;
      if (card < best.cardinality) {
        best.cardinality = card;
        best.subset = cur;
      }
      return;
    }
    for (int j = start; j <= n - (k - depth); ++j) {
      cur[(size_t)depth] = j;
      rec(j + 1, depth + 1);
    }
  };
  if (k == 0) {
    best.cardinality = 0;
    best.subset = {};
  } else {
    rec(0, 0);
  }
  return best;
}

}  // namespace partcert
