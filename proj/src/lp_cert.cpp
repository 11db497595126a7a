#include "partcert/lp_cert.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "partcert/util.hpp"

namespace partcert {

namespace {

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// sign cell of `rows` with signs sgn over the first layer: sgn_i (w_i.x + b_i) >= 0
PolytopeSet sign_cell(const CertProblem& problem, const std::vector<int>& rows,
                      const std::vector<int>& sgn) {
  PolytopeSet cell = problem.input;
  const Layer& L0 = problem.net.layers.front();
  for (size_t t = 0; t < rows.size(); ++t) {
    Halfspace h;
    h.a = (sgn[t] > 0) ? (-L0.W.row(rows[t]).transpose()).eval()
                       : L0.W.row(rows[t]).transpose().eval();
    h.beta = (sgn[t] > 0) ? L0.b(rows[t]) : -L0.b(rows[t]);
    cell.halfspaces.push_back(std::move(h));
  }
  return cell;
}

// normalized score; 0 for stable/fixed rows, negative for promising ones
double row_score(double c, double l, double u) {
  const double lc = std::min(l, 0.0), uc = std::max(u, 0.0);
  if (uc - lc < 1e-10) return 0.0;
  return std::max(c, 0.0) * uc * lc / (uc - lc);
}

}  // namespace

SolverConfig lp_cert_config() {
  SolverConfig cfg;
  cfg.feas_tol = 1e-8;
  cfg.opt_tol = 1e-8;
  cfg.max_iters = 120;
  return cfg;
}

LpRelaxation build_lp(const CertProblem& problem, const LayerBounds& bounds,
                      const std::vector<ExactRelu>& exact) {
  problem.validate();
  const ReluNetwork& net = problem.net;
  const int K = net.depth();
  if (bounds.depth() != K) throw std::invalid_argument("build_lp: bounds depth mismatch");

  LpRelaxation relax;
  detail::VarLayout ly = detail::stacked_layout(net, K);
  relax.var_offset = ly.offset;
  relax.prog.set_sizes(ly.total, 0);
  relax.prog.maximize = true;
  detail::append_set_rows(relax.prog, problem.input, 0);

  for (int k = 1; k <= K; ++k) {
    std::vector<int> es((size_t)net.layers[k - 1].W.rows(), 0);
    bool any = false;
    for (const auto& e : exact) {
      if (e.layer != k) continue;
      if (e.row < 0 || e.row >= (int)es.size())
        throw std::invalid_argument("build_lp: exact-relu row out of range");
      es[e.row] = e.sign >= 0 ? 1 : -1;
      any = true;
    }
    detail::append_layer_rows(relax.prog, net.layers[k - 1], bounds.l[k - 1], bounds.u[k - 1],
                              ly.offset[k - 1], ly.offset[k], relax.info, any ? &es : nullptr);
  }
  for (int i = 0; i < net.output_dim(); ++i) relax.prog.c_lin[ly.offset[K] + i] = problem.c(i);
  return relax;
}

RelaxResult solve_lp(const LpRelaxation& relax, const SolverConfig& cfg) {
  RelaxResult r;
  const double t0 = now_s();
  ConicSolution s = solve(relax.prog, cfg);
  r.wall_time_s = now_s() - t0;
  r.status = s.status;
  r.primal_value = s.obj;
  r.value = s.ok() ? std::max(s.obj, s.dual_obj) : s.obj;
  r.rel_gap = s.rel_gap;
  if (s.v.size() > 0) {
    const int n0 = relax.var_offset.size() > 1 ? relax.var_offset[1] : (int)s.v.size();
    r.input_point = s.v.head(n0);
    r.output_point = s.v.tail(s.v.size() - relax.var_offset.back());
  }
  return r;
}

PartitionedResult partitioned_lp(const CertProblem& problem, const PartitionPlan& plan,
                                 const LayerBounds& parent, BoundMode mode,
                                 const SolverConfig& cfg, int workers) {
  if (plan.parts.empty()) throw std::invalid_argument("partitioned_lp: empty plan");
  const double t0 = now_s();
  const int np = (int)plan.parts.size();
  std::vector<RelaxResult> results((size_t)np);
  parallel_for(np, workers, [&](int j) {
    const PartitionPart& part = plan.parts[j];
    LayerBounds rb = restrict_bounds(problem.net, part.set, part.clamps, parent, mode);
    CertProblem sub = problem;
    sub.input = part.set;
    RelaxResult r = solve_lp(build_lp(sub, rb), cfg);
    r.bounds_warning = rb.interval_fallback;
    results[j] = std::move(r);
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

PartitionPlan motivating_partition(const CertProblem& problem, int cap) {
  problem.validate();
  if (problem.net.depth() != 1)
    throw std::invalid_argument("motivating partition needs a one-layer network");
  const int n1 = (int)problem.net.layers[0].W.rows();
  if (n1 > cap) throw std::invalid_argument("motivating partition: width exceeds the cap");

  PartitionPlan plan;
  plan.provenance = "motivating";
  std::vector<int> rows(n1);
  std::iota(rows.begin(), rows.end(), 0);
  for (long mask = 0; mask < (1L << n1); ++mask) {
    std::vector<int> sgn(n1);
    for (int i = 0; i < n1; ++i) sgn[i] = (mask >> i) & 1 ? +1 : -1;
    PartitionPart part;
    part.set = sign_cell(problem, rows, sgn);
    for (int i = 0; i < n1; ++i) part.clamps.push_back({1, i, sgn[i]});
    if (set_is_empty(part.set)) {
      plan.notes.push_back("dropped empty sign cell " + std::to_string(mask));
      continue;
    }
    plan.parts.push_back(std::move(part));
  }
  return plan;
}

RowChoice optimal_two_part_row(const Eigen::VectorXd& c, const Eigen::VectorXd& l,
                               const Eigen::VectorXd& u) {
  if (c.size() != l.size() || l.size() != u.size())
    throw std::invalid_argument("optimal_two_part_row: size mismatch");
  RowChoice best;
  for (int i = 0; i < c.size(); ++i) {
    if (!(l(i) < 0.0 && u(i) > 0.0)) continue;  // stable rows are not candidates
    const double sc = row_score(c(i), l(i), u(i));
    if (best.row < 0 || sc < best.score) {
      best.row = i;
      best.score = sc;
    }
  }
  best.all_stable = best.row < 0;
  return best;
}

double two_part_bound(const Eigen::VectorXd& c, const Eigen::VectorXd& l,
                      const Eigen::VectorXd& u, int i) {
  if (i < 0 || i >= c.size()) throw std::invalid_argument("two_part_bound: row out of range");
  double total = 0.0;
  for (int k = 0; k < c.size(); ++k) {
    if (k == i) continue;
    total -= row_score(c(k), l(k), u(k));
  }
  return total;
}

std::vector<int> lowest_score_rows(const Eigen::VectorXd& c, const Eigen::VectorXd& l,
                                   const Eigen::VectorXd& u, int n_p) {
  std::vector<std::pair<double, int>> cand;
  for (int i = 0; i < c.size(); ++i)
    if (l(i) < 0.0 && u(i) > 0.0) cand.push_back({row_score(c(i), l(i), u(i)), i});
  if ((int)cand.size() < n_p)
    throw std::invalid_argument("fewer unstable rows than requested partition rows");
  std::sort(cand.begin(), cand.end());  // score, then index
  std::vector<int> rows;
  for (int t = 0; t < n_p; ++t) rows.push_back(cand[t].second);
  std::sort(rows.begin(), rows.end());
  return rows;
}

PartitionPlan multi_row_partition(const CertProblem& problem, const LayerBounds& bounds,
                                  const Eigen::VectorXd& c_score, int n_p, long cap) {
  problem.validate();
  if (n_p < 1) throw std::invalid_argument("multi_row_partition: n_p must be positive");
  if ((1L << n_p) > cap) throw std::invalid_argument("multi_row_partition: cap exceeded");
  std::vector<int> rows = lowest_score_rows(c_score, bounds.l[0], bounds.u[0], n_p);

  PartitionPlan plan;
  plan.provenance = "multi-row";
  for (long mask = 0; mask < (1L << n_p); ++mask) {
    std::vector<int> sgn(n_p);
    for (int t = 0; t < n_p; ++t) sgn[t] = (mask >> t) & 1 ? +1 : -1;
    PartitionPart part;
    part.set = sign_cell(problem, rows, sgn);
    for (int t = 0; t < n_p; ++t) part.clamps.push_back({1, rows[t], sgn[t]});
    if (set_is_empty(part.set)) {
      plan.notes.push_back("dropped empty sign cell " + std::to_string(mask));
      continue;
    }
    plan.parts.push_back(std::move(part));
  }
  return plan;
}

RefineResult recursive_refine(const CertProblem& problem, int budget, BoundMode mode,
                              const SolverConfig& cfg, int workers) {
  problem.validate();
  if (budget < 2) throw std::invalid_argument("recursive_refine: budget must be >= 2");
  const ReluNetwork& net = problem.net;
  const int n1 = (int)net.layers[0].W.rows();

  Eigen::VectorXd c_score;
  if (net.depth() == 1)
    c_score = problem.c;
  else if (n1 >= 2)
    c_score = surrogate_cost(net, problem.input.box.center());
  else
    c_score = Eigen::VectorXd::Ones(1);

  struct Node {
    PartitionPart part;
    LayerBounds bounds;
    double value = 0.0;
    std::vector<bool> used;  // first-layer rows already split on this lineage
    bool terminal = false;
  };

  LayerBounds parent = propagate_bounds(net, problem.input, mode, workers);
  std::vector<Node> nodes;
  {
    Node root;
    root.part.set = problem.input;
    root.bounds = parent;
    root.used.assign((size_t)n1, false);
    RelaxResult r = solve_lp(build_lp(problem, parent), cfg);
    if (!r.ok()) throw std::runtime_error("recursive_refine: root solve failed");
    root.value = r.value;
    nodes.push_back(std::move(root));
  }

  RefineResult out;
  out.trace.push_back(nodes[0].value);

  auto solve_node = [&](Node& nd) {
    nd.bounds = restrict_bounds(net, nd.part.set, nd.part.clamps, parent, mode, workers);
    CertProblem sub = problem;
    sub.input = nd.part.set;
    RelaxResult r = solve_lp(build_lp(sub, nd.bounds), cfg);
    if (!r.ok()) throw std::runtime_error("recursive_refine: part solve failed");
    nd.value = r.value;
  };

  while ((int)nodes.size() < budget) {
    int worst = -1;
    for (int j = 0; j < (int)nodes.size(); ++j)
      if (!nodes[j].terminal && (worst < 0 || nodes[j].value > nodes[worst].value)) worst = j;
    if (worst < 0) break;  // nothing left to split

    Node& nd = nodes[worst];
    // candidate rows by score over this node's own bounds, skipping used ones
    int row = -1;
    double best_sc = 0.0;
    for (int i = 0; i < n1; ++i) {
      if (nd.used[i]) continue;
      if (!(nd.bounds.l[0](i) < 0.0 && nd.bounds.u[0](i) > 0.0)) continue;
      const double sc = row_score(c_score(i), nd.bounds.l[0](i), nd.bounds.u[0](i));
      if (row < 0 || sc < best_sc) {
        row = i;
        best_sc = sc;
      }
    }
    if (row < 0) {
      nd.terminal = true;
      continue;
    }

    auto plan = row_halfspace_partition(nd.part.set, net.layers[0].W.row(row).transpose(),
                                        net.layers[0].b(row), row);
    if (plan.parts.empty()) {
      nd.terminal = true;
      continue;
    }

    std::vector<Node> children;
    for (auto& p : plan.parts) {
      Node ch;
      ch.part = p;
      // lineage clamps accumulate
      ch.part.clamps.insert(ch.part.clamps.begin(), nd.part.clamps.begin(),
                            nd.part.clamps.end());
      ch.used = nd.used;
      ch.used[row] = true;
      children.push_back(std::move(ch));
    }
    parallel_for((int)children.size(), workers,
                 [&](int j) { solve_node(children[j]); });

    const bool grew = children.size() >= 2;
    nodes.erase(nodes.begin() + worst);
    for (auto& ch : children) nodes.push_back(std::move(ch));
    if (grew) {
      double overall = -std::numeric_limits<double>::infinity();
      for (const auto& n : nodes) overall = std::max(overall, n.value);
      out.trace.push_back(overall);
    }
  }

  out.plan.provenance = "recursive";
  out.result.parts = (int)nodes.size();
  out.result.part_values.resize(nodes.size());
  int arg = 0;
  for (int j = 0; j < (int)nodes.size(); ++j) {
    out.plan.parts.push_back(nodes[j].part);
    out.result.part_values[j] = nodes[j].value;
    if (nodes[j].value > nodes[arg].value) arg = j;
  }
  out.result.winning_part = arg;
  out.result.value = nodes[arg].value;
  // re-solve the winner so the full RelaxResult is available
  CertProblem sub = problem;
  sub.input = nodes[arg].part.set;
  out.result.winner = solve_lp(
      build_lp(sub, restrict_bounds(net, nodes[arg].part.set, nodes[arg].part.clamps, parent,
                                    mode, workers)),
      cfg);
  return out;
}

double worst_case_lp_bound(const Eigen::VectorXd& c, const Eigen::VectorXd& l,
                           const Eigen::VectorXd& u, const Eigen::VectorXd& row_dual_norms,
                           double eps) {
  if (c.size() != l.size() || l.size() != u.size() || u.size() != row_dual_norms.size())
    throw std::invalid_argument("worst_case_lp_bound: size mismatch");
  if (eps < 0) throw std::invalid_argument("worst_case_lp_bound: negative radius");
  double total = 0.0;
  for (int i = 0; i < c.size(); ++i) {
    const double lc = std::min(l(i), 0.0), uc = std::max(u(i), 0.0);
    if (uc - lc < 1e-10) continue;
    const double m = std::min(eps * row_dual_norms(i), uc);
    total += std::max(c(i), 0.0) * (uc / (uc - lc)) * (m - lc) + std::max(-c(i), 0.0) * m;
  }
  return total;
}

namespace {

Eigen::VectorXd surrogate_from_act(const Eigen::VectorXd& act, int j_override) {
  const int n1 = (int)act.size();
  int i = 0;
  for (int t = 1; t < n1; ++t)
    if (act(t) > act(i)) i = t;
  int j = j_override;
  if (j < 0) {
    j = i == 0 ? 1 : 0;
    for (int t = 0; t < n1; ++t) {
      if (t == i) continue;
      if (act(t) > act(j)) j = t;
    }
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n1);
  c(j) = 1.0;
  c(i) = -1.0;
  return c;
}

}  // namespace

Eigen::VectorXd surrogate_cost(const ReluNetwork& net, const Eigen::VectorXd& xbar) {
  net.validate();
  if (net.layers[0].W.rows() < 2)
    throw std::invalid_argument("surrogate cost needs at least two first-layer rows");
  Eigen::VectorXd act = relu(net.layers[0].W * xbar + net.layers[0].b);
  return surrogate_from_act(act, -1);
}

Eigen::VectorXd surrogate_cost_random(const ReluNetwork& net, const Eigen::VectorXd& xbar,
                                      std::uint64_t seed) {
  net.validate();
  const int n1 = (int)net.layers[0].W.rows();
  if (n1 < 2) throw std::invalid_argument("surrogate cost needs at least two first-layer rows");
  Eigen::VectorXd act = relu(net.layers[0].W * xbar + net.layers[0].b);
  int i = 0;
  for (int t = 1; t < n1; ++t)
    if (act(t) > act(i)) i = t;
  int j = (int)(derive_seed(seed, 0) % (std::uint64_t)(n1 - 1));
  if (j >= i) ++j;
  return surrogate_from_act(act, j);
}

double subset_partition_value(const CertProblem& problem, const LayerBounds& bounds,
                              const std::vector<int>& rows, const SolverConfig& cfg) {
  problem.validate();
  const int n_p = (int)rows.size();
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (long mask = 0; mask < (1L << n_p); ++mask) {
    std::vector<int> sgn(n_p);
    std::vector<ExactRelu> exact;
    for (int t = 0; t < n_p; ++t) {
      sgn[t] = (mask >> t) & 1 ? +1 : -1;
      exact.push_back({1, rows[t], sgn[t]});
    }
    CertProblem sub = problem;
    sub.input = sign_cell(problem, rows, sgn);
    if (set_is_empty(sub.input)) continue;
    RelaxResult r = solve_lp(build_lp(sub, bounds, exact), cfg);
    if (!r.ok()) throw std::runtime_error("subset_partition_value: cell solve failed");
    best = std::max(best, r.value);
    any = true;
  }
  if (!any) throw std::runtime_error("subset_partition_value: all sign cells empty");
  return best;
}

ExhaustiveResult exhaustive_first_layer_partition(const CertProblem& problem,
                                                  const LayerBounds& bounds, int n_p, long cap,
                                                  const SolverConfig& cfg, int workers) {
  problem.validate();
  const int n1 = (int)problem.net.layers[0].W.rows();
  if (n_p < 0 || n_p > n1) throw std::invalid_argument("exhaustive partition: bad subset size");

  // all size-n_p subsets in lexicographic order
  std::vector<std::vector<int>> subsets;
  std::vector<int> cur(n_p);
  std::iota(cur.begin(), cur.end(), 0);
  if (n_p == 0)
    subsets.push_back({});
  else
    while (true) {
      subsets.push_back(cur);
      int t = n_p - 1;
      while (t >= 0 && cur[t] == n1 - n_p + t) --t;
      if (t < 0) break;
      ++cur[t];
      for (int s = t + 1; s < n_p; ++s) cur[s] = cur[s - 1] + 1;
    }
  if ((long)subsets.size() * (1L << n_p) > cap)
    throw std::invalid_argument("exhaustive partition: cap exceeded");

  ExhaustiveResult out;
  out.all.resize(subsets.size());
  parallel_for((int)subsets.size(), workers, [&](int j) {
    out.all[j].rows = subsets[j];
    out.all[j].value = subset_partition_value(problem, bounds, subsets[j], cfg);
  });
  int arg = 0;
  for (int j = 1; j < (int)out.all.size(); ++j)
    if (out.all[j].value < out.all[arg].value) arg = j;
  out.best_rows = out.all[arg].rows;
  out.best_value = out.all[arg].value;
  return out;
}

CertProblem NpGadget::problem() const {
  CertProblem p;
  p.net = net;
  p.input = input;
  p.c = c;
  return p;
}

int NpGadget::union_size(const std::vector<int>& subset) const {
  std::vector<char> hit((size_t)m, 0);
  for (int j : subset)
    for (int e : sets.at((size_t)j)) hit[(size_t)e] = 1;
  int cnt = 0;
  for (char h : hit) cnt += h;
  return cnt;
}

int NpGadget::union_size_outside(const std::vector<int>& rows_inside) const {
  std::vector<char> inside((size_t)n, 0);
  for (int j : rows_inside) inside[(size_t)j] = 1;
  std::vector<int> comp;
  for (int j = 0; j < n; ++j)
    if (!inside[j]) comp.push_back(j);
  return union_size(comp);
}

NpGadget np_gadget(const std::vector<std::vector<int>>& sets, int m, int k) {
  const int n = (int)sets.size();
  if (n == 0 || m <= 0) throw std::invalid_argument("np_gadget: empty family");
  if (k < 0 || k > n) throw std::invalid_argument("np_gadget: bad k");
  std::vector<char> covered((size_t)m, 0);
  for (const auto& s : sets)
    for (int e : s) {
      if (e < 0 || e >= m) throw std::invalid_argument("np_gadget: element out of range");
      covered[(size_t)e] = 1;
    }
  for (char cflag : covered)
    if (!cflag) throw std::invalid_argument("np_gadget: family must cover the universe");

  NpGadget g;
  g.n = n;
  g.m = m;
  g.k_param = k;
  g.sets = sets;

  Eigen::MatrixXd W1 = Eigen::MatrixXd::Zero(m, n);
  for (int j = 0; j < n; ++j)
    for (int e : sets[(size_t)j]) W1(e, j) = 1.0;
  g.net.layers.push_back({Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n)});
  g.net.layers.push_back({W1, Eigen::VectorXd::Zero(m)});
  g.net.layers.push_back({Eigen::MatrixXd::Identity(m, m), Eigen::VectorXd::Zero(m)});

  BoxSet box;
  box.lower = Eigen::VectorXd::Constant(n, -1.0);
  box.upper = Eigen::VectorXd::Constant(n, 1.0);
  g.input = polytope_from_box(box);
  g.c = Eigen::VectorXd::Ones(m);

  const Eigen::VectorXd deg = W1 * Eigen::VectorXd::Ones(n);
  g.bounds.l.resize(3);
  g.bounds.u.resize(3);
  g.bounds.u[0] = Eigen::VectorXd::Constant(n, 2.0);
  g.bounds.l[0] = -g.bounds.u[0];
  g.bounds.u[1] = 1.5 * deg;
  g.bounds.l[1] = -g.bounds.u[1];
  g.bounds.u[2] = 1.25 * deg + Eigen::VectorXd::Constant(m, 0.125);
  g.bounds.l[2] = -g.bounds.u[2];

  g.f_bar = (1.25 * deg).sum() + m / 16.0;
  return g;
}

}  // namespace partcert
