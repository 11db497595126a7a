#include "partcert/sets.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace partcert {

void BoxSet::validate() const {
  if (lower.size() != upper.size()) throw std::invalid_argument("box bound sizes differ");
  if (lower.size() == 0) throw std::invalid_argument("empty box");
  if (!lower.allFinite() || !upper.allFinite()) throw std::invalid_argument("non-finite box bound");
  for (int i = 0; i < lower.size(); ++i)
    if (lower(i) > upper(i)) throw std::invalid_argument("box has lower > upper");
}

bool BoxSet::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != dim()) return false;
  for (int i = 0; i < dim(); ++i)
    if (x(i) < lower(i) - tol || x(i) > upper(i) + tol) return false;
  return true;
}

BoxSet box_from_nominal(const Eigen::VectorXd& xbar, double eps) {
  if (eps <= 0) throw std::invalid_argument("radius must be positive");
  BoxSet b;
  b.lower = xbar.array() - eps;
  b.upper = xbar.array() + eps;
  return b;
}

void PolytopeSet::validate() const {
  box.validate();
  for (const auto& h : halfspaces) {
    if (h.a.size() != box.dim()) throw std::invalid_argument("halfspace dimension mismatch");
    if (!h.a.allFinite() || !std::isfinite(h.beta))
      throw std::invalid_argument("non-finite halfspace");
  }
}

bool PolytopeSet::contains(const Eigen::VectorXd& x, double tol) const {
  if (!box.contains(x, tol)) return false;
  for (const auto& h : halfspaces)
    if (h.a.dot(x) > h.beta + tol * (1.0 + h.a.cwiseAbs().maxCoeff())) return false;
  return true;
}

PolytopeSet polytope_from_box(const BoxSet& b) {
  PolytopeSet s;
  s.box = b;
  return s;
}

double chebyshev_radius(const PolytopeSet& set, const SolverConfig& cfg) {
  set.validate();
  const int n = set.dim();
  // substitute out pinned coordinates so degenerate boxes are not flagged empty
  std::vector<int> live;
  Eigen::VectorXd pinned = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (set.box.upper(i) - set.box.lower(i) < 1e-12)
      pinned(i) = 0.5 * (set.box.lower(i) + set.box.upper(i));
    else
      live.push_back(i);
  }
  const int nl = (int)live.size();

  struct Row {
    Eigen::VectorXd a;
    double norm, beta;
  };
  std::vector<Row> rows;
  for (const auto& h : set.halfspaces) {
    Row r;
    r.a = Eigen::VectorXd::Zero(nl);
    double rhs = h.beta;
    for (int i = 0; i < n; ++i) {
      if (set.box.upper(i) - set.box.lower(i) < 1e-12)
        rhs -= h.a(i) * pinned(i);
    }
    for (int k = 0; k < nl; ++k) r.a(k) = h.a(live[k]);
    r.norm = r.a.norm();
    r.beta = rhs;
    if (r.norm < 1e-14) {
      if (rhs < -1e-12) return -1e30;  // constant row violated: empty
      continue;
    }
    rows.push_back(std::move(r));
  }

  if (nl == 0) return 0.0;  // fully pinned point, all rows already checked

  ConicProgram p;
  p.set_sizes(nl + 1, 0);
  p.c_lin(nl) = 1.0;  // maximize the radius r
  for (int k = 0; k < nl; ++k) {
    p.le_rows.push_back({{{k, 1.0}, {nl, 1.0}}, {}, set.box.upper(live[k])});
    p.le_rows.push_back({{{k, -1.0}, {nl, 1.0}}, {}, -set.box.lower(live[k])});
  }
  for (const auto& r : rows) {
    ConicRow row;
    for (int k = 0; k < nl; ++k)
      if (r.a(k) != 0.0) row.lin.push_back({k, r.a(k)});
    row.lin.push_back({nl, r.norm});
    row.rhs = r.beta;
    p.le_rows.push_back(std::move(row));
  }
  auto s = solve(p, cfg);
  if (!s.ok()) return -1e30;  // conservative: treat unsolved as empty
  return s.obj;
}

bool set_is_empty(const PolytopeSet& set, const SolverConfig& cfg) {
  return chebyshev_radius(set, cfg) < kThinTol;
}

PartitionPlan row_halfspace_partition(const PolytopeSet& set, const Eigen::VectorXd& w,
                                      double offset, int row, int layer) {
  if (w.size() != set.dim()) throw std::invalid_argument("split direction dimension mismatch");
  PartitionPlan plan;
  plan.provenance = row >= 0 ? "row-halfspace(" + std::to_string(row) + ")" : "row-halfspace";
  for (int sgn : {+1, -1}) {
    PartitionPart part;
    part.set = set;
    Halfspace h;
    h.a = (sgn > 0) ? (-w).eval() : w;  // sgn>0 keeps w.x + offset >= 0
    h.beta = (sgn > 0) ? offset : -offset;
    part.set.halfspaces.push_back(h);
    if (row >= 0) part.clamps.push_back({layer, row, sgn});
    if (set_is_empty(part.set)) {
      plan.notes.push_back(std::string("dropped empty part on side ") +
                           (sgn > 0 ? "+" : "-"));
      continue;
    }
    plan.parts.push_back(std::move(part));
  }
  return plan;
}

CoverageReport validate_partition(const PolytopeSet& parent, const PartitionPlan& plan,
                                  int n_samples, std::uint64_t seed) {
  CoverageReport rep;
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int n = parent.dim();
  int accepted = 0, covered = 0, overlapped = 0;
  int tries = 0;
  const int max_tries = 50 * n_samples;
  while (accepted < n_samples && tries < max_tries) {
    ++tries;
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i)
      x(i) = parent.box.lower(i) + U(gen) * (parent.box.upper(i) - parent.box.lower(i));
    if (!parent.contains(x)) continue;
    ++accepted;
    int hits = 0;
    for (const auto& part : plan.parts)
      if (part.set.contains(x)) ++hits;
    if (hits >= 1) ++covered;
    if (hits >= 2) ++overlapped;
    if (hits == 0 && !rep.witness) rep.witness = x;
  }
  if (accepted == 0) return rep;
  rep.covered_fraction = (double)covered / accepted;
  rep.overlap_fraction = (double)overlapped / accepted;
  rep.pass = covered == accepted;
  return rep;
}

void CertProblem::validate() const {
  net.validate();
  input.validate();
  if (input.dim() != net.input_dim()) throw std::invalid_argument("input set dimension mismatch");
  if (c.size() != net.output_dim()) throw std::invalid_argument("cost dimension mismatch");
  if (!c.allFinite() || !std::isfinite(d)) throw std::invalid_argument("non-finite cost");
}

}  // namespace partcert
