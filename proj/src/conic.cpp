#include "partcert/conic.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "partcert/conic_sdp_internal.hpp"

namespace partcert {

using nlohmann::json;

void ConicProgram::set_sizes(int nv, int pd) {
  n_vars = nv;
  psd_dim = pd;
  c_lin = Eigen::VectorXd::Zero(nv);
}

void ConicProgram::validate() const {
  if (n_vars < 0 || psd_dim < 0) throw std::invalid_argument("negative sizes");
  if (n_vars == 0 && psd_dim == 0) throw std::invalid_argument("empty program");
  if (c_lin.size() != n_vars) throw std::invalid_argument("objective size mismatch");
  if (!c_lin.allFinite()) throw std::invalid_argument("non-finite objective");
  auto check_psd_term = [&](const PsdTerm& t) {
    if (t.i < 0 || t.j < 0 || t.i >= psd_dim || t.j >= psd_dim || t.i > t.j)
      throw std::invalid_argument("psd term index out of range (need 0 <= i <= j < dim)");
    if (!std::isfinite(t.val)) throw std::invalid_argument("non-finite psd coefficient");
  };
  for (const auto& t : c_psd) check_psd_term(t);
  auto check_row = [&](const ConicRow& r) {
    for (const auto& lt : r.lin) {
      if (lt.idx < 0 || lt.idx >= n_vars) throw std::invalid_argument("row index out of range");
      if (!std::isfinite(lt.val)) throw std::invalid_argument("non-finite row coefficient");
    }
    for (const auto& pt : r.psd) check_psd_term(pt);
    if (!std::isfinite(r.rhs)) throw std::invalid_argument("non-finite rhs");
  };
  for (const auto& r : le_rows) check_row(r);
  for (const auto& r : eq_rows) check_row(r);
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::IterLimit: return "iter-limit";
    case SolveStatus::TimeLimit: return "time-limit";
    case SolveStatus::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

namespace {

ConicSolution solve_lp_path(const ConicProgram& prog, const SolverConfig& cfg) {
  const int n = prog.n_vars;
  const int m = (int)prog.le_rows.size();
  const int p = (int)prog.eq_rows.size();
  detail::LpData d;
  d.c = prog.maximize ? (-prog.c_lin).eval() : prog.c_lin;
  d.G = Eigen::MatrixXd::Zero(m, n);
  d.h = Eigen::VectorXd::Zero(m);
  d.A = Eigen::MatrixXd::Zero(p, n);
  d.b = Eigen::VectorXd::Zero(p);
  for (int i = 0; i < m; ++i) {
    for (const auto& lt : prog.le_rows[i].lin) d.G(i, lt.idx) += lt.val;
    d.h(i) = prog.le_rows[i].rhs;
  }
  for (int i = 0; i < p; ++i) {
    for (const auto& lt : prog.eq_rows[i].lin) d.A(i, lt.idx) += lt.val;
    d.b(i) = prog.eq_rows[i].rhs;
  }
  auto r = detail::solve_lp(d, cfg);

  ConicSolution sol;
  sol.status = r.status;
  if (prog.maximize && r.status == SolveStatus::Unbounded) sol.status = SolveStatus::Unbounded;
  sol.v = r.v;
  sol.obj = prog.maximize ? -r.obj : r.obj;
  sol.dual_obj = prog.maximize ? -r.dual_obj : r.dual_obj;
  sol.dual_le = r.z;
  sol.dual_eq = r.y;
  sol.primal_res = r.primal_res;
  sol.dual_res = r.dual_res;
  sol.rel_gap = r.rel_gap;
  sol.comp_res = 0.0;
  for (int i = 0; i < r.s.size(); ++i)
    sol.comp_res = std::max(sol.comp_res, std::abs(r.s(i) * r.z(i)));
  sol.iters = r.iters;
  return sol;
}

ConicSolution solve_sdp_path(const ConicProgram& prog, const SolverConfig& cfg) {
  const int nle = (int)prog.le_rows.size();
  const int nv = prog.n_vars;
  detail::SdpData d;
  d.N = prog.psd_dim;
  d.L = nle + 2 * nv;
  d.split_pairs = nv > 0;
  d.split_base = nle;
  d.c_d = Eigen::VectorXd::Zero(d.L);
  const double sgn = prog.maximize ? -1.0 : 1.0;
  for (const auto& t : prog.c_psd)
    d.C_B.emplace_back(t.i, t.j, sgn * (t.i == t.j ? t.val : 0.5 * t.val));
  for (int k = 0; k < nv; ++k) {
    d.c_d(nle + 2 * k) = sgn * prog.c_lin(k);
    d.c_d(nle + 2 * k + 1) = -sgn * prog.c_lin(k);
  }
  auto convert_row = [&](const ConicRow& row, int slack_idx) {
    detail::SdpCon con;
    for (const auto& t : row.psd)
      con.B.emplace_back(t.i, t.j, t.i == t.j ? t.val : 0.5 * t.val);
    for (const auto& lt : row.lin) {
      con.a.emplace_back(nle + 2 * lt.idx, lt.val);
      con.a.emplace_back(nle + 2 * lt.idx + 1, -lt.val);
    }
    if (slack_idx >= 0) con.a.emplace_back(slack_idx, 1.0);
    con.b = row.rhs;
    return con;
  };
  for (int i = 0; i < nle; ++i) d.cons.push_back(convert_row(prog.le_rows[i], i));
  for (const auto& row : prog.eq_rows) d.cons.push_back(convert_row(row, -1));

  auto r = detail::solve_sdp(d, cfg);

  ConicSolution sol;
  sol.status = r.status;
  sol.psd = r.X;
  sol.v = Eigen::VectorXd::Zero(nv);
  for (int k = 0; k < nv; ++k) sol.v(k) = r.xd(nle + 2 * k) - r.xd(nle + 2 * k + 1);
  sol.obj = prog.maximize ? -r.pobj : r.pobj;
  sol.dual_obj = prog.maximize ? -r.dobj : r.dobj;
  sol.dual_le = Eigen::VectorXd::Zero(nle);
  sol.comp_res = 0.0;
  for (int i = 0; i < nle; ++i) {
    sol.dual_le(i) = -r.y(i) * (prog.maximize ? -1.0 : 1.0);
    sol.dual_le(i) = std::abs(sol.dual_le(i));  // slack reduced cost, sign fixed by convention
    sol.comp_res = std::max(sol.comp_res, std::abs(r.xd(i) * r.y(i)));
  }
  sol.dual_eq = Eigen::VectorXd::Zero((int)prog.eq_rows.size());
  for (int i = 0; i < (int)prog.eq_rows.size(); ++i) sol.dual_eq(i) = -r.y(nle + i);
  sol.primal_res = r.primal_res;
  sol.dual_res = r.dual_res;
  sol.rel_gap = r.rel_gap;
  sol.iters = r.iters;
  return sol;
}

}  // namespace

ConicSolution solve(const ConicProgram& prog, const SolverConfig& cfg) {
  prog.validate();
  auto t0 = std::chrono::steady_clock::now();
  ConicSolution sol = prog.psd_dim > 0 ? solve_sdp_path(prog, cfg) : solve_lp_path(prog, cfg);
  sol.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

std::string dump_program(const ConicProgram& prog) {
  json j;
  j["format"] = "partcert-conic-1";
  j["maximize"] = prog.maximize;
  j["n_vars"] = prog.n_vars;
  j["psd_dim"] = prog.psd_dim;
  j["objective"]["lin"] = std::vector<double>(prog.c_lin.data(), prog.c_lin.data() + prog.c_lin.size());
  auto psd_json = [](const std::vector<PsdTerm>& ts) {
    json a = json::array();
    for (const auto& t : ts) a.push_back({t.i, t.j, t.val});
    return a;
  };
  j["objective"]["psd"] = psd_json(prog.c_psd);
  json rows = json::array();
  auto row_json = [&](const ConicRow& r, const char* cone) {
    json jr;
    jr["cone"] = cone;
    json lin = json::array();
    for (const auto& lt : r.lin) lin.push_back({json(lt.idx), json(lt.val)});
    jr["lin"] = lin;
    jr["psd"] = psd_json(r.psd);
    jr["rhs"] = r.rhs;
    return jr;
  };
  for (const auto& r : prog.le_rows) rows.push_back(row_json(r, "le"));
  for (const auto& r : prog.eq_rows) rows.push_back(row_json(r, "eq"));
  j["rows"] = rows;
  return j.dump(2);
}

ConicProgram parse_program(const std::string& text) {
  json j = json::parse(text);
  if (j.value("format", "") != std::string("partcert-conic-1"))
    throw std::invalid_argument("unrecognized program dump format");
  ConicProgram p;
  p.set_sizes(j.at("n_vars").get<int>(), j.at("psd_dim").get<int>());
  p.maximize = j.at("maximize").get<bool>();
  auto lin = j.at("objective").at("lin").get<std::vector<double>>();
  if ((int)lin.size() != p.n_vars) throw std::invalid_argument("objective size mismatch");
  for (int i = 0; i < p.n_vars; ++i) p.c_lin(i) = lin[i];
  for (const auto& t : j.at("objective").at("psd"))
    p.c_psd.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<double>()});
  for (const auto& jr : j.at("rows")) {
    ConicRow r;
    for (const auto& lt : jr.at("lin"))
      r.lin.push_back({lt.at(0).get<int>(), lt.at(1).get<double>()});
    for (const auto& pt : jr.at("psd"))
      r.psd.push_back({pt.at(0).get<int>(), pt.at(1).get<int>(), pt.at(2).get<double>()});
    r.rhs = jr.at("rhs").get<double>();
    if (jr.at("cone").get<std::string>() == "le")
      p.le_rows.push_back(std::move(r));
    else
      p.eq_rows.push_back(std::move(r));
  }
  p.validate();
  return p;
}

}  // namespace partcert
