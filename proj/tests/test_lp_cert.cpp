#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "partcert/lp_cert.hpp"
#include "partcert/network.hpp"
#include "partcert/oracles.hpp"

using namespace partcert;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x((int)v.size());
  int i = 0;
  for (double d : v) x(i++) = d;
  return x;
}

CertProblem one_neuron(double cval) {
  CertProblem p;
  Eigen::MatrixXd W(1, 1);
  W << 1.0;
  p.net.layers.push_back({W, Eigen::VectorXd::Zero(1)});
  p.input = polytope_from_box(box_from_nominal(vec({0.0}), 1.0));
  p.c = vec({cval});
  return p;
}

CertProblem random_one_layer(int nx, int nz, std::uint64_t seed, double eps = 0.6,
                             bool biased = false) {
  CertProblem p;
  p.net = random_network({nx, nz}, WeightDist::Normal, seed);
  if (biased) {
    std::mt19937_64 gen(seed + 7);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (int i = 0; i < nz; ++i) p.net.layers[0].b(i) = u(gen);
  }
  p.input = polytope_from_box(box_from_nominal(Eigen::VectorXd::Zero(nx), eps));
  std::mt19937_64 gen(seed + 13);
  std::normal_distribution<double> g(0.0, 1.0);
  p.c = Eigen::VectorXd::Zero(nz);
  for (int i = 0; i < nz; ++i) p.c(i) = g(gen);
  return p;
}

// evaluate a conic row at a stacked point
double row_value(const ConicRow& r, const Eigen::VectorXd& v) {
  double s = 0.0;
  for (const auto& t : r.lin) s += t.val * v(t.idx);
  return s;
}

}  // namespace

TEST_CASE("build_lp one unstable neuron") {
  auto p = one_neuron(1.0);
  auto bounds = propagate_bounds(p.net, p.input, BoundMode::Interval);
  auto relax = build_lp(p, bounds);
  CHECK(relax.info.envelope_neurons == 1);
  CHECK(relax.prog.le_rows.size() == 2 + 3);  // box rows + triangle rows
  CHECK(relax.prog.eq_rows.empty());
  auto r = solve_lp(relax);
  REQUIRE(r.ok());
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.input_point(0) == doctest::Approx(1.0).epsilon(1e-5));

  auto pm = one_neuron(-1.0);
  auto rm = solve_lp(build_lp(pm, bounds));
  REQUIRE(rm.ok());
  CHECK(rm.value == doctest::Approx(0.0).epsilon(1e-7));
}

TEST_CASE("build_lp stable neuron becomes one equality") {
  CertProblem p;
  Eigen::MatrixXd W(1, 1);
  W << 1.0;
  p.net.layers.push_back({W, Eigen::VectorXd::Zero(1)});
  p.input = polytope_from_box(box_from_nominal(vec({1.0}), 0.5));  // [0.5, 1.5]
  p.c = vec({1.0});
  auto bounds = propagate_bounds(p.net, p.input, BoundMode::Interval);
  auto relax = build_lp(p, bounds);
  CHECK(relax.info.identity_neurons == 1);
  CHECK(relax.info.envelope_neurons == 0);
  CHECK(relax.prog.eq_rows.size() == 1);
  auto r = solve_lp(relax);
  REQUIRE(r.ok());
  CHECK(r.value == doctest::Approx(1.5).epsilon(1e-7));
}

TEST_CASE("true trajectories are feasible for the relaxation") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (std::uint64_t seed : {5ULL, 8ULL}) {
    auto p = random_one_layer(3, 4, seed, 0.5, true);
    auto bounds = propagate_bounds(p.net, p.input, BoundMode::Interval);
    auto relax = build_lp(p, bounds);
    for (int s = 0; s < 300; ++s) {
      Eigen::VectorXd x(3);
      for (int i = 0; i < 3; ++i)
        x(i) = p.input.box.lower(i) + U(gen) * (p.input.box.upper(i) - p.input.box.lower(i));
      Eigen::VectorXd stacked(relax.prog.n_vars);
      stacked.head(3) = x;
      stacked.tail(4) = forward_eval(p.net, x);
      for (const auto& r : relax.prog.le_rows) CHECK(row_value(r, stacked) <= r.rhs + 1e-9);
      for (const auto& r : relax.prog.eq_rows)
        CHECK(row_value(r, stacked) == doctest::Approx(r.rhs).epsilon(1e-9));
    }
  }
}

TEST_CASE("relaxation upper-bounds the local search on deep nets too") {
  for (std::uint64_t seed : {21ULL, 34ULL}) {
    CertProblem p;
    p.net = random_network({3, 5, 4, 2}, WeightDist::Normal, seed);
    p.input = polytope_from_box(box_from_nominal(Eigen::VectorXd::Zero(3), 0.3));
    p.c = vec({1.0, -1.0});
    auto bounds = propagate_bounds(p.net, p.input, BoundMode::LpTight);
    auto upper = solve_lp(build_lp(p, bounds));
    REQUIRE(upper.ok());
    auto lower = multistart_local_search(p, 5, seed);
    CHECK(lower.value <= upper.value + 1e-6 * (1.0 + std::abs(upper.value)));
  }
}

TEST_CASE("partitioned_lp with the identity plan equals solve_lp") {
  auto p = random_one_layer(2, 3, 44);
  auto bounds = propagate_bounds(p.net, p.input, BoundMode::LpTight);
  PartitionPlan plan;
  plan.parts.push_back({p.input, {}});
  auto part = partitioned_lp(p, plan, bounds);
  auto whole = solve_lp(build_lp(p, bounds));
  REQUIRE(part.ok());
  CHECK(part.value == doctest::Approx(whole.value).epsilon(1e-7));
  CHECK(part.winning_part == 0);
}

TEST_CASE("two-part split never hurts on one-layer nets") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL, 6ULL}) {
    auto p = random_one_layer(3, 4, seed, 0.7, seed % 2 == 0);
    auto bounds = propagate_bounds(p.net, p.input, BoundMode::LpTight);
    auto whole = solve_lp(build_lp(p, bounds));
    REQUIRE(whole.ok());
    auto choice = optimal_two_part_row(p.c, bounds.l[0], bounds.u[0]);
    if (choice.all_stable) continue;
    auto plan = row_halfspace_partition(p.input, p.net.layers[0].W.row(choice.row).transpose(),
                                        p.net.layers[0].b(choice.row), choice.row);
    auto part = partitioned_lp(p, plan, bounds);
    REQUIRE(part.ok());
    CHECK(part.value <= whole.value + 1e-8 * (1.0 + std::abs(whole.value)));
    auto lower = multistart_local_search(p, 5, seed);
    CHECK(part.value >= lower.value - 1e-6 * (1.0 + std::abs(lower.value)));
  }
}

TEST_CASE("motivating partition is exact on one-layer nets") {
  int tested = 0;
  for (std::uint64_t seed = 0; tested < 8; ++seed) {
    auto p = random_one_layer(2 + (int)(seed % 3), 2 + (int)(seed % 3), 100 + seed, 0.6,
                              seed % 2 == 1);
    auto plan = motivating_partition(p);
    REQUIRE(!plan.parts.empty());
    auto bounds = propagate_bounds(p.net, p.input, BoundMode::LpTight);
    auto part = partitioned_lp(p, plan, bounds);
    REQUIRE(part.ok());
    auto oracle = activation_pattern_oracle(p);
    REQUIRE(oracle.exact);
    CHECK(part.value == doctest::Approx(oracle.value).epsilon(1e-6));
    CHECK(part.value + 1e-7 >= oracle.value);
    ++tested;
  }
}

TEST_CASE("motivating partition structure") {
  auto p = random_one_layer(2, 2, 7);
  auto plan = motivating_partition(p);
  CHECK(plan.parts.size() <= 4);
  CHECK(plan.provenance == "motivating");
  auto rep = validate_partition(p.input, plan, 4000, 11);
  CHECK(rep.pass);
  CHECK(rep.overlap_fraction < 0.02);

  CertProblem slab;
  Eigen::MatrixXd W(1, 2);
  W << 1.0, 0.0;
  slab.net.layers.push_back({W, Eigen::VectorXd::Zero(1)});
  slab.input = polytope_from_box(box_from_nominal(vec({0.0, 0.0}), 1.0));
  slab.c = vec({1.0});
  auto plan2 = motivating_partition(slab);
  CHECK(plan2.parts.size() == 2);

  auto deep = random_network({2, 3, 2}, WeightDist::Normal, 1);
  CertProblem dp;
  dp.net = deep;
  dp.input = slab.input;
  dp.c = vec({1.0, 1.0});
  CHECK_THROWS_AS(motivating_partition(dp), std::invalid_argument);
  auto wide = random_one_layer(2, 13, 1);
  CHECK_THROWS_AS(motivating_partition(wide, 12), std::invalid_argument);
}

TEST_CASE("optimal_two_part_row worked examples") {
  auto a = optimal_two_part_row(vec({1.0, 1.0}), vec({-1.0, -1.0}), vec({2.0, 1.0}));
  CHECK(a.row == 0);
  CHECK(a.score == doctest::Approx(-2.0 / 3.0));

  auto b = optimal_two_part_row(vec({-1.0, 5.0}), vec({-1.0, -1.0}), vec({1.0, 1.0}));
  CHECK(b.row == 1);
  CHECK(b.score == doctest::Approx(-2.5));

  auto t = optimal_two_part_row(vec({1.0, 1.0}), vec({-1.0, -1.0}), vec({1.0, 1.0}));
  CHECK(t.row == 0);  // tie broken to the lowest index

  auto s = optimal_two_part_row(vec({1.0, 1.0}), vec({0.0, 0.2}), vec({1.0, 1.0}));
  CHECK(s.all_stable);
  CHECK(s.row == -1);
}

TEST_CASE("two_part_bound worked examples and argmin consistency") {
  CHECK(two_part_bound(vec({1.0, 1.0}), vec({-1.0, -1.0}), vec({1.0, 1.0}), 0) ==
        doctest::Approx(0.5));
  CHECK(two_part_bound(vec({1.0}), vec({-1.0}), vec({1.0}), 0) == doctest::Approx(0.0));

  std::mt19937_64 gen(9);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int t = 0; t < 200; ++t) {
    const int n = 2 + (int)(gen() % 5);
    Eigen::VectorXd c(n), l(n), uu(n);
    for (int i = 0; i < n; ++i) {
      c(i) = g(gen);
      l(i) = -u(gen);
      uu(i) = u(gen);
    }
    auto choice = optimal_two_part_row(c, l, uu);
    REQUIRE(!choice.all_stable);
    double best = two_part_bound(c, l, uu, choice.row);
    for (int i = 0; i < n; ++i) CHECK(best <= two_part_bound(c, l, uu, i) + 1e-12);
  }
}

TEST_CASE("lowest_score_rows ordering") {
  // scores (-0.9, -0.1, -0.5) via c = (1.8, 0.2, 1.0), l = -1, u = 1
  auto rows = lowest_score_rows(vec({1.8, 0.2, 1.0}), vec({-1.0, -1.0, -1.0}),
                                vec({1.0, 1.0, 1.0}), 2);
  CHECK(rows == std::vector<int>({0, 2}));
  CHECK_THROWS_AS(
      lowest_score_rows(vec({1.0}), vec({0.5}), vec({1.0}), 1), std::invalid_argument);
}

TEST_CASE("multi_row_partition structure and nesting") {
  CertProblem p;
  Eigen::MatrixXd W(3, 2);
  W << 1.0, 0.0, 0.0, 1.0, 1.0, 1.0;
  p.net.layers.push_back({W, Eigen::VectorXd::Zero(3)});
  p.input = polytope_from_box(box_from_nominal(vec({0.0, 0.0}), 1.0));
  p.c = vec({1.8, 0.2, 1.0});
  auto bounds = propagate_bounds(p.net, p.input, BoundMode::LpTight);
  auto plan2 = multi_row_partition(p, bounds, p.c, 2);
  CHECK(plan2.parts.size() == 4);
  auto rep = validate_partition(p.input, plan2, 4000, 13);
  CHECK(rep.pass);

  auto plan1 = multi_row_partition(p, bounds, p.c, 1);
  auto choice = optimal_two_part_row(p.c, bounds.l[0], bounds.u[0]);
  REQUIRE(plan1.parts.size() == 2);
  CHECK(plan1.parts[0].clamps[0].row == choice.row);

  auto v1 = partitioned_lp(p, plan1, bounds);
  auto v2 = partitioned_lp(p, plan2, bounds);
  REQUIRE(v1.ok());
  REQUIRE(v2.ok());
  CHECK(v2.value <= v1.value + 1e-8 * (1.0 + std::abs(v1.value)));
}

TEST_CASE("recursive_refine basics") {
  auto p = random_one_layer(3, 5, 71, 0.8);
  auto bounds = propagate_bounds(p.net, p.input, BoundMode::LpTight);

  auto r2 = recursive_refine(p, 2);
  auto choice = optimal_two_part_row(p.c, bounds.l[0], bounds.u[0]);
  REQUIRE(!choice.all_stable);
  auto plan = row_halfspace_partition(p.input, p.net.layers[0].W.row(choice.row).transpose(),
                                      p.net.layers[0].b(choice.row), choice.row);
  auto two = partitioned_lp(p, plan, bounds);
  REQUIRE(two.ok());
  CHECK(r2.result.value == doctest::Approx(two.value).epsilon(1e-7));
  CHECK(r2.plan.parts.size() == 2);

  auto r4 = recursive_refine(p, 4);
  CHECK(r4.result.value <= r2.result.value + 1e-8 * (1.0 + std::abs(r2.result.value)));
  CHECK(r4.plan.parts.size() == 4);
  CHECK(r4.trace.size() == 4);  // unpartitioned value plus one entry per split
  for (size_t t = 1; t < r4.trace.size(); ++t)
    CHECK(r4.trace[t] <= r4.trace[t - 1] + 1e-8 * (1.0 + std::abs(r4.trace[t - 1])));

  auto rep = validate_partition(p.input, r4.plan, 4000, 19);
  CHECK(rep.pass);
  CHECK_THROWS_AS(recursive_refine(p, 1), std::invalid_argument);
}

TEST_CASE("worst_case_lp_bound formula cases") {
  Eigen::VectorXd ones1 = vec({1.0});
  CHECK(worst_case_lp_bound(vec({1.0}), vec({-1.0}), vec({1.0}), ones1, 0.0) ==
        doctest::Approx(0.5));
  CHECK(worst_case_lp_bound(vec({-1.0}), vec({-0.7}), vec({0.9}), ones1, 0.0) ==
        doctest::Approx(0.0));

  // huge radius saturates every min{} at u
  Eigen::VectorXd c = vec({1.5, -0.5, 2.0});
  Eigen::VectorXd l = vec({-1.0, -2.0, -0.5});
  Eigen::VectorXd u = vec({2.0, 1.0, 0.75});
  Eigen::VectorXd norms = vec({1.0, 1.0, 1.0});
  double big = worst_case_lp_bound(c, l, u, norms, 1e9);
  CHECK(big == doctest::Approx(c.cwiseAbs().dot(u)));

  // monotone in eps
  double a = worst_case_lp_bound(c, l, u, norms, 0.0);
  double b = worst_case_lp_bound(c, l, u, norms, 0.3);
  double d = worst_case_lp_bound(c, l, u, norms, 0.6);
  CHECK(a <= b + 1e-12);
  CHECK(b <= d + 1e-12);
  // eps = 0 reduces to the negated score sum
  double expect = 0.0;
  expect += 1.5 * (2.0 / 3.0) * 1.0;
  expect += 2.0 * (0.75 / 1.25) * 0.5;
  CHECK(a == doctest::Approx(expect));
}

TEST_CASE("surrogate cost rules") {
  ReluNetwork net;
  net.layers.push_back({Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3)});
  auto c = surrogate_cost(net, vec({0.5, 2.0, 1.0}));
  CHECK(c(1) == -1.0);
  CHECK(c(2) == 1.0);
  CHECK(c(0) == 0.0);

  ReluNetwork net2;
  net2.layers.push_back({Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2)});
  auto c2 = surrogate_cost(net2, vec({1.0, 1.0}));
  CHECK(c2(0) == -1.0);  // tie for the max: lowest index is i
  CHECK(c2(1) == 1.0);

  auto cr = surrogate_cost_random(net, vec({0.5, 2.0, 1.0}), 5);
  CHECK(cr(1) == -1.0);
  CHECK(cr.sum() == 0.0);
  CHECK((cr - surrogate_cost_random(net, vec({0.5, 2.0, 1.0}), 5)).lpNorm<Eigen::Infinity>() ==
        0.0);

  ReluNetwork tiny;
  tiny.layers.push_back({Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1)});
  CHECK_THROWS_AS(surrogate_cost(tiny, vec({1.0})), std::invalid_argument);
}

TEST_CASE("surrogate-guided split still never hurts on deep nets") {
  for (std::uint64_t seed : {40ULL, 41ULL, 42ULL}) {
    CertProblem p;
    p.net = random_network({3, 4, 2}, WeightDist::Normal, seed);
    p.input = polytope_from_box(box_from_nominal(Eigen::VectorXd::Zero(3), 0.4));
    p.c = vec({1.0, -1.0});
    auto bounds = propagate_bounds(p.net, p.input, BoundMode::LpTight);
    auto whole = solve_lp(build_lp(p, bounds));
    REQUIRE(whole.ok());
    auto cs = surrogate_cost(p.net, p.input.box.center());
    auto choice = optimal_two_part_row(cs, bounds.l[0], bounds.u[0]);
    if (choice.all_stable) continue;
    auto plan = row_halfspace_partition(p.input, p.net.layers[0].W.row(choice.row).transpose(),
                                        p.net.layers[0].b(choice.row), choice.row);
    auto part = partitioned_lp(p, plan, bounds);
    REQUIRE(part.ok());
    CHECK(part.value <= whole.value + 1e-8 * (1.0 + std::abs(whole.value)));
  }
}

TEST_CASE("exhaustive subset search") {
  auto p = random_one_layer(2, 3, 90, 0.7);
  auto bounds = propagate_bounds(p.net, p.input, BoundMode::LpTight);
  auto ex = exhaustive_first_layer_partition(p, bounds, 1);
  CHECK(ex.all.size() == 3);
  for (const auto& o : ex.all) CHECK(ex.best_value <= o.value + 1e-12);
  REQUIRE(ex.best_rows.size() == 1);

  // subset values never fall below the true optimum
  auto oracle = activation_pattern_oracle(p);
  for (const auto& o : ex.all) CHECK(o.value + 1e-6 >= oracle.value);
}

TEST_CASE("np gadget worked example") {
  // sets written 0-based; universe {0,1}
  auto g = np_gadget({{0}, {0, 1}}, 2, 1);
  CHECK(g.f_bar == doctest::Approx(3.875));
  CHECK(g.net.depth() == 3);
  CHECK(g.union_size_outside({1}) == 1);  // only the first set remains outside
  CHECK(g.union_size_outside({0}) == 2);

  auto p = g.problem();
  double f_j2 = subset_partition_value(p, g.bounds, {1});
  CHECK(16.0 * (f_j2 - g.f_bar) == doctest::Approx(1.0).epsilon(1e-4));
  double f_j1 = subset_partition_value(p, g.bounds, {0});
  CHECK(16.0 * (f_j1 - g.f_bar) == doctest::Approx(2.0).epsilon(1e-4));

  // the dense partition value matches the closed form
  double dense = subset_partition_value(p, g.bounds, {0, 1});
  CHECK(dense == doctest::Approx(g.f_bar).epsilon(1e-6));

  // min over subsets pairs with brute-force min-k-union
  auto ex = exhaustive_first_layer_partition(p, g.bounds, g.n - g.k_param);
  auto mku = brute_force_min_k_union(g.sets, g.m, g.k_param);
  CHECK(16.0 * (ex.best_value - g.f_bar) == doctest::Approx((double)mku.cardinality).epsilon(1e-4));
}

TEST_CASE("np gadget rejects malformed families") {
  CHECK_THROWS_AS(np_gadget({{0}}, 2, 1), std::invalid_argument);     // universe uncovered
  CHECK_THROWS_AS(np_gadget({{0, 5}}, 2, 1), std::invalid_argument);  // element out of range
  CHECK_THROWS_AS(np_gadget({{0}}, 1, 2), std::invalid_argument);     // k too large
}
