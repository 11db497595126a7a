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

CertProblem one_d_problem() {
  CertProblem p;
  Eigen::MatrixXd W(1, 1);
  W << 1.0;
  p.net.layers.push_back({W, Eigen::VectorXd::Zero(1)});
  p.input = polytope_from_box(box_from_nominal(vec({0.0}), 1.0));
  p.c = vec({1.0});
  return p;
}

CertProblem random_problem(const std::vector<int>& shape, std::uint64_t seed, double eps = 0.5) {
  CertProblem p;
  p.net = random_network(shape, WeightDist::Normal, seed);
  p.input = polytope_from_box(box_from_nominal(Eigen::VectorXd::Zero(shape[0]), eps));
  p.c = Eigen::VectorXd::Zero(shape.back());
  std::mt19937_64 gen(seed + 99);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < p.c.size(); ++i) p.c(i) = g(gen);
  return p;
}

// l-inf Lipschitz constant of c.f over everything
double lipschitz(const CertProblem& p) {
  double L = p.c.cwiseAbs().sum();
  for (const auto& l : p.net.layers) {
    double rowmax = 0.0;
    for (int i = 0; i < l.W.rows(); ++i) rowmax = std::max(rowmax, l.W.row(i).lpNorm<1>());
    L *= rowmax;
  }
  return L;
}

}  // namespace

TEST_CASE("multistart on the 1-D instance") {
  auto p = one_d_problem();
  auto r = multistart_local_search(p, 5, 3);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.witness(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(!r.exact);
  CHECK(p.c.dot(forward_eval(p.net, r.witness)) == doctest::Approx(r.value).epsilon(1e-12));
}

TEST_CASE("multistart determinism and feasibility") {
  auto p = random_problem({3, 6, 2}, 13);
  p.input.halfspaces.push_back({vec({1.0, 1.0, 0.0}), 0.3});
  auto a = multistart_local_search(p, 5, 7);
  auto b = multistart_local_search(p, 5, 7);
  CHECK(a.value == b.value);
  CHECK((a.witness - b.witness).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(p.input.contains(a.witness, 1e-9));
  auto c = multistart_local_search(p, 5, 8);
  CHECK(p.input.contains(c.witness, 1e-9));
}

TEST_CASE("multistart never beats the relaxation") {
  for (std::uint64_t seed : {1ULL, 4ULL, 11ULL, 25ULL}) {
    auto p = random_problem({3, 5, 3}, seed);
    auto lower = multistart_local_search(p, 5, seed);
    auto bounds = propagate_bounds(p.net, p.input, BoundMode::LpTight);
    auto upper = solve_lp(build_lp(p, bounds));
    REQUIRE(upper.ok());
    CHECK(lower.value <= upper.value + 1e-6 * (1.0 + std::abs(upper.value)));
  }
}

TEST_CASE("activation oracle on the 1-D instance") {
  auto p = one_d_problem();
  auto r = activation_pattern_oracle(p);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.exact);
  CHECK(p.c.dot(forward_eval(p.net, r.witness)) == doctest::Approx(r.value).epsilon(1e-12));
}

TEST_CASE("activation oracle matches dense grid search") {
  for (std::uint64_t seed : {2ULL, 6ULL}) {
    auto p = random_problem({2, 3, 2}, seed, 0.8);
    // flatten to one layer for the oracle: use the first layer only
    CertProblem q;
    q.net.layers.push_back(p.net.layers[0]);
    q.net.layers[0].b = vec({0.1, -0.2, 0.05});
    q.input = p.input;
    q.c = vec({0.7, -1.1, 0.4});
    auto r = activation_pattern_oracle(q);

    const int steps = 1000;  // 1e6 grid points
    double grid_best = -1e300;
    for (int i = 0; i <= steps; ++i)
      for (int j = 0; j <= steps; ++j) {
        Eigen::VectorXd x(2);
        x << q.input.box.lower(0) + (q.input.box.upper(0) - q.input.box.lower(0)) * i / steps,
            q.input.box.lower(1) + (q.input.box.upper(1) - q.input.box.lower(1)) * j / steps;
        grid_best = std::max(grid_best, q.c.dot(forward_eval(q.net, x)));
      }
    const double h = (q.input.box.upper(0) - q.input.box.lower(0)) / steps;
    CHECK(r.value + 1e-9 >= grid_best);  // oracle is exact, grid is a lower bound
    CHECK(r.value <= grid_best + lipschitz(q) * h + 1e-9);
  }
}

TEST_CASE("activation oracle beats multistart") {
  for (std::uint64_t seed : {3ULL, 10ULL, 17ULL}) {
    auto p = random_problem({3, 4, 4}, seed);
    CertProblem q;
    q.net.layers.push_back(p.net.layers[0]);
    q.input = p.input;
    q.c = Eigen::VectorXd::LinSpaced(4, -1.0, 1.0);
    auto exact = activation_pattern_oracle(q);
    auto lower = multistart_local_search(q, 5, seed);
    CHECK(lower.value <= exact.value + 1e-9);
  }
}

TEST_CASE("activation oracle rejects deep or wide problems") {
  auto deep = random_problem({2, 3, 2}, 1);
  CHECK_THROWS_AS(activation_pattern_oracle(deep), std::invalid_argument);
  auto wide = random_problem({2, 14}, 1);
  CertProblem q;
  q.net.layers.push_back(wide.net.layers[0]);
  q.input = wide.input;
  q.c = Eigen::VectorXd::Ones(14);
  CHECK_THROWS_AS(activation_pattern_oracle(q, 12), std::invalid_argument);
}

TEST_CASE("brute force min-k-union") {
  std::vector<std::vector<int>> sets = {{0}, {0, 1}};
  auto r = brute_force_min_k_union(sets, 2, 1);
  CHECK(r.cardinality == 1);
  REQUIRE(r.subset.size() == 1);
  CHECK(r.subset[0] == 0);

  auto all = brute_force_min_k_union(sets, 2, 2);
  CHECK(all.cardinality == 2);

  std::vector<std::vector<int>> ties = {{0}, {1}, {2}};
  auto t = brute_force_min_k_union(ties, 3, 1);
  CHECK(t.subset[0] == 0);  // lexicographic tie-break

  auto none = brute_force_min_k_union(ties, 3, 0);
  CHECK(none.cardinality == 0);
  CHECK(none.subset.empty());

  std::vector<std::vector<int>> fam = {{0, 1, 2}, {2, 3}, {3, 4}, {0, 4}};
  auto f = brute_force_min_k_union(fam, 5, 2);
  CHECK(f.cardinality == 3);  // {2,3} u {3,4} = {2,3,4}
  CHECK(f.subset == std::vector<int>({1, 2}));
}
