#pragma once

#include <cstdint>
#include <string>

#include "partcert/sets.hpp"

namespace partcert {

struct OracleResult {
  double value = 0.0;
  Eigen::VectorXd witness;
  std::string method;
  bool exact = false;  // exact optimum vs plain lower bound
};

/* Projected-gradient ascent of c.f(x) over the input polytope from `starts`
 * seeded points; always a valid lower bound, deterministic per seed. */
OracleResult multistart_local_search(const CertProblem& problem, int starts = 5,
                                     std::uint64_t seed = 0, int workers = 1);

/* Exact optimum for one-layer networks by enumerating relu sign patterns;
 * one small LP per nonempty pattern cell. */
OracleResult activation_pattern_oracle(const CertProblem& problem, int cap = 12,
                                       const SolverConfig& cfg = {}, int workers = 1);

struct MinKUnion {
  std::vector<int> subset;  // lexicographically smallest optimal choice
  int cardinality = 0;
};

// exhaustive minimum-cardinality union over all size-k subfamilies
MinKUnion brute_force_min_k_union(const std::vector<std::vector<int>>& sets, int m, int k);

}  // namespace partcert
