#pragma once

#include <cstddef>
#include <vector>

namespace mfl {

struct CostMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> c;  // row-major

  double at(std::size_t i, std::size_t j) const { return c[i * cols + j]; }
};

// Test oracles. Independent of the production network simplex by design:
// results are cross-checked between code paths that share no logic.

// Exact transport optimum by enumerating every vertex of the transportation
// polytope: depth-first search over all feasible bases, seeded with the
// north-west-corner basis and expanded through every min-ratio pivot, then
// cross-checked against a dense-simplex solve of the same instance.
// Exponentially expensive; refuses sizes beyond 8x8 and instances whose
// basis count exceeds an internal cap.
double transport_lp_bruteforce(const CostMatrix& cost,
                               const std::vector<double>& a,
                               const std::vector<double>& b);

struct AssignmentResult {
  double value = 0.0;
  std::vector<int> col_of_row;
};

// O(n^3) Hungarian algorithm for square assignment, n <= 256.
AssignmentResult hungarian(const CostMatrix& cost);

}  // namespace mfl
