#pragma once

#include <cstddef>
#include <vector>

namespace mfl {

// Exact solver for the discrete transport linear program
//     min sum_ij c[i*nb+j] f_ij   s.t.  sum_j f_ij = a_i,  sum_i f_ij = b_j,
//     f >= 0,
// by the transportation specialization of the network simplex (north-west
// corner start, tree potentials, block pricing, Bland fallback on stalls).
// Marginals must be strictly positive and balanced to ~1e-9; callers strip
// zero-weight atoms first.
struct TransportResult {
  double value = 0.0;
  // Row-major plan, only filled when requested.
  std::vector<double> plan;
};

TransportResult transport_min_cost(std::size_t na, std::size_t nb,
                                   const std::vector<double>& cost,
                                   const std::vector<double>& a,
                                   const std::vector<double>& b,
                                   bool want_plan = false);

}  // namespace mfl
