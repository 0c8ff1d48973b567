#pragma once

#include <cstddef>
#include <vector>

namespace mfl {
namespace detail {

// Dense primal simplex for
//     max c.x   s.t.  A x <= b,  x >= 0,  b >= 0,
// so the slack basis is feasible from the start. Dantzig pivoting with a
// Bland fallback after a degeneracy stall, which makes termination sure.
// Sized for small problems (the bounded-Lipschitz dual has M+2 variables).
struct LpResult {
  double value = 0.0;
  std::vector<double> x;
};

LpResult simplex_maximize(std::size_t n_vars, std::size_t n_rows,
                          const std::vector<double>& a,  // n_rows x n_vars
                          const std::vector<double>& b,
                          const std::vector<double>& c);

}  // namespace detail
}  // namespace mfl
