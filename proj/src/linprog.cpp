#include "mfl/linprog.hpp"

#include <algorithm>
#include <cmath>

#include "mfl/common.hpp"

namespace mfl {
namespace detail {

LpResult simplex_maximize(std::size_t n_vars, std::size_t n_rows,
                          const std::vector<double>& a,
                          const std::vector<double>& b,
                          const std::vector<double>& c) {
  const std::size_t m = n_rows;
  const std::size_t n = n_vars;
  const std::size_t cols = n + m + 1;  // structural + slack + rhs
  std::vector<double> t((m + 1) * cols, 0.0);
  auto at = [&](std::size_t r, std::size_t j) -> double& {
    return t[r * cols + j];
  };
  for (std::size_t i = 0; i < m; ++i) {
    if (b[i] < 0.0)
      throw ConfigError("simplex_maximize requires b >= 0",
                        {{"row", std::to_string(i)}});
    for (std::size_t j = 0; j < n; ++j) at(i, j) = a[i * n + j];
    at(i, n + i) = 1.0;
    at(i, cols - 1) = b[i];
  }
  double scale = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    at(m, j) = c[j];
    scale = std::max(scale, std::abs(c[j]));
  }
  const double enter_eps = 1e-12 * scale;
  const double pivot_eps = 1e-11;

  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) basis[i] = n + i;

  bool bland = false;
  std::size_t stall = 0;
  double last_obj = 0.0;
  const std::size_t max_iter = 2000 + 400 * (m + n);
  for (std::size_t iter = 0;; ++iter) {
    if (iter >= max_iter)
      throw ConfigError("simplex iteration cap exceeded",
                        {{"rows", std::to_string(m)}});
    // Entering column.
    std::size_t col = cols;  // sentinel
    if (!bland) {
      double best = enter_eps;
      for (std::size_t j = 0; j + 1 < cols; ++j)
        if (at(m, j) > best) {
          best = at(m, j);
          col = j;
        }
    } else {
      for (std::size_t j = 0; j + 1 < cols; ++j)
        if (at(m, j) > enter_eps) {
          col = j;
          break;
        }
    }
    if (col == cols) break;  // optimal

    // Ratio test; ties resolved toward the smallest basis index (Bland-safe).
    std::size_t row = m;
    double best_ratio = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (at(i, col) <= pivot_eps) continue;
      const double ratio = at(i, cols - 1) / at(i, col);
      if (row == m || ratio < best_ratio - 1e-15 ||
          (std::abs(ratio - best_ratio) <= 1e-15 && basis[i] < basis[row])) {
        row = i;
        best_ratio = ratio;
      }
    }
    if (row == m)
      throw ConfigError("linear program is unbounded",
                        {{"col", std::to_string(col)}});

    // Pivot.
    const double piv = at(row, col);
    for (std::size_t j = 0; j < cols; ++j) at(row, j) /= piv;
    at(row, col) = 1.0;
    for (std::size_t r = 0; r <= m; ++r) {
      if (r == row) continue;
      const double f = at(r, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < cols; ++j) at(r, j) -= f * at(row, j);
      at(r, col) = 0.0;
    }
    basis[row] = col;

    const double obj = -at(m, cols - 1);
    if (obj > last_obj + 1e-14 * scale) {
      stall = 0;
      last_obj = obj;
    } else if (++stall > 2 * (m + n)) {
      bland = true;  // degeneracy stall: switch to Bland permanently
    }
  }

  LpResult res;
  res.value = -at(m, cols - 1);
  res.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] < n) res.x[basis[i]] = at(i, cols - 1);
  return res;
}

}  // namespace detail
}  // namespace mfl
