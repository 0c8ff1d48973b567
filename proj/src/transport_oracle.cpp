#include "mfl/transport_oracle.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mfl/common.hpp"
#include "mfl/linprog.hpp"

namespace {

// Insert-only flat hash set over nonzero u64 basis masks (0 = empty slot).
// Open addressing keeps the hot enumeration loop allocation-free; a chained
// std::unordered_set costs one node allocation per visited basis.
class BasisSet {
 public:
  BasisSet() : slots_(1u << 16, 0) {}

  std::size_t size() const { return size_; }

  bool insert(std::uint64_t key) {
    std::size_t i = probe(key);
    if (slots_[i] == key) return false;
    slots_[i] = key;
    if (++size_ * 2 > slots_.size()) grow();
    return true;
  }

  // The table outgrows cache quickly; prefetching a batch of candidate home
  // slots overlaps the misses that otherwise dominate the enumeration.
  void prefetch(std::uint64_t key) const {
    __builtin_prefetch(&slots_[home(key)]);
  }

 private:
  std::size_t home(std::uint64_t key) const {
    // splitmix64 finalizer: cheap and well-mixing.
    std::uint64_t x = key + 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    x ^= x >> 31;
    return static_cast<std::size_t>(x) & (slots_.size() - 1);
  }

  std::size_t probe(std::uint64_t key) const {
    std::size_t i = home(key);
    while (slots_[i] != 0 && slots_[i] != key)
      i = (i + 1) & (slots_.size() - 1);
    return i;
  }

  void grow() {
    std::vector<std::uint64_t> old(slots_.size() * 2, 0);
    old.swap(slots_);
    for (const std::uint64_t key : old)
      if (key != 0) slots_[probe(key)] = key;
  }

  std::vector<std::uint64_t> slots_;
  std::size_t size_ = 0;
};

}  // namespace

namespace mfl {

// Exhaustive vertex enumeration: depth-first search over ALL feasible bases
// (spanning trees of the bipartite support graph), starting from the
// north-west-corner basis and expanding through every min-ratio pivot. Each
// basis' flows are solved exactly by leaf peeling. A completely separate
// dense-simplex solve of the same instance cross-checks the result, so a gap
// in the enumeration cannot silently bless the production solver.
double transport_lp_bruteforce(const CostMatrix& cost,
                               const std::vector<double>& a,
                               const std::vector<double>& b) {
  const std::size_t na = a.size(), nb = b.size();
  if (cost.rows != na || cost.cols != nb || cost.c.size() != na * nb)
    throw ConfigError("bruteforce: shape mismatch");
  if (na == 0 || nb == 0 || na > 8 || nb > 8)
    throw ConfigError("bruteforce: sizes must be in [1,8]",
                      {{"na", std::to_string(na)},
                       {"nb", std::to_string(nb)}});
  double sa = 0.0, sb = 0.0;
  for (double v : a) {
    if (v < 0.0 || !std::isfinite(v))
      throw ConfigError("bruteforce: negative marginal");
    sa += v;
  }
  for (double v : b) {
    if (v < 0.0 || !std::isfinite(v))
      throw ConfigError("bruteforce: negative marginal");
    sb += v;
  }
  if (std::abs(sa - sb) > 1e-9 * std::max(1.0, sa))
    throw ConfigError("bruteforce: unbalanced marginals");
  for (double v : cost.c)
    if (!std::isfinite(v)) throw ConfigError("bruteforce: non-finite cost");

  const std::size_t nn = na + nb;     // tree nodes: rows, then columns
  const std::size_t nbasic = nn - 1;  // arcs per basis
  // A basis is a bit mask over arc ids i * nb + j (at most 64 arcs).

  // North-west-corner starting basis (keeps degenerate zero arcs).
  std::uint64_t start = 0;
  {
    std::vector<double> ra(a), rb(b);
    std::size_t i = 0, j = 0;
    for (;;) {
      start |= 1ull << (i * nb + j);
      const double f = std::min(ra[i], rb[j]);
      ra[i] -= f;
      rb[j] -= f;
      if (i == na - 1 && j == nb - 1) break;
      if ((ra[i] <= rb[j] && i + 1 < na) || j + 1 >= nb)
        ++i;
      else
        ++j;
    }
  }

  constexpr std::size_t kBasisCap = 2000000;
  BasisSet visited;
  std::vector<std::uint64_t> stack{start};
  visited.insert(start);
  double best = std::numeric_limits<double>::infinity();

  std::array<std::uint16_t, 16> arc_of{};  // basis index -> arc id
  std::array<double, 16> flow{};           // basis index -> flow
  std::array<std::array<std::uint16_t, 8>, 16> incident{};  // node -> basis idx
  std::array<int, 16> deg0{}, deg{}, parent{}, up_arc{}, depth{};
  std::array<double, 16> rem{};
  std::array<char, 16> done{};
  std::array<std::uint16_t, 16> leaves{}, order{}, path{};
  std::array<char, 16> path_minus{};   // cycle arc gets -theta
  std::array<std::uint64_t, 1024> cand{};  // <= nonbasic x path, 49 x 15

  while (!stack.empty()) {
    const std::uint64_t basis = stack.back();
    stack.pop_back();

    std::size_t narcs = 0;
    for (std::uint64_t bits = basis; bits != 0; bits &= bits - 1)
      arc_of[narcs++] = static_cast<std::uint16_t>(std::countr_zero(bits));
    if (narcs != nbasic)
      throw ValidationError("bruteforce: basis has wrong arc count");
    for (std::size_t u = 0; u < nn; ++u) {
      rem[u] = u < na ? a[u] : b[u - na];
      deg0[u] = 0;
    }
    for (std::size_t k = 0; k < nbasic; ++k) {
      const std::size_t i = arc_of[k] / nb, j = na + arc_of[k] % nb;
      incident[i][static_cast<std::size_t>(deg0[i]++)] =
          static_cast<std::uint16_t>(k);
      incident[j][static_cast<std::size_t>(deg0[j]++)] =
          static_cast<std::uint16_t>(k);
      done[k] = 0;
    }

    // Unique tree flows by leaf peeling.
    deg = deg0;
    std::size_t top = 0, processed = 0;
    for (std::size_t u = 0; u < nn; ++u)
      if (deg[u] == 1) leaves[top++] = static_cast<std::uint16_t>(u);
    while (top > 0) {
      const std::size_t u = leaves[--top];
      if (deg[u] != 1) continue;
      std::uint16_t k = 0;
      for (std::size_t q = 0; q < 8; ++q) {
        k = incident[u][q];
        if (!done[k]) break;
      }
      const std::size_t i = arc_of[k] / nb, j = na + arc_of[k] % nb;
      const double f = rem[u];
      flow[k] = f;
      done[k] = 1;
      const std::size_t other = (u == i) ? j : i;
      rem[other] -= f;
      rem[u] = 0.0;
      --deg[u];
      if (--deg[other] == 1) leaves[top++] = static_cast<std::uint16_t>(other);
      ++processed;
    }
    if (processed != nbasic)
      throw ValidationError("bruteforce: basis is not a spanning tree");

    double value = 0.0;
    for (std::size_t k = 0; k < nbasic; ++k) {
      if (flow[k] < -1e-9)
        throw ValidationError("bruteforce: negative flow on a visited basis");
      value += flow[k] * cost.c[arc_of[k]];
    }
    best = std::min(best, value);

    // Tree structure rooted at node 0 for cycle walks.
    parent.fill(-1);
    order[0] = 0;
    depth[0] = 0;
    std::size_t head = 0, tail = 1;
    while (head < tail) {
      const std::size_t u = order[head++];
      for (int q = 0; q < deg0[u]; ++q) {
        const std::uint16_t k = incident[u][static_cast<std::size_t>(q)];
        const std::size_t i = arc_of[k] / nb, j = na + arc_of[k] % nb;
        const std::size_t w = (u == i) ? j : i;
        if (w != 0 && parent[w] == -1) {
          parent[w] = static_cast<int>(u);
          up_arc[w] = k;
          depth[w] = depth[u] + 1;
          order[tail++] = static_cast<std::uint16_t>(w);
        }
      }
    }

    std::size_t ncand = 0;
    for (std::size_t e = 0; e < na * nb; ++e) {
      if ((basis >> e) & 1ull) continue;
      std::size_t u = e / nb;       // row endpoint
      std::size_t w = na + e % nb;  // column endpoint
      // Walk up to the common ancestor. Pushing theta onto the entering arc
      // over-ships its row end and over-fills its column end, so the path
      // arcs adjacent to BOTH endpoints take -theta, alternating inward
      // (cycle length is even, so the two alternations agree).
      std::size_t plen = 0;
      int du = depth[u], dw = depth[w];
      char minus_u = 1, minus_w = 1;
      while (du > dw) {
        path[plen] = static_cast<std::uint16_t>(up_arc[u]);
        path_minus[plen++] = minus_u;
        u = static_cast<std::size_t>(parent[u]);
        --du;
        minus_u ^= 1;
      }
      while (dw > du) {
        path[plen] = static_cast<std::uint16_t>(up_arc[w]);
        path_minus[plen++] = minus_w;
        w = static_cast<std::size_t>(parent[w]);
        --dw;
        minus_w ^= 1;
      }
      while (u != w) {
        path[plen] = static_cast<std::uint16_t>(up_arc[u]);
        path_minus[plen++] = minus_u;
        u = static_cast<std::size_t>(parent[u]);
        minus_u ^= 1;
        path[plen] = static_cast<std::uint16_t>(up_arc[w]);
        path_minus[plen++] = minus_w;
        w = static_cast<std::size_t>(parent[w]);
        minus_w ^= 1;
      }
      double theta = std::numeric_limits<double>::infinity();
      for (std::size_t q = 0; q < plen; ++q)
        if (path_minus[q]) theta = std::min(theta, flow[path[q]]);
      const double tie = theta + 1e-15 + 1e-12 * std::abs(theta);
      for (std::size_t q = 0; q < plen; ++q) {
        // Leaving candidates: min-ratio -theta arcs, plus zero-flow +theta
        // arcs (degenerate exchanges keep the equal-vertex bases connected).
        const bool leave_minus = path_minus[q] && flow[path[q]] <= tie;
        const bool leave_zero = !path_minus[q] && flow[path[q]] <= 1e-15;
        if (!leave_minus && !leave_zero) continue;
        cand[ncand++] = (basis & ~(1ull << arc_of[path[q]])) | (1ull << e);
      }
    }
    for (std::size_t q = 0; q < ncand; ++q) visited.prefetch(cand[q]);
    for (std::size_t q = 0; q < ncand; ++q) {
      if (!visited.insert(cand[q])) continue;
      if (visited.size() > kBasisCap)
        throw ConfigError("bruteforce: basis enumeration cap exceeded",
                          {{"cap", std::to_string(kBasisCap)}});
      stack.push_back(cand[q]);
    }
  }

  // Independent route: dense simplex on the shifted maximization. Shifted
  // costs are >= 1, so the optimum ships the full mass and
  //   min cost = (cmax + 1) * mass - max shifted.
  {
    const double cmax = *std::max_element(cost.c.begin(), cost.c.end());
    const std::size_t nv = na * nb, nr = na + nb;
    std::vector<double> arows(nr * nv, 0.0), rhs(nr), obj(nv);
    for (std::size_t i = 0; i < na; ++i) {
      rhs[i] = a[i];
      for (std::size_t j = 0; j < nb; ++j) arows[i * nv + i * nb + j] = 1.0;
    }
    for (std::size_t j = 0; j < nb; ++j) {
      rhs[na + j] = b[j];
      for (std::size_t i = 0; i < na; ++i)
        arows[(na + j) * nv + i * nb + j] = 1.0;
    }
    for (std::size_t e = 0; e < nv; ++e) obj[e] = (cmax + 1.0) - cost.c[e];
    const double mass = std::min(sa, sb);
    const double dense =
        (cmax + 1.0) * mass - detail::simplex_maximize(nv, nr, arows, rhs, obj).value;
    if (std::abs(dense - best) > 1e-9 * std::max(1.0, std::abs(best)))
      throw ValidationError("bruteforce: enumeration and dense LP disagree",
                            {{"enumeration", format_double(best)},
                             {"dense", format_double(dense)}});
  }
  return best;
}

AssignmentResult hungarian(const CostMatrix& cost) {
  const std::size_t n = cost.rows;
  if (cost.cols != n || n == 0)
    throw ConfigError("hungarian: square matrix required");
  if (n > 256)
    throw ConfigError("hungarian: size cap 256 exceeded",
                      {{"n", std::to_string(n)}});
  for (double v : cost.c)
    if (!std::isfinite(v)) throw ConfigError("hungarian: non-finite cost");

  const double inf = std::numeric_limits<double>::infinity();
  // Potentials-based shortest augmenting path formulation, 1-indexed with a
  // virtual column 0.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = static_cast<int>(i);
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = static_cast<std::size_t>(p[j0]);
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost.at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = static_cast<int>(j0);
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[static_cast<std::size_t>(p[j])] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = static_cast<std::size_t>(way[j0]);
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  AssignmentResult res;
  res.col_of_row.assign(n, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] > 0) res.col_of_row[static_cast<std::size_t>(p[j]) - 1] =
        static_cast<int>(j) - 1;
  for (std::size_t i = 0; i < n; ++i)
    res.value += cost.at(i, static_cast<std::size_t>(res.col_of_row[i]));
  return res;
}

}  // namespace mfl
