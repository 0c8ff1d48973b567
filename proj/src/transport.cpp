#include "mfl/transport.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mfl/common.hpp"

namespace mfl {
namespace {

struct Tree {
  std::vector<int> parent, parc, depth, order;
  std::vector<double> pot;              // u on sources, v on sinks
  std::vector<int> head, next, arc_of;  // adjacency over basic arcs
};

}  // namespace

TransportResult transport_min_cost(std::size_t na, std::size_t nb,
                                   const std::vector<double>& cost,
                                   const std::vector<double>& a,
                                   const std::vector<double>& b,
                                   bool want_plan) {
  if (na == 0 || nb == 0)
    throw ConfigError("transport: empty marginal");
  if (cost.size() != na * nb || a.size() != na || b.size() != nb)
    throw ConfigError("transport: shape mismatch");
  double sa = 0.0, sb = 0.0, cmax = 0.0;
  for (double v : a) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError("transport: marginals must be strictly positive");
    sa += v;
  }
  for (double v : b) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError("transport: marginals must be strictly positive");
    sb += v;
  }
  for (double v : cost) {
    if (!std::isfinite(v)) throw ConfigError("transport: non-finite cost");
    cmax = std::max(cmax, std::abs(v));
  }
  if (std::abs(sa - sb) > 1e-9 * std::max(1.0, sa))
    throw ConfigError("transport: unbalanced marginals",
                      {{"sum_a", format_double(sa)},
                       {"sum_b", format_double(sb)}});

  const std::size_t n = na + nb;
  const std::size_t nbasic = n - 1;
  std::vector<int> bi(nbasic), bj(nbasic);
  std::vector<double> bflow(nbasic);

  // North-west corner start: a connected staircase spanning tree; degenerate
  // zero-flow arcs are kept as basis members.
  {
    std::size_t i = 0, j = 0, e = 0;
    double ra = a[0], rb = b[0];
    for (;;) {
      const double f = std::max(0.0, std::min(ra, rb));
      bi[e] = static_cast<int>(i);
      bj[e] = static_cast<int>(j);
      bflow[e] = f;
      ++e;
      if (i == na - 1 && j == nb - 1) break;
      if ((ra <= rb && i < na - 1) || j == nb - 1) {
        rb = std::max(0.0, rb - ra);
        ra = a[++i];
      } else {
        ra = std::max(0.0, ra - rb);
        rb = b[++j];
      }
    }
    if (e != nbasic)
      throw ConfigError("transport: internal basis size mismatch");
  }

  Tree t;
  t.parent.assign(n, -1);
  t.parc.assign(n, -1);
  t.depth.assign(n, 0);
  t.order.assign(n, 0);
  t.pot.assign(n, 0.0);
  t.head.assign(n, -1);
  t.next.assign(2 * nbasic, -1);
  t.arc_of.assign(2 * nbasic, -1);

  auto rebuild = [&]() {
    std::fill(t.head.begin(), t.head.end(), -1);
    for (std::size_t e = 0; e < nbasic; ++e) {
      const int s = bi[e];
      const int k = static_cast<int>(na) + bj[e];
      const int h0 = static_cast<int>(2 * e), h1 = h0 + 1;
      t.next[h0] = t.head[s];
      t.head[s] = h0;
      t.arc_of[h0] = static_cast<int>(e);
      t.next[h1] = t.head[k];
      t.head[k] = h1;
      t.arc_of[h1] = static_cast<int>(e);
    }
    // BFS from node 0; potentials satisfy u_i + v_j = c_ij on basic arcs.
    std::size_t qh = 0, qt = 0;
    t.order[qt++] = 0;
    t.parent[0] = -1;
    t.parc[0] = -1;
    t.depth[0] = 0;
    t.pot[0] = 0.0;
    std::vector<char> seen(n, 0);
    seen[0] = 1;
    while (qh < qt) {
      const int u = t.order[qh++];
      for (int h = t.head[u]; h != -1; h = t.next[h]) {
        const int e = t.arc_of[h];
        const int s = bi[e];
        const int k = static_cast<int>(na) + bj[e];
        const int w = (u == s) ? k : s;
        if (seen[w]) continue;
        seen[w] = 1;
        t.parent[w] = u;
        t.parc[w] = e;
        t.depth[w] = t.depth[u] + 1;
        const double c = cost[static_cast<std::size_t>(bi[e]) * nb + bj[e]];
        t.pot[w] = c - t.pot[u];
        t.order[qt++] = w;
      }
    }
    if (qt != n) throw ConfigError("transport: basis not spanning");
  };
  rebuild();

  const double eps = 1e-12 * (1.0 + cmax);
  const std::size_t total = na * nb;
  const std::size_t block =
      std::max<std::size_t>(64, static_cast<std::size_t>(std::sqrt(
                                    static_cast<double>(total))));
  std::size_t scan_pos = 0;
  bool bland = false;
  std::size_t stall = 0;
  const std::size_t max_pivots = 4000000 + 64 * n;
  std::vector<int> cyc_arcs;   // basic arcs on the cycle
  std::vector<signed char> cyc_sign;
  cyc_arcs.reserve(64);
  cyc_sign.reserve(64);

  for (std::size_t pivots = 0;; ++pivots) {
    if (pivots > max_pivots)
      throw ConfigError("transport: pivot cap exceeded",
                        {{"na", std::to_string(na)},
                         {"nb", std::to_string(nb)}});
    // Price: find entering arc with negative reduced cost.
    std::size_t enter = total;
    if (!bland) {
      double best = -eps;
      std::size_t scanned = 0;
      while (scanned < total) {
        const std::size_t stop = std::min(block, total - scanned);
        for (std::size_t k = 0; k < stop; ++k) {
          const std::size_t idx =
              (scan_pos + scanned + k < total) ? scan_pos + scanned + k
                                               : scan_pos + scanned + k - total;
          const std::size_t i = idx / nb, j = idx % nb;
          const double rc = cost[idx] - t.pot[i] - t.pot[na + j];
          if (rc < best) {
            best = rc;
            enter = idx;
          }
        }
        scanned += stop;
        if (enter != total) break;
      }
      scan_pos = (scan_pos + scanned) % total;
    } else {
      for (std::size_t idx = 0; idx < total; ++idx) {
        const std::size_t i = idx / nb, j = idx % nb;
        if (cost[idx] - t.pot[i] - t.pot[na + j] < -eps) {
          enter = idx;
          break;
        }
      }
    }
    if (enter == total) break;  // optimal

    // Cycle between the entering arc's endpoints through the tree.
    const int es = static_cast<int>(enter / nb);
    const int ek = static_cast<int>(na + enter % nb);
    cyc_arcs.clear();
    cyc_sign.clear();
    {
      int x = ek, y = es;
      // Climb from the sink side (cycle traverses child->parent) and from the
      // source side (parent->child). source->sink traversal carries +theta.
      while (x != y) {
        if (t.depth[x] >= t.depth[y]) {
          const int e = t.parc[x];
          const bool x_is_source = (x == bi[e]);
          cyc_arcs.push_back(e);
          cyc_sign.push_back(x_is_source ? +1 : -1);
          x = t.parent[x];
        } else {
          const int e = t.parc[y];
          const bool y_is_source = (y == bi[e]);
          // parent->child traversal: sign flips relative to child->parent.
          cyc_arcs.push_back(e);
          cyc_sign.push_back(y_is_source ? -1 : +1);
          y = t.parent[y];
        }
      }
    }

    // Ratio test over minus arcs; Bland-compatible lexicographic tie-break.
    double theta = 0.0;
    int leave = -1;
    bool first = true;
    for (std::size_t k = 0; k < cyc_arcs.size(); ++k) {
      if (cyc_sign[k] != -1) continue;
      const int e = cyc_arcs[k];
      const double f = bflow[e];
      const std::size_t arc_idx = static_cast<std::size_t>(bi[e]) * nb + bj[e];
      if (first || f < theta - 1e-18 ||
          (std::abs(f - theta) <= 1e-18 &&
           (leave < 0 ||
            arc_idx < static_cast<std::size_t>(bi[leave]) * nb + bj[leave]))) {
        theta = f;
        leave = e;
        first = false;
      }
    }
    if (leave < 0)
      throw ConfigError("transport: cycle without leaving arc");

    for (std::size_t k = 0; k < cyc_arcs.size(); ++k) {
      const int e = cyc_arcs[k];
      bflow[e] = std::max(0.0, bflow[e] + (cyc_sign[k] > 0 ? theta : -theta));
    }
    bi[leave] = es;
    bj[leave] = static_cast<int>(enter % nb);
    bflow[leave] = theta;
    rebuild();

    if (theta > 0.0) {
      stall = 0;
    } else if (++stall > 4 * n) {
      bland = true;  // long degenerate run: switch to Bland's rule
    }
  }

  TransportResult res;
  double value = 0.0;
  for (std::size_t e = 0; e < nbasic; ++e)
    value += bflow[e] * cost[static_cast<std::size_t>(bi[e]) * nb + bj[e]];
  res.value = value;
  if (want_plan) {
    res.plan.assign(total, 0.0);
    for (std::size_t e = 0; e < nbasic; ++e)
      res.plan[static_cast<std::size_t>(bi[e]) * nb + bj[e]] = bflow[e];
  }
  return res;
}

}  // namespace mfl
