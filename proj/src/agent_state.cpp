#include "mfl/agent_state.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "mfl/transport.hpp"
#include "mfl/workers.hpp"

namespace mfl {

Ensemble::Ensemble(std::size_t d, std::size_t m, std::size_t n)
    : d_(d), m_(m), n_(n) {
  if (d == 0 || m == 0 || n == 0)
    throw ConfigError("ensemble: d, M and N must be positive");
  xs_.assign(n * d, 0.0);
  lams_.assign(n * m, 1.0 / static_cast<double>(m));
}

Ensemble Ensemble::from_states(std::size_t d, std::size_t m,
                               const std::vector<AgentState>& states) {
  Ensemble e(d, m, states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].x.size() != d || states[i].lambda.size() != m)
      throw ConfigError("ensemble: state dimension mismatch",
                        {{"agent", std::to_string(i)}});
    std::copy(states[i].x.begin(), states[i].x.end(), e.x_row(i).begin());
    std::copy(states[i].lambda.weights().begin(),
              states[i].lambda.weights().end(), e.lam_row(i).begin());
  }
  return e;
}

std::size_t Ensemble::check_invariants(double* worst_entry,
                                       double* worst_mass) const {
  double min_entry = 0.0, mass_dev = 0.0;
  std::size_t violations = 0;
  for (std::size_t i = 0; i < n_; ++i) {
    double sum = 0.0;
    bool bad = false;
    for (std::size_t u = 0; u < m_; ++u) {
      const double w = lams_[i * m_ + u];
      if (!std::isfinite(w)) {
        bad = true;
        continue;
      }
      min_entry = std::min(min_entry, w);
      if (w <= -kSimplexTol) bad = true;
      sum += w;
    }
    mass_dev = std::max(mass_dev, std::abs(sum - 1.0));
    if (std::abs(sum - 1.0) > kSimplexTol) bad = true;
    if (bad) ++violations;
  }
  if (worst_entry) *worst_entry = min_entry;
  if (worst_mass) *worst_mass = mass_dev;
  return violations;
}

TrajectoryBundle::TrajectoryBundle(std::size_t d, std::size_t m,
                                   std::size_t n_paths, double t_final,
                                   std::size_t k_steps)
    : d_(d), m_(m), n_(n_paths), k_(k_steps), t_(t_final) {
  if (d == 0 || m == 0 || n_paths == 0)
    throw ConfigError("bundle: d, M and N must be positive");
  if (k_steps == 0 || !(t_final > 0.0) || !std::isfinite(t_final))
    throw ConfigError("bundle: need K >= 1 and finite T > 0");
  const double dt = t_ / static_cast<double>(k_);
  times_.resize(k_ + 1);
  for (std::size_t k = 0; k <= k_; ++k)
    times_[k] = static_cast<double>(k) * dt;
  xs_.assign((k_ + 1) * n_ * d_, 0.0);
  lams_.assign((k_ + 1) * n_ * m_, 1.0 / static_cast<double>(m_));
}

void TrajectoryBundle::set_slice(std::size_t k, const Ensemble& e) {
  if (e.size() != n_ || e.dim() != d_ || e.strategies() != m_)
    throw ConfigError("bundle: slice shape mismatch");
  const EnsembleView v = e.view();
  std::copy(v.xs, v.xs + n_ * d_, xs_.begin() + k * n_ * d_);
  std::copy(v.lams, v.lams + n_ * m_, lams_.begin() + k * n_ * m_);
}

double state_norm(const StrategySpace& space, StateRef a, StateRef b) {
  if (a.x.size() != b.x.size() || a.lam.size() != b.lam.size() ||
      a.lam.size() != space.size())
    throw ConfigError("state_norm: dimension mismatch");
  return l2_dist(a.x, b.x) + detail::bl_norm_diff(space, a.lam, b.lam);
}

double state_abs_norm(const StrategySpace& space, StateRef a) {
  return l2_norm(a.x) + bl_norm(space, a.lam);
}

double w_product_views(const StrategySpace& space, int p, EnsembleView a,
                       EnsembleView b, Workers* workers) {
  if (p != 1 && p != 2)
    throw ConfigError("w_product: p must be 1 or 2",
                      {{"p", std::to_string(p)}});
  if (a.d != b.d || a.m != b.m || a.m != space.size())
    throw ConfigError("w_product: ensemble shape mismatch");
  const std::size_t na = a.n, nb = b.n;
  std::vector<double> cost(na * nb);
  auto fill = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t j = 0; j < nb; ++j) {
        const double s = state_norm(space, a.state(i), b.state(j));
        cost[i * nb + j] = (p == 1) ? s : s * s;
      }
  };
  if (workers)
    workers->parallel_for(na, fill);
  else
    fill(0, na);
  const std::vector<double> wa(na, 1.0 / static_cast<double>(na));
  const std::vector<double> wb(nb, 1.0 / static_cast<double>(nb));
  const double v = transport_min_cost(na, nb, cost, wa, wb).value;
  return (p == 1) ? v : std::sqrt(std::max(0.0, v));
}

double w_product(const StrategySpace& space, int p, const Ensemble& a,
                 const Ensemble& b, Workers* workers) {
  return w_product_views(space, p, a.view(), b.view(), workers);
}

Ensemble time_marginal(const TrajectoryBundle& bundle, std::size_t k) {
  if (k >= bundle.grid_size())
    throw ConfigError("time_marginal: index out of range",
                      {{"k", std::to_string(k)}});
  Ensemble e(bundle.dim(), bundle.strategies(), bundle.paths());
  const EnsembleView v = bundle.slice(k);
  for (std::size_t i = 0; i < v.n; ++i) {
    auto x = e.x_row(i);
    auto l = e.lam_row(i);
    std::copy(v.xs + i * v.d, v.xs + (i + 1) * v.d, x.begin());
    std::copy(v.lams + i * v.m, v.lams + (i + 1) * v.m, l.begin());
  }
  return e;
}

void write_csv(const TrajectoryBundle& bundle, std::ostream& os) {
  os << "path_id,t";
  for (std::size_t c = 1; c <= bundle.dim(); ++c) os << ",x_" << c;
  for (std::size_t c = 1; c <= bundle.strategies(); ++c) os << ",w_" << c;
  os << '\n';
  for (std::size_t i = 0; i < bundle.paths(); ++i)
    for (std::size_t k = 0; k < bundle.grid_size(); ++k) {
      os << i << ',' << format_double(bundle.time(k));
      const StateRef s = bundle.state(k, i);
      for (double v : s.x) os << ',' << format_double(v);
      for (double v : s.lam) os << ',' << format_double(v);
      os << '\n';
    }
}

TrajectoryBundle read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("csv: empty input");
  std::size_t d = 0, m = 0;
  {
    std::stringstream hs(line);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(hs, col, ',')) cols.push_back(col);
    if (cols.size() < 3 || cols[0] != "path_id" || cols[1] != "t")
      throw ConfigError("csv: bad header", {{"header", line}});
    for (std::size_t c = 2; c < cols.size(); ++c) {
      if (cols[c] == "x_" + std::to_string(d + 1) && m == 0)
        ++d;
      else if (cols[c] == "w_" + std::to_string(m + 1))
        ++m;
      else
        throw ConfigError("csv: bad header column", {{"column", cols[c]}});
    }
    if (d == 0 || m == 0) throw ConfigError("csv: header lacks x_/w_ columns");
  }
  struct Row {
    std::size_t path;
    double t;
    std::vector<double> vals;
  };
  std::vector<Row> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Row r;
    const char* p = line.c_str();
    char* endp = nullptr;
    r.path = std::strtoull(p, &endp, 10);
    std::vector<double> vals;
    for (std::size_t c = 0; c < d + m + 1; ++c) {
      if (*endp != ',') throw ConfigError("csv: short row", {{"row", line}});
      p = endp + 1;
      vals.push_back(std::strtod(p, &endp));
    }
    if (*endp != '\0') throw ConfigError("csv: trailing data", {{"row", line}});
    r.t = vals[0];
    r.vals.assign(vals.begin() + 1, vals.end());
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ConfigError("csv: no data rows");
  std::size_t grid = 0;
  while (grid < rows.size() && rows[grid].path == rows[0].path) ++grid;
  if (grid < 2 || rows.size() % grid != 0)
    throw ConfigError("csv: ragged path blocks");
  const std::size_t n = rows.size() / grid;
  const double t_final = rows[grid - 1].t;
  TrajectoryBundle bundle(d, m, n, t_final, grid - 1);
  const double dt = bundle.dt();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < grid; ++k) {
      const Row& r = rows[i * grid + k];
      if (r.path != rows[grid * i].path || r.path != i)
        throw ConfigError("csv: paths must be 0..N-1 in order");
      if (std::abs(r.t - static_cast<double>(k) * dt) >
          1e-12 * std::max(1.0, t_final))
        throw ConfigError("csv: non-uniform time grid",
                          {{"t", format_double(r.t)}});
      std::copy(r.vals.begin(), r.vals.begin() + d, bundle.x_row(k, i).begin());
      std::copy(r.vals.begin() + d, r.vals.end(), bundle.lam_row(k, i).begin());
    }
  return bundle;
}

}  // namespace mfl
