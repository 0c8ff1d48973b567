#include "mfl/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "mfl/transport.hpp"
#include "mfl/workers.hpp"

namespace mfl {

namespace {

void check_law_grid(const TrajectoryBundle& law, const SimConfig& cfg,
                    std::size_t m) {
  if (law.dim() != cfg.d || law.strategies() != m)
    throw ConfigError("law: shape mismatch",
                      {{"law_d", std::to_string(law.dim())},
                       {"sim_d", std::to_string(cfg.d)}});
  if (law.steps() != cfg.k ||
      std::abs(law.t_final() - cfg.t_final) >
          1e-12 * std::max(1.0, cfg.t_final))
    throw ConfigError("law: time grid mismatch",
                      {{"law_K", std::to_string(law.steps())},
                       {"sim_K", std::to_string(cfg.k)},
                       {"law_T", format_double(law.t_final())},
                       {"sim_T", format_double(cfg.t_final)}});
}

}  // namespace

TrajectoryBundle solve_auxiliary(const StrategySpace& space,
                                 const FieldSet& fs, const LawEnsemble& law,
                                 const Ensemble& init, const SimConfig& cfg,
                                 Workers* workers) {
  cfg.validate(fs);
  if (init.size() != cfg.n || init.dim() != cfg.d ||
      init.strategies() != space.size())
    throw ConfigError("solve_auxiliary: init shape mismatch");
  check_law_grid(law, cfg, space.size());
  TrajectoryBundle bundle(cfg.d, space.size(), cfg.n, cfg.t_final, cfg.k);
  bundle.set_slice(0, init);
  const BrownianSource noise(cfg.seed, cfg.dt());
  FieldContext ctx;
  const bool dep = fs.field().measure_dependent();
  for (std::size_t k = 0; k < cfg.k; ++k) {
    const EnsembleView frozen = law.slice(k);
    if (dep) {
      ctx.stats.clear();
      fs.field().prepare(space, frozen, ctx);
    }
    try {
      detail::advance_slice(space, fs.field(), fs.theta(), frozen, ctx,
                            bundle.slice(k), cfg.dt(), noise,
                            static_cast<std::uint32_t>(k), cfg.m_noise,
                            bundle.x_row(k + 1, 0).data(),
                            bundle.lam_row(k + 1, 0).data(), workers);
    } catch (const DivergenceError& e) {
      auto last = std::make_shared<Ensemble>(time_marginal(bundle, k));
      throw EngineDivergence(
          e.what(), e.agent(), k + 1, std::move(last),
          {{"t", format_double(bundle.time(k))},
           {"step", std::to_string(k + 1)},
           {"agent", std::to_string(e.agent())}});
    }
  }
  return bundle;
}

double path_space_w2(const StrategySpace& space, const TrajectoryBundle& a,
                     const TrajectoryBundle& b, Workers* workers) {
  if (a.dim() != b.dim() || a.strategies() != b.strategies())
    throw ConfigError("path_space_w2: shape mismatch");
  if (a.steps() != b.steps() ||
      std::abs(a.t_final() - b.t_final()) >
          1e-12 * std::max(1.0, a.t_final()))
    throw ConfigError("path_space_w2: time grid mismatch");
  const std::size_t na = a.paths(), nb = b.paths();
  const std::size_t grid = a.grid_size();
  std::vector<double> cost(na * nb);
  auto rows = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t j = 0; j < nb; ++j) {
        double sup = 0.0;
        for (std::size_t k = 0; k < grid; ++k)
          sup = std::max(sup,
                         state_norm(space, a.state(k, i), b.state(k, j)));
        cost[i * nb + j] = sup * sup;
      }
  };
  if (workers)
    workers->parallel_for(na, rows);
  else
    rows(0, na);
  const std::vector<double> wa(na, 1.0 / static_cast<double>(na));
  const std::vector<double> wb(nb, 1.0 / static_cast<double>(nb));
  const TransportResult res = transport_min_cost(na, nb, cost, wa, wb, false);
  return std::sqrt(std::max(0.0, res.value));
}

std::pair<TrajectoryBundle, FixedPointReport> fixed_point(
    const StrategySpace& space, const FieldSet& fs, const Ensemble& init,
    const SimConfig& cfg, double tol, std::size_t max_iter, Workers* workers) {
  if (max_iter == 0)
    throw ConfigError("fixed_point: max_iter must be positive");
  if (std::isnan(tol) || tol < 0.0)
    throw ConfigError("fixed_point: tol must be a nonnegative number");
  cfg.validate(fs);
  FixedPointReport report;
  report.tol = tol;
  // Psi^0: the initial ensemble frozen in time.
  TrajectoryBundle prev(cfg.d, space.size(), cfg.n, cfg.t_final, cfg.k);
  for (std::size_t k = 0; k <= cfg.k; ++k) prev.set_slice(k, init);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    TrajectoryBundle next =
        solve_auxiliary(space, fs, prev, init, cfg, workers);
    const double gap = path_space_w2(space, prev, next, workers);
    report.gaps.push_back(gap);
    report.iterations = it;
    prev = std::move(next);
    if (gap <= tol) {
      report.converged = true;
      break;
    }
  }
  return {std::move(prev), std::move(report)};
}

}  // namespace mfl
