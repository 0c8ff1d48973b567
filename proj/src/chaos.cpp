#include "mfl/chaos.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "mfl/workers.hpp"

namespace mfl {

std::vector<double> coupled_run(const StrategySpace& space, const FieldSet& fs,
                                const LawEnsemble& law, const Ensemble& init,
                                const SimConfig& cfg, Workers* workers) {
  cfg.validate(fs);
  const std::size_t m = space.size();
  if (init.size() != cfg.n || init.dim() != cfg.d || init.strategies() != m)
    throw ConfigError("coupled_run: init shape mismatch");
  if (law.dim() != cfg.d || law.strategies() != m || law.steps() != cfg.k ||
      std::abs(law.t_final() - cfg.t_final) >
          1e-12 * std::max(1.0, cfg.t_final))
    throw ConfigError("coupled_run: law grid mismatch");

  // Both systems consume the same (agent, step) increments: one source.
  const BrownianSource noise(cfg.seed, cfg.dt());
  Ensemble part = init, copy = init;
  Ensemble part_next(cfg.d, m, cfg.n), copy_next(cfg.d, m, cfg.n);
  std::vector<double> gaps(cfg.n, 0.0);
  const auto accumulate = [&]() {
    auto chunk = [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i)
        gaps[i] = std::max(gaps[i],
                           state_norm(space, part.state(i), copy.state(i)));
    };
    if (workers)
      workers->parallel_for(cfg.n, chunk);
    else
      chunk(0, cfg.n);
  };
  accumulate();  // k = 0 (zero gap by construction, kept for uniformity)
  FieldContext ctx_live, ctx_frozen;
  const bool dep = fs.field().measure_dependent();
  for (std::size_t k = 0; k < cfg.k; ++k) {
    const EnsembleView live = part.view();
    const EnsembleView frozen = law.slice(k);
    if (dep) {
      ctx_live.stats.clear();
      ctx_frozen.stats.clear();
      fs.field().prepare(space, live, ctx_live);
      fs.field().prepare(space, frozen, ctx_frozen);
    }
    detail::advance_slice(space, fs.field(), fs.theta(), live, ctx_live, live,
                          cfg.dt(), noise, static_cast<std::uint32_t>(k),
                          cfg.m_noise, part_next.x_row(0).data(),
                          part_next.lam_row(0).data(), workers);
    detail::advance_slice(space, fs.field(), fs.theta(), frozen, ctx_frozen,
                          copy.view(), cfg.dt(), noise,
                          static_cast<std::uint32_t>(k), cfg.m_noise,
                          copy_next.x_row(0).data(), copy_next.lam_row(0).data(),
                          workers);
    std::swap(part, part_next);
    std::swap(copy, copy_next);
    accumulate();
  }
  for (double& g : gaps) g *= g;
  return gaps;
}

ChaosSummary chaos_sweep(
    const StrategySpace& space, const FieldSet& fs, const LawEnsemble& law,
    const SimConfig& base, std::span<const std::size_t> n_grid,
    std::size_t reps,
    const std::function<Ensemble(std::size_t n, std::uint64_t seed)>& make_init,
    Workers* workers) {
  if (n_grid.empty() || reps == 0)
    throw ConfigError("chaos_sweep: need a nonempty N grid and reps >= 1");
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    if (n_grid[i] <= n_grid[i - 1])
      throw ConfigError("chaos_sweep: N grid must be strictly increasing");
  if (!make_init) throw ConfigError("chaos_sweep: missing init sampler");

  ChaosSummary out;
  for (const std::size_t n : n_grid) {
    ChaosGroup group;
    group.n = n;
    std::vector<double> ok;
    for (std::size_t r = 0; r < reps; ++r) {
      ChaosCell cell;
      cell.n = n;
      cell.rep = r;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        SimConfig cfg = base;
        cfg.n = n;
        cfg.seed = derive_seed(base.seed, r);
        const Ensemble init = make_init(n, cfg.seed);
        const std::vector<double> gaps =
            coupled_run(space, fs, law, init, cfg, workers);
        cell.err = *std::max_element(gaps.begin(), gaps.end());
        ok.push_back(cell.err);
      } catch (const Error& e) {
        cell.diverged = true;
        cell.error = e.what();
        cell.err = std::numeric_limits<double>::quiet_NaN();
      }
      cell.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
      out.cells.push_back(std::move(cell));
    }
    group.reps_ok = ok.size();
    if (!ok.empty()) {
      double sum = 0.0;
      for (double v : ok) sum += v;
      group.mean_err = sum / static_cast<double>(ok.size());
      if (ok.size() > 1) {
        double ss = 0.0;
        for (double v : ok) ss += (v - group.mean_err) * (v - group.mean_err);
        group.stderr_err = std::sqrt(ss / static_cast<double>(ok.size() - 1) /
                                     static_cast<double>(ok.size()));
      }
    }
    out.groups.push_back(group);
  }

  // Slope of log mean err vs log N, defined only on fully positive means.
  const bool fit = out.groups.size() >= 2 &&
                   std::all_of(out.groups.begin(), out.groups.end(),
                               [](const ChaosGroup& g) {
                                 return g.reps_ok > 0 && g.mean_err > 0.0;
                               });
  if (fit) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double cnt = static_cast<double>(out.groups.size());
    for (const ChaosGroup& g : out.groups) {
      const double x = std::log(static_cast<double>(g.n));
      const double y = std::log(g.mean_err);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double den = cnt * sxx - sx * sx;
    if (den > 0.0) {
      out.slope = (cnt * sxy - sx * sy) / den;
      out.intercept = (sy - *out.slope * sx) / cnt;
    }
  }
  return out;
}

void write_sweep_csv(const ChaosSummary& summary, std::ostream& os) {
  os << "N,rep,err,wall_ms\n";
  for (const ChaosCell& c : summary.cells)
    os << c.n << ',' << c.rep << ',' << format_double(c.err) << ','
       << format_double(c.wall_ms) << '\n';
}

}  // namespace mfl
