#include "mfl/sde_engine.hpp"

#include <cmath>
#include <exception>
#include <mutex>
#include <string>

#include "mfl/workers.hpp"

namespace mfl {

void SimConfig::validate(const FieldSet& fs) const {
  if (d == 0 || m_noise == 0 || n == 0 || k == 0)
    throw ConfigError("sim: d, m, N and K must be positive");
  if (!(t_final > 0.0) || !std::isfinite(t_final))
    throw ConfigError("sim: T must be finite and positive",
                      {{"T", format_double(t_final)}});
  if (n > 0xffffffffull || k > 0xffffffffull)
    throw ConfigError("sim: N and K must fit in 32 bits");
  const double step = dt();
  if (step > fs.theta() * (1.0 + 1e-12))
    throw ConfigError("sim: dt must not exceed theta",
                      {{"dt", format_double(step)},
                       {"theta", format_double(fs.theta())}});
}

namespace detail {

namespace {

struct FirstError {
  std::mutex mu;
  std::size_t agent = SIZE_MAX;
  std::exception_ptr err;

  void offer(std::size_t a, std::exception_ptr e) {
    std::lock_guard<std::mutex> lk(mu);
    if (a < agent) {
      agent = a;
      err = e;
    }
  }
};

}  // namespace

void advance_slice(const StrategySpace& space, const Field& field,
                   double theta, EnsembleView measure, const FieldContext& ctx,
                   EnsembleView cur, double dt, const BrownianSource& noise,
                   std::uint32_t step, std::size_t m_noise, double* out_xs,
                   double* out_lams, Workers* workers) {
  const std::size_t d = cur.d, m = cur.m, n = cur.n;
  const FieldArgs args{space, measure, ctx};
  FirstError fail;
  auto chunk = [&](std::size_t begin, std::size_t end) {
    std::vector<double> v(d), sg(d * m_noise), fl(m), dw(m_noise);
    for (std::size_t i = begin; i < end; ++i) {
      try {
        const StateRef y = cur.state(i);
        field.drift(args, y, v);
        field.diffusion(args, y, sg);
        field.flux(args, y, fl);
#ifndef NDEBUG
        {
          double mass = 0.0;
          for (double f : fl) mass += f;
          if (std::abs(mass) > kSimplexTol)
            throw ValidationError("flux mass is not zero",
                                  {{"agent", std::to_string(i)},
                                   {"mass", format_double(mass)}});
        }
#endif
        noise.increments(static_cast<std::uint32_t>(i), step, dw);
        double* xo = out_xs + i * d;
        for (std::size_t c = 0; c < d; ++c) {
          double acc = y.x[c] + v[c] * dt;
          const double* row = sg.data() + c * m_noise;
          for (std::size_t q = 0; q < m_noise; ++q) acc += row[q] * dw[q];
          xo[c] = acc;
          if (!std::isfinite(acc))
            throw DivergenceError("non-finite position",
                                  i, step + 1,
                                  {{"coordinate", std::to_string(c)}});
        }
        convex_step_span(y.lam, fl, dt, theta,
                         std::span<double>(out_lams + i * m, m));
      } catch (...) {
        fail.offer(i, std::current_exception());
        return;  // abandon this chunk; smallest-agent error wins
      }
    }
  };
  if (workers)
    workers->parallel_for(n, chunk);
  else
    chunk(0, n);
  if (fail.err) std::rethrow_exception(fail.err);
}

}  // namespace detail

Ensemble euler_step(const StrategySpace& space, const FieldSet& fs,
                    const Ensemble& cur, const BrownianSource& noise,
                    std::uint32_t step, std::size_t m_noise,
                    Workers* workers) {
  Ensemble next(cur.dim(), cur.strategies(), cur.size());
  FieldContext ctx;
  const EnsembleView v = cur.view();
  if (fs.field().measure_dependent()) fs.field().prepare(space, v, ctx);
  detail::advance_slice(space, fs.field(), fs.theta(), v, ctx, v, noise.dt(),
                        noise, step, m_noise, next.x_row(0).data(),
                        next.lam_row(0).data(), workers);
  return next;
}

TrajectoryBundle solve_n_particle(const StrategySpace& space,
                                  const FieldSet& fs, const Ensemble& init,
                                  const SimConfig& cfg, Workers* workers) {
  cfg.validate(fs);
  if (init.size() != cfg.n || init.dim() != cfg.d ||
      init.strategies() != space.size())
    throw ConfigError("solve_n_particle: init shape mismatch");
  TrajectoryBundle bundle(cfg.d, space.size(), cfg.n, cfg.t_final, cfg.k);
  bundle.set_slice(0, init);
  const BrownianSource noise(cfg.seed, cfg.dt());
  FieldContext ctx;
  const bool dep = fs.field().measure_dependent();
  for (std::size_t k = 0; k < cfg.k; ++k) {
    const EnsembleView cur = bundle.slice(k);
    if (dep) {
      ctx.stats.clear();
      fs.field().prepare(space, cur, ctx);
    }
    try {
      detail::advance_slice(space, fs.field(), fs.theta(), cur, ctx, cur,
                            cfg.dt(), noise, static_cast<std::uint32_t>(k),
                            cfg.m_noise, bundle.x_row(k + 1, 0).data(),
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

double sup_moment(const StrategySpace& space, const TrajectoryBundle& bundle,
                  int p, Workers* workers) {
  if (p != 2 && p != 4)
    throw ConfigError("sup_moment: p must be 2 or 4",
                      {{"p", std::to_string(p)}});
  const std::size_t n = bundle.paths();
  std::vector<double> per_path(n, 0.0);
  auto chunk = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double sup = 0.0;
      for (std::size_t k = 0; k < bundle.grid_size(); ++k)
        sup = std::max(sup, state_abs_norm(space, bundle.state(k, i)));
      per_path[i] = (p == 2) ? sup * sup : sup * sup * sup * sup;
    }
  };
  if (workers)
    workers->parallel_for(n, chunk);
  else
    chunk(0, n);
  double acc = 0.0;  // fixed-order reduction
  for (double v : per_path) acc += v;
  return acc / static_cast<double>(n);
}

}  // namespace mfl
