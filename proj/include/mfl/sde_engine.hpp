#pragma once

#include <cstdint>
#include <memory>

#include "mfl/fields.hpp"
#include "mfl/rng.hpp"

namespace mfl {

class Workers;

struct SimConfig {
  std::size_t d = 1;        // position dimension
  std::size_t m_noise = 1;  // Brownian dimension
  std::size_t n = 1;        // agents / paths
  std::size_t k = 100;      // time steps
  double t_final = 1.0;
  std::uint64_t seed = 1;

  double dt() const { return t_final / static_cast<double>(k); }
  // Hard preconditions, including dt <= theta.
  void validate(const FieldSet& fs) const;
};

// Divergence carrying the last finite ensemble for post-mortem inspection.
class EngineDivergence : public DivergenceError {
 public:
  EngineDivergence(std::string msg, std::size_t agent, std::size_t step,
                   std::shared_ptr<const Ensemble> last, ErrorDetails details)
      : DivergenceError(std::move(msg), agent, step, std::move(details)),
        last_(std::move(last)) {}
  const Ensemble& last_finite() const { return *last_; }

 private:
  std::shared_ptr<const Ensemble> last_;
};

namespace detail {

// One synchronous Euler-Maruyama step for all agents of `cur`, drawing the
// interaction measure from (measure, ctx), which is `cur` itself for the
// N-particle system and a frozen law slice for mean-field copies. Agent i at
// step k always consumes the same increments (seed, i, k), independent of
// worker count. Writes into out_xs/out_lams (time-major slice layout).
void advance_slice(const StrategySpace& space, const Field& field,
                   double theta, EnsembleView measure, const FieldContext& ctx,
                   EnsembleView cur, double dt, const BrownianSource& noise,
                   std::uint32_t step, std::size_t m_noise, double* out_xs,
                   double* out_lams, Workers* workers);

}  // namespace detail

// Single synchronous step (pre-step empirical measure), mostly for tests.
Ensemble euler_step(const StrategySpace& space, const FieldSet& fs,
                    const Ensemble& cur, const BrownianSource& noise,
                    std::uint32_t step, std::size_t m_noise,
                    Workers* workers = nullptr);

// Full N-particle solve on the uniform grid; deterministic in (config, seed).
TrajectoryBundle solve_n_particle(const StrategySpace& space,
                                  const FieldSet& fs, const Ensemble& init,
                                  const SimConfig& cfg,
                                  Workers* workers = nullptr);

// Monte Carlo estimate of E[ sup_k ||Y_{t_k}||^p ], p in {2, 4}, with the
// product norm against the zero state.
double sup_moment(const StrategySpace& space, const TrajectoryBundle& bundle,
                  int p, Workers* workers = nullptr);

}  // namespace mfl
