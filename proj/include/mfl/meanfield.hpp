#pragma once

#include <utility>
#include <vector>

#include "mfl/sde_engine.hpp"

namespace mfl {

// A law estimate is a bundle of sample paths on the run's time grid.
using LawEnsemble = TrajectoryBundle;

struct FixedPointReport {
  std::vector<double> gaps;  // path-space W2 between successive iterates
  std::size_t iterations = 0;
  bool converged = false;
  double tol = 0.0;
};

// Auxiliary (frozen-law) solve: every agent follows the dynamics driven by
// the fixed time-k marginals of `law` instead of the live ensemble. Noise is
// keyed exactly like solve_n_particle, so iterating from the same init reuses
// identical increments.
TrajectoryBundle solve_auxiliary(const StrategySpace& space,
                                 const FieldSet& fs, const LawEnsemble& law,
                                 const Ensemble& init, const SimConfig& cfg,
                                 Workers* workers = nullptr);

// One application of the law map: law in, law of the auxiliary solution out.
inline TrajectoryBundle apply_S(const StrategySpace& space, const FieldSet& fs,
                                const LawEnsemble& law, const Ensemble& init,
                                const SimConfig& cfg,
                                Workers* workers = nullptr) {
  return solve_auxiliary(space, fs, law, init, cfg, workers);
}

// Empirical path-space W2 between two equal-size bundles on the same grid:
// ground cost sup_k state_norm(a_k, b_k)^2, solved as an exact transport LP.
double path_space_w2(const StrategySpace& space, const TrajectoryBundle& a,
                     const TrajectoryBundle& b, Workers* workers = nullptr);

// Picard iteration of the law map starting from the time-constant bundle of
// `init`. Stops when the path-space W2 gap falls to `tol` or after
// `max_iter` applications; tol = +inf accepts the first iterate.
std::pair<TrajectoryBundle, FixedPointReport> fixed_point(
    const StrategySpace& space, const FieldSet& fs, const Ensemble& init,
    const SimConfig& cfg, double tol, std::size_t max_iter,
    Workers* workers = nullptr);

}  // namespace mfl
