#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mfl/meanfield.hpp"

namespace mfl {

// Synchronous coupling: the N-particle system and N frozen-law copies share
// initial states and per-(agent, step) Brownian increments. Returns the
// per-agent sup-over-grid squared state-norm gaps.
std::vector<double> coupled_run(const StrategySpace& space, const FieldSet& fs,
                                const LawEnsemble& law, const Ensemble& init,
                                const SimConfig& cfg,
                                Workers* workers = nullptr);

struct ChaosCell {
  std::size_t n = 0;
  std::size_t rep = 0;
  double err = 0.0;  // max over agents of the squared sup gap
  double wall_ms = 0.0;
  bool diverged = false;
  std::string error;
};

struct ChaosGroup {
  std::size_t n = 0;
  double mean_err = 0.0;
  double stderr_err = 0.0;
  std::size_t reps_ok = 0;
};

struct ChaosSummary {
  std::vector<ChaosCell> cells;
  std::vector<ChaosGroup> groups;
  // log-log regression of mean err on N; absent unless every group mean is
  // strictly positive and at least two groups exist.
  std::optional<double> slope, intercept;
};

// Sweeps N over a strictly increasing grid with R repetitions each.
// Repetition r draws seed derive_seed(base.seed, r) for BOTH the initial
// states and the noise, shared across all N cells (common random numbers).
// A diverged repetition is recorded and skipped; the sweep continues.
ChaosSummary chaos_sweep(
    const StrategySpace& space, const FieldSet& fs, const LawEnsemble& law,
    const SimConfig& base, std::span<const std::size_t> n_grid,
    std::size_t reps,
    const std::function<Ensemble(std::size_t n, std::uint64_t seed)>& make_init,
    Workers* workers = nullptr);

// CSV, columns: N,rep,err,wall_ms; diverged cells report err = nan.
void write_sweep_csv(const ChaosSummary& summary, std::ostream& os);

}  // namespace mfl
