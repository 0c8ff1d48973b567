#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "mfl/strategy_space.hpp"

namespace mfl {

class Workers;

// Owning single-agent state, convenient for construction and tests.
struct AgentState {
  std::vector<double> x;
  MixedStrategy lambda;
};

// Non-owning view into ensemble / bundle storage.
struct StateRef {
  std::span<const double> x;
  std::span<const double> lam;
};

struct EnsembleView {
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t m = 0;           // strategy count
  const double* xs = nullptr;   // n x d
  const double* lams = nullptr; // n x m

  StateRef state(std::size_t i) const {
    return {{xs + i * d, d}, {lams + i * m, m}};
  }
};

// Uniform-weight ensemble of agent states over a shared (d, M).
class Ensemble {
 public:
  Ensemble(std::size_t d, std::size_t m, std::size_t n);
  static Ensemble from_states(std::size_t d, std::size_t m,
                              const std::vector<AgentState>& states);

  std::size_t size() const { return n_; }
  std::size_t dim() const { return d_; }
  std::size_t strategies() const { return m_; }

  EnsembleView view() const { return {n_, d_, m_, xs_.data(), lams_.data()}; }
  StateRef state(std::size_t i) const { return view().state(i); }

  // Writers must keep strategy rows on the simplex; check_invariants audits.
  std::span<double> x_row(std::size_t i) { return {xs_.data() + i * d_, d_}; }
  std::span<double> lam_row(std::size_t i) {
    return {lams_.data() + i * m_, m_};
  }

  // Worst simplex violation over all rows: most negative entry and largest
  // |sum - 1| are compared against kSimplexTol. Returns the violation count.
  std::size_t check_invariants(double* worst_entry = nullptr,
                               double* worst_mass = nullptr) const;

 private:
  std::size_t d_, m_, n_;
  std::vector<double> xs_;
  std::vector<double> lams_;
};

// N paths sampled on a shared uniform time grid; storage is time-major so a
// time slice is a contiguous EnsembleView.
class TrajectoryBundle {
 public:
  TrajectoryBundle(std::size_t d, std::size_t m, std::size_t n_paths,
                   double t_final, std::size_t k_steps);

  std::size_t paths() const { return n_; }
  std::size_t dim() const { return d_; }
  std::size_t strategies() const { return m_; }
  std::size_t steps() const { return k_; }       // K
  std::size_t grid_size() const { return k_ + 1; }
  double t_final() const { return t_; }
  double dt() const { return t_ / static_cast<double>(k_); }
  double time(std::size_t k) const { return times_[k]; }
  const std::vector<double>& times() const { return times_; }

  EnsembleView slice(std::size_t k) const {
    return {n_, d_, m_, xs_.data() + k * n_ * d_, lams_.data() + k * n_ * m_};
  }
  StateRef state(std::size_t k, std::size_t path) const {
    return slice(k).state(path);
  }

  std::span<double> x_row(std::size_t k, std::size_t path) {
    return {xs_.data() + (k * n_ + path) * d_, d_};
  }
  std::span<double> lam_row(std::size_t k, std::size_t path) {
    return {lams_.data() + (k * n_ + path) * m_, m_};
  }

  void set_slice(std::size_t k, const Ensemble& e);

 private:
  std::size_t d_, m_, n_, k_;
  double t_;
  std::vector<double> times_;
  std::vector<double> xs_;
  std::vector<double> lams_;
};

// Product-space norm: ||x_a - x_b||_2 + BL(lam_a - lam_b).
double state_norm(const StrategySpace& space, StateRef a, StateRef b);

// Norm against the zero state: ||x||_2 + BL(lam); BL of a probability vector
// is exactly 1.
double state_abs_norm(const StrategySpace& space, StateRef a);

// p-Wasserstein (p in {1,2}) between uniform-weight ensembles under the
// product-space norm, solved exactly as a transport LP.
double w_product(const StrategySpace& space, int p, const Ensemble& a,
                 const Ensemble& b, Workers* workers = nullptr);
double w_product_views(const StrategySpace& space, int p, EnsembleView a,
                       EnsembleView b, Workers* workers = nullptr);

// Copy of the time-k marginal.
Ensemble time_marginal(const TrajectoryBundle& bundle, std::size_t k);

// CSV, columns: path_id,t,x_1..x_d,w_1..w_M ('.' decimal, '\n' endings).
void write_csv(const TrajectoryBundle& bundle, std::ostream& os);
TrajectoryBundle read_csv(std::istream& is);

}  // namespace mfl
