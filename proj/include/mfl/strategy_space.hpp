#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mfl/common.hpp"

namespace mfl {

// Finite metric space of pure strategies: labels plus a distance matrix that
// must be symmetric, zero-diagonal, positive off-diagonal and satisfy the
// triangle inequality.
class StrategySpace {
 public:
  StrategySpace(std::vector<std::string> labels,
                std::vector<std::vector<double>> dist);

  // M points, all pairwise distances equal to `d`.
  static StrategySpace uniform(std::size_t m, double d = 1.0);

  static StrategySpace from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  double dist(std::size_t i, std::size_t j) const {
    return dist_[i * labels_.size() + j];
  }

 private:
  std::vector<std::string> labels_;
  std::vector<double> dist_;  // row-major MxM
};

// Probability vector on the strategy simplex. Entries in (-kSimplexTol, 0)
// are clamped to zero and the vector renormalized; anything worse is
// rejected.
class MixedStrategy {
 public:
  explicit MixedStrategy(std::vector<double> w);

  static MixedStrategy vertex(std::size_t m, std::size_t i);
  static MixedStrategy uniform(std::size_t m);

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  const std::vector<double>& weights() const { return w_; }
  std::span<const double> span() const { return w_; }

 private:
  std::vector<double> w_;
};

// Signed measure with total mass zero (within kSimplexTol); the codomain of
// strategy flux fields.
class ZeroMassMeasure {
 public:
  explicit ZeroMassMeasure(std::vector<double> w);

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  std::span<const double> span() const { return w_; }

 private:
  std::vector<double> w_;
};

// Bounded-Lipschitz norm of a signed measure `mu` on the space:
//   sup { <phi, mu> : max_i |phi_i| <= s, |phi_i - phi_j| <= l * d_ij,
//         s + l <= 1 }.
// Exact: closed form for M <= 2, a small dense-simplex LP otherwise.
double bl_norm(const StrategySpace& space, std::span<const double> mu);

// 1-Wasserstein distance between mixed strategies (exact transport solve).
double w1_strategy(const StrategySpace& space, const MixedStrategy& a,
                   const MixedStrategy& b);

// One explicit strategy step: lambda + dt * flux, valid for dt <= theta
// because it is the convex combination
//   (1 - dt/theta) * lambda + (dt/theta) * (lambda + theta * flux)
// and lambda + theta * flux must itself lie on the simplex (checked).
MixedStrategy convex_step(const MixedStrategy& lambda,
                          const ZeroMassMeasure& flux, double dt,
                          double theta);

namespace detail {

// In-place span versions used by the hot stepping loops; identical semantics.
void convex_step_span(std::span<const double> lambda,
                      std::span<const double> flux, double dt, double theta,
                      std::span<double> out);

// BL norm of the difference a - b without materializing it (fast path for
// the state-norm inner loop).
double bl_norm_diff(const StrategySpace& space, std::span<const double> a,
                    std::span<const double> b);

// The generic LP route, exposed so tests can pin closed form == LP.
double bl_norm_lp(const StrategySpace& space, std::span<const double> mu);

}  // namespace detail
}  // namespace mfl
