#include "mfl/strategy_space.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "mfl/linprog.hpp"
#include "mfl/transport.hpp"

namespace mfl {

StrategySpace::StrategySpace(std::vector<std::string> labels,
                             std::vector<std::vector<double>> dist)
    : labels_(std::move(labels)) {
  const std::size_t m = labels_.size();
  if (m == 0) throw ConfigError("strategy space needs at least one label");
  std::set<std::string> uniq(labels_.begin(), labels_.end());
  if (uniq.size() != m || uniq.count(""))
    throw ConfigError("strategy labels must be distinct and non-empty");
  if (dist.size() != m)
    throw ConfigError("distance matrix must be MxM",
                      {{"m", std::to_string(m)}});
  dist_.assign(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (dist[i].size() != m)
      throw ConfigError("distance matrix must be MxM",
                        {{"row", std::to_string(i)}});
    for (std::size_t j = 0; j < m; ++j) {
      const double d = dist[i][j];
      if (!std::isfinite(d) || d < 0.0)
        throw ConfigError("distances must be finite and nonnegative",
                          {{"i", std::to_string(i)}, {"j", std::to_string(j)}});
      dist_[i * m + j] = d;
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (dist_[i * m + i] != 0.0)
      throw ConfigError("distance diagonal must be zero",
                        {{"i", std::to_string(i)}});
    for (std::size_t j = 0; j < m; ++j) {
      if (i != j && dist_[i * m + j] <= 0.0)
        throw ConfigError("off-diagonal distances must be positive",
                          {{"i", std::to_string(i)}, {"j", std::to_string(j)}});
      if (std::abs(dist_[i * m + j] - dist_[j * m + i]) > 1e-12)
        throw ConfigError("distance matrix must be symmetric",
                          {{"i", std::to_string(i)}, {"j", std::to_string(j)}});
    }
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < m; ++k)
        if (dist_[i * m + j] > dist_[i * m + k] + dist_[k * m + j] + 1e-12)
          throw ConfigError("triangle inequality violated",
                            {{"i", std::to_string(i)},
                             {"j", std::to_string(j)},
                             {"k", std::to_string(k)}});
}

StrategySpace StrategySpace::uniform(std::size_t m, double d) {
  std::vector<std::string> labels(m);
  for (std::size_t i = 0; i < m; ++i) labels[i] = "u" + std::to_string(i);
  std::vector<std::vector<double>> dist(m, std::vector<double>(m, d));
  for (std::size_t i = 0; i < m; ++i) dist[i][i] = 0.0;
  return StrategySpace(std::move(labels), std::move(dist));
}

StrategySpace StrategySpace::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("labels") || !j.contains("dist"))
    throw ConfigError("space: expected {\"labels\": [...], \"dist\": [[...]]}");
  for (const auto& [key, _] : j.items())
    if (key != "labels" && key != "dist")
      throw ConfigError("space: unknown key", {{"key", key}});
  try {
    return StrategySpace(j.at("labels").get<std::vector<std::string>>(),
                         j.at("dist").get<std::vector<std::vector<double>>>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("space: malformed JSON: ") + e.what());
  }
}

nlohmann::json StrategySpace::to_json() const {
  const std::size_t m = size();
  std::vector<std::vector<double>> dist(m, std::vector<double>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) dist[i][j] = dist_[i * m + j];
  return nlohmann::json{{"labels", labels_}, {"dist", dist}};
}

namespace {

// Shared validation for simplex vectors; clamps (-tol, 0) entries and
// renormalizes. `what` names the offender in errors.
std::vector<double> sanitize_simplex(std::vector<double> w, const char* what) {
  if (w.empty()) throw ConfigError(std::string(what) + ": empty weights");
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i]))
      throw ConfigError(std::string(what) + ": non-finite weight",
                        {{"entry", std::to_string(i)}});
    if (w[i] < 0.0) {
      if (w[i] <= -kSimplexTol)
        throw ConfigError(std::string(what) + ": negative weight beyond tolerance",
                          {{"entry", std::to_string(i)},
                           {"value", format_double(w[i])}});
      w[i] = 0.0;
    }
    sum += w[i];
  }
  if (std::abs(sum - 1.0) > kSimplexTol)
    throw ConfigError(std::string(what) + ": weights must sum to 1",
                      {{"sum", format_double(sum)}});
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace

MixedStrategy::MixedStrategy(std::vector<double> w)
    : w_(sanitize_simplex(std::move(w), "mixed strategy")) {}

MixedStrategy MixedStrategy::vertex(std::size_t m, std::size_t i) {
  if (i >= m) throw ConfigError("vertex index out of range");
  std::vector<double> w(m, 0.0);
  w[i] = 1.0;
  return MixedStrategy(std::move(w));
}

MixedStrategy MixedStrategy::uniform(std::size_t m) {
  if (m == 0) throw ConfigError("mixed strategy: empty weights");
  return MixedStrategy(std::vector<double>(m, 1.0 / static_cast<double>(m)));
}

ZeroMassMeasure::ZeroMassMeasure(std::vector<double> w) : w_(std::move(w)) {
  if (w_.empty()) throw ConfigError("zero-mass measure: empty weights");
  double sum = 0.0;
  for (std::size_t i = 0; i < w_.size(); ++i) {
    if (!std::isfinite(w_[i]))
      throw ConfigError("zero-mass measure: non-finite weight",
                        {{"entry", std::to_string(i)}});
    sum += w_[i];
  }
  if (std::abs(sum) > kSimplexTol)
    throw ConfigError("zero-mass measure: total mass must vanish",
                      {{"mass", format_double(sum)}});
}

namespace detail {

double bl_norm_lp(const StrategySpace& space, std::span<const double> mu) {
  const std::size_t m = space.size();
  // Variables: phi (split into +/- parts), s, l. Constraints:
  //   |phi_i| <= s, |phi_i - phi_j| <= l d_ij, s + l <= 1, all RHS >= 0,
  // so the slack basis starts feasible.
  const std::size_t nv = 2 * m + 2;
  const std::size_t s_col = 2 * m, l_col = 2 * m + 1;
  const std::size_t rows = 2 * m + m * (m - 1) + 1;
  std::vector<double> a(rows * nv, 0.0), b(rows, 0.0), c(nv, 0.0);
  std::size_t r = 0;
  for (std::size_t i = 0; i < m; ++i) {
    a[r * nv + i] = 1.0;
    a[r * nv + m + i] = -1.0;
    a[r * nv + s_col] = -1.0;
    ++r;
    a[r * nv + i] = -1.0;
    a[r * nv + m + i] = 1.0;
    a[r * nv + s_col] = -1.0;
    ++r;
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      a[r * nv + i] = 1.0;
      a[r * nv + m + i] = -1.0;
      a[r * nv + j] = -1.0;
      a[r * nv + m + j] = 1.0;
      a[r * nv + l_col] = -space.dist(i, j);
      ++r;
    }
  a[r * nv + s_col] = 1.0;
  a[r * nv + l_col] = 1.0;
  b[r] = 1.0;
  ++r;
  for (std::size_t i = 0; i < m; ++i) {
    c[i] = mu[i];
    c[m + i] = -mu[i];
  }
  return simplex_maximize(nv, rows, a, b, c).value;
}

double bl_norm_diff(const StrategySpace& space, std::span<const double> a,
                    std::span<const double> b) {
  const std::size_t m = space.size();
  if (m == 1) return std::abs(a[0] - b[0]);
  if (m == 2) {
    const double d = space.dist(0, 1);
    const double mass = (a[0] - b[0]) + (a[1] - b[1]);
    const double anti = (a[0] - b[0]) - (a[1] - b[1]);
    return std::max(std::abs(mass), std::abs(anti) * d / (2.0 + d));
  }
  std::vector<double> mu(m);
  for (std::size_t i = 0; i < m; ++i) mu[i] = a[i] - b[i];
  return bl_norm_lp(space, mu);
}

void convex_step_span(std::span<const double> lambda,
                      std::span<const double> flux, double dt, double theta,
                      std::span<double> out) {
  const std::size_t m = lambda.size();
  if (!(theta > 0.0) || !(dt > 0.0))
    throw ConfigError("convex_step: dt and theta must be positive");
  if (dt > theta * (1.0 + 1e-12))
    throw ConfigError("convex_step: dt must not exceed theta",
                      {{"dt", format_double(dt)},
                       {"theta", format_double(theta)}});
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double g = lambda[i] + theta * flux[i];
    if (!std::isfinite(g))
      throw ConfigError("convex_step: non-finite flux",
                        {{"entry", std::to_string(i)}});
    if (g <= -kSimplexTol)
      throw ValidationError(
          "convex_step: theta-step leaves the simplex",
          {{"entry", std::to_string(i)},
           {"value", format_double(g)},
           {"lambda", format_double(lambda[i])}});
    double r = lambda[i] + dt * flux[i];
    if (r < 0.0) r = 0.0;  // within (-kSimplexTol, 0) by the check above
    out[i] = r;
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("convex_step: mass drifted off 1",
                          {{"sum", format_double(sum)}});
  for (std::size_t i = 0; i < m; ++i) out[i] /= sum;
}

}  // namespace detail

double bl_norm(const StrategySpace& space, std::span<const double> mu) {
  const std::size_t m = space.size();
  if (mu.size() != m) throw ConfigError("bl_norm: dimension mismatch");
  for (double v : mu)
    if (!std::isfinite(v)) throw ConfigError("bl_norm: non-finite entry");
  if (m == 1) return std::abs(mu[0]);
  if (m == 2) {
    const double d = space.dist(0, 1);
    const double mass = mu[0] + mu[1];
    const double anti = mu[0] - mu[1];
    return std::max(std::abs(mass), std::abs(anti) * d / (2.0 + d));
  }
  return detail::bl_norm_lp(space, mu);
}

double w1_strategy(const StrategySpace& space, const MixedStrategy& a,
                   const MixedStrategy& b) {
  const std::size_t m = space.size();
  if (a.size() != m || b.size() != m)
    throw ConfigError("w1_strategy: dimension mismatch");
  // Strip zero-weight atoms; the transport solver wants positive marginals.
  std::vector<std::size_t> ia, ib;
  std::vector<double> wa, wb;
  for (std::size_t i = 0; i < m; ++i) {
    if (a[i] > 0.0) {
      ia.push_back(i);
      wa.push_back(a[i]);
    }
    if (b[i] > 0.0) {
      ib.push_back(i);
      wb.push_back(b[i]);
    }
  }
  std::vector<double> cost(ia.size() * ib.size());
  for (std::size_t p = 0; p < ia.size(); ++p)
    for (std::size_t q = 0; q < ib.size(); ++q)
      cost[p * ib.size() + q] = space.dist(ia[p], ib[q]);
  return transport_min_cost(ia.size(), ib.size(), cost, wa, wb).value;
}

MixedStrategy convex_step(const MixedStrategy& lambda,
                          const ZeroMassMeasure& flux, double dt,
                          double theta) {
  if (lambda.size() != flux.size())
    throw ConfigError("convex_step: dimension mismatch");
  std::vector<double> out(lambda.size());
  detail::convex_step_span(lambda.span(), flux.span(), dt, theta, out);
  return MixedStrategy(std::move(out));
}

}  // namespace mfl
