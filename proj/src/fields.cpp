#include "mfl/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "mfl/json_util.hpp"
#include "mfl/rng.hpp"
#include "mfl/workers.hpp"

namespace mfl {

using nlohmann::json;
using jsonu::check_keys;
using jsonu::get_index;
using jsonu::get_num;

namespace {

void require_rate(double tau, double theta, const char* field) {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw ConfigError(std::string(field) + ": rate tau must be positive");
  if (tau < theta * (1.0 - 1e-12))
    throw ConfigError(std::string(field) +
                          ": rate tau must be >= theta (geometry)",
                      {{"tau", format_double(tau)},
                       {"theta", format_double(theta)}});
}

void diag_fill(std::span<double> out, std::size_t d, std::size_t m,
               double value) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t c = 0; c < std::min(d, m); ++c) out[c * m + c] = value;
}

// --- strategy_mean_reversion ------------------------------------------------

class StrategyMeanReversion final : public Field {
 public:
  StrategyMeanReversion(const StrategySpace& space, const json& params,
                        double theta) {
    check_keys(params,
               {"tau", "kappa", "noise", "target", "spatial"},
               "strategy_mean_reversion");
    tau_ = get_num(params, "tau", theta);
    kappa_ = get_num(params, "kappa", 0.5);
    noise_ = get_num(params, "noise", 0.3);
    require_rate(tau_, theta, "strategy_mean_reversion");
    if (kappa_ < 0.0 || noise_ < 0.0)
      throw ConfigError("strategy_mean_reversion: kappa and noise must be >= 0");
    if (params.contains("target")) {
      const json& t = params.at("target");
      if (t.is_string() && t.get<std::string>() == "ensemble_mean") {
        target_.clear();
      } else if (t.is_array()) {
        target_ = MixedStrategy(t.get<std::vector<double>>()).weights();
        if (target_.size() != space.size())
          throw ConfigError("strategy_mean_reversion: target size != M");
      } else {
        throw ConfigError(
            "strategy_mean_reversion: target must be \"ensemble_mean\" or a "
            "weight vector");
      }
    } else {
      target_ = MixedStrategy::uniform(space.size()).weights();
    }
    if (params.contains("spatial")) {
      const std::string s = params.at("spatial").get<std::string>();
      if (s == "origin")
        spatial_mean_ = false;
      else if (s == "ensemble_mean")
        spatial_mean_ = true;
      else
        throw ConfigError("strategy_mean_reversion: spatial must be "
                          "\"origin\" or \"ensemble_mean\"");
    }
  }

  std::string name() const override { return "strategy_mean_reversion"; }

  bool measure_dependent() const override {
    return spatial_mean_ || target_.empty();
  }

  void prepare(const StrategySpace&, EnsembleView ens,
               FieldContext& ctx) const override {
    ctx.stats.assign(ens.d + ens.m, 0.0);
    for (std::size_t i = 0; i < ens.n; ++i) {
      for (std::size_t c = 0; c < ens.d; ++c)
        ctx.stats[c] += ens.xs[i * ens.d + c];
      for (std::size_t u = 0; u < ens.m; ++u)
        ctx.stats[ens.d + u] += ens.lams[i * ens.m + u];
    }
    const double inv = 1.0 / static_cast<double>(ens.n);
    for (double& s : ctx.stats) s *= inv;
  }

  void drift(const FieldArgs& a, StateRef y,
             std::span<double> out) const override {
    for (std::size_t c = 0; c < y.x.size(); ++c)
      out[c] = spatial_mean_ ? kappa_ * (a.ctx.stats[c] - y.x[c])
                             : -kappa_ * y.x[c];
  }

  void diffusion(const FieldArgs&, StateRef y,
                 std::span<double> out) const override {
    diag_fill(out, y.x.size(), out.size() / y.x.size(), noise_);
  }

  void flux(const FieldArgs& a, StateRef y,
            std::span<double> out) const override {
    const std::size_t m = y.lam.size();
    const double* tgt =
        target_.empty() ? a.ctx.stats.data() + a.ens.d : target_.data();
    for (std::size_t u = 0; u < m; ++u)
      out[u] = (tgt[u] - y.lam[u]) / tau_;
  }

 private:
  double tau_, kappa_, noise_;
  std::vector<double> target_;  // empty: revert to the ensemble mean strategy
  bool spatial_mean_ = false;
};

// --- leader_follower ---------------------------------------------------------

class LeaderFollower final : public Field {
 public:
  LeaderFollower(const StrategySpace& space, const json& params,
                 double theta) {
    check_keys(params,
               {"attract", "range", "tau", "noise", "lead_calm", "lead_index"},
               "leader_follower");
    attract_ = get_num(params, "attract", 1.0);
    range_ = get_num(params, "range", 1.0);
    tau_ = get_num(params, "tau", theta);
    noise_ = get_num(params, "noise", 0.25);
    lead_calm_ = get_num(params, "lead_calm", 0.5);
    lead_ = get_index(params, "lead_index", 1, space.size());
    require_rate(tau_, theta, "leader_follower");
    if (space.size() != 2)
      throw ConfigError("leader_follower: requires exactly 2 strategies");
    if (attract_ < 0.0 || noise_ < 0.0 || !(range_ > 0.0) ||
        lead_calm_ < 0.0 || lead_calm_ > 1.0)
      throw ConfigError("leader_follower: parameter out of range");
  }

  std::string name() const override { return "leader_follower"; }

  // stats: [0..d) leadership-weighted position sum, [d] leadership mass,
  //        [d+1..2d+1) plain position mean.
  void prepare(const StrategySpace&, EnsembleView ens,
               FieldContext& ctx) const override {
    ctx.stats.assign(2 * ens.d + 1, 0.0);
    for (std::size_t i = 0; i < ens.n; ++i) {
      const double lead = ens.lams[i * ens.m + lead_];
      for (std::size_t c = 0; c < ens.d; ++c) {
        ctx.stats[c] += lead * ens.xs[i * ens.d + c];
        ctx.stats[ens.d + 1 + c] += ens.xs[i * ens.d + c];
      }
      ctx.stats[ens.d] += lead;
    }
    const double inv = 1.0 / static_cast<double>(ens.n);
    for (std::size_t c = 0; c < ens.d; ++c) ctx.stats[ens.d + 1 + c] *= inv;
  }

  void drift(const FieldArgs& a, StateRef y,
             std::span<double> out) const override {
    const std::size_t d = y.x.size();
    const double lead = y.lam[lead_];
    const double mass = a.ctx.stats[d];
    for (std::size_t c = 0; c < d; ++c) {
      const double anchor = mass > 1e-12 ? a.ctx.stats[c] / mass
                                         : a.ctx.stats[d + 1 + c];
      out[c] = attract_ * (1.0 - lead) * (anchor - y.x[c]);
    }
  }

  void diffusion(const FieldArgs&, StateRef y,
                 std::span<double> out) const override {
    diag_fill(out, y.x.size(), out.size() / y.x.size(),
              noise_ * (1.0 - lead_calm_ * y.lam[lead_]));
  }

  // Followers drift toward the locally prevailing strategy mix: a Gaussian
  // kernel in position space weights every agent's mixed strategy.
  void flux(const FieldArgs& a, StateRef y,
            std::span<double> out) const override {
    const std::size_t d = y.x.size(), m = y.lam.size();
    std::fill(out.begin(), out.end(), 0.0);
    double wsum = 0.0;
    for (std::size_t j = 0; j < a.ens.n; ++j) {
      double r2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double dx = y.x[c] - a.ens.xs[j * d + c];
        r2 += dx * dx;
      }
      const double w = std::exp(-r2 / (range_ * range_));
      wsum += w;
      for (std::size_t u = 0; u < m; ++u)
        out[u] += w * a.ens.lams[j * m + u];
    }
    for (std::size_t u = 0; u < m; ++u)
      out[u] = (out[u] / wsum - y.lam[u]) / tau_;
  }

 private:
  double attract_, range_, tau_, noise_, lead_calm_;
  std::size_t lead_;
};

// --- attraction_repulsion ----------------------------------------------------

class AttractionRepulsion final : public Field {
 public:
  AttractionRepulsion(const StrategySpace&, const json& params, double theta) {
    check_keys(params, {"attract", "repulse", "eps", "sim", "noise", "tau"},
               "attraction_repulsion");
    attract_ = get_num(params, "attract", 1.0);
    repulse_ = get_num(params, "repulse", 0.25);
    eps_ = get_num(params, "eps", 0.1);
    sim_ = get_num(params, "sim", 0.0);
    noise_ = get_num(params, "noise", 0.25);
    if (params.contains("tau") && params.at("tau").is_null()) {
      has_flux_ = false;
      tau_ = 0.0;
    } else {
      tau_ = get_num(params, "tau", theta);
      require_rate(tau_, theta, "attraction_repulsion");
    }
    if (attract_ < 0.0 || repulse_ < 0.0 || !(eps_ > 0.0) || noise_ < 0.0 ||
        sim_ < 0.0)
      throw ConfigError("attraction_repulsion: parameter out of range");
  }

  std::string name() const override { return "attraction_repulsion"; }

  void prepare(const StrategySpace&, EnsembleView ens,
               FieldContext& ctx) const override {
    ctx.stats.assign(ens.m, 0.0);
    for (std::size_t i = 0; i < ens.n; ++i)
      for (std::size_t u = 0; u < ens.m; ++u)
        ctx.stats[u] += ens.lams[i * ens.m + u];
    for (double& s : ctx.stats) s /= static_cast<double>(ens.n);
  }

  void drift(const FieldArgs& a, StateRef y,
             std::span<double> out) const override {
    const std::size_t d = y.x.size(), m = y.lam.size();
    std::fill(out.begin(), out.end(), 0.0);
    const double inv = 1.0 / static_cast<double>(a.ens.n);
    for (std::size_t j = 0; j < a.ens.n; ++j) {
      double r2 = 0.0, sim = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double dx = a.ens.xs[j * d + c] - y.x[c];
        r2 += dx * dx;
      }
      for (std::size_t u = 0; u < m; ++u)
        sim += y.lam[u] * a.ens.lams[j * m + u];
      const double coef = inv * (attract_ + sim_ * sim - repulse_ / (r2 + eps_));
      for (std::size_t c = 0; c < d; ++c)
        out[c] += coef * (a.ens.xs[j * d + c] - y.x[c]);
    }
  }

  void diffusion(const FieldArgs&, StateRef y,
                 std::span<double> out) const override {
    diag_fill(out, y.x.size(), out.size() / y.x.size(), noise_);
  }

  void flux(const FieldArgs& a, StateRef y,
            std::span<double> out) const override {
    const std::size_t m = y.lam.size();
    if (!has_flux_) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    for (std::size_t u = 0; u < m; ++u)
      out[u] = (a.ctx.stats[u] - y.lam[u]) / tau_;
  }

 private:
  double attract_, repulse_, eps_, sim_, noise_, tau_;
  bool has_flux_ = true;
};

// --- cbo_style ----------------------------------------------------------------

class CboStyle final : public Field {
 public:
  CboStyle(const StrategySpace& space, const json& params, double theta) {
    check_keys(params,
               {"alpha", "drift", "noise", "explore_boost", "temp", "tau",
                "explore_index", "exploit_index", "objective"},
               "cbo_style");
    alpha_ = get_num(params, "alpha", 10.0);
    drift_ = get_num(params, "drift", 1.0);
    noise_ = get_num(params, "noise", 0.3);
    boost_ = get_num(params, "explore_boost", 0.5);
    temp_ = get_num(params, "temp", 1.0);
    tau_ = get_num(params, "tau", theta);
    require_rate(tau_, theta, "cbo_style");
    explore_ = get_index(params, "explore_index", 0, space.size());
    exploit_ = get_index(params, "exploit_index", 1, space.size());
    if (space.size() < 2 || explore_ == exploit_)
      throw ConfigError("cbo_style: needs distinct explore/exploit strategies");
    if (!(alpha_ > 0.0) || !(temp_ > 0.0) || drift_ < 0.0 || noise_ < 0.0 ||
        boost_ < 0.0)
      throw ConfigError("cbo_style: parameter out of range");
    if (params.contains("objective")) {
      const json& o = params.at("objective");
      check_keys(o, {"kind", "center"}, "cbo_style.objective");
      const std::string kind = o.value("kind", "quadratic");
      if (kind == "quadratic")
        rastrigin_ = false;
      else if (kind == "rastrigin")
        rastrigin_ = true;
      else
        throw ConfigError("cbo_style: objective kind must be quadratic or "
                          "rastrigin");
      if (o.contains("center"))
        center_ = o.at("center").get<std::vector<double>>();
    }
  }

  std::string name() const override { return "cbo_style"; }

  void validate_params(const StrategySpace&, std::size_t d, std::size_t,
                       double) const override {
    if (!center_.empty() && center_.size() != d)
      throw ConfigError("cbo_style: objective center size != d");
  }

  double objective(std::span<const double> x) const {
    double f = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
      const double z = x[c] - (c < center_.size() ? center_[c] : 0.0);
      f += rastrigin_
               ? z * z - 10.0 * std::cos(2.0 * 3.141592653589793 * z) + 10.0
               : z * z;
    }
    return f;
  }

  // stats: [0..d) consensus point, [d] objective value at the consensus point.
  void prepare(const StrategySpace&, EnsembleView ens,
               FieldContext& ctx) const override {
    double fmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ens.n; ++i)
      fmin = std::min(fmin,
                      objective({ens.xs + i * ens.d, ens.d}));
    ctx.stats.assign(ens.d + 1, 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < ens.n; ++i) {
      const double w =
          std::exp(-alpha_ * (objective({ens.xs + i * ens.d, ens.d}) - fmin));
      z += w;
      for (std::size_t c = 0; c < ens.d; ++c)
        ctx.stats[c] += w * ens.xs[i * ens.d + c];
    }
    for (std::size_t c = 0; c < ens.d; ++c) ctx.stats[c] /= z;
    ctx.stats[ens.d] = objective({ctx.stats.data(), ens.d});
  }

  void drift(const FieldArgs& a, StateRef y,
             std::span<double> out) const override {
    for (std::size_t c = 0; c < y.x.size(); ++c)
      out[c] = -drift_ * (y.x[c] - a.ctx.stats[c]);
  }

  void diffusion(const FieldArgs& a, StateRef y,
                 std::span<double> out) const override {
    const std::size_t d = y.x.size();
    double r2 = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double dx = y.x[c] - a.ctx.stats[c];
      r2 += dx * dx;
    }
    diag_fill(out, d, out.size() / d,
              noise_ * (1.0 + boost_ * y.lam[explore_]) * std::sqrt(r2));
  }

  void flux(const FieldArgs& a, StateRef y,
            std::span<double> out) const override {
    const double gap = (objective(y.x) - a.ctx.stats[y.x.size()]) / temp_;
    const double w = 1.0 / (1.0 + std::exp(-gap));
    std::fill(out.begin(), out.end(), 0.0);
    out[explore_] = w;
    out[exploit_] = 1.0 - w;
    for (std::size_t u = 0; u < y.lam.size(); ++u)
      out[u] = (out[u] - y.lam[u]) / tau_;
  }

 private:
  double alpha_, drift_, noise_, boost_, temp_, tau_;
  std::size_t explore_, exploit_;
  bool rastrigin_ = false;
  std::vector<double> center_;
};

// --- overshoot_reversion (negative control) ----------------------------------

// Deliberately violates the theta-step geometry for gain > 1: used to prove
// that validate_geometry catches bad fields. Not for production runs.
class OvershootReversion final : public Field {
 public:
  OvershootReversion(const StrategySpace& space, const json& params,
                     double theta) {
    check_keys(params, {"gain", "target", "noise"}, "overshoot_reversion");
    gain_over_theta_ = get_num(params, "gain", 2.0) / theta;
    noise_ = get_num(params, "noise", 0.2);
    if (params.contains("target")) {
      target_ = MixedStrategy(params.at("target").get<std::vector<double>>())
                    .weights();
      if (target_.size() != space.size())
        throw ConfigError("overshoot_reversion: target size != M");
    } else {
      // Asymmetric ramp: with gain 2 the first vertex has a strictly
      // negative theta-step margin (a uniform target would sit exactly at 0).
      target_.resize(space.size());
      double sum = 0.0;
      for (std::size_t u = 0; u < target_.size(); ++u) {
        target_[u] = static_cast<double>(u + 1);
        sum += target_[u];
      }
      for (double& t : target_) t /= sum;
    }
  }

  std::string name() const override { return "overshoot_reversion"; }
  bool measure_dependent() const override { return false; }

  void drift(const FieldArgs&, StateRef y,
             std::span<double> out) const override {
    for (std::size_t c = 0; c < y.x.size(); ++c) out[c] = -y.x[c];
  }

  void diffusion(const FieldArgs&, StateRef y,
                 std::span<double> out) const override {
    diag_fill(out, y.x.size(), out.size() / y.x.size(), noise_);
  }

  void flux(const FieldArgs&, StateRef y,
            std::span<double> out) const override {
    for (std::size_t u = 0; u < y.lam.size(); ++u)
      out[u] = gain_over_theta_ * (target_[u] - y.lam[u]);
  }

 private:
  double gain_over_theta_, noise_;
  std::vector<double> target_;
};

}  // namespace

FieldSet::FieldSet(std::shared_ptr<const Field> field, double theta,
                   const StrategySpace& space, std::size_t d,
                   std::size_t m_noise, LipschitzDeclaration declared)
    : field_(std::move(field)), theta_(theta), declared_(declared) {
  if (!field_) throw ConfigError("field set: null field");
  if (!(theta_ > 0.0) || !std::isfinite(theta_))
    throw ConfigError("field set: theta must be finite and positive",
                      {{"theta", format_double(theta_)}});
  for (const auto& lv : {declared_.v, declared_.sigma, declared_.flux})
    if (lv && (!(*lv >= 0.0) || !std::isfinite(*lv)))
      throw ConfigError("field set: declared Lipschitz constants must be "
                        "finite and nonnegative");
  field_->validate_params(space, d, m_noise, theta_);
}

std::shared_ptr<const Field> make_builtin_field(const StrategySpace& space,
                                                const std::string& variant,
                                                const nlohmann::json& params,
                                                double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta))
    throw ConfigError("field: theta must be finite and positive");
  if (variant == "strategy_mean_reversion")
    return std::make_shared<StrategyMeanReversion>(space, params, theta);
  if (variant == "leader_follower")
    return std::make_shared<LeaderFollower>(space, params, theta);
  if (variant == "attraction_repulsion")
    return std::make_shared<AttractionRepulsion>(space, params, theta);
  if (variant == "cbo_style")
    return std::make_shared<CboStyle>(space, params, theta);
  if (variant == "overshoot_reversion")
    return std::make_shared<OvershootReversion>(space, params, theta);
  throw ConfigError("field: unknown variant", {{"variant", variant}});
}

FieldSet field_set_from_json(const StrategySpace& space,
                             const nlohmann::json& j, std::size_t d,
                             std::size_t m_noise) {
  if (!j.contains("field") || !j.contains("theta"))
    throw ConfigError("config: missing field/theta");
  const json& f = j.at("field");
  check_keys(f, {"variant", "params"}, "field");
  if (!f.contains("variant") || !f.at("variant").is_string())
    throw ConfigError("field: variant must be a string");
  const json params = f.value("params", json::object());
  const double theta = j.at("theta").get<double>();
  LipschitzDeclaration decl;
  if (j.contains("lipschitz")) {
    const json& l = j.at("lipschitz");
    check_keys(l, {"v", "sigma", "flux"}, "lipschitz");
    if (l.contains("v")) decl.v = l.at("v").get<double>();
    if (l.contains("sigma")) decl.sigma = l.at("sigma").get<double>();
    if (l.contains("flux")) decl.flux = l.at("flux").get<double>();
  }
  return FieldSet(
      make_builtin_field(space, f.at("variant").get<std::string>(), params,
                         theta),
      theta, space, d, m_noise, decl);
}

MixedStrategy apply_G(const StrategySpace& space, const FieldSet& fs,
                      EnsembleView sigma, StateRef y) {
  const std::size_t m = space.size();
  if (y.lam.size() != m || sigma.m != m)
    throw ConfigError("apply_G: dimension mismatch");
  FieldContext ctx;
  if (fs.field().measure_dependent()) fs.field().prepare(space, sigma, ctx);
  std::vector<double> fl(m);
  fs.field().flux({space, sigma, ctx}, y, fl);
  std::vector<double> g(m);
  double sum = 0.0;
  for (std::size_t u = 0; u < m; ++u) {
    g[u] = y.lam[u] + fs.theta() * fl[u];
    if (!std::isfinite(g[u]) || g[u] <= -kSimplexTol) {
      ErrorDetails det{{"entry", std::to_string(u)},
                       {"value", format_double(g[u])},
                       {"lambda", format_double(y.lam[u])}};
      for (std::size_t c = 0; c < y.x.size(); ++c)
        det.emplace_back("x_" + std::to_string(c + 1), format_double(y.x[c]));
      throw ValidationError("apply_G: theta-step leaves the simplex",
                            std::move(det));
    }
    if (g[u] < 0.0) g[u] = 0.0;
    sum += g[u];
  }
  if (std::abs(sum - 1.0) > 1e-10)
    throw ValidationError("apply_G: mass drifted off 1",
                          {{"sum", format_double(sum)}});
  for (double& v : g) v /= sum;
  return MixedStrategy(std::move(g));
}

namespace {

// Shared sampler for the validator and the Lipschitz estimator: per `unit`,
// a random interaction ensemble plus a probe state. Strategy probes walk
// vertices, edge midpoints and the barycenter before going random.
struct ProbeSampler {
  const StrategySpace& space;
  const ProbeOptions& opt;
  CounterRng rng;

  ProbeSampler(const StrategySpace& s, const ProbeOptions& o, Stream stream)
      : space(s), opt(o), rng(o.seed, stream) {}

  Ensemble ensemble(std::uint32_t unit) const {
    const std::size_t m = space.size();
    Ensemble e(opt.d, m, std::max<std::size_t>(1, opt.ensemble));
    for (std::size_t i = 0; i < e.size(); ++i) {
      auto x = e.x_row(i);
      rng.normals(unit, static_cast<std::uint32_t>(3 * i), x);
      for (double& v : x) v *= opt.scale;
      sample_simplex(rng, unit, static_cast<std::uint32_t>(3 * i + 1),
                     e.lam_row(i));
    }
    return e;
  }

  // kind_out receives a short label for reports.
  AgentState probe_state(std::uint32_t unit, std::size_t probe_index,
                         std::string* kind_out) const {
    const std::size_t m = space.size();
    std::vector<double> x(opt.d);
    rng.normals(unit, static_cast<std::uint32_t>(3 * opt.ensemble), x);
    for (double& v : x) v *= opt.scale;
    const std::size_t edges = m * (m - 1) / 2;
    std::vector<double> lam(m, 0.0);
    std::string kind;
    if (probe_index < m) {
      lam[probe_index] = 1.0;
      kind = "vertex " + std::to_string(probe_index);
    } else if (probe_index < m + edges) {
      std::size_t e = probe_index - m, i = 0;
      while (e >= m - 1 - i) {
        e -= m - 1 - i;
        ++i;
      }
      const std::size_t j = i + 1 + e;
      lam[i] = 0.5;
      lam[j] = 0.5;
      kind = "edge " + std::to_string(i) + "-" + std::to_string(j);
    } else if (probe_index == m + edges) {
      std::fill(lam.begin(), lam.end(), 1.0 / static_cast<double>(m));
      kind = "barycenter";
    } else {
      sample_simplex(rng, unit, static_cast<std::uint32_t>(3 * opt.ensemble + 1),
                     lam);
      kind = "random";
    }
    if (kind_out) *kind_out = kind;
    return {std::move(x), MixedStrategy(std::move(lam))};
  }
};

}  // namespace

GeometryReport validate_geometry(const StrategySpace& space,
                                 const FieldSet& fs, const ProbeOptions& opt) {
  if (opt.samples == 0) throw ConfigError("validate_geometry: need samples");
  const std::size_t m = space.size();
  const ProbeSampler sampler(space, opt, Stream::kProbe);
  GeometryReport rep;
  rep.samples = opt.samples;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  const std::size_t probe_cycle = m + m * (m - 1) / 2 + 1;
  FieldContext ctx;
  std::vector<double> fl(m), g(m);
  for (std::size_t s = 0; s < opt.samples; ++s) {
    const std::uint32_t unit = static_cast<std::uint32_t>(s);
    const Ensemble ens = sampler.ensemble(unit);
    std::string kind;
    // Sweep the fixed probe set first, then keep sampling randomly.
    const std::size_t probe_index = s < probe_cycle ? s : probe_cycle;
    const AgentState y = sampler.probe_state(unit, probe_index, &kind);
    const EnsembleView ev = ens.view();
    if (fs.field().measure_dependent()) {
      ctx.stats.clear();
      fs.field().prepare(space, ev, ctx);
    }
    fs.field().flux({space, ev, ctx},
                    {{y.x.data(), y.x.size()}, y.lambda.span()}, fl);
    double margin = std::numeric_limits<double>::infinity();
    double sum = 0.0;
    std::size_t arg = 0;
    for (std::size_t u = 0; u < m; ++u) {
      g[u] = y.lambda[u] + fs.theta() * fl[u];
      sum += g[u];
      if (g[u] < margin) {
        margin = g[u];
        arg = u;
      }
    }
    rep.worst_mass_dev = std::max(rep.worst_mass_dev, std::abs(sum - 1.0));
    if (margin < rep.worst_margin) {
      rep.worst_margin = margin;
      if (margin < -kSimplexTol) {
        rep.x = y.x;
        rep.lambda = y.lambda.weights();
        rep.g = g;
        rep.entry = arg;
        rep.probe_kind = kind;
      }
    }
  }
  rep.passed =
      rep.worst_margin >= -kSimplexTol && rep.worst_mass_dev <= 1e-10;
  return rep;
}

LipschitzEstimate estimate_lipschitz(const StrategySpace& space,
                                     const FieldSet& fs,
                                     const ProbeOptions& opt) {
  const std::size_t m = space.size();
  const ProbeSampler sampler(space, opt, Stream::kPairs);
  const std::size_t probe_cycle = m + m * (m - 1) / 2 + 1;
  LipschitzEstimate est;
  FieldContext ctx1, ctx2;
  std::vector<double> v1(opt.d), v2(opt.d), s1(opt.d * opt.m_noise),
      s2(opt.d * opt.m_noise), f1(m), f2(m), fdiff(m);
  for (std::size_t t = 0; t < opt.samples; ++t) {
    const std::uint32_t u1 = static_cast<std::uint32_t>(2 * t);
    const std::uint32_t u2 = static_cast<std::uint32_t>(2 * t + 1);
    const Ensemble e1 = sampler.ensemble(u1), e2 = sampler.ensemble(u2);
    // Mix fixed probes among random ones so vertices are stressed too.
    const AgentState y1 = sampler.probe_state(u1, t % (probe_cycle + 3), nullptr);
    const AgentState y2 = sampler.probe_state(u2, probe_cycle, nullptr);
    const StateRef r1{{y1.x.data(), y1.x.size()}, y1.lambda.span()};
    const StateRef r2{{y2.x.data(), y2.x.size()}, y2.lambda.span()};
    const double den = state_norm(space, r1, r2) +
                       w_product_views(space, 1, e1.view(), e2.view());
    if (den < 1e-9) continue;
    ctx1.stats.clear();
    ctx2.stats.clear();
    if (fs.field().measure_dependent()) {
      fs.field().prepare(space, e1.view(), ctx1);
      fs.field().prepare(space, e2.view(), ctx2);
    }
    const FieldArgs a1{space, e1.view(), ctx1}, a2{space, e2.view(), ctx2};
    fs.field().drift(a1, r1, v1);
    fs.field().drift(a2, r2, v2);
    fs.field().diffusion(a1, r1, s1);
    fs.field().diffusion(a2, r2, s2);
    fs.field().flux(a1, r1, f1);
    fs.field().flux(a2, r2, f2);
    for (std::size_t u = 0; u < m; ++u) fdiff[u] = f1[u] - f2[u];
    est.v = std::max(est.v, l2_dist(v1, v2) / den);
    est.sigma = std::max(est.sigma, l2_dist(s1, s2) / den);
    est.flux = std::max(est.flux, bl_norm(space, fdiff) / den);
    ++est.pairs_used;
  }
  return est;
}

}  // namespace mfl
