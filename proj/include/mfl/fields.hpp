#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "mfl/agent_state.hpp"

namespace mfl {

// Per-measure summary statistics, computed once per step in a fixed
// summation order; layout is private to each field implementation.
struct FieldContext {
  std::vector<double> stats;
};

struct FieldArgs {
  const StrategySpace& space;
  EnsembleView ens;
  const FieldContext& ctx;
};

// Interaction field triple (v, sigma, T). Implementations must be pure
// functions of (ensemble, state): evaluation order across agents never
// changes a result. Flux outputs must have zero total mass.
class Field {
 public:
  virtual ~Field() = default;
  virtual std::string name() const = 0;

  virtual void prepare(const StrategySpace&, EnsembleView,
                       FieldContext&) const {}

  virtual void drift(const FieldArgs& a, StateRef y,
                     std::span<double> out_d) const = 0;
  // Row-major d x m_noise matrix.
  virtual void diffusion(const FieldArgs& a, StateRef y,
                         std::span<double> out_dm) const = 0;
  virtual void flux(const FieldArgs& a, StateRef y,
                    std::span<double> out_m) const = 0;

  // Constraint checks against the space / dimensions / theta; throws
  // ConfigError on violations. Called at FieldSet construction.
  virtual void validate_params(const StrategySpace&, std::size_t /*d*/,
                               std::size_t /*m_noise*/,
                               double /*theta*/) const {}

  // True if any output reads the ensemble argument.
  virtual bool measure_dependent() const { return true; }
};

struct LipschitzDeclaration {
  std::optional<double> v, sigma, flux;
};

// A field together with the strategy relaxation time theta and optional
// author-declared Lipschitz constants.
class FieldSet {
 public:
  FieldSet(std::shared_ptr<const Field> field, double theta,
           const StrategySpace& space, std::size_t d, std::size_t m_noise,
           LipschitzDeclaration declared = {});

  const Field& field() const { return *field_; }
  double theta() const { return theta_; }
  const LipschitzDeclaration& declared_lipschitz() const { return declared_; }

 private:
  std::shared_ptr<const Field> field_;
  double theta_;
  LipschitzDeclaration declared_;
};

// Builtin variants: leader_follower, attraction_repulsion,
// strategy_mean_reversion, cbo_style, plus the documented negative control
// overshoot_reversion (violates the theta-step geometry on purpose).
std::shared_ptr<const Field> make_builtin_field(const StrategySpace& space,
                                                const std::string& variant,
                                                const nlohmann::json& params,
                                                double theta);

// Parses {"field": {"variant": ..., "params": {...}}, "theta": ...}.
FieldSet field_set_from_json(const StrategySpace& space,
                             const nlohmann::json& j, std::size_t d,
                             std::size_t m_noise);

// One theta-step of the strategy component: lambda + theta * T(Sigma, y),
// clamped/renormalized inside tolerance, ValidationError beyond.
MixedStrategy apply_G(const StrategySpace& space, const FieldSet& fs,
                      EnsembleView sigma, StateRef y);

struct ProbeOptions {
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  std::size_t d = 1;
  std::size_t m_noise = 1;
  std::size_t ensemble = 8;  // size of sampled interaction ensembles
  double scale = 1.0;        // position spread
};

struct GeometryReport {
  bool passed = true;
  double worst_margin = 0.0;    // min over samples of min_i (lambda+theta*T)_i
  double worst_mass_dev = 0.0;  // max |sum(g) - 1|
  std::size_t samples = 0;
  // Counterexample, filled when !passed.
  std::vector<double> x, lambda, g;
  std::size_t entry = 0;
  std::string probe_kind;
};

// Deterministic probe sweep: strategy vertices, edge midpoints, barycenter,
// then random simplex draws, against randomly sampled ensembles.
GeometryReport validate_geometry(const StrategySpace& space,
                                 const FieldSet& fs, const ProbeOptions& opt);

struct LipschitzEstimate {
  double v = 0.0, sigma = 0.0, flux = 0.0;
  std::size_t pairs_used = 0;
};

// Empirical Lipschitz constants: max difference quotient over sampled pairs
// of (ensemble, state); the denominator is state_norm + W1 between the
// ensembles. Monotone nondecreasing in opt.samples for a fixed seed.
LipschitzEstimate estimate_lipschitz(const StrategySpace& space,
                                     const FieldSet& fs,
                                     const ProbeOptions& opt);

// Test helper: wraps plain callables as a Field.
class CallbackField : public Field {
 public:
  using DriftFn = std::function<void(const FieldArgs&, StateRef,
                                     std::span<double>)>;
  CallbackField(std::string name, DriftFn drift, DriftFn diffusion,
                DriftFn flux, bool measure_dep = true)
      : name_(std::move(name)), drift_(std::move(drift)),
        diffusion_(std::move(diffusion)), flux_(std::move(flux)),
        measure_dep_(measure_dep) {}

  std::string name() const override { return name_; }
  void drift(const FieldArgs& a, StateRef y,
             std::span<double> o) const override {
    drift_(a, y, o);
  }
  void diffusion(const FieldArgs& a, StateRef y,
                 std::span<double> o) const override {
    diffusion_(a, y, o);
  }
  void flux(const FieldArgs& a, StateRef y,
            std::span<double> o) const override {
    flux_(a, y, o);
  }
  bool measure_dependent() const override { return measure_dep_; }

 private:
  std::string name_;
  DriftFn drift_, diffusion_, flux_;
  bool measure_dep_;
};

}  // namespace mfl
