// Synchronous Euler-Maruyama engine: exact discrete-time OU moments, simplex
// confinement, worker-count independence, and divergence reporting.
#include <cmath>
#include <cstdint>
#include <memory>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "mfl/agent_state.hpp"
#include "mfl/common.hpp"
#include "mfl/fields.hpp"
#include "mfl/rng.hpp"
#include "mfl/sde_engine.hpp"
#include "mfl/strategy_space.hpp"
#include "mfl/workers.hpp"

using namespace mfl;
using nlohmann::json;

namespace {

Ensemble point_init(std::size_t d, std::size_t m, std::size_t n, double x0,
                    const std::vector<double>& lam0) {
  Ensemble e(d, m, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : e.x_row(i)) v = x0;
    std::copy(lam0.begin(), lam0.end(), e.lam_row(i).begin());
  }
  return e;
}

Ensemble dirichlet_init(std::uint64_t seed, std::size_t d, std::size_t m,
                        std::size_t n) {
  const CounterRng pos(seed, Stream::kInitPosition);
  const CounterRng str(seed, Stream::kInitStrategy);
  Ensemble e(d, m, n);
  for (std::size_t i = 0; i < n; ++i) {
    pos.normals(static_cast<std::uint32_t>(i), 0, e.x_row(i));
    sample_simplex(str, static_cast<std::uint32_t>(i), 0, e.lam_row(i));
  }
  return e;
}

}  // namespace

TEST_CASE("engine reproduces the exact discrete OU law at two resolutions") {
  // dX = -X dt + sigma dW from the point x0: the Euler chain satisfies
  //   E X_K        = (1 - dt)^K x0                          (exactly)
  //   Var X_K      = sigma^2 dt (1 - (1-dt)^{2K}) / (1 - (1-dt)^2)
  // so only Monte Carlo error separates the ensemble from these values.
  const StrategySpace space = StrategySpace::uniform(2, 1.0);
  const double theta = 0.1, sigma = 1.0, x0 = 1.0, tau = 2 * theta;
  const std::vector<double> target{0.3, 0.7};
  const json params{{"tau", tau},
                    {"kappa", 1.0},
                    {"noise", sigma},
                    {"target", target},
                    {"spatial", "origin"}};
  const FieldSet fs(
      make_builtin_field(space, "strategy_mean_reversion", params, theta),
      theta, space, 1, 1);

  const std::vector<double> lam0{0.9, 0.1};
  for (std::size_t k_steps : {250, 500}) {
    SimConfig cfg;
    cfg.d = 1;
    cfg.m_noise = 1;
    cfg.n = 4000;
    cfg.k = k_steps;
    cfg.t_final = 1.0;
    cfg.seed = 99;
    const Ensemble init = point_init(1, 2, cfg.n, x0, lam0);
    const TrajectoryBundle bundle = solve_n_particle(space, fs, init, cfg);

    const double dt = cfg.dt();
    const double a = 1.0 - dt;
    const double mean_exact = std::pow(a, static_cast<double>(k_steps)) * x0;
    const double var_exact = sigma * sigma * dt *
                             (1.0 - std::pow(a, 2.0 * k_steps)) /
                             (1.0 - a * a);

    const EnsembleView last = bundle.slice(k_steps);
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < cfg.n; ++i) mean += last.xs[i];
    mean /= static_cast<double>(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
      const double c = last.xs[i] - mean;
      var += c * c;
    }
    var /= static_cast<double>(cfg.n - 1);

    // 4-sigma Monte Carlo bands around the exact discrete values.
    const double mean_band = 4.0 * std::sqrt(var_exact / cfg.n);
    const double var_band = 4.0 * var_exact * std::sqrt(2.0 / cfg.n);
    CHECK(std::abs(mean - mean_exact) <= mean_band);
    CHECK(std::abs(var - var_exact) <= var_band);

    // The strategy recurrence is deterministic and measure-independent:
    // lam_K - target = (1 - dt/tau)^K (lam_0 - target), identical per agent.
    const double b = std::pow(1.0 - dt / tau, static_cast<double>(k_steps));
    for (std::size_t i = 0; i < 3; ++i) {
      const StateRef s = bundle.state(k_steps, i);
      CHECK(s.lam[0] ==
            doctest::Approx(target[0] + b * (lam0[0] - target[0]))
                .epsilon(1e-12));
      CHECK(s.lam[1] ==
            doctest::Approx(target[1] + b * (lam0[1] - target[1]))
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("every slice of an interacting run stays on the simplex") {
  const StrategySpace space = StrategySpace::uniform(2, 1.0);
  const double theta = 0.2;
  const FieldSet fs(
      make_builtin_field(space, "leader_follower", json::object(), theta),
      theta, space, 2, 2);
  SimConfig cfg;
  cfg.d = 2;
  cfg.m_noise = 2;
  cfg.n = 64;
  cfg.k = 500;
  cfg.t_final = cfg.k * theta / 2.0;  // dt = theta / 2
  cfg.seed = 5;
  const Ensemble init = dirichlet_init(cfg.seed, 2, 2, cfg.n);
  const TrajectoryBundle bundle = solve_n_particle(space, fs, init, cfg);
  for (std::size_t k = 0; k <= cfg.k; ++k) {
    const Ensemble m = time_marginal(bundle, k);
    CHECK(m.check_invariants() == 0);
    const EnsembleView v = bundle.slice(k);
    for (std::size_t i = 0; i < cfg.n * cfg.d; ++i)
      REQUIRE(std::isfinite(v.xs[i]));
  }
}

TEST_CASE("trajectories are bit-identical across worker counts") {
  const StrategySpace space = StrategySpace::uniform(2, 1.0);
  const double theta = 0.2;
  const FieldSet fs(
      make_builtin_field(space, "leader_follower", json::object(), theta),
      theta, space, 2, 2);
  SimConfig cfg;
  cfg.d = 2;
  cfg.m_noise = 2;
  cfg.n = 16;
  cfg.k = 50;
  cfg.t_final = 1.0;
  cfg.seed = 31;
  const Ensemble init = dirichlet_init(cfg.seed, 2, 2, cfg.n);

  std::vector<std::string> outputs;
  Workers w1(1), w3(3), w5(5);
  for (Workers* w : {static_cast<Workers*>(nullptr), &w1, &w3, &w5}) {
    const TrajectoryBundle b = solve_n_particle(space, fs, init, cfg, w);
    std::ostringstream os;
    write_csv(b, os);
    outputs.push_back(os.str());
  }
  for (std::size_t i = 1; i < outputs.size(); ++i)
    CHECK(outputs[i] == outputs[0]);
}

TEST_CASE("euler_step matches the first solver slice") {
  const StrategySpace space = StrategySpace::uniform(2, 1.0);
  const double theta = 0.25;
  const FieldSet fs(
      make_builtin_field(space, "attraction_repulsion", json::object(), theta),
      theta, space, 2, 2);
  SimConfig cfg;
  cfg.d = 2;
  cfg.m_noise = 2;
  cfg.n = 12;
  cfg.k = 8;
  cfg.t_final = 1.0;
  cfg.seed = 77;
  const Ensemble init = dirichlet_init(cfg.seed, 2, 2, cfg.n);
  const TrajectoryBundle bundle = solve_n_particle(space, fs, init, cfg);

  const BrownianSource noise(cfg.seed, cfg.dt());
  const Ensemble one = euler_step(space, fs, init, noise, 0, cfg.m_noise);
  const EnsembleView want = bundle.slice(1);
  const EnsembleView got = one.view();
  for (std::size_t i = 0; i < cfg.n * cfg.d; ++i)
    CHECK(got.xs[i] == want.xs[i]);
  for (std::size_t i = 0; i < cfg.n * 2; ++i)
    CHECK(got.lams[i] == want.lams[i]);
}

TEST_CASE("sup_moment: zero paths, pinned single path, p validation") {
  const StrategySpace space = StrategySpace::uniform(2, 1.0);
  // A bundle frozen at the origin/uniform state has |Y| = BL(uniform) = 1
  // at every time, so E sup |Y|^p = 1.
  TrajectoryBundle flat(1, 2, 3, 1.0, 4);
  const Ensemble base = point_init(1, 2, 3, 0.0, {0.5, 0.5});
  for (std::size_t k = 0; k <= 4; ++k) flat.set_slice(k, base);
  CHECK(sup_moment(space, flat, 2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sup_moment(space, flat, 4) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(sup_moment(space, flat, 3), ConfigError);

  // One path, deterministic positions: sup over the grid is taken before
  // the power and the expectation.
  TrajectoryBundle one(1, 2, 1, 1.0, 2);
  Ensemble e0 = point_init(1, 2, 1, 0.5, {1.0, 0.0});
  Ensemble e1 = point_init(1, 2, 1, -2.0, {1.0, 0.0});
  Ensemble e2 = point_init(1, 2, 1, 1.0, {1.0, 0.0});
  one.set_slice(0, e0);
  one.set_slice(1, e1);
  one.set_slice(2, e2);
  // |Y_k| = |x_k| + 1: sup = 3, squared 9, fourth power 81.
  CHECK(sup_moment(space, one, 2) == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(sup_moment(space, one, 4) == doctest::Approx(81.0).epsilon(1e-12));

  // Worker-split reduction agrees with the serial one.
  const StrategySpace sp2 = StrategySpace::uniform(2, 1.0);
  const double theta = 0.2;
  const FieldSet fs(
      make_builtin_field(sp2, "leader_follower", json::object(), theta), theta,
      sp2, 2, 2);
  SimConfig cfg;
  cfg.d = 2;
  cfg.m_noise = 2;
  cfg.n = 40;
  cfg.k = 30;
  cfg.t_final = 1.0;
  cfg.seed = 13;
  const TrajectoryBundle b =
      solve_n_particle(sp2, fs, dirichlet_init(cfg.seed, 2, 2, cfg.n), cfg);
  Workers w(4);
  CHECK(sup_moment(sp2, b, 2) ==
        doctest::Approx(sup_moment(sp2, b, 2, &w)).epsilon(1e-12));
}

TEST_CASE("config validation and divergence reporting") {
  const StrategySpace space = StrategySpace::uniform(2, 1.0);
  const double theta = 0.1;
  const FieldSet fs(
      make_builtin_field(space, "strategy_mean_reversion", json::object(),
                         theta),
      theta, space, 1, 1);

  SimConfig cfg;
  cfg.t_final = 1.0;
  cfg.k = 5;  // dt = 0.2 > theta
  CHECK_THROWS_AS(cfg.validate(fs), ConfigError);
  cfg.k = 100;
  CHECK_NOTHROW(cfg.validate(fs));
  cfg.t_final = -1.0;
  CHECK_THROWS_AS(cfg.validate(fs), ConfigError);
  cfg.t_final = 1.0;
  cfg.n = 0;
  CHECK_THROWS_AS(cfg.validate(fs), ConfigError);

  // An exploding drift overflows to non-finite positions; the engine names
  // the first offending agent and step and keeps the last finite slice.
  const auto blow = std::make_shared<CallbackField>(
      "blow",
      [](const FieldArgs&, StateRef y, std::span<double> o) {
        for (std::size_t c = 0; c < o.size(); ++c)
          o[c] = 1e155 * (y.x[c] + 1.0);
      },
      [](const FieldArgs&, StateRef, std::span<double> o) {
        std::fill(o.begin(), o.end(), 0.0);
      },
      [](const FieldArgs&, StateRef, std::span<double> o) {
        std::fill(o.begin(), o.end(), 0.0);
      },
      false);
  const FieldSet bad(blow, theta, space, 1, 1);
  SimConfig bcfg;
  bcfg.d = 1;
  bcfg.m_noise = 1;
  bcfg.n = 3;
  bcfg.k = 100;
  bcfg.t_final = 1.0;
  bcfg.seed = 1;
  const Ensemble init = point_init(1, 2, 3, 1.0, {0.5, 0.5});
  try {
    solve_n_particle(space, bad, init, bcfg);
    CHECK(false);
  } catch (const EngineDivergence& e) {
    CHECK(e.exit_code() == 3);
    CHECK(e.step() >= 1);
    const Ensemble& last = e.last_finite();
    CHECK(last.size() == 3);
    CHECK(last.check_invariants() == 0);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(std::isfinite(last.state(i).x[0]));
  }
}
