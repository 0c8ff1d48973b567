#include "mfl/config.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mfl/json_util.hpp"
#include "mfl/rng.hpp"

namespace mfl {

using nlohmann::json;
using jsonu::check_keys;
using jsonu::get_count;
using jsonu::get_num;
using jsonu::get_string;

Ensemble make_initial_ensemble(const StrategySpace& space, const InitSpec& spec,
                               std::size_t d, std::size_t n,
                               std::uint64_t seed) {
  if (d == 0 || n == 0)
    throw ConfigError("init: d and N must be positive");
  if (!spec.position.center.empty() && spec.position.center.size() != d)
    throw ConfigError("init: position center size != d",
                      {{"size", std::to_string(spec.position.center.size())},
                       {"d", std::to_string(d)}});
  const std::size_t m = space.size();
  Ensemble e(d, m, n);
  const CounterRng pos_rng(seed, Stream::kInitPosition);
  const CounterRng str_rng(seed, Stream::kInitStrategy);
  const auto center = [&](std::size_t c) {
    return c < spec.position.center.size() ? spec.position.center[c] : 0.0;
  };
  std::vector<double> fixed;
  if (spec.strategy.kind == StrategyInit::Kind::kFixed) {
    fixed = MixedStrategy(spec.strategy.weights).weights();
    if (fixed.size() != m)
      throw ConfigError("init: strategy weights size != M");
  }
  if (spec.strategy.kind == StrategyInit::Kind::kVertex &&
      spec.strategy.vertex >= m)
    throw ConfigError("init: strategy vertex out of range");
  for (std::size_t i = 0; i < n; ++i) {
    auto x = e.x_row(i);
    if (spec.position.kind == PositionInit::Kind::kPoint) {
      for (std::size_t c = 0; c < d; ++c) x[c] = center(c);
    } else {
      pos_rng.normals(static_cast<std::uint32_t>(i), 0, x);
      for (std::size_t c = 0; c < d; ++c)
        x[c] = center(c) + spec.position.scale * x[c];
    }
    auto lam = e.lam_row(i);
    switch (spec.strategy.kind) {
      case StrategyInit::Kind::kFixed:
        std::copy(fixed.begin(), fixed.end(), lam.begin());
        break;
      case StrategyInit::Kind::kVertex:
        std::fill(lam.begin(), lam.end(), 0.0);
        lam[spec.strategy.vertex] = 1.0;
        break;
      case StrategyInit::Kind::kDirichlet:
        sample_simplex(str_rng, static_cast<std::uint32_t>(i), 0, lam);
        break;
    }
  }
  return e;
}

namespace {

InitSpec parse_init(const json& j) {
  InitSpec spec;
  check_keys(j, {"position", "strategy"}, "init");
  if (j.contains("position")) {
    const json& p = j.at("position");
    check_keys(p, {"kind", "center", "scale"}, "init.position");
    const std::string kind = get_string(p, "kind", "gaussian");
    if (kind == "point")
      spec.position.kind = PositionInit::Kind::kPoint;
    else if (kind == "gaussian")
      spec.position.kind = PositionInit::Kind::kGaussian;
    else
      throw ConfigError("init.position: kind must be point or gaussian");
    if (p.contains("center"))
      spec.position.center = p.at("center").get<std::vector<double>>();
    for (double c : spec.position.center)
      if (!std::isfinite(c))
        throw ConfigError("init.position: center must be finite");
    spec.position.scale = get_num(p, "scale", 1.0);
    if (!(spec.position.scale >= 0.0) || !std::isfinite(spec.position.scale))
      throw ConfigError("init.position: scale must be finite and >= 0");
  }
  if (j.contains("strategy")) {
    const json& s = j.at("strategy");
    check_keys(s, {"kind", "weights", "vertex"}, "init.strategy");
    const std::string kind = get_string(s, "kind", "dirichlet");
    if (kind == "fixed") {
      spec.strategy.kind = StrategyInit::Kind::kFixed;
      if (!s.contains("weights"))
        throw ConfigError("init.strategy: fixed kind needs weights");
      spec.strategy.weights = s.at("weights").get<std::vector<double>>();
    } else if (kind == "vertex") {
      spec.strategy.kind = StrategyInit::Kind::kVertex;
      spec.strategy.vertex = jsonu::get_index(s, "vertex", 0, 1u << 20);
    } else if (kind == "dirichlet") {
      spec.strategy.kind = StrategyInit::Kind::kDirichlet;
    } else {
      throw ConfigError(
          "init.strategy: kind must be fixed, dirichlet or vertex");
    }
  }
  return spec;
}

}  // namespace

ExperimentConfig load_config(const json& j) {
  check_keys(j,
             {"schema_version", "seed", "space", "field", "theta", "lipschitz",
              "sim", "init", "meanfield", "chaos", "validate"},
             "config");
  if (!j.contains("schema_version") ||
      !j.at("schema_version").is_number_integer() ||
      j.at("schema_version").get<std::int64_t>() != 1)
    throw ConfigError("config: schema_version must be 1");
  if (!j.contains("space")) throw ConfigError("config: missing space");

  StrategySpace space = StrategySpace::from_json(j.at("space"));

  SimConfig sim;
  if (j.contains("sim")) {
    const json& s = j.at("sim");
    check_keys(s, {"d", "m", "N", "T", "K"}, "sim");
    sim.d = get_count(s, "d", sim.d);
    sim.m_noise = get_count(s, "m", sim.m_noise);
    sim.n = get_count(s, "N", sim.n);
    sim.k = get_count(s, "K", sim.k);
    sim.t_final = get_num(s, "T", sim.t_final);
  }
  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (!s.is_number_integer() ||
        (!s.is_number_unsigned() && s.get<std::int64_t>() < 0))
      throw ConfigError("config: seed must be a nonnegative integer");
    sim.seed = s.get<std::uint64_t>();
  }

  FieldSet fields = field_set_from_json(space, j, sim.d, sim.m_noise);
  sim.validate(fields);

  InitSpec init;
  if (j.contains("init")) init = parse_init(j.at("init"));

  MeanfieldParams mf;
  if (j.contains("meanfield")) {
    const json& m = j.at("meanfield");
    check_keys(m, {"M", "tol", "max_iter"}, "meanfield");
    mf.m_law = get_count(m, "M", mf.m_law);
    mf.tol = get_num(m, "tol", mf.tol);
    mf.max_iter = get_count(m, "max_iter", mf.max_iter);
    if (std::isnan(mf.tol) || mf.tol < 0.0)
      throw ConfigError("meanfield: tol must be a nonnegative number");
  }

  ChaosParams ch;
  if (j.contains("chaos")) {
    const json& c = j.at("chaos");
    check_keys(c, {"n_grid", "reps", "M"}, "chaos");
    if (c.contains("n_grid")) {
      ch.n_grid = c.at("n_grid").get<std::vector<std::size_t>>();
      if (ch.n_grid.empty())
        throw ConfigError("chaos: n_grid must be nonempty");
      for (std::size_t i = 0; i < ch.n_grid.size(); ++i)
        if (ch.n_grid[i] == 0 ||
            (i > 0 && ch.n_grid[i] <= ch.n_grid[i - 1]))
          throw ConfigError("chaos: n_grid must be strictly increasing and "
                            "positive");
    }
    ch.reps = get_count(c, "reps", ch.reps);
    ch.m_law = jsonu::get_index(c, "M", ch.m_law, 1u << 24);
  }

  ValidateParams va;
  if (j.contains("validate")) {
    const json& v = j.at("validate");
    check_keys(v, {"samples", "pairs"}, "validate");
    va.samples = get_count(v, "samples", va.samples);
    va.pairs = get_count(v, "pairs", va.pairs);
  }

  return ExperimentConfig{std::move(space),
                          std::move(fields),
                          sim,
                          std::move(init),
                          mf,
                          std::move(ch),
                          va,
                          j.at("field"),
                          j.contains("lipschitz") ? j.at("lipschitz")
                                                  : json()};
}

nlohmann::json dump_config(const ExperimentConfig& c) {
  json init_pos{{"kind", c.init.position.kind == PositionInit::Kind::kPoint
                             ? "point"
                             : "gaussian"},
                {"center", c.init.position.center},
                {"scale", c.init.position.scale}};
  json init_str;
  switch (c.init.strategy.kind) {
    case StrategyInit::Kind::kFixed:
      init_str = json{{"kind", "fixed"}, {"weights", c.init.strategy.weights}};
      break;
    case StrategyInit::Kind::kVertex:
      init_str = json{{"kind", "vertex"}, {"vertex", c.init.strategy.vertex}};
      break;
    case StrategyInit::Kind::kDirichlet:
      init_str = json{{"kind", "dirichlet"}};
      break;
  }
  json out{{"schema_version", 1},
           {"seed", c.sim.seed},
           {"space", c.space.to_json()},
           {"field", c.field_spec},
           {"theta", c.fields.theta()},
           {"sim",
            {{"d", c.sim.d},
             {"m", c.sim.m_noise},
             {"N", c.sim.n},
             {"K", c.sim.k},
             {"T", c.sim.t_final}}},
           {"init", {{"position", init_pos}, {"strategy", init_str}}},
           {"meanfield",
            {{"M", c.meanfield.m_law},
             {"tol", c.meanfield.tol},
             {"max_iter", c.meanfield.max_iter}}},
           {"chaos",
            {{"n_grid", c.chaos.n_grid},
             {"reps", c.chaos.reps},
             {"M", c.chaos.m_law}}},
           {"validate",
            {{"samples", c.validate.samples}, {"pairs", c.validate.pairs}}}};
  if (!c.lipschitz_spec.is_null()) out["lipschitz"] = c.lipschitz_spec;
  return out;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("config: cannot open file", {{"path", path}});
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what(),
                      {{"path", path}});
  }
  return load_config(j);
}

}  // namespace mfl
