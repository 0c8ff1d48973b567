#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfl/sde_engine.hpp"

namespace mfl {

struct PositionInit {
  enum class Kind { kPoint, kGaussian };
  Kind kind = Kind::kGaussian;
  std::vector<double> center;  // empty means the origin
  double scale = 1.0;          // spread, gaussian only
};

struct StrategyInit {
  enum class Kind { kFixed, kDirichlet, kVertex };
  Kind kind = Kind::kDirichlet;
  std::vector<double> weights;  // fixed only
  std::size_t vertex = 0;       // vertex only
};

struct InitSpec {
  PositionInit position;
  StrategyInit strategy;
};

// Samples the agents' initial states. Positions draw from the init-position
// stream, strategies from the init-strategy stream, both keyed by agent, so
// the first n agents coincide across different ensemble sizes.
Ensemble make_initial_ensemble(const StrategySpace& space, const InitSpec& spec,
                               std::size_t d, std::size_t n,
                               std::uint64_t seed);

struct MeanfieldParams {
  std::size_t m_law = 512;  // law sample paths
  double tol = 1e-3;
  std::size_t max_iter = 10;
};

struct ChaosParams {
  std::vector<std::size_t> n_grid{8, 16, 32, 64, 128};
  std::size_t reps = 64;
  std::size_t m_law = 0;  // 0: four times the largest N in the grid
};

struct ValidateParams {
  std::size_t samples = 10000;
  std::size_t pairs = 200;  // Lipschitz estimator sample pairs
};

struct ExperimentConfig {
  StrategySpace space;
  FieldSet fields;
  SimConfig sim;
  InitSpec init;
  MeanfieldParams meanfield;
  ChaosParams chaos;
  ValidateParams validate;
  // Verbatim subtrees kept for re-serialization.
  nlohmann::json field_spec;
  nlohmann::json lipschitz_spec;  // null when absent
};

// Parses and fully validates a config document (schema_version 1). Unknown
// keys anywhere are rejected.
ExperimentConfig load_config(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);

// Canonical re-serialization with all defaults materialized;
// load_config(dump_config(c)) reproduces c, and dump is idempotent.
nlohmann::json dump_config(const ExperimentConfig& c);

}  // namespace mfl
