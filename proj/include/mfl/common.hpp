#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mfl {

// Single source of truth for the simplex / zero-mass tolerance.
inline constexpr double kSimplexTol = 1e-12;

// Agreement tolerance between the production transport solver and the
// independent oracles.
inline constexpr double kOracleTol = 1e-9;

// Error payloads stay string-keyed so low-level headers do not pull in JSON.
using ErrorDetails = std::vector<std::pair<std::string, std::string>>;

class Error : public std::runtime_error {
 public:
  Error(std::string msg, ErrorDetails details)
      : std::runtime_error(std::move(msg)), details_(std::move(details)) {}
  const ErrorDetails& details() const { return details_; }
  // Process exit code the CLI maps this error family to.
  virtual int exit_code() const = 0;

 private:
  ErrorDetails details_;
};

// Bad configuration, bad input data, violated call contracts. Exit 2.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::string msg, ErrorDetails details = {})
      : Error(std::move(msg), std::move(details)) {}
  int exit_code() const override { return 2; }
};

// NaN/Inf state during time stepping. Exit 3.
class DivergenceError : public Error {
 public:
  DivergenceError(std::string msg, std::size_t agent, std::size_t step,
                  ErrorDetails details = {})
      : Error(std::move(msg), std::move(details)), agent_(agent), step_(step) {}
  std::size_t agent() const { return agent_; }
  std::size_t step() const { return step_; }
  int exit_code() const override { return 3; }

 private:
  std::size_t agent_;
  std::size_t step_;
};

// Failed validation: geometry violations, oracle mismatches. Exit 4.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::string msg, ErrorDetails details = {})
      : Error(std::move(msg), std::move(details)) {}
  int exit_code() const override { return 4; }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

inline double l2_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace mfl
