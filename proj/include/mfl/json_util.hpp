#pragma once

#include <algorithm>
#include <initializer_list>
#include <string>

#include <nlohmann/json.hpp>

#include "mfl/common.hpp"

namespace mfl::jsonu {

// Strict-schema helpers: every object is checked against its allowed keys so
// typos fail loudly instead of silently picking defaults.

inline void check_keys(const nlohmann::json& j,
                       std::initializer_list<const char*> allowed,
                       const char* where) {
  if (!j.is_object())
    throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }))
      throw ConfigError(std::string(where) + ": unknown key", {{"key", key}});
  }
}

inline double get_num(const nlohmann::json& j, const char* key, double dflt) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_number())
    throw ConfigError(std::string("expected a number: ") + key);
  return j.at(key).get<double>();
}

// True for any integer representation of a value >= 0 (in-memory documents
// may store small literals as signed).
inline bool is_nonnegative_integer(const nlohmann::json& v) {
  return v.is_number_unsigned() ||
         (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// Nonnegative integer below `limit` (exclusive).
inline std::size_t get_index(const nlohmann::json& j, const char* key,
                             std::size_t dflt, std::size_t limit) {
  if (!j.contains(key)) return dflt;
  if (!is_nonnegative_integer(j.at(key)))
    throw ConfigError(std::string("expected a nonnegative integer: ") + key);
  const std::size_t v = j.at(key).get<std::size_t>();
  if (v >= limit)
    throw ConfigError(std::string("value out of range: ") + key,
                      {{"value", std::to_string(v)}});
  return v;
}

// Positive integer count.
inline std::size_t get_count(const nlohmann::json& j, const char* key,
                             std::size_t dflt) {
  if (!j.contains(key)) return dflt;
  if (!is_nonnegative_integer(j.at(key)) || j.at(key).get<std::size_t>() == 0)
    throw ConfigError(std::string("expected a positive integer: ") + key);
  return j.at(key).get<std::size_t>();
}

inline std::string get_string(const nlohmann::json& j, const char* key,
                              const std::string& dflt) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_string())
    throw ConfigError(std::string("expected a string: ") + key);
  return j.at(key).get<std::string>();
}

}  // namespace mfl::jsonu
