#include "mfl/common.hpp"

#include <cstdio>
#include <cstdlib>

namespace mfl {

// Shortest decimal that parses back to the same double. Stable across runs,
// keeps CSV/JSON output byte-reproducible without 17-digit noise everywhere.
std::string format_double(double v) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace mfl
