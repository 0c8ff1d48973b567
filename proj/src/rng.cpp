#include "mfl/rng.hpp"

#include <cmath>
#include <vector>

namespace mfl {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWey0 = 0x9E3779B9u;
constexpr std::uint32_t kWey1 = 0xBB67AE85u;

inline std::uint64_t join64(std::uint32_t lo, std::uint32_t hi) {
  return static_cast<std::uint64_t>(lo) |
         (static_cast<std::uint64_t>(hi) << 32);
}

// Strictly inside (0,1): safe for log() in Box-Muller.
inline double u64_to_unit(std::uint64_t x) {
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const std::array<std::uint32_t, 4> next = {
        static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
        static_cast<std::uint32_t>(p1),
        static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
        static_cast<std::uint32_t>(p0),
    };
    ctr = next;
    key[0] += kWey0;
    key[1] += kWey1;
  }
  return ctr;
}

namespace {

// One block = 4x u32 = 2 uniform doubles.
inline void block_uniforms(std::uint64_t seed, std::uint32_t stream,
                           std::uint32_t agent, std::uint32_t step,
                           std::uint32_t block, double& u0, double& u1) {
  const std::array<std::uint32_t, 2> key = {
      static_cast<std::uint32_t>(seed),
      static_cast<std::uint32_t>(seed >> 32)};
  const std::array<std::uint32_t, 4> ctr = {agent, step, block, stream};
  const auto out = philox4x32(ctr, key);
  u0 = u64_to_unit(join64(out[0], out[1]));
  u1 = u64_to_unit(join64(out[2], out[3]));
}

}  // namespace

void CounterRng::normals(std::uint32_t agent, std::uint32_t step,
                         std::span<double> out) const {
  const std::size_t m = out.size();
  for (std::size_t b = 0; 2 * b < m; ++b) {
    double u0, u1;
    block_uniforms(seed_, stream_, agent, step, static_cast<std::uint32_t>(b),
                   u0, u1);
    const double r = std::sqrt(-2.0 * std::log(u0));
    out[2 * b] = r * std::cos(kTwoPi * u1);
    if (2 * b + 1 < m) out[2 * b + 1] = r * std::sin(kTwoPi * u1);
  }
}

void CounterRng::uniforms(std::uint32_t agent, std::uint32_t step,
                          std::span<double> out) const {
  const std::size_t m = out.size();
  for (std::size_t b = 0; 2 * b < m; ++b) {
    double u0, u1;
    block_uniforms(seed_, stream_, agent, step, static_cast<std::uint32_t>(b),
                   u0, u1);
    out[2 * b] = u0;
    if (2 * b + 1 < m) out[2 * b + 1] = u1;
  }
}

void BrownianSource::increments(std::uint32_t agent, std::uint32_t step,
                                std::span<double> out) const {
  rng_.normals(agent, step, out);
  const double s = std::sqrt(dt_);
  for (double& v : out) v *= s;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  const std::array<std::uint32_t, 2> key = {
      static_cast<std::uint32_t>(seed),
      static_cast<std::uint32_t>(seed >> 32)};
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32),
      0x5EEDED5Eu, static_cast<std::uint32_t>(Stream::kDerive)};
  const auto out = philox4x32(ctr, key);
  return join64(out[0], out[1]);
}

void sample_simplex(const CounterRng& rng, std::uint32_t agent,
                    std::uint32_t step, std::span<double> out) {
  rng.uniforms(agent, step, out);
  double total = 0.0;
  for (double& v : out) {
    v = -std::log(v);
    total += v;
  }
  for (double& v : out) v /= total;
}

}  // namespace mfl
