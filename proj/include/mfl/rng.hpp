#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace mfl {

// Philox4x32-10 counter-based generator. A draw is a pure function of
// (key, counter), so any (seed, agent, step) cell can be regenerated in any
// order on any thread with identical bits.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key);

// Disjoint purposes get disjoint counter lanes.
enum class Stream : std::uint32_t {
  kBrownian = 0,
  kInitPosition = 1,
  kInitStrategy = 2,
  kProbe = 3,        // geometry validator draws
  kPairs = 4,        // lipschitz estimator draws
  kReference = 5,    // held-out reference ensembles
  kDerive = 6,       // seed derivation
};

// Stateless source of i.i.d. N(0,1) variates and U(0,1) variates indexed by
// (seed, stream, agent, step). Increment vectors for one (agent, step) cell
// never overlap another cell's.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, Stream stream = Stream::kBrownian)
      : seed_(seed), stream_(static_cast<std::uint32_t>(stream)) {}

  std::uint64_t seed() const { return seed_; }

  // Fills out with independent N(0,1) draws for cell (agent, step).
  void normals(std::uint32_t agent, std::uint32_t step,
               std::span<double> out) const;

  // Fills out with independent U(0,1) draws (open interval) for the cell.
  void uniforms(std::uint32_t agent, std::uint32_t step,
                std::span<double> out) const;

 private:
  std::uint64_t seed_;
  std::uint32_t stream_;
};

// Brownian increments: normals scaled by sqrt(dt).
class BrownianSource {
 public:
  BrownianSource(std::uint64_t seed, double dt)
      : rng_(seed, Stream::kBrownian), dt_(dt) {}

  double dt() const { return dt_; }
  std::uint64_t seed() const { return rng_.seed(); }

  void increments(std::uint32_t agent, std::uint32_t step,
                  std::span<double> out) const;

 private:
  CounterRng rng_;
  double dt_;
};

// Independent child seed for a labelled sub-experiment (chaos repetitions,
// reference laws, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

// Uniform draw from the probability simplex via normalized exponentials.
// Consumes uniforms from the given cell of `rng`.
void sample_simplex(const CounterRng& rng, std::uint32_t agent,
                    std::uint32_t step, std::span<double> out);

}  // namespace mfl
