// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include "dsce/types.hpp"

namespace dsce {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent stream seed from a master seed and a path of integer tags,
/// e.g. derive_seed(master, {kStreamNoise, frame}).
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix64(master);
  for (auto t : tags) s = mix64(s ^ mix64(t + 0x632be59bd9b4e019ULL));
  return s;
}

// Stream tags used across the harness so that estimators compared at the
// same (seed, frame) see identical channels, payloads and noise.
enum StreamTag : std::uint64_t {
  kStreamChannel = 1,
  kStreamBits = 2,
  kStreamNoise = 3,
  kStreamInit = 4,
  kStreamShuffle = 5,
  kStreamWiTraining = 6,
  kStreamTrainCorpus = 7,
  kStreamTestCorpus = 8,
  kStreamEnsemble = 9,
};

/// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
inline cplx complex_gaussian(Rng& rng, double variance) {
  std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

}  // namespace dsce
