#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>

namespace semcom {

using Rng = std::mt19937_64;

// Deterministic sub-stream seed from a master seed and a path of keys
// (e.g. {snr_index, image_index, realization}). Uses splitmix64 mixing so
// streams for different keys are decorrelated and order-independent.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys);

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  return Rng(derive_seed(master, keys));
}

// Normal(0, std) truncated to [-3 std, 3 std] by rejection.
double truncated_normal(Rng& rng, double std);

double uniform(Rng& rng, double lo, double hi);

std::string rng_state(const Rng& rng);
void set_rng_state(Rng& rng, const std::string& state);

}  // namespace semcom
