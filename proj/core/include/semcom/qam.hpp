#pragma once

#include "semcom/rng.hpp"
#include "semcom/symbols.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace semcom {

// Gray-mapped square QAM with unit average energy. Each symbol carries
// log2(M) bits: the first half selects the in-phase level, the second half the
// quadrature level. Along one axis the Gray label g maps to the binary index
// i = gray^-1(g) and the level (L - 1) - 2 i, so 4-QAM bits 00 -> (1 + j)/sqrt(2).
class Qam {
 public:
  explicit Qam(int order);

  int order() const { return order_; }
  int bits_per_symbol() const { return bits_; }
  const std::vector<Complex>& constellation() const { return points_; }

  std::vector<Complex> modulate(std::span<const std::uint8_t> bits) const;
  // Max-log LLRs (positive favours 0) given per-symbol noise variance.
  // Infinite variance marks an erased symbol and yields zero LLRs.
  std::vector<double> demodulate(std::span<const Complex> symbols, std::span<const double> noise_var) const;
  std::vector<double> demodulate(std::span<const Complex> symbols, double noise_var) const;
  std::vector<std::uint8_t> hard_decide(std::span<const Complex> symbols) const;

 private:
  int order_;
  int bits_;
  int axis_bits_;
  int levels_;
  double scale_;
  std::vector<Complex> points_;  // indexed by the bit label
  std::vector<double> axis_levels_;  // indexed by per-axis Gray label, already scaled
};

// Seeded bit permutation.
std::vector<std::size_t> make_interleaver(std::size_t n, std::uint64_t seed);
template <typename T>
std::vector<T> interleave(std::span<const T> in, const std::vector<std::size_t>& perm) {
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[perm[i]];
  return out;
}
template <typename T>
std::vector<T> deinterleave(std::span<const T> in, const std::vector<std::size_t>& perm) {
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[perm[i]] = in[i];
  return out;
}

}  // namespace semcom
