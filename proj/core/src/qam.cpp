#include "semcom/qam.hpp"

#include "semcom/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace semcom {

namespace {

int gray_to_binary(int g) {
  int b = 0;
  for (; g; g >>= 1) b ^= g;
  return b;
}

}  // namespace

Qam::Qam(int order) : order_(order) {
  if (order != 4 && order != 16 && order != 64 && order != 256) {
    throw ConfigError("QAM order must be 4, 16, 64 or 256 (got " + std::to_string(order) + ")");
  }
  bits_ = static_cast<int>(std::lround(std::log2(order)));
  axis_bits_ = bits_ / 2;
  levels_ = 1 << axis_bits_;
  scale_ = 1.0 / std::sqrt(2.0 * (order - 1) / 3.0);
  axis_levels_.resize(levels_);
  for (int g = 0; g < levels_; ++g) axis_levels_[g] = ((levels_ - 1) - 2 * gray_to_binary(g)) * scale_;
  points_.resize(order);
  for (int label = 0; label < order; ++label) {
    const int gi = label >> axis_bits_;
    const int gq = label & (levels_ - 1);
    points_[label] = Complex(axis_levels_[gi], axis_levels_[gq]);
  }
}

std::vector<Complex> Qam::modulate(std::span<const std::uint8_t> bits) const {
  if (bits.size() % bits_ != 0) throw ContractError("qam_modulate: bit count not divisible by log2(M)");
  std::vector<Complex> out(bits.size() / bits_);
  for (std::size_t s = 0; s < out.size(); ++s) {
    int label = 0;
    for (int b = 0; b < bits_; ++b) label = (label << 1) | (bits[s * bits_ + b] & 1);
    out[s] = points_[label];
  }
  return out;
}

std::vector<double> Qam::demodulate(std::span<const Complex> symbols, std::span<const double> noise_var) const {
  if (noise_var.size() != symbols.size()) throw ContractError("qam_demodulate: noise variance length mismatch");
  std::vector<double> llr(symbols.size() * bits_, 0.0);
  for (std::size_t s = 0; s < symbols.size(); ++s) {
    const double var = noise_var[s];
    if (!std::isfinite(var)) continue;
    const double nv = std::max(var, 1e-300);
    for (int axis = 0; axis < 2; ++axis) {
      const double y = axis == 0 ? symbols[s].real() : symbols[s].imag();
      for (int b = 0; b < axis_bits_; ++b) {
        double d0 = std::numeric_limits<double>::infinity();
        double d1 = d0;
        for (int g = 0; g < levels_; ++g) {
          const double d = (y - axis_levels_[g]) * (y - axis_levels_[g]);
          if ((g >> (axis_bits_ - 1 - b)) & 1) {
            d1 = std::min(d1, d);
          } else {
            d0 = std::min(d0, d);
          }
        }
        llr[s * bits_ + axis * axis_bits_ + b] = (d1 - d0) / nv;
      }
    }
  }
  return llr;
}

std::vector<double> Qam::demodulate(std::span<const Complex> symbols, double noise_var) const {
  const std::vector<double> nv(symbols.size(), noise_var);
  return demodulate(symbols, nv);
}

std::vector<std::uint8_t> Qam::hard_decide(std::span<const Complex> symbols) const {
  const auto llr = demodulate(symbols, 1.0);
  std::vector<std::uint8_t> bits(llr.size());
  for (std::size_t i = 0; i < llr.size(); ++i) bits[i] = llr[i] < 0.0 ? 1 : 0;
  return bits;
}

std::vector<std::size_t> make_interleaver(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

}  // namespace semcom
