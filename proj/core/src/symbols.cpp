#include "semcom/symbols.hpp"

#include "semcom/error.hpp"

#include <cmath>

namespace semcom {

TxSymbols to_symbols(const Tensor& feature, int image) {
  const Shape s = feature.shape;
  if (image < 0 || image >= s.n) throw ContractError("to_symbols: image index out of range");
  const Shape single{1, s.h, s.w, s.c};
  const auto reals = static_cast<std::size_t>(single.numel());
  const std::size_t k = (reals + 1) / 2;

  TxSymbols tx;
  tx.shape = single;
  tx.padded = reals % 2 != 0;
  tx.symbols.resize(k);
  const double* src = feature.data.data() + static_cast<std::size_t>(image) * reals;
  double power = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double re = src[2 * i];
    const double im = 2 * i + 1 < reals ? src[2 * i + 1] : 0.0;
    tx.symbols[i] = Complex(re, im);
    power += re * re + im * im;
  }
  power /= static_cast<double>(k);
  tx.scale = power > 0.0 ? std::sqrt(power) : 1.0;
  for (auto& v : tx.symbols) v /= tx.scale;
  return tx;
}

Tensor from_symbols(std::span<const Complex> symbols, Shape shape, double scale) {
  const auto reals = static_cast<std::size_t>(shape.numel());
  if (symbols.size() != (reals + 1) / 2) {
    throw DataError("from_symbols: " + std::to_string(symbols.size()) + " symbols for shape " + to_string(shape));
  }
  Tensor t(shape);
  double* dst = t.data.data();
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    dst[2 * i] = symbols[i].real() * scale;
    if (2 * i + 1 < reals) dst[2 * i + 1] = symbols[i].imag() * scale;
  }
  return t;
}

ag::Var symbol_channel(const ag::Var& z, const std::vector<SymbolAffine>& per_image) {
  const Shape s = z->shape;
  if (static_cast<int>(per_image.size()) != s.n) throw ContractError("symbol_channel: one map per image required");
  const Tensor zt(s, z->value);
  const Shape single{1, s.h, s.w, s.c};
  const auto reals = static_cast<std::size_t>(single.numel());

  Mat out(s.rows(), s.c);
  std::vector<double> scales(s.n);
  for (int b = 0; b < s.n; ++b) {
    TxSymbols tx = to_symbols(zt, b);
    const auto& m = per_image[b];
    if (m.gain.size() != tx.symbols.size() || m.offset.size() != tx.symbols.size()) {
      throw ContractError("symbol_channel: affine map length mismatch");
    }
    for (std::size_t i = 0; i < tx.symbols.size(); ++i) tx.symbols[i] = m.gain[i] * tx.symbols[i] + m.offset[i];
    const Tensor rx = from_symbols(tx.symbols, single, tx.scale);
    std::copy(rx.data.data(), rx.data.data() + reals, out.data() + static_cast<std::size_t>(b) * reals);
    scales[b] = tx.scale;
  }

  // out = gain * z + scale(z) * offset, so
  // dL/dz = conj(gain) * g + (sum_n Re(conj(offset_n) g_n)) * z / (k * scale).
  auto maps = std::make_shared<std::vector<SymbolAffine>>(per_image);
  return ag::make_result(s, std::move(out), {z}, [maps, scales, reals](ag::Node& self) {
    const ag::Var& zv = self.parents[0];
    Mat& gz = zv->grad_buffer();
    const std::size_t k = (reals + 1) / 2;
    for (int b = 0; b < zv->shape.n; ++b) {
      const double* g = self.grad.data() + static_cast<std::size_t>(b) * reals;
      const double* zb = zv->value.data() + static_cast<std::size_t>(b) * reals;
      double* gb = gz.data() + static_cast<std::size_t>(b) * reals;
      const auto& m = (*maps)[b];
      double dot = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        const Complex gi(g[2 * i], 2 * i + 1 < reals ? g[2 * i + 1] : 0.0);
        const Complex back = std::conj(m.gain[i]) * gi;
        gb[2 * i] += back.real();
        if (2 * i + 1 < reals) gb[2 * i + 1] += back.imag();
        dot += (std::conj(m.offset[i]) * gi).real();
      }
      double sq = 0.0;
      for (std::size_t i = 0; i < reals; ++i) sq += zb[i] * zb[i];
      if (sq == 0.0) continue;  // scale is pinned to 1 for a zero block
      const double coef = dot / (static_cast<double>(k) * scales[b]);
      for (std::size_t i = 0; i < reals; ++i) gb[i] += coef * zb[i];
    }
  });
}

}  // namespace semcom
