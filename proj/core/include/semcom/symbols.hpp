#pragma once

#include "semcom/autograd.hpp"

#include <complex>
#include <span>
#include <vector>

namespace semcom {

using Complex = std::complex<double>;

// Channel-input block for one image: the compressed feature flattened in
// row-major (y, x, channel) order, consecutive reals paired as (re, im), and
// scaled to unit average symbol power.
struct TxSymbols {
  std::vector<Complex> symbols;
  double scale = 1.0;   // RMS symbol magnitude before normalisation (1 for an all-zero block)
  bool padded = false;  // one zero real appended to reach an even count
  Shape shape;          // single-image feature shape (n = 1)
};

// Serialises image `image` of the (n,h,w,K) feature tensor.
TxSymbols to_symbols(const Tensor& feature, int image = 0);
// Exact inverse of to_symbols on noiseless input. Throws DataError on length mismatch.
Tensor from_symbols(std::span<const Complex> symbols, Shape shape, double scale);

// Per-symbol affine map applied between to_symbols and from_symbols:
// y_n = gain_n * x_n + offset_n. Transmission followed by equalisation is
// expressed this way so the whole link can sit inside the training graph.
struct SymbolAffine {
  std::vector<Complex> gain;
  std::vector<Complex> offset;
};

// from_symbols(affine(to_symbols(z))) for every image of z, differentiable in z.
// The normalisation scale is a function of z and is differentiated through.
ag::Var symbol_channel(const ag::Var& z, const std::vector<SymbolAffine>& per_image);

}  // namespace semcom
