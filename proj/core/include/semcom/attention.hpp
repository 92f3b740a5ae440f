#pragma once

#include "semcom/autograd.hpp"

#include <memory>
#include <vector>

namespace semcom {

// Describes how an (n, h, w) token grid is cut into M x M windows, optionally
// after a cyclic shift by `shift` tokens in both axes. Grids that are not a
// multiple of M are zero-padded at the bottom/right; padded tokens never act
// as attention keys.
struct WindowPlan {
  int n = 0;
  int h = 0;
  int w = 0;
  int window = 0;
  int shift = 0;
  int hp = 0;  // padded height
  int wp = 0;  // padded width
  int windows_per_image = 0;

  // Row gather from the token grid into window order (-1 marks padding).
  std::shared_ptr<const std::vector<int>> partition;
  // Row gather from window order back to the token grid (drops padding).
  std::shared_ptr<const std::vector<int>> reverse;
  // Additive logit masks, one (M*M x M*M) block per window position; 0 or -inf.
  // Empty when no window needs masking.
  std::shared_ptr<const std::vector<Mat>> masks;

  int tokens_per_window() const { return window * window; }
  int total_windows() const { return n * windows_per_image; }
};

WindowPlan make_window_plan(int n, int h, int w, int window, int shift);

// (n,h,w,c) -> (n * windows, M, M, c), padding with zeros.
Tensor window_partition(const Tensor& x, int window);
// Exact inverse of window_partition for an (n, h, w) grid; padding is dropped.
Tensor window_reverse(const Tensor& windows, int n, int h, int w, int window);

// T x T table of indices into the (2M-1)^2 relative position bias table.
std::shared_ptr<const std::vector<int>> relative_position_index(int window);

struct AttentionLayout {
  int window = 0;
  int heads = 0;
  int windows_per_image = 0;
  double scale = 1.0;
  std::shared_ptr<const std::vector<int>> rel_index;
  std::shared_ptr<const std::vector<Mat>> masks;  // may be null
};

// Multi-head self-attention inside each window.
// qkv: (total_windows * T) x 3c rows in window order, laid out [q | k | v].
// bias_table: {1,1,(2M-1)^2, heads}, added to the logits through rel_index.
// Returns (total_windows * T) x c, heads concatenated along channels.
ag::Var window_attention(const ag::Var& qkv, const ag::Var& bias_table, const AttentionLayout& layout);

}  // namespace semcom
