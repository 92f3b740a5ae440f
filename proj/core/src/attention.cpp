#include "semcom/attention.hpp"

#include "semcom/error.hpp"

#include <cmath>
#include <limits>

namespace semcom {

namespace {

int round_up(int v, int m) { return (v + m - 1) / m * m; }

int region(int p, int padded, int window, int shift) {
  if (p < padded - window) return 0;
  if (p < padded - shift) return 1;
  return 2;
}

}  // namespace

WindowPlan make_window_plan(int n, int h, int w, int window, int shift) {
  if (window < 1 || shift < 0 || shift >= window) throw ConfigError("invalid window/shift");
  WindowPlan p;
  p.n = n;
  p.h = h;
  p.w = w;
  p.window = window;
  p.shift = shift;
  p.hp = round_up(h, window);
  p.wp = round_up(w, window);
  const int wy_count = p.hp / window;
  const int wx_count = p.wp / window;
  p.windows_per_image = wy_count * wx_count;
  const int t_count = window * window;

  auto part = std::make_shared<std::vector<int>>(static_cast<std::size_t>(n) * p.hp * p.wp);
  // Original (unshifted, padded-frame) coordinates of each window-order slot, per image.
  std::vector<int> orig_y(static_cast<std::size_t>(p.hp) * p.wp);
  std::vector<int> orig_x(orig_y.size());
  std::vector<int> shifted_y(orig_y.size());
  std::vector<int> shifted_x(orig_y.size());
  for (int wy = 0; wy < wy_count; ++wy) {
    for (int wx = 0; wx < wx_count; ++wx) {
      const int win = wy * wx_count + wx;
      for (int ty = 0; ty < window; ++ty) {
        for (int tx = 0; tx < window; ++tx) {
          const int slot = win * t_count + ty * window + tx;
          const int py = wy * window + ty;
          const int px = wx * window + tx;
          shifted_y[slot] = py;
          shifted_x[slot] = px;
          orig_y[slot] = (py + shift) % p.hp;
          orig_x[slot] = (px + shift) % p.wp;
        }
      }
    }
  }
  const int per_image = p.hp * p.wp;
  for (int b = 0; b < n; ++b) {
    for (int slot = 0; slot < per_image; ++slot) {
      const int oy = orig_y[slot];
      const int ox = orig_x[slot];
      (*part)[static_cast<std::size_t>(b) * per_image + slot] = (oy < h && ox < w) ? (b * h + oy) * w + ox : -1;
    }
  }
  p.partition = part;

  auto rev = std::make_shared<std::vector<int>>(static_cast<std::size_t>(n) * h * w);
  for (int b = 0; b < n; ++b) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int py = (y - shift + p.hp) % p.hp;
        const int px = (x - shift + p.wp) % p.wp;
        const int win = (py / window) * wx_count + px / window;
        (*rev)[(static_cast<std::size_t>(b) * h + y) * w + x] =
            b * per_image + win * t_count + (py % window) * window + px % window;
      }
    }
  }
  p.reverse = rev;

  const bool padded = p.hp != h || p.wp != w;
  if (padded || shift > 0) {
    auto masks = std::make_shared<std::vector<Mat>>();
    masks->reserve(p.windows_per_image);
    const double neg_inf = -std::numeric_limits<double>::infinity();
    for (int win = 0; win < p.windows_per_image; ++win) {
      Mat m = Mat::Zero(t_count, t_count);
      for (int j = 0; j < t_count; ++j) {
        const int sj = win * t_count + j;
        const bool key_is_pad = orig_y[sj] >= h || orig_x[sj] >= w;
        const int rj = region(shifted_y[sj], p.hp, window, shift) * 3 + region(shifted_x[sj], p.wp, window, shift);
        for (int i = 0; i < t_count; ++i) {
          const int si = win * t_count + i;
          bool blocked = key_is_pad;
          if (shift > 0) {
            const int ri = region(shifted_y[si], p.hp, window, shift) * 3 + region(shifted_x[si], p.wp, window, shift);
            blocked = blocked || ri != rj;
          }
          if (blocked) m(i, j) = neg_inf;
        }
      }
      masks->push_back(std::move(m));
    }
    p.masks = masks;
  }
  return p;
}

Tensor window_partition(const Tensor& x, int window) {
  const WindowPlan plan = make_window_plan(x.shape.n, x.shape.h, x.shape.w, window, 0);
  Tensor out(Shape{plan.total_windows(), window, window, x.shape.c});
  const auto& idx = *plan.partition;
  for (int r = 0; r < out.shape.rows(); ++r) {
    if (idx[r] >= 0) out.data.row(r) = x.data.row(idx[r]);
  }
  return out;
}

Tensor window_reverse(const Tensor& windows, int n, int h, int w, int window) {
  const WindowPlan plan = make_window_plan(n, h, w, window, 0);
  if (windows.shape.rows() != n * plan.hp * plan.wp) throw DataError("window_reverse: window count mismatch");
  Tensor out(Shape{n, h, w, windows.shape.c});
  const auto& idx = *plan.reverse;
  for (int r = 0; r < out.shape.rows(); ++r) out.data.row(r) = windows.data.row(idx[r]);
  return out;
}

std::shared_ptr<const std::vector<int>> relative_position_index(int window) {
  const int t = window * window;
  auto idx = std::make_shared<std::vector<int>>(static_cast<std::size_t>(t) * t);
  for (int i = 0; i < t; ++i) {
    for (int j = 0; j < t; ++j) {
      const int dy = i / window - j / window + window - 1;
      const int dx = i % window - j % window + window - 1;
      (*idx)[static_cast<std::size_t>(i) * t + j] = dy * (2 * window - 1) + dx;
    }
  }
  return idx;
}

ag::Var window_attention(const ag::Var& qkv, const ag::Var& bias_table, const AttentionLayout& layout) {
  const int t = layout.window * layout.window;
  const int c = static_cast<int>(qkv->value.cols()) / 3;
  if (c * 3 != qkv->value.cols() || c % layout.heads != 0) {
    throw ConfigError("window_attention: channels " + std::to_string(c) + " not divisible by heads " +
                      std::to_string(layout.heads));
  }
  if (qkv->value.rows() % t != 0) throw ContractError("window_attention: rows not a multiple of window tokens");
  const int d = c / layout.heads;
  const int n_windows = static_cast<int>(qkv->value.rows()) / t;
  const auto& rel = *layout.rel_index;
  const double neg_inf = -std::numeric_limits<double>::infinity();

  auto probs = std::make_shared<Mat>(static_cast<Eigen::Index>(n_windows) * layout.heads * t, t);
  Mat out(qkv->value.rows(), c);
  Mat logits(t, t);
  for (int win = 0; win < n_windows; ++win) {
    const int r0 = win * t;
    const Mat* mask = layout.masks ? &(*layout.masks)[win % layout.windows_per_image] : nullptr;
    for (int hd = 0; hd < layout.heads; ++hd) {
      const auto q = qkv->value.block(r0, hd * d, t, d);
      const auto k = qkv->value.block(r0, c + hd * d, t, d);
      const auto v = qkv->value.block(r0, 2 * c + hd * d, t, d);
      logits.noalias() = layout.scale * (q * k.transpose());
      for (int i = 0; i < t; ++i) {
        for (int j = 0; j < t; ++j) logits(i, j) += bias_table->value(rel[i * t + j], hd);
      }
      if (mask) logits += *mask;
      auto a = probs->block((static_cast<Eigen::Index>(win) * layout.heads + hd) * t, 0, t, t);
      for (int i = 0; i < t; ++i) {
        const double m = logits.row(i).maxCoeff();
        if (m == neg_inf) {
          a.row(i).setZero();
          continue;
        }
        a.row(i) = (logits.row(i).array() - m).exp();
        a.row(i) /= a.row(i).sum();
      }
      out.block(r0, hd * d, t, d).noalias() = a * v;
    }
  }

  Shape out_shape = qkv->shape;
  out_shape.c = c;
  AttentionLayout lay = layout;
  return ag::make_result(out_shape, std::move(out), {qkv, bias_table}, [probs, lay, t, c, d, n_windows](ag::Node& self) {
    const ag::Var& qv = self.parents[0];
    const ag::Var& tb = self.parents[1];
    const auto& rel_idx = *lay.rel_index;
    Mat gqkv = Mat::Zero(qv->value.rows(), qv->value.cols());
    Mat da(t, t);
    Mat dl(t, t);
    for (int win = 0; win < n_windows; ++win) {
      const int r0 = win * t;
      for (int hd = 0; hd < lay.heads; ++hd) {
        const auto q = qv->value.block(r0, hd * d, t, d);
        const auto k = qv->value.block(r0, c + hd * d, t, d);
        const auto v = qv->value.block(r0, 2 * c + hd * d, t, d);
        const auto a = probs->block((static_cast<Eigen::Index>(win) * lay.heads + hd) * t, 0, t, t);
        const auto go = self.grad.block(r0, hd * d, t, d);
        gqkv.block(r0, 2 * c + hd * d, t, d).noalias() += a.transpose() * go;
        da.noalias() = go * v.transpose();
        for (int i = 0; i < t; ++i) {
          const double dot = a.row(i).dot(da.row(i));
          dl.row(i) = a.row(i).array() * (da.row(i).array() - dot);
        }
        gqkv.block(r0, hd * d, t, d).noalias() += lay.scale * (dl * k);
        gqkv.block(r0, c + hd * d, t, d).noalias() += lay.scale * (dl.transpose() * q);
        if (tb->requires_grad) {
          Mat& gt = tb->grad_buffer();
          for (int i = 0; i < t; ++i) {
            for (int j = 0; j < t; ++j) gt(rel_idx[i * t + j], hd) += dl(i, j);
          }
        }
      }
    }
    if (qv->requires_grad) qv->add_grad(gqkv);
  });
}

}  // namespace semcom
