#pragma once

#include "semcom/attention.hpp"
#include "semcom/autograd.hpp"
#include "semcom/params.hpp"
#include "semcom/types.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

namespace semcom {

struct CodecConfig {
  int embed_dim = 96;
  std::vector<int> depths{2, 2, 18, 2};
  std::vector<int> heads{3, 6, 12, 24};
  int window = 7;
  int patch = 4;
  int mlp_ratio = 4;
  int k_channels = 256;  // aggregator output channels K
  int n_classes = 19;
  bool aggregator_activation = false;

  // Desk-scale preset used by the synthetic experiments.
  static CodecConfig toy(int n_classes, int k_channels);

  int stage_channels(int stage) const { return embed_dim << stage; }
  // Channel count after concatenating F1..F4 (15 C).
  int aggregated_channels() const { return embed_dim * 15; }
  void validate() const;
  bool operator==(const CodecConfig&) const = default;
};

struct FeaturePyramid {
  std::array<ag::Var, 4> f;
};

// Shapes produced for an n x H x W input (H, W already multiples of 32).
struct PyramidShapes {
  Shape embedded;
  std::array<Shape, 4> f;
  Shape concatenated;
  Shape compressed;
  Shape logits;
};
PyramidShapes infer_shapes(const CodecConfig& cfg, int n, int h, int w);

// Swin window size actually used on an h x w grid and the shift of block `block`.
// Odd-indexed blocks use SW-MSA with shift floor(M/2), unless one window
// already covers the grid.
int block_shift(const CodecConfig& cfg, int block, int h, int w);

// The semantic codec: multi-scale Swin feature extractor, feature aggregator,
// semantic feature decoder, reconstructor, and the training-only FCN head.
//
// All forward pieces take and return autograd variables so the same code
// serves training and inference; wrap calls in ag::NoGradGuard to skip the
// tape.
class SemanticCodec {
 public:
  SemanticCodec(CodecConfig cfg, std::uint64_t seed);

  const CodecConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }

  // (n,H,W,3) -> (n,H/4,W/4,C); H and W are reflect-padded to multiples of 4.
  ag::Var patch_embed(const ag::Var& images) const;
  // Applies the Swin blocks of stage `stage` (0-based).
  ag::Var run_stage(int stage, const ag::Var& x) const;
  // One Swin block; shift 0 is W-MSA, shift > 0 is SW-MSA.
  ag::Var swin_block(int stage, int block, const ag::Var& x, int shift) const;
  // Window attention of one block applied to tokens already in window order.
  ag::Var block_attention(int stage, int block, const ag::Var& windows, const WindowPlan& plan) const;
  // 2x2 token merge after stage `stage`: (h,w,c) -> (h/2,w/2,2c).
  ag::Var patch_merge(int stage, const ag::Var& x) const;

  // Images must have H, W divisible by 32 (see pad_to_multiple).
  FeaturePyramid encode(const ag::Var& images) const;
  ag::Var aggregate(const FeaturePyramid& p) const;
  ag::Var decode_features(const ag::Var& f) const;
  // Logits at out_h x out_w; the feature map must be (out_h/16 x out_w/16) after padding.
  ag::Var reconstruct(const ag::Var& f, int out_h, int out_w) const;
  // Training-only FCN head on F3. Throws UsageError outside training mode.
  ag::Var aux_decode(const ag::Var& f3, int out_h, int out_w) const;

  // Scalars in everything except the training-only auxiliary head.
  std::size_t deployed_parameter_count() const;

 private:
  void build(Rng& rng);
  const WindowPlan& plan(int n, int h, int w, int shift) const;
  const ag::Var& p(const std::string& name) const { return params_.get(name); }

  CodecConfig cfg_;
  ParamStore params_;
  bool training_ = false;
  std::shared_ptr<const std::vector<int>> rel_index_;

  mutable std::mutex plan_mutex_;
  mutable std::map<std::tuple<int, int, int, int>, WindowPlan> plans_;
};

// Reflect-pads (n,h,w,c) at the bottom/right to multiples of `multiple`.
ag::Var pad_reflect(const ag::Var& x, int multiple);
// Keeps the top-left out_h x out_w region.
ag::Var crop(const ag::Var& x, int out_h, int out_w);

// Per-pixel argmax over channels of an (n,H,W,n_cls) logit tensor.
std::vector<LabelMap> argmax_labels(const Tensor& logits);
// Row-wise softmax over channels.
Mat softmax_rows(const Mat& logits);

}  // namespace semcom
