#include "semcom/codec.hpp"

#include "semcom/error.hpp"

#include <algorithm>
#include <cmath>

namespace semcom {

namespace {

std::string block_prefix(int stage, int block) {
  return "stage" + std::to_string(stage) + ".block" + std::to_string(block) + ".";
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

CodecConfig CodecConfig::toy(int n_classes, int k_channels) {
  CodecConfig c;
  c.embed_dim = 24;
  c.depths = {1, 1, 2, 1};
  c.heads = {1, 2, 4, 8};
  c.window = 4;
  c.k_channels = k_channels;
  c.n_classes = n_classes;
  return c;
}

void CodecConfig::validate() const {
  if (embed_dim < 1) throw ConfigError("codec.embed_dim must be positive");
  if (depths.size() != 4 || heads.size() != 4) throw ConfigError("codec.depths and codec.heads need 4 entries");
  for (int s = 0; s < 4; ++s) {
    if (depths[s] < 1) throw ConfigError("codec.depths entries must be >= 1");
    if (heads[s] < 1 || stage_channels(s) % heads[s] != 0) {
      throw ConfigError("codec.heads[" + std::to_string(s) + "]=" + std::to_string(heads[s]) +
                        " does not divide stage channels " + std::to_string(stage_channels(s)));
    }
  }
  if (window < 1) throw ConfigError("codec.window must be >= 1");
  if (patch != 4) throw ConfigError("codec.patch must be 4");
  if (mlp_ratio < 1) throw ConfigError("codec.mlp_ratio must be >= 1");
  if (k_channels < 1) throw ConfigError("codec.k must be >= 1");
  if (n_classes < 2) throw ConfigError("codec.n_classes must be >= 2");
}

PyramidShapes infer_shapes(const CodecConfig& cfg, int n, int h, int w) {
  if (h % 32 != 0 || w % 32 != 0) throw ConfigError("input size must be a multiple of 32");
  PyramidShapes s;
  s.embedded = Shape{n, h / 4, w / 4, cfg.embed_dim};
  for (int st = 0; st < 4; ++st) {
    s.f[st] = Shape{n, h >> (st + 2), w >> (st + 2), cfg.stage_channels(st)};
  }
  s.concatenated = Shape{n, h / 16, w / 16, cfg.aggregated_channels()};
  s.compressed = Shape{n, h / 16, w / 16, cfg.k_channels};
  s.logits = Shape{n, h, w, cfg.n_classes};
  return s;
}

int block_shift(const CodecConfig& cfg, int block, int h, int w) {
  if (block % 2 == 0 || std::min(h, w) <= cfg.window) return 0;
  return cfg.window / 2;
}

SemanticCodec::SemanticCodec(CodecConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  rel_index_ = relative_position_index(cfg_.window);
  Rng rng(seed);
  build(rng);
}

void SemanticCodec::build(Rng& rng) {
  using I = ParamStore::Init;
  const int c0 = cfg_.embed_dim;
  auto linear_params = [&](const std::string& name, int in, int out, bool bias) {
    params_.create(name + ".weight", Shape{1, 1, in, out}, I::TruncNormal, rng);
    if (bias) params_.create(name + ".bias", Shape{1, 1, 1, out}, I::Zeros, rng);
  };
  auto norm_params = [&](const std::string& name, int c) {
    params_.create(name + ".gamma", Shape{1, 1, 1, c}, I::Ones, rng);
    params_.create(name + ".beta", Shape{1, 1, 1, c}, I::Zeros, rng);
  };

  linear_params("embed.proj", 3 * cfg_.patch * cfg_.patch, c0, true);
  norm_params("embed.norm", c0);

  const int table = (2 * cfg_.window - 1) * (2 * cfg_.window - 1);
  for (int s = 0; s < 4; ++s) {
    const int c = cfg_.stage_channels(s);
    for (int b = 0; b < cfg_.depths[s]; ++b) {
      const std::string pre = block_prefix(s, b);
      norm_params(pre + "norm1", c);
      linear_params(pre + "attn.qkv", c, 3 * c, true);
      params_.create(pre + "attn.rel_bias", Shape{1, 1, table, cfg_.heads[s]}, I::TruncNormal, rng);
      linear_params(pre + "attn.proj", c, c, true);
      norm_params(pre + "norm2", c);
      linear_params(pre + "mlp.fc1", c, cfg_.mlp_ratio * c, true);
      linear_params(pre + "mlp.fc2", cfg_.mlp_ratio * c, c, true);
    }
    if (s < 3) {
      const std::string pre = "stage" + std::to_string(s) + ".merge.";
      norm_params(pre + "norm", 4 * c);
      linear_params(pre + "reduction", 4 * c, 2 * c, false);
    }
  }

  const int k = cfg_.k_channels;
  linear_params("aggregator.conv", cfg_.aggregated_channels(), k, true);

  linear_params("decoder.conv0", k, k, true);
  norm_params("decoder.norm0", k);
  linear_params("decoder.conv1", k, k, true);
  norm_params("decoder.norm1", k);
  linear_params("decoder.conv2", k, k, true);

  linear_params("reconstructor.conv1", k, k, true);
  norm_params("reconstructor.norm1", k);
  linear_params("reconstructor.conv2", k, cfg_.n_classes, true);

  const int c3 = cfg_.stage_channels(2);
  params_.create("aux.tconv0.weight", Shape{1, 1, c3, 4 * c0}, I::TruncNormal, rng);
  params_.create("aux.tconv0.bias", Shape{1, 1, 1, c0}, I::Zeros, rng);
  norm_params("aux.norm0", c0);
  for (int i = 1; i < 3; ++i) {
    params_.create("aux.tconv" + std::to_string(i) + ".weight", Shape{1, 1, c0, 4 * c0}, I::TruncNormal, rng);
    params_.create("aux.tconv" + std::to_string(i) + ".bias", Shape{1, 1, 1, c0}, I::Zeros, rng);
    norm_params("aux.norm" + std::to_string(i), c0);
  }
  params_.create("aux.tconv3.weight", Shape{1, 1, c0, 4 * cfg_.n_classes}, I::TruncNormal, rng);
  params_.create("aux.tconv3.bias", Shape{1, 1, 1, cfg_.n_classes}, I::Zeros, rng);
}

const WindowPlan& SemanticCodec::plan(int n, int h, int w, int shift) const {
  std::lock_guard<std::mutex> lock(plan_mutex_);
  const auto key = std::make_tuple(n, h, w, shift);
  auto it = plans_.find(key);
  if (it == plans_.end()) it = plans_.emplace(key, make_window_plan(n, h, w, cfg_.window, shift)).first;
  return it->second;
}

ag::Var SemanticCodec::patch_embed(const ag::Var& images) const {
  if (images->shape.c != 3) throw ContractError("patch_embed expects 3 channels, got " + to_string(images->shape));
  ag::Var x = pad_reflect(images, cfg_.patch);
  x = ag::space_to_depth(x, cfg_.patch);
  x = ag::linear(x, p("embed.proj.weight"), p("embed.proj.bias"));
  return ag::layer_norm(x, p("embed.norm.gamma"), p("embed.norm.beta"));
}

ag::Var SemanticCodec::block_attention(int stage, int block, const ag::Var& windows, const WindowPlan& pl) const {
  const std::string pre = block_prefix(stage, block) + "attn.";
  const int c = windows->shape.c;
  const int heads = cfg_.heads[stage];
  AttentionLayout layout;
  layout.window = cfg_.window;
  layout.heads = heads;
  layout.windows_per_image = pl.windows_per_image;
  layout.scale = 1.0 / std::sqrt(static_cast<double>(c / heads));
  layout.rel_index = rel_index_;
  layout.masks = pl.masks;
  ag::Var qkv = ag::linear(windows, p(pre + "qkv.weight"), p(pre + "qkv.bias"));
  ag::Var att = window_attention(qkv, p(pre + "rel_bias"), layout);
  return ag::linear(att, p(pre + "proj.weight"), p(pre + "proj.bias"));
}

ag::Var SemanticCodec::swin_block(int stage, int block, const ag::Var& x, int shift) const {
  const std::string pre = block_prefix(stage, block);
  const Shape s = x->shape;
  const WindowPlan& pl = plan(s.n, s.h, s.w, shift);

  ag::Var y = ag::layer_norm(x, p(pre + "norm1.gamma"), p(pre + "norm1.beta"));
  y = ag::gather_rows(y, pl.partition, Shape{pl.total_windows(), cfg_.window, cfg_.window, s.c});
  y = block_attention(stage, block, y, pl);
  y = ag::gather_rows(y, pl.reverse, s);
  ag::Var x1 = ag::add(x, y);

  ag::Var m = ag::layer_norm(x1, p(pre + "norm2.gamma"), p(pre + "norm2.beta"));
  m = ag::gelu(ag::linear(m, p(pre + "mlp.fc1.weight"), p(pre + "mlp.fc1.bias")));
  m = ag::linear(m, p(pre + "mlp.fc2.weight"), p(pre + "mlp.fc2.bias"));
  return ag::add(x1, m);
}

ag::Var SemanticCodec::run_stage(int stage, const ag::Var& x) const {
  ag::Var y = x;
  for (int b = 0; b < cfg_.depths[stage]; ++b) {
    y = swin_block(stage, b, y, block_shift(cfg_, b, y->shape.h, y->shape.w));
  }
  return y;
}

ag::Var SemanticCodec::patch_merge(int stage, const ag::Var& x) const {
  const std::string pre = "stage" + std::to_string(stage) + ".merge.";
  ag::Var y = x;
  const Shape s = x->shape;
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    const Shape padded{s.n, s.h + s.h % 2, s.w + s.w % 2, s.c};
    auto idx = std::make_shared<std::vector<int>>(padded.rows());
    for (int b = 0; b < s.n; ++b) {
      for (int i = 0; i < padded.h; ++i) {
        for (int j = 0; j < padded.w; ++j) {
          (*idx)[(b * padded.h + i) * padded.w + j] = (i < s.h && j < s.w) ? (b * s.h + i) * s.w + j : -1;
        }
      }
    }
    y = ag::gather_rows(y, idx, padded);
  }
  y = ag::space_to_depth(y, 2);
  y = ag::layer_norm(y, p(pre + "norm.gamma"), p(pre + "norm.beta"));
  return ag::linear(y, p(pre + "reduction.weight"), nullptr);
}

FeaturePyramid SemanticCodec::encode(const ag::Var& images) const {
  if (images->shape.h % 32 != 0 || images->shape.w % 32 != 0) {
    throw ContractError("encode expects H, W divisible by 32, got " + to_string(images->shape));
  }
  FeaturePyramid out;
  ag::Var x = patch_embed(images);
  for (int s = 0; s < 4; ++s) {
    x = run_stage(s, x);
    out.f[s] = x;
    if (s < 3) x = patch_merge(s, x);
  }
  return out;
}

ag::Var SemanticCodec::aggregate(const FeaturePyramid& pyr) const {
  const int h = pyr.f[2]->shape.h;
  const int w = pyr.f[2]->shape.w;
  std::array<ag::Var, 4> parts;
  for (int s = 0; s < 4; ++s) parts[s] = ag::resize_bilinear(pyr.f[s], h, w);
  ag::Var cat = ag::concat_channels(parts);
  ag::Var out = ag::linear(cat, p("aggregator.conv.weight"), p("aggregator.conv.bias"));
  if (cfg_.aggregator_activation) out = ag::gelu(out);
  return out;
}

ag::Var SemanticCodec::decode_features(const ag::Var& f) const {
  if (f->shape.c != cfg_.k_channels) throw ContractError("decode_features expects K channels");
  ag::Var x = f;
  for (int i = 0; i < 3; ++i) {
    const std::string n = "decoder.conv" + std::to_string(i);
    x = ag::linear(x, p(n + ".weight"), p(n + ".bias"));
    if (i < 2) {
      const std::string ln = "decoder.norm" + std::to_string(i);
      x = ag::gelu(ag::layer_norm(x, p(ln + ".gamma"), p(ln + ".beta")));
    }
  }
  return x;
}

ag::Var SemanticCodec::reconstruct(const ag::Var& f, int out_h, int out_w) const {
  const int h = f->shape.h;
  const int w = f->shape.w;
  if (out_h > 16 * h || out_w > 16 * w) throw ContractError("reconstruct: output larger than 16x feature map");
  ag::Var x = ag::resize_bilinear(f, 2 * h, 2 * w);
  x = ag::linear(x, p("reconstructor.conv1.weight"), p("reconstructor.conv1.bias"));
  x = ag::gelu(ag::layer_norm(x, p("reconstructor.norm1.gamma"), p("reconstructor.norm1.beta")));
  x = ag::resize_bilinear(x, 4 * h, 4 * w);
  x = ag::linear(x, p("reconstructor.conv2.weight"), p("reconstructor.conv2.bias"));
  x = ag::resize_bilinear(x, 16 * h, 16 * w);
  return crop(x, out_h, out_w);
}

ag::Var SemanticCodec::aux_decode(const ag::Var& f3, int out_h, int out_w) const {
  if (!training_) throw UsageError("aux_decode is a training-only head");
  ag::Var x = f3;
  for (int i = 0; i < 4; ++i) {
    const std::string n = "aux.tconv" + std::to_string(i);
    x = ag::conv_transpose2x2(x, p(n + ".weight"), p(n + ".bias"));
    if (i < 3) {
      const std::string ln = "aux.norm" + std::to_string(i);
      x = ag::gelu(ag::layer_norm(x, p(ln + ".gamma"), p(ln + ".beta")));
    }
  }
  return crop(x, out_h, out_w);
}

std::size_t SemanticCodec::deployed_parameter_count() const {
  return params_.numel() - params_.numel_with_prefix("aux.");
}

ag::Var pad_reflect(const ag::Var& x, int multiple) {
  const Shape s = x->shape;
  const int hp = (s.h + multiple - 1) / multiple * multiple;
  const int wp = (s.w + multiple - 1) / multiple * multiple;
  if (hp == s.h && wp == s.w) return x;
  const Shape out{s.n, hp, wp, s.c};
  auto idx = std::make_shared<std::vector<int>>(out.rows());
  for (int b = 0; b < s.n; ++b) {
    for (int i = 0; i < hp; ++i) {
      for (int j = 0; j < wp; ++j) {
        (*idx)[(b * hp + i) * wp + j] = (b * s.h + reflect_index(i, s.h)) * s.w + reflect_index(j, s.w);
      }
    }
  }
  return ag::gather_rows(x, idx, out);
}

ag::Var crop(const ag::Var& x, int out_h, int out_w) {
  const Shape s = x->shape;
  if (out_h == s.h && out_w == s.w) return x;
  if (out_h > s.h || out_w > s.w) throw ContractError("crop larger than input");
  const Shape out{s.n, out_h, out_w, s.c};
  auto idx = std::make_shared<std::vector<int>>(out.rows());
  for (int b = 0; b < s.n; ++b) {
    for (int i = 0; i < out_h; ++i) {
      for (int j = 0; j < out_w; ++j) (*idx)[(b * out_h + i) * out_w + j] = (b * s.h + i) * s.w + j;
    }
  }
  return ag::gather_rows(x, idx, out);
}

Mat softmax_rows(const Mat& logits) {
  Mat p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - m).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

std::vector<LabelMap> argmax_labels(const Tensor& logits) {
  const Shape s = logits.shape;
  std::vector<LabelMap> out;
  out.reserve(s.n);
  for (int b = 0; b < s.n; ++b) {
    LabelMap m(s.h, s.w);
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        Eigen::Index best = 0;
        logits.data.row(logits.row(b, y, x)).maxCoeff(&best);
        m.at(y, x) = static_cast<std::uint8_t>(best);
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

Tensor images_to_tensor(std::span<const Image> images) {
  if (images.empty()) throw ContractError("images_to_tensor: empty batch");
  const int h = images[0].h;
  const int w = images[0].w;
  Tensor t(Shape{static_cast<int>(images.size()), h, w, 3});
  for (std::size_t b = 0; b < images.size(); ++b) {
    if (images[b].h != h || images[b].w != w) throw DataError("images_to_tensor: mixed image sizes in batch");
    for (int i = 0; i < h * w; ++i) {
      for (int c = 0; c < 3; ++c) t.data(static_cast<int>(b) * h * w + i, c) = images[b].pixels[i * 3 + c];
    }
  }
  return t;
}

}  // namespace semcom
