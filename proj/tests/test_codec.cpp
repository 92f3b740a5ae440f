#include "semcom/codec.hpp"
#include "semcom/error.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace semcom;
using semcom::testing::max_abs_diff;

namespace {

Tensor random_images(int n, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(Shape{n, h, w, 3});
  for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data.data()[i] = uniform(rng, 0.0, 1.0);
  return t;
}

Tensor random_grid(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(s);
  for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data.data()[i] = uniform(rng, -1.0, 1.0);
  return t;
}

}  // namespace

TEST(CodecShapes, ToyPyramid) {
  SemanticCodec model(CodecConfig::toy(5, 32), 1);
  ag::NoGradGuard g;
  const auto pyr = model.encode(ag::constant(random_images(2, 64, 64, 3)));
  EXPECT_EQ(pyr.f[0]->shape, (Shape{2, 16, 16, 24}));
  EXPECT_EQ(pyr.f[1]->shape, (Shape{2, 8, 8, 48}));
  EXPECT_EQ(pyr.f[2]->shape, (Shape{2, 4, 4, 96}));
  EXPECT_EQ(pyr.f[3]->shape, (Shape{2, 2, 2, 192}));
  const ag::Var z = model.aggregate(pyr);
  EXPECT_EQ(z->shape, (Shape{2, 4, 4, 32}));
  const ag::Var d = model.decode_features(z);
  EXPECT_EQ(d->shape, z->shape);
  const ag::Var logits = model.reconstruct(d, 64, 64);
  EXPECT_EQ(logits->shape, (Shape{2, 64, 64, 5}));
  EXPECT_TRUE(logits->value.allFinite());
}

TEST(CodecShapes, FullScaleLaw) {
  CodecConfig cfg;
  cfg.k_channels = 16;
  const PyramidShapes s = infer_shapes(cfg, 1, 2048, 1024);
  EXPECT_EQ(s.embedded, (Shape{1, 512, 256, 96}));
  EXPECT_EQ(s.f[1], (Shape{1, 256, 128, 192}));
  EXPECT_EQ(s.f[2], (Shape{1, 128, 64, 384}));
  EXPECT_EQ(s.concatenated.c, 1440);
  EXPECT_EQ(s.compressed, (Shape{1, 128, 64, 16}));
  EXPECT_EQ(s.logits, (Shape{1, 2048, 1024, 19}));
}

TEST(CodecShapes, ToyAggregateChannels) {
  const CodecConfig cfg = CodecConfig::toy(5, 8);
  EXPECT_EQ(cfg.aggregated_channels(), 360);
}

TEST(CodecConfig, Validation) {
  CodecConfig cfg;
  cfg.heads = {3, 6, 12, 14};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = CodecConfig{};
  cfg.k_channels = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_NO_THROW(CodecConfig{}.validate());
  EXPECT_NO_THROW(CodecConfig::toy(5, 1).validate());
}

TEST(PatchEmbed, ShapeAndZeroImage) {
  SemanticCodec model(CodecConfig::toy(5, 32), 1);
  ag::NoGradGuard g;
  const ag::Var x = model.patch_embed(ag::constant(Tensor(Shape{1, 64, 64, 3})));
  EXPECT_EQ(x->shape, (Shape{1, 16, 16, 24}));
  EXPECT_TRUE(x->value.allFinite());
  // Every token of a zero image is the same (bias through the norm).
  for (Eigen::Index r = 1; r < x->value.rows(); ++r) EXPECT_EQ(x->value.row(r), x->value.row(0));
}

TEST(WindowPartition, Counts) {
  EXPECT_EQ(window_partition(random_grid(Shape{1, 8, 8, 3}, 1), 4).shape.n, 4);
  const Tensor one = random_grid(Shape{1, 4, 4, 3}, 2);
  const Tensor w = window_partition(one, 4);
  EXPECT_EQ(w.shape.n, 1);
  EXPECT_EQ(w.data, one.data);
}

TEST(WindowPartition, RoundTripExact) {
  const Tensor x = random_grid(Shape{2, 28, 28, 5}, 3);
  const Tensor w = window_partition(x, 7);
  EXPECT_EQ(w.shape.n, 2 * 16);
  const Tensor back = window_reverse(w, 2, 28, 28, 7);
  EXPECT_EQ(back.data, x.data);
  // Non-multiple grid: padding is dropped on the way back.
  const Tensor y = random_grid(Shape{1, 10, 6, 2}, 4);
  EXPECT_EQ(window_reverse(window_partition(y, 4), 1, 10, 6, 4).data, y.data);
}

TEST(WindowAttention, MatchesOracle) {
  Rng rng(11);
  for (int shift : {0, 2}) {
    const auto a = semcom::testing::random_attention_case(rng, 2, 8, 8, 8, 2, 4, shift);
    EXPECT_LT(max_abs_diff(semcom::testing::library_attention(a).data, semcom::testing::oracle_attention(a).data), 1e-9);
  }
  // Padded grid without shift.
  const auto p = semcom::testing::random_attention_case(rng, 1, 6, 10, 4, 1, 4, 0);
  EXPECT_LT(max_abs_diff(semcom::testing::library_attention(p).data, semcom::testing::oracle_attention(p).data), 1e-9);
}

TEST(WindowAttention, SingleTokenWindowIsValueProjection) {
  Rng rng(5);
  const auto a = semcom::testing::random_attention_case(rng, 1, 3, 3, 4, 2, 1, 0);
  const Tensor out = semcom::testing::library_attention(a);
  const Mat v = (a.x.data * a.qkv_weight.data.rightCols(4)).rowwise() + a.qkv_bias.data.rightCols(4).row(0);
  EXPECT_LT(max_abs_diff(out.data, v), 1e-12);
}

TEST(WindowAttention, PermutationEquivariantWithoutBias) {
  Rng rng(8);
  auto a = semcom::testing::random_attention_case(rng, 1, 4, 4, 6, 3, 4, 0);
  a.bias_table.data.setZero();
  const Tensor out = semcom::testing::library_attention(a);
  std::vector<int> perm(16);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto b = a;
  for (int i = 0; i < 16; ++i) b.x.data.row(i) = a.x.data.row(perm[i]);
  const Tensor out_b = semcom::testing::library_attention(b);
  for (int i = 0; i < 16; ++i) EXPECT_LT((out_b.data.row(i) - out.data.row(perm[i])).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(WindowAttention, HeadsMustDivideChannels) {
  ag::NoGradGuard g;
  AttentionLayout layout;
  layout.window = 2;
  layout.heads = 3;
  layout.windows_per_image = 1;
  layout.rel_index = relative_position_index(2);
  const ag::Var qkv = ag::constant(Tensor(Shape{1, 2, 2, 12}));
  const ag::Var bias = ag::constant(Tensor(Shape{1, 1, 9, 3}));
  EXPECT_THROW(window_attention(qkv, bias, layout), ConfigError);
}

TEST(WindowAttention, ShiftedMaskBlocksCrossRegion) {
  const WindowPlan plan = make_window_plan(1, 8, 8, 4, 2);
  ASSERT_TRUE(plan.masks);
  // The bottom-right window mixes four regions; every row keeps only its own region.
  const Mat& m = (*plan.masks)[3];
  for (int i = 0; i < 16; ++i) {
    int allowed = 0;
    for (int j = 0; j < 16; ++j) allowed += std::isfinite(m(i, j));
    EXPECT_EQ(allowed, 4);
  }
  // Interior windows of an unpadded grid are unmasked.
  const Mat& interior = (*plan.masks)[0];
  EXPECT_TRUE(interior.allFinite());
}

TEST(SwinBlock, ZeroedBranchesGiveIdentity) {
  SemanticCodec model(CodecConfig::toy(5, 32), 2);
  for (const char* n : {"attn.proj.weight", "attn.proj.bias", "mlp.fc2.weight", "mlp.fc2.bias"}) {
    model.params().get(std::string("stage0.block0.") + n)->value.setZero();
  }
  ag::NoGradGuard g;
  const Tensor x = random_grid(Shape{1, 16, 16, 24}, 3);
  const ag::Var y = model.swin_block(0, 0, ag::constant(x), 0);
  EXPECT_EQ(y->value, x.data);
  EXPECT_EQ(model.swin_block(0, 0, ag::constant(x), 2)->value, x.data);
}

TEST(SwinBlock, ShapePreserved) {
  SemanticCodec model(CodecConfig::toy(5, 32), 2);
  ag::NoGradGuard g;
  const ag::Var y = model.swin_block(0, 0, ag::constant(random_grid(Shape{1, 16, 16, 24}, 3)), 2);
  EXPECT_EQ(y->shape, (Shape{1, 16, 16, 24}));
}

TEST(SwinBlock, ShiftRule) {
  const CodecConfig cfg = CodecConfig::toy(5, 32);
  EXPECT_EQ(block_shift(cfg, 0, 16, 16), 0);
  EXPECT_EQ(block_shift(cfg, 1, 16, 16), 2);
  EXPECT_EQ(block_shift(cfg, 1, 4, 4), 0);  // one window covers the grid
  CodecConfig full;
  EXPECT_EQ(block_shift(full, 1, 56, 56), 3);
}

TEST(PatchMerge, ShapeAndConstancy) {
  SemanticCodec model(CodecConfig::toy(5, 32), 4);
  ag::NoGradGuard g;
  Tensor x(Shape{1, 16, 16, 24});
  Rng rng(1);
  Eigen::RowVectorXd token(24);
  for (int i = 0; i < 24; ++i) token(i) = uniform(rng, -1, 1);
  x.data.rowwise() = token;
  const ag::Var y = model.patch_merge(0, ag::constant(x));
  EXPECT_EQ(y->shape, (Shape{1, 8, 8, 48}));
  for (Eigen::Index r = 1; r < y->value.rows(); ++r) EXPECT_LT((y->value.row(r) - y->value.row(0)).cwiseAbs().maxCoeff(), 1e-12);
  // Odd grids are padded before merging.
  EXPECT_EQ(model.patch_merge(0, ag::constant(random_grid(Shape{1, 5, 7, 24}, 2)))->shape, (Shape{1, 3, 4, 48}));
}

TEST(Encode, Deterministic) {
  SemanticCodec a(CodecConfig::toy(5, 8), 9);
  SemanticCodec b(CodecConfig::toy(5, 8), 9);
  ag::NoGradGuard g;
  const Tensor img = random_images(1, 32, 32, 1);
  const auto pa = a.encode(ag::constant(img));
  const auto pb = b.encode(ag::constant(img));
  for (int s = 0; s < 4; ++s) EXPECT_EQ(pa.f[s]->value, pb.f[s]->value);
  EXPECT_THROW(a.encode(ag::constant(random_images(1, 48, 32, 1))), ContractError);
}

TEST(Decoder, ZeroWeightsGiveBiasOnly) {
  SemanticCodec model(CodecConfig::toy(5, 8), 9);
  for (int i = 0; i < 3; ++i) model.params().get("decoder.conv" + std::to_string(i) + ".weight")->value.setZero();
  model.params().get("decoder.conv2.bias")->value.setConstant(0.25);
  ag::NoGradGuard g;
  const ag::Var y = model.decode_features(ag::constant(random_grid(Shape{1, 4, 4, 8}, 1)));
  EXPECT_TRUE((y->value.array() == 0.25).all());
}

TEST(Decoder, LipschitzSanity) {
  SemanticCodec model(CodecConfig::toy(5, 8), 9);
  ag::NoGradGuard g;
  const Tensor f = random_grid(Shape{1, 4, 4, 8}, 1);
  Tensor f2 = f;
  f2.data.array() += 1e-4;
  const double dy = (model.decode_features(ag::constant(f2))->value - model.decode_features(ag::constant(f))->value)
                        .cwiseAbs()
                        .maxCoeff();
  EXPECT_LT(dy, 1e-1);
  EXPECT_GT(dy, 0.0);
}

TEST(Reconstruct, SoftmaxAndArgmax) {
  Mat logits(3, 4);
  logits << 9, 0, 0, 0, 0, 0, 7, 0, -1, -2, -3, 5;
  const Mat p = softmax_rows(logits);
  for (int r = 0; r < 3; ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
  Tensor t(Shape{1, 1, 3, 4}, logits);
  const auto labels = argmax_labels(t);
  EXPECT_EQ(labels[0].at(0, 0), 0);
  EXPECT_EQ(labels[0].at(0, 1), 2);
  EXPECT_EQ(labels[0].at(0, 2), 3);
}

TEST(AuxHead, TrainingOnlyAndExcludedFromCount) {
  SemanticCodec model(CodecConfig::toy(5, 32), 1);
  const ag::Var f3 = ag::constant(random_grid(Shape{1, 4, 4, 96}, 1));
  EXPECT_THROW(model.aux_decode(f3, 64, 64), UsageError);
  model.set_training(true);
  EXPECT_EQ(model.aux_decode(f3, 64, 64)->shape, (Shape{1, 64, 64, 5}));
  EXPECT_EQ(model.deployed_parameter_count(), model.params().numel() - model.params().numel_with_prefix("aux."));
  EXPECT_LT(model.deployed_parameter_count(), model.params().numel());
}

TEST(AuxHead, GradientsReachStageThree) {
  SemanticCodec model(CodecConfig::toy(5, 8), 1);
  model.set_training(true);
  const auto pyr = model.encode(ag::constant(random_images(1, 32, 32, 2)));
  const ag::Var aux = model.aux_decode(pyr.f[2], 32, 32);
  // Scalar objective: sum of squares of the aux logits.
  const ag::Var sq = ag::linear(aux, ag::constant(Tensor(Shape{1, 1, 5, 1}, Mat::Ones(5, 1))), nullptr);
  const ag::Var total = ag::make_result(Shape{}, Mat::Constant(1, 1, sq->value.sum()), {sq}, [](ag::Node& n) {
    n.parents[0]->add_grad(Mat::Constant(n.parents[0]->value.rows(), 1, n.grad(0, 0)));
  });
  ag::backward(total);
  const auto& g = model.params().get("stage2.block0.attn.qkv.weight");
  ASSERT_TRUE(g->has_grad());
  EXPECT_GT(g->grad.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_FALSE(model.params().get("stage3.block0.attn.qkv.weight")->has_grad() &&
               model.params().get("stage3.block0.attn.qkv.weight")->grad.cwiseAbs().maxCoeff() > 0);
}

TEST(PadReflect, MirrorsEdges) {
  Tensor x(Shape{1, 3, 3, 1});
  for (int i = 0; i < 9; ++i) x.data(i, 0) = i;
  ag::NoGradGuard g;
  const Tensor y = ag::to_tensor(pad_reflect(ag::constant(x), 4));
  EXPECT_EQ(y.shape, (Shape{1, 4, 4, 1}));
  EXPECT_EQ(y.at(0, 0, 3, 0), x.at(0, 0, 1, 0));
  EXPECT_EQ(y.at(0, 3, 0, 0), x.at(0, 1, 0, 0));
  EXPECT_EQ(ag::to_tensor(crop(ag::constant(y), 3, 3)).data, x.data);
}

TEST(ParamStore, NamesAreHierarchicalAndInitialised) {
  SemanticCodec model(CodecConfig::toy(5, 32), 1);
  const auto& names = model.params().names();
  EXPECT_TRUE(model.params().contains("stage2.block1.attn.rel_bias"));
  EXPECT_TRUE(model.params().contains("reconstructor.conv2.weight"));
  EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), names.size());
  EXPECT_TRUE((model.params().get("embed.norm.gamma")->value.array() == 1.0).all());
  const Mat& w = model.params().get("stage0.block0.mlp.fc1.weight")->value;
  EXPECT_LE(w.cwiseAbs().maxCoeff(), 0.06 + 1e-15);  // truncated at 3 std
}
