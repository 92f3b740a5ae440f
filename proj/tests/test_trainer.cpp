#include "semcom/checkpoint.hpp"
#include "semcom/error.hpp"
#include "semcom/optim.hpp"
#include "semcom/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace semcom;
namespace fs = std::filesystem;

namespace {

constexpr int kClasses = 5;

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("semcom_trainer_" + name + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

LossConfig toy_loss() {
  LossConfig l;
  l.ohem_min_kept = 0.19;
  std::vector<bool> imp(kClasses, false);
  imp.back() = true;
  l.weights = class_weights(std::vector<double>(kClasses, 1.0), imp);
  return l;
}

DatasetSpec toy_spec() {
  DatasetSpec s;
  s.crop_h = 32;
  s.crop_w = 32;
  s.n_classes = kClasses;
  s.photometric = true;
  return s;
}

TrainConfig toy_train(int iterations) {
  TrainConfig t;
  t.iterations = iterations;
  t.batch_size = 2;
  t.adam.lr = 1e-3;
  t.seed = 5;
  return t;
}

InMemoryDataset toy_data(int n = 6) { return InMemoryDataset(gen_synthetic(n, 32, 32, kClasses, 3)); }

std::map<std::string, Mat> snapshot(const SemanticCodec& m) {
  std::map<std::string, Mat> out;
  for (const auto& n : m.params().names()) out[n] = m.params().get(n)->value;
  return out;
}

}  // namespace

TEST(Trainer, ZeroLearningRateKeepsParameters) {
  SemanticCodec model(CodecConfig::toy(kClasses, 8), 1);
  const auto before = snapshot(model);
  TrainConfig tc = toy_train(1);
  tc.adam.lr = 0.0;
  Trainer tr(model, tc, ChannelConfig{}, toy_loss(), toy_spec());
  const auto data = toy_data();
  const std::vector<std::size_t> ids{0, 1};
  const std::vector<Sample> batch{data.get(0), data.get(1)};
  const StepResult r = tr.step(batch, ids);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_GT(r.grad_norm, 0.0);
  EXPECT_EQ(snapshot(model), before);
}

TEST(Trainer, StepIsBitReproducible) {
  const auto data = toy_data();
  const std::vector<std::size_t> ids{2, 3};
  const std::vector<Sample> batch{data.get(2), data.get(3)};
  std::vector<double> losses;
  std::vector<std::map<std::string, Mat>> params;
  for (int run = 0; run < 2; ++run) {
    SemanticCodec model(CodecConfig::toy(kClasses, 8), 1);
    Trainer tr(model, toy_train(2), ChannelConfig{}, toy_loss(), toy_spec());
    tr.step(batch, ids);
    losses.push_back(tr.step(batch, ids).loss);
    params.push_back(snapshot(model));
  }
  EXPECT_EQ(losses[0], losses[1]);
  EXPECT_EQ(params[0], params[1]);
}

TEST(Trainer, SnrDrawnFromRange) {
  SemanticCodec model(CodecConfig::toy(kClasses, 8), 1);
  TrainConfig tc = toy_train(6);
  Trainer tr(model, tc, ChannelConfig{}, toy_loss(), toy_spec());
  const auto data = toy_data();
  tr.run(data, nullptr, {}, [&](std::uint64_t, const StepResult& r) {
    EXPECT_GE(r.snr_db, tc.snr_low_db);
    EXPECT_LE(r.snr_db, tc.snr_high_db);
  });
  EXPECT_EQ(tr.iteration(), 6u);
}

TEST(Trainer, ResumeMatchesUninterruptedRun) {
  const auto dir = temp_dir("resume");
  const auto data = toy_data();
  SemanticCodec straight(CodecConfig::toy(kClasses, 8), 1);
  {
    Trainer tr(straight, toy_train(4), ChannelConfig{}, toy_loss(), toy_spec());
    tr.run(data, nullptr);
  }
  SemanticCodec first(CodecConfig::toy(kClasses, 8), 1);
  {
    Trainer tr(first, toy_train(2), ChannelConfig{}, toy_loss(), toy_spec());
    tr.run(data, nullptr, dir);
  }
  SemanticCodec resumed(CodecConfig::toy(kClasses, 8), 99);
  Trainer tr(resumed, toy_train(4), ChannelConfig{}, toy_loss(), toy_spec());
  tr.restore(dir / "final.ckpt");
  EXPECT_EQ(tr.iteration(), 2u);
  tr.run(data, nullptr);
  EXPECT_EQ(snapshot(resumed), snapshot(straight));
  fs::remove_all(dir);
}

TEST(Trainer, LogAndPeriodicCheckpoints) {
  const auto dir = temp_dir("log");
  SemanticCodec model(CodecConfig::toy(kClasses, 8), 1);
  TrainConfig tc = toy_train(4);
  tc.checkpoint_every = 2;
  Trainer tr(model, tc, ChannelConfig{}, toy_loss(), toy_spec());
  std::ostringstream log;
  tr.run(toy_data(), &log, dir);
  std::istringstream is(log.str());
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) {
    ++lines;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5);
    EXPECT_EQ(line.rfind(std::to_string(lines) + ",", 0), 0u);
  }
  EXPECT_EQ(lines, 4);
  EXPECT_TRUE(fs::exists(dir / "iter_2.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "final.ckpt"));
  EXPECT_FALSE(fs::exists(dir / "iter_4.ckpt"));
  EXPECT_EQ(std::string(kTrainLogHeader), "iter,loss,ce,iou_loss,aux,snr_db");
  fs::remove_all(dir);
}

TEST(Trainer, ChannelDisabledAndTogglesRun) {
  const auto data = toy_data();
  for (int variant = 0; variant < 4; ++variant) {
    SemanticCodec model(CodecConfig::toy(kClasses, 8), 1);
    TrainConfig tc = toy_train(2);
    LossConfig lc = toy_loss();
    if (variant == 0) tc.channel_enabled = false;
    if (variant == 1) lc.ohem_enabled = false;
    if (variant == 2) lc.aux_enabled = false;
    if (variant == 3) {
      lc.use_weights = false;
      lc.use_iou = false;
    }
    Trainer tr(model, tc, ChannelConfig{}, lc, toy_spec());
    tr.run(data, nullptr, {}, [](std::uint64_t, const StepResult& r) { EXPECT_TRUE(std::isfinite(r.loss)); });
  }
}

TEST(Trainer, NonFiniteLossNamesContext) {
  SemanticCodec model(CodecConfig::toy(kClasses, 8), 1);
  model.params().get("reconstructor.conv2.bias")->value(0, 0) = std::nan("");
  Trainer tr(model, toy_train(1), ChannelConfig{}, toy_loss(), toy_spec());
  const auto data = toy_data();
  const std::vector<std::size_t> ids{4, 5};
  const std::vector<Sample> batch{data.get(4), data.get(5)};
  try {
    tr.step(batch, ids);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("iteration 1"), std::string::npos);
    EXPECT_NE(msg.find("snr_db"), std::string::npos);
    EXPECT_NE(msg.find("[4,5]"), std::string::npos);
  }
}

TEST(Trainer, ConfigValidation) {
  TrainConfig tc;
  tc.snr_low_db = 10;
  tc.snr_high_db = 5;
  EXPECT_THROW(tc.validate(), ConfigError);
  tc = TrainConfig{};
  tc.adam.lr = 0.0;
  EXPECT_THROW(tc.validate(), ConfigError);
  EXPECT_NO_THROW(TrainConfig{}.validate());
}

TEST(Evaluate, ReproducibleAndGridSized) {
  SemanticCodec model(CodecConfig::toy(kClasses, 8), 1);
  const auto data = toy_data(3);
  EvalConfig ec;
  ec.snr_grid = {1.0, 10.0};
  ec.seed = 4;
  ec.batch_size = 2;
  const auto a = evaluate(model, data, ChannelConfig{}, ec);
  const auto b = evaluate(model, data, ChannelConfig{}, ec);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].cm, b[0].cm);
  EXPECT_EQ(a[1].cm, b[1].cm);
  EXPECT_EQ(a[0].cm.total(), 3u * 32 * 32);
  ec.n_realizations = 2;
  EXPECT_EQ(evaluate(model, data, ChannelConfig{}, ec)[0].cm.total(), 2u * 3 * 32 * 32);
  ec.snr_grid.clear();
  EXPECT_THROW(evaluate(model, data, ChannelConfig{}, ec), ConfigError);
}

TEST(Evaluate, SnrRange) {
  const auto g = snr_range(1, 25, 3);
  ASSERT_EQ(g.size(), 9u);
  EXPECT_EQ(g.front(), 1.0);
  EXPECT_EQ(g.back(), 25.0);
  EXPECT_THROW(snr_range(1, 25, 0), ConfigError);
}

TEST(Evaluate, BaselinePoints) {
  SemanticCodec seg(CodecConfig::toy(kClasses, 32), 1);
  const InMemoryDataset data(gen_synthetic(2, 64, 64, kClasses, 3));
  EvalConfig ec;
  ec.snr_grid = {0.0, 30.0};
  ChannelConfig ch;
  ch.mode = ChannelMode::Awgn;
  const auto pts = evaluate_baseline(seg, data, ch, BaselineConfig{}, ec);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[1].decode_success, 1.0);
  EXPECT_EQ(pts[1].coded_ber, 0.0);
  EXPECT_GT(pts[1].mean_r, 1.0);
  EXPECT_EQ(pts[0].cm.total(), 2u * 64 * 64);
}

TEST(Checkpoint, RoundTripGivesIdenticalEvaluation) {
  const auto dir = temp_dir("ck");
  SemanticCodec model(CodecConfig::toy(kClasses, 8), 1);
  Trainer tr(model, toy_train(2), ChannelConfig{}, toy_loss(), toy_spec());
  const auto data = toy_data(3);
  tr.run(data, nullptr, dir);
  auto loaded = codec_from_checkpoint(load_checkpoint(dir / "final.ckpt"));
  EXPECT_EQ(loaded->config(), model.config());
  EXPECT_EQ(snapshot(*loaded), snapshot(model));
  EvalConfig ec;
  ec.snr_grid = {5.0};
  EXPECT_EQ(evaluate(*loaded, data, ChannelConfig{}, ec)[0].cm, evaluate(model, data, ChannelConfig{}, ec)[0].cm);
  const Checkpoint ck = load_checkpoint(dir / "final.ckpt");
  EXPECT_EQ(ck.iteration, 2u);
  EXPECT_EQ(ck.optimizer_steps, 2u);
  EXPECT_FALSE(ck.rng_state.empty());
  EXPECT_EQ(ck.optimizer.size(), 2 * model.params().size());
  fs::remove_all(dir);
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto dir = temp_dir("bad");
  {
    std::ofstream os(dir / "junk.ckpt", std::ios::binary);
    os << "NOTACHECKPOINT";
  }
  EXPECT_THROW(load_checkpoint(dir / "junk.ckpt"), DataError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), ConfigError);
  SemanticCodec model(CodecConfig::toy(kClasses, 8), 1);
  save_checkpoint(dir / "m.ckpt", make_checkpoint(model, 0, nullptr, nullptr));
  // Version field is checked.
  {
    std::fstream f(dir / "m.ckpt", std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(8);
    const std::uint32_t v = 99;
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  EXPECT_THROW(load_checkpoint(dir / "m.ckpt"), DataError);
  // Truncated payload.
  save_checkpoint(dir / "t.ckpt", make_checkpoint(model, 0, nullptr, nullptr));
  fs::resize_file(dir / "t.ckpt", fs::file_size(dir / "t.ckpt") - 8);
  EXPECT_THROW(load_checkpoint(dir / "t.ckpt"), DataError);
  // Strict apply needs the same architecture.
  SemanticCodec other(CodecConfig::toy(kClasses, 16), 1);
  EXPECT_THROW(apply_checkpoint(other, make_checkpoint(model, 0, nullptr, nullptr)), ConfigError);
  fs::remove_all(dir);
}

TEST(Checkpoint, ConfigJsonRoundTrip) {
  CodecConfig c = CodecConfig::toy(7, 3);
  c.aggregator_activation = true;
  EXPECT_EQ(codec_config_from_json(codec_config_json(c)), c);
}

TEST(TransferInit, IdenticalDepthsCopyEverything) {
  SemanticCodec src(CodecConfig::toy(kClasses, 8), 1);
  SemanticCodec dst(CodecConfig::toy(kClasses, 8), 2);
  EXPECT_EQ(transfer_init(dst, make_checkpoint(src, 0, nullptr, nullptr)), src.params().size());
  EXPECT_EQ(snapshot(dst), snapshot(src));
}

TEST(TransferInit, PrefixCopyAcrossDepths) {
  CodecConfig a;
  a.embed_dim = 8;
  a.heads = {1, 1, 2, 2};
  a.window = 4;
  a.k_channels = 4;
  a.n_classes = 3;
  a.depths = {2, 2, 18, 2};
  CodecConfig b = a;
  b.depths = {2, 2, 9, 9};
  SemanticCodec src(a, 1);
  SemanticCodec dst(b, 2);
  const auto fresh = snapshot(dst);
  transfer_init(dst, make_checkpoint(src, 0, nullptr, nullptr));
  const auto& sp = src.params();
  const auto& dp = dst.params();
  for (int blk = 0; blk < 9; ++blk) {
    const std::string n = "stage2.block" + std::to_string(blk) + ".mlp.fc1.weight";
    EXPECT_EQ(dp.get(n)->value, sp.get(n)->value) << n;
  }
  EXPECT_EQ(dp.get("stage0.block1.attn.qkv.weight")->value, sp.get("stage0.block1.attn.qkv.weight")->value);
  for (int blk = 0; blk < 2; ++blk) {
    const std::string n = "stage3.block" + std::to_string(blk) + ".attn.proj.weight";
    EXPECT_EQ(dp.get(n)->value, sp.get(n)->value) << n;
  }
  // Blocks without a counterpart keep their fresh truncated-normal init.
  double sum = 0.0;
  double sq = 0.0;
  std::size_t count = 0;
  for (int blk = 2; blk < 9; ++blk) {
    const std::string n = "stage3.block" + std::to_string(blk) + ".mlp.fc1.weight";
    const Mat& v = dp.get(n)->value;
    EXPECT_EQ(v, fresh.at(n));
    sum += v.sum();
    sq += v.squaredNorm();
    count += static_cast<std::size_t>(v.size());
  }
  ASSERT_GE(count, 10000u);
  const double mean = sum / count;
  const double sd = std::sqrt(sq / count - mean * mean);
  EXPECT_NEAR(sd, 0.02, 0.002);
}

TEST(TransferInit, EmbedDimMismatch) {
  SemanticCodec src(CodecConfig::toy(kClasses, 8), 1);
  CodecConfig c = CodecConfig::toy(kClasses, 8);
  c.embed_dim = 48;
  SemanticCodec dst(c, 1);
  EXPECT_THROW(transfer_init(dst, make_checkpoint(src, 0, nullptr, nullptr)), ConfigError);
}

TEST(Adam, ConvergesOnQuadratic) {
  ParamStore ps;
  Rng rng(1);
  auto x = ps.create("x", Shape{1, 1, 1, 3}, ParamStore::Init::Zeros, rng);
  AdamConfig ac;
  ac.lr = 0.05;
  Adam opt(ps, ac);
  const Eigen::RowVector3d target(1.0, -2.0, 0.5);
  for (int i = 0; i < 2000; ++i) {
    ps.zero_grad();
    x->grad_buffer() = 2.0 * (x->value - target);
    opt.step();
  }
  EXPECT_LT((x->value - target).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Adam, WarmupAndClipping) {
  ParamStore ps;
  Rng rng(1);
  auto x = ps.create("x", Shape{1, 1, 1, 2}, ParamStore::Init::Zeros, rng);
  AdamConfig ac;
  ac.lr = 1.0;
  ac.warmup_iterations = 4;
  ac.clip_norm = 1.0;
  Adam opt(ps, ac);
  EXPECT_DOUBLE_EQ(opt.current_lr(), 0.25);
  x->grad_buffer() << 30.0, 40.0;
  EXPECT_DOUBLE_EQ(opt.step(), 50.0);
  // First Adam step moves each coordinate by lr regardless of scale.
  EXPECT_NEAR(x->value(0, 0), -0.25, 1e-6);
  EXPECT_DOUBLE_EQ(opt.current_lr(), 0.5);
  const auto st = opt.state();
  EXPECT_NEAR(st.at("m.x")(0, 0), 0.1 * 0.6, 1e-12);  // clipped gradient (0.6, 0.8)
}
