#include "semcom/channel.hpp"
#include "semcom/codec.hpp"
#include "semcom/data.hpp"
#include "semcom/trainer.hpp"

#include <benchmark/benchmark.h>

#include <numeric>

namespace {

using namespace semcom;

constexpr int kClasses = 5;

std::vector<Sample> batch(int n, int size) { return gen_synthetic(n, size, size, kClasses, 3); }

// Inference through the toy codec and a fading channel; range(0) is the
// image side, batch of 8.
void BM_ToyForward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  SemanticCodec model(CodecConfig::toy(kClasses, 32), 1);
  const auto samples = batch(8, size);
  std::vector<Image> images;
  for (const auto& s : samples) images.push_back(s.image);
  const Tensor x = images_to_tensor(images);
  ChannelConfig channel;
  channel.snr_db = 10.0;
  std::vector<std::uint64_t> seeds(8);
  std::iota(seeds.begin(), seeds.end(), 0);

  for (auto _ : state) {
    ag::NoGradGuard guard;
    auto r = forward(model, x, &channel, seeds, false);
    benchmark::DoNotOptimize(r.logits->value.data());
  }
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_ToyForward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

// One optimiser step with the default toy loss (OHEM, soft IoU, aux head).
void BM_ToyTrainStep(benchmark::State& state) {
  SemanticCodec model(CodecConfig::toy(kClasses, 32), 1);
  model.set_training(true);
  LossConfig loss;
  std::vector<bool> important(kClasses, false);
  important[synthetic_rare_class(kClasses)] = true;
  loss.weights = class_weights(std::vector<double>(kClasses, 1.0), important);
  loss.ohem_min_kept = 0.19;
  DatasetSpec aug;
  aug.crop_h = 64;
  aug.crop_w = 64;
  Trainer trainer(model, TrainConfig{}, ChannelConfig{}, loss, aug);
  const auto samples = batch(8, 64);
  std::vector<std::size_t> ids(8);
  std::iota(ids.begin(), ids.end(), 0);

  for (auto _ : state) {
    auto r = trainer.step(samples, ids);
    benchmark::DoNotOptimize(r.loss);
  }
}
BENCHMARK(BM_ToyTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
