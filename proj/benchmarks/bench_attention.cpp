#include "semcom/attention.hpp"
#include "semcom/rng.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

namespace {

using namespace semcom;

ag::Var total(const ag::Var& x) {
  return ag::make_result(Shape{1, 1, 1, 1}, Mat::Constant(1, 1, x->value.sum()), {x}, [](ag::Node& self) {
    const auto& in = self.parents[0]->value;
    self.parents[0]->add_grad(Mat::Constant(in.rows(), in.cols(), self.grad(0, 0)));
  });
}

// Window attention over an 8-image batch; range(0) is the window size,
// range(1) the channel count. Counts forward and backward.
void BM_WindowAttention(benchmark::State& state) {
  const int window = static_cast<int>(state.range(0));
  const int c = static_cast<int>(state.range(1));
  const int heads = c / 24;
  const int grid = 4 * window;
  const WindowPlan plan = make_window_plan(8, grid, grid, window, 0);
  const int rows = plan.total_windows() * plan.tokens_per_window();

  Rng rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat qkv(rows, 3 * c);
  for (Eigen::Index i = 0; i < qkv.size(); ++i) qkv.data()[i] = normal(rng);
  const int table = (2 * window - 1) * (2 * window - 1);
  Mat bias(table, heads);
  for (Eigen::Index i = 0; i < bias.size(); ++i) bias.data()[i] = 0.02 * normal(rng);

  AttentionLayout layout;
  layout.window = window;
  layout.heads = heads;
  layout.windows_per_image = plan.windows_per_image;
  layout.scale = 1.0 / std::sqrt(static_cast<double>(c / heads));
  layout.rel_index = relative_position_index(window);

  for (auto _ : state) {
    auto x = ag::leaf(Tensor(Shape{1, 1, rows, 3 * c}, qkv), true);
    auto b = ag::leaf(Tensor(Shape{1, 1, table, heads}, bias), true);
    auto out = window_attention(x, b, layout);
    ag::backward(total(out));
    benchmark::DoNotOptimize(x->grad.data());
  }
  state.SetItemsProcessed(state.iterations() * rows);
}
BENCHMARK(BM_WindowAttention)->Args({4, 24})->Args({4, 96})->Args({7, 96})->Unit(benchmark::kMillisecond);

}  // namespace
