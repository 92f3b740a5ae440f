#include "semcom/ldpc.hpp"
#include "semcom/rng.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

namespace {

using namespace semcom;

// One codeword of the rate-2/3 code over BPSK/AWGN; range(0) is Eb/N0 in
// tenths of a dB. Low SNR runs the full iteration budget.
void BM_LdpcDecode(benchmark::State& state, LdpcAlgorithm algorithm) {
  const LdpcCode& code = ieee80211n_648_r23();
  const double ebn0 = std::pow(10.0, static_cast<double>(state.range(0)) / 100.0);
  const double sigma = std::sqrt(1.0 / (2.0 * code.rate() * ebn0));

  Rng rng(11);
  std::bernoulli_distribution bit(0.5);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<std::uint8_t> info(code.k());
  for (auto& b : info) b = bit(rng) ? 1 : 0;
  const auto cw = code.encode(info);
  std::vector<double> llr(cw.size());
  for (std::size_t i = 0; i < cw.size(); ++i) {
    const double y = (cw[i] ? -1.0 : 1.0) + noise(rng);
    llr[i] = 2.0 * y / (sigma * sigma);
  }

  for (auto _ : state) {
    auto r = ldpc_decode(llr, code, 50, algorithm);
    benchmark::DoNotOptimize(r.info.data());
  }
  state.SetItemsProcessed(state.iterations() * code.k());
}
BENCHMARK_CAPTURE(BM_LdpcDecode, min_sum, LdpcAlgorithm::MinSum)->Arg(10)->Arg(40)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(BM_LdpcDecode, sum_product, LdpcAlgorithm::SumProduct)->Arg(10)->Arg(40)->Unit(benchmark::kMicrosecond);

}  // namespace
