#include "semcom/baseline.hpp"
#include "semcom/codec.hpp"
#include "semcom/data.hpp"
#include "semcom/error.hpp"
#include "semcom/jpeg.hpp"
#include "semcom/ldpc.hpp"
#include "semcom/qam.hpp"
#include "semcom/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

using namespace semcom;

namespace {

std::vector<std::uint8_t> random_bits(std::size_t n, Rng& rng) {
  std::vector<std::uint8_t> b(n);
  for (auto& v : b) v = static_cast<std::uint8_t>(rng() & 1);
  return b;
}

Image smooth_image(int h, int w) {
  Image img(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = 0.5 + 0.4 * std::sin(x * 0.2);
      img.at(y, x, 1) = 0.5 + 0.4 * std::cos(y * 0.15);
      img.at(y, x, 2) = static_cast<double>(x + y) / (h + w);
    }
  }
  return img;
}

}  // namespace

TEST(Qam, GrayMapAnchor) {
  const Qam q(4);
  const std::vector<std::uint8_t> bits{0, 0};
  const auto s = q.modulate(bits);
  EXPECT_NEAR(s[0].real(), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s[0].imag(), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Qam, UnitEnergyAndGrayNeighbours) {
  for (int order : {4, 16, 64, 256}) {
    const Qam q(order);
    const auto& pts = q.constellation();
    ASSERT_EQ(static_cast<int>(pts.size()), order);
    double e = 0.0;
    for (const auto& p : pts) e += std::norm(p);
    EXPECT_NEAR(e / order, 1.0, 1e-9);
    // Nearest neighbours differ in exactly one bit.
    double dmin = 1e9;
    for (int a = 0; a < order; ++a) {
      for (int b = a + 1; b < order; ++b) dmin = std::min(dmin, std::abs(pts[a] - pts[b]));
    }
    for (int a = 0; a < order; ++a) {
      for (int b = a + 1; b < order; ++b) {
        if (std::abs(std::abs(pts[a] - pts[b]) - dmin) < 1e-9) {
          EXPECT_EQ(std::popcount(static_cast<unsigned>(a ^ b)), 1);
        }
      }
    }
  }
  EXPECT_THROW(Qam(8), ConfigError);
}

TEST(Qam, NoiselessLoopback) {
  Rng rng(1);
  for (int order : {4, 16, 64, 256}) {
    const Qam q(order);
    const auto bits = random_bits(600 * q.bits_per_symbol(), rng);
    const auto s = q.modulate(bits);
    EXPECT_EQ(q.hard_decide(s), bits);
    const auto llr = q.demodulate(s, 0.01);
    for (std::size_t i = 0; i < bits.size(); ++i) EXPECT_EQ(llr[i] < 0.0, bits[i] == 1);
  }
}

TEST(Qam, ErasedSymbolsGiveZeroLlr) {
  const Qam q(16);
  const std::vector<Complex> s{Complex(0.3, 0.3), Complex(0.1, -0.9)};
  const std::vector<double> nv{std::numeric_limits<double>::infinity(), 0.1};
  const auto llr = q.demodulate(s, nv);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(llr[i], 0.0);
  EXPECT_NE(llr[4], 0.0);
}

TEST(Qam, BerOrdering) {
  ChannelConfig ch;
  ch.mode = ChannelMode::Awgn;
  ch.snr_db = 12.0;
  Rng rng(2);
  double prev = -1.0;
  for (int order : {4, 16, 64}) {
    const Qam q(order);
    const auto bits = random_bits(120000, rng);
    const auto t = transmit(q.modulate(bits), ch, rng);
    const auto hard = q.hard_decide(t.rx);
    std::size_t err = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) err += hard[i] != bits[i];
    const double ber = static_cast<double>(err) / bits.size();
    EXPECT_GE(ber, prev);
    prev = ber;
  }
}

TEST(Interleaver, PermutationAndInverse) {
  const auto perm = make_interleaver(1000, 5);
  std::vector<std::size_t> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_EQ(make_interleaver(1000, 5), perm);
  std::vector<int> data(1000);
  std::iota(data.begin(), data.end(), 0);
  EXPECT_EQ(deinterleave<int>(interleave<int>(data, perm), perm), data);
}

TEST(Ldpc, CodeParameters) {
  const LdpcCode& c = ieee80211n_648_r23();
  EXPECT_EQ(c.n(), 648);
  EXPECT_EQ(c.k(), 432);
  EXPECT_NEAR(c.rate(), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(static_cast<int>(c.check_vars().size()), 216);
}

TEST(Ldpc, EncodeParityAndZero) {
  const LdpcCode& c = ieee80211n_648_r23();
  const std::vector<std::uint8_t> zero(432, 0);
  const auto cz = c.encode(zero);
  EXPECT_TRUE(std::all_of(cz.begin(), cz.end(), [](auto b) { return b == 0; }));
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const auto info = random_bits(432, rng);
    const auto cw = c.encode(info);
    ASSERT_EQ(cw.size(), 648u);
    EXPECT_TRUE(c.parity_ok(cw));
    EXPECT_TRUE(std::equal(info.begin(), info.end(), cw.begin()));  // systematic
  }
}

TEST(Ldpc, NoiselessDecode) {
  const LdpcCode& c = ieee80211n_648_r23();
  Rng rng(5);
  const auto info = random_bits(432, rng);
  const auto cw = c.encode(info);
  std::vector<double> llr(648);
  for (int i = 0; i < 648; ++i) llr[i] = cw[i] ? -20.0 : 20.0;
  for (auto alg : {LdpcAlgorithm::MinSum, LdpcAlgorithm::SumProduct}) {
    const auto r = ldpc_decode(llr, c, 50, alg);
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.iterations, 1);
    EXPECT_EQ(r.info, info);
  }
}

TEST(Ldpc, CorrectsSingleFlip) {
  const LdpcCode& c = ieee80211n_648_r23();
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const auto info = random_bits(432, rng);
    const auto cw = c.encode(info);
    std::vector<double> llr(648);
    for (int i = 0; i < 648; ++i) llr[i] = cw[i] ? -8.0 : 8.0;
    const int flip = static_cast<int>(rng() % 648);
    llr[flip] = -llr[flip];
    const auto r = ldpc_decode(llr, c, 50);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.codeword, cw);
    EXPECT_TRUE(c.parity_ok(r.codeword));
  }
}

TEST(Ldpc, StreamPadsAndTruncates) {
  const LdpcCode& c = ieee80211n_648_r23();
  Rng rng(7);
  const auto info = random_bits(1000, rng);
  const auto coded = ldpc_encode_stream(info, c);
  EXPECT_EQ(coded.size(), 3u * 648u);
  std::vector<double> llr(coded.size());
  for (std::size_t i = 0; i < coded.size(); ++i) llr[i] = coded[i] ? -10.0 : 10.0;
  const auto r = ldpc_decode_stream(llr, info.size(), c, 20, LdpcAlgorithm::MinSum, 0.8);
  EXPECT_EQ(r.blocks, 3);
  EXPECT_EQ(r.failed_blocks, 0);
  EXPECT_EQ(r.info, info);
}

TEST(Ldpc, ParseAlgorithm) {
  EXPECT_EQ(parse_ldpc_algorithm("min_sum"), LdpcAlgorithm::MinSum);
  EXPECT_EQ(parse_ldpc_algorithm("sum_product"), LdpcAlgorithm::SumProduct);
  EXPECT_THROW(parse_ldpc_algorithm("viterbi"), ConfigError);
}

TEST(Jpeg, FlatGrayNearLossless) {
  const Image g = gray_image(64, 64);
  const JpegRound r = jpeg_round(g, 100);
  double d = 0.0;
  for (std::size_t i = 0; i < g.pixels.size(); ++i) d = std::max(d, std::abs(g.pixels[i] - r.reconstructed.pixels[i]));
  EXPECT_LE(d, 2.0 / 255.0 + 1e-12);
  EXPECT_EQ(r.reconstructed.h, 64);
  EXPECT_EQ(r.reconstructed.w, 64);
}

TEST(Jpeg, SizeFallsWithQuality) {
  const Image img = gen_synthetic(1, 64, 64, 5, 4)[0].image;
  EXPECT_GT(jpeg_encode(img, 95).size(), jpeg_encode(img, 10).size());
  const Image s = smooth_image(64, 96);
  EXPECT_GT(jpeg_encode(s, 95).size(), jpeg_encode(s, 10).size());
  const JpegRound r = jpeg_round(s, 50);
  EXPECT_EQ(r.reconstructed.h, 64);
  EXPECT_EQ(r.reconstructed.w, 96);
}

TEST(Jpeg, CorruptStreamRejected) {
  auto bytes = jpeg_encode(smooth_image(32, 32), 75);
  EXPECT_TRUE(jpeg_decode(bytes, 32, 32).has_value());
  EXPECT_FALSE(jpeg_decode(bytes, 32, 64).has_value());
  std::vector<std::uint8_t> junk(bytes.size(), 0x5a);
  EXPECT_FALSE(jpeg_decode(junk).has_value());
  bytes.resize(bytes.size() / 3);
  EXPECT_FALSE(jpeg_decode(bytes, 32, 32).has_value());
}

TEST(Jpeg, QualityForBudget) {
  const Image img = gen_synthetic(1, 64, 64, 5, 4)[0].image;
  const std::size_t budget = jpeg_encode(img, 40).size();
  const int q = jpeg_quality_for_budget(img, budget);
  EXPECT_LE(jpeg_encode(img, q).size(), budget);
  if (q < 100) EXPECT_GT(jpeg_encode(img, q + 1).size(), budget);
}

TEST(Baseline, NoiselessLinkIsTransparent) {
  const Image img = gen_synthetic(1, 64, 64, 5, 4)[0].image;
  SemanticCodec seg(CodecConfig::toy(5, 32), 3);
  BaselineConfig cfg;
  ChannelConfig ch;
  ch.mode = ChannelMode::Awgn;
  ch.snr_db = 300.0;
  Rng rng(1);
  const BaselineResult r = run_baseline(img, cfg, ch, rng, &seg);
  const JpegRound jr = jpeg_round(img, cfg.jpeg_quality);
  EXPECT_TRUE(r.stats.jpeg_decoded);
  EXPECT_EQ(r.stats.coded_ber, 0.0);
  EXPECT_EQ(r.received, jr.reconstructed);
  EXPECT_EQ(r.labels, segment(seg, std::span<const Image>(&jr.reconstructed, 1)).front());
  EXPECT_NEAR(r.stats.r_achieved, 64.0 * 64 * 3 / jr.bytes.size(), 1e-12);
}

TEST(Baseline, FadingNoiselessWithInterleaverAndOrders) {
  const Image img = smooth_image(32, 32);
  ChannelConfig ch;
  ch.snr_db = 300.0;
  for (int order : {4, 16, 64}) {
    BaselineConfig cfg;
    cfg.qam_order = order;
    Rng rng(order);
    const LinkResult r = transmit_image(img, cfg, ch, rng);
    EXPECT_TRUE(r.stats.jpeg_decoded) << order;
    EXPECT_EQ(r.received, jpeg_round(img, cfg.jpeg_quality).reconstructed);
  }
}

TEST(Baseline, LowSnrFallsBackToGray) {
  const Image img = gen_synthetic(1, 64, 64, 5, 5)[0].image;
  SemanticCodec seg(CodecConfig::toy(5, 32), 3);
  BaselineConfig cfg;
  ChannelConfig ch;
  ch.mode = ChannelMode::Awgn;
  ch.snr_db = -5.0;
  int failures = 0;
  for (int t = 0; t < 5; ++t) {
    Rng rng(t);
    const BaselineResult r = run_baseline(img, cfg, ch, rng, &seg);
    EXPECT_EQ(r.labels.h, 64);
    if (!r.stats.jpeg_decoded) {
      ++failures;
      EXPECT_EQ(r.received, gray_image(64, 64));
    }
    EXPECT_GT(r.stats.channel_ber, 0.05);
  }
  EXPECT_GE(failures, 4);
}

TEST(Baseline, TargetRatioAndErrors) {
  const Image img = gen_synthetic(1, 64, 64, 5, 4)[0].image;
  BaselineConfig cfg;
  cfg.target_r = 8.0;
  ChannelConfig ch;
  ch.snr_db = 300.0;
  Rng rng(1);
  const LinkResult r = transmit_image(img, cfg, ch, rng);
  EXPECT_GE(r.stats.r_achieved, 8.0);
  EXPECT_THROW(run_baseline(img, cfg, ch, rng, nullptr), ConfigError);
  cfg.qam_order = 8;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
