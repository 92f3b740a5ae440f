#include "semcom/baseline.hpp"

#include "semcom/error.hpp"
#include "semcom/jpeg.hpp"
#include "semcom/qam.hpp"
#include "semcom/trainer.hpp"

#include <algorithm>

namespace semcom {

void BaselineConfig::validate() const {
  if (jpeg_quality < 1 || jpeg_quality > 100) throw ConfigError("baseline.jpeg_quality must be in [1, 100]");
  if (qam_order != 4 && qam_order != 16 && qam_order != 64) throw ConfigError("baseline.qam_order must be 4, 16 or 64");
  if (bp_iterations < 1) throw ConfigError("baseline.bp_iterations must be >= 1");
  if (!(minsum_scale > 0 && minsum_scale <= 1)) throw ConfigError("baseline.minsum_scale must be in (0, 1]");
  if (target_r < 0) throw ConfigError("baseline.target_r must be >= 0");
}

Image gray_image(int h, int w) {
  Image img(h, w);
  std::fill(img.pixels.begin(), img.pixels.end(), 128.0 / 255.0);
  return img;
}

LinkResult transmit_image(const Image& img, const BaselineConfig& cfg, const ChannelConfig& channel, Rng& rng) {
  cfg.validate();
  const LdpcCode& code = ieee80211n_648_r23();
  const Qam qam(cfg.qam_order);
  LinkResult out;
  auto& st = out.stats;

  const std::size_t raw_bytes = static_cast<std::size_t>(img.h) * img.w * 3;
  st.jpeg_quality = cfg.jpeg_quality;
  if (cfg.target_r > 0) {
    st.jpeg_quality = jpeg_quality_for_budget(img, static_cast<std::size_t>(static_cast<double>(raw_bytes) / cfg.target_r));
  }
  const auto bytes = jpeg_encode(img, st.jpeg_quality);
  st.jpeg_bytes = bytes.size();
  st.r_achieved = static_cast<double>(raw_bytes) / static_cast<double>(bytes.size());

  std::vector<std::uint8_t> info(bytes.size() * 8);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    for (int b = 0; b < 8; ++b) info[i * 8 + b] = (bytes[i] >> (7 - b)) & 1;
  }
  std::vector<std::uint8_t> coded = ldpc_encode_stream(info, code);
  const std::size_t coded_bits = coded.size();
  std::vector<std::size_t> perm;
  if (cfg.interleave) {
    perm = make_interleaver(coded_bits, rng());
    coded = interleave<std::uint8_t>(coded, perm);
  }
  const std::size_t bps = qam.bits_per_symbol();
  coded.resize((coded_bits + bps - 1) / bps * bps, 0);

  const auto tx = qam.modulate(coded);
  const Transmission t = transmit(tx, channel, rng);
  const Equalized eq = equalize(t.rx, t.realization, channel.equalizer, channel.mode);
  std::vector<double> llr = qam.demodulate(eq.symbols, eq.noise_var);
  llr.resize(coded_bits);

  std::size_t channel_errors = 0;
  for (std::size_t i = 0; i < coded_bits; ++i) channel_errors += (llr[i] < 0.0) != (coded[i] == 1);
  st.channel_ber = static_cast<double>(channel_errors) / static_cast<double>(coded_bits);

  if (cfg.interleave) llr = deinterleave<double>(llr, perm);
  const auto dec = ldpc_decode_stream(llr, info.size(), code, cfg.bp_iterations, cfg.decoder, cfg.minsum_scale);
  st.ldpc_blocks = dec.blocks;
  st.ldpc_failures = dec.failed_blocks;
  std::size_t info_errors = 0;
  for (std::size_t i = 0; i < info.size(); ++i) info_errors += dec.info[i] != info[i];
  st.coded_ber = static_cast<double>(info_errors) / static_cast<double>(info.size());

  std::vector<std::uint8_t> rx_bytes(bytes.size(), 0);
  for (std::size_t i = 0; i < rx_bytes.size(); ++i) {
    std::uint8_t v = 0;
    for (int b = 0; b < 8; ++b) v = static_cast<std::uint8_t>((v << 1) | dec.info[i * 8 + b]);
    rx_bytes[i] = v;
  }
  auto decoded = jpeg_decode(rx_bytes, img.h, img.w);
  st.jpeg_decoded = decoded.has_value();
  out.received = decoded ? std::move(*decoded) : gray_image(img.h, img.w);
  return out;
}

BaselineResult run_baseline(const Image& img, const BaselineConfig& cfg, const ChannelConfig& channel, Rng& rng,
                            const SemanticCodec* segmenter) {
  if (!segmenter) throw ConfigError("baseline: no segmenter checkpoint loaded");
  LinkResult link = transmit_image(img, cfg, channel, rng);
  BaselineResult res;
  res.labels = segment(*segmenter, std::span<const Image>(&link.received, 1)).front();
  res.received = std::move(link.received);
  res.stats = link.stats;
  return res;
}

}  // namespace semcom
