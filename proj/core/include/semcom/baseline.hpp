#pragma once

#include "semcom/channel.hpp"
#include "semcom/ldpc.hpp"
#include "semcom/types.hpp"

#include <cstdint>
#include <string>

namespace semcom {

class SemanticCodec;

// JPEG -> LDPC -> interleaver -> QAM -> channel -> ZF -> max-log demapper ->
// LDPC decoder -> JPEG decoder -> segmenter.
struct BaselineConfig {
  int jpeg_quality = 75;
  double target_r = 0.0;  // > 0: choose the highest quality with raw/jpeg bytes >= target_r
  int qam_order = 4;
  int bp_iterations = 50;
  LdpcAlgorithm decoder = LdpcAlgorithm::MinSum;
  double minsum_scale = 0.8;
  bool interleave = true;
  std::string segmenter;  // checkpoint path, used by the command-line tools

  void validate() const;
};

struct BaselineStats {
  std::size_t jpeg_bytes = 0;
  int jpeg_quality = 0;
  double r_achieved = 0.0;
  double channel_ber = 0.0;  // hard decisions before LDPC decoding
  double coded_ber = 0.0;    // information bits after LDPC decoding
  int ldpc_blocks = 0;
  int ldpc_failures = 0;
  bool jpeg_decoded = false;
};

struct LinkResult {
  Image received;  // JPEG reconstruction, or mid-gray on decode failure
  BaselineStats stats;
};

// Transmission part of the pipeline: everything up to the decoded image.
LinkResult transmit_image(const Image& img, const BaselineConfig& cfg, const ChannelConfig& channel, Rng& rng);

struct BaselineResult {
  LabelMap labels;
  Image received;
  BaselineStats stats;
};

// Full pipeline. segmenter must be non-null (ConfigError otherwise).
BaselineResult run_baseline(const Image& img, const BaselineConfig& cfg, const ChannelConfig& channel, Rng& rng,
                            const SemanticCodec* segmenter);

Image gray_image(int h, int w);

}  // namespace semcom
