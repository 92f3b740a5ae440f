#pragma once

#include "semcom/autograd.hpp"
#include "semcom/data.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace semcom {

struct LossConfig {
  double b1 = 1.0;
  double b2 = 0.4;
  bool use_iou = true;      // false gives plain (weighted) cross entropy
  bool use_weights = true;  // false sets every w_i to 1
  bool aux_enabled = true;
  bool ohem_enabled = true;
  double ohem_thresh = 0.7;
  // Values >= 1 are a pixel count; values in (0, 1) are a fraction of the valid pixels.
  double ohem_min_kept = 100000;
  bool ohem_on_iou = false;
  ClassWeights weights;

  std::vector<int> important_classes() const;
  void validate(int n_classes) const;
};

// Number of pixels OHEM must keep out of n_valid (floor of 1 when any pixel is valid).
std::size_t resolve_min_kept(double min_kept, std::size_t n_valid);

// Keeps valid pixels with confidence < thresh; tops up to min_kept with the
// lowest-confidence valid pixels (ties by index) when that selects too few.
std::vector<bool> ohem_mask(std::span<const double> confidence, const std::vector<bool>& valid, double thresh,
                            std::size_t min_kept);

// Value-level reference forms. probs is (pixels x n_cls), rows summing to 1.
double weighted_ce(const Mat& probs, std::span<const std::uint8_t> labels, std::span<const double> w,
                   const std::vector<bool>& mask);
double soft_iou_loss(const Mat& probs, std::span<const std::uint8_t> labels, std::span<const int> important);
inline double total_loss(double main, double aux, double b1, double b2) { return b1 * main + b2 * aux; }

// Per-pixel probability of the ground-truth class (0 for ignore pixels).
std::vector<double> gt_confidence(const Mat& probs, std::span<const std::uint8_t> labels);

struct HeadLoss {
  ag::Var loss;  // ce + iou
  double ce = 0.0;
  double iou = 0.0;
};

// Importance-aware loss of one head, differentiable in the logits.
// Labels are flattened in the row order of the (n,H,W,n_cls) logits.
HeadLoss importance_aware_loss(const ag::Var& logits, std::span<const std::uint8_t> labels, const LossConfig& cfg);

struct LossBreakdown {
  ag::Var total;
  double main = 0.0;
  double ce = 0.0;
  double iou = 0.0;
  double aux = 0.0;
};

// b1 * L(main) + b2 * L(aux); aux_logits may be null.
LossBreakdown combined_loss(const ag::Var& logits, const ag::Var& aux_logits, std::span<const std::uint8_t> labels,
                            const LossConfig& cfg);

std::vector<std::uint8_t> flatten_labels(std::span<const LabelMap> labels);

}  // namespace semcom
