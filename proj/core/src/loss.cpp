#include "semcom/loss.hpp"

#include "semcom/codec.hpp"
#include "semcom/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace semcom {

namespace {

constexpr double kLogClamp = 1e-12;

std::vector<double> effective_weights(const LossConfig& cfg, int n_cls) {
  std::vector<double> w(n_cls, 1.0);
  if (cfg.use_weights && !cfg.weights.w.empty()) {
    if (static_cast<int>(cfg.weights.w.size()) != n_cls) throw ConfigError("loss weights do not match class count");
    w = cfg.weights.w;
  }
  return w;
}

void check_labels(const Mat& probs, std::span<const std::uint8_t> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != probs.rows()) {
    throw ContractError("loss: " + std::to_string(labels.size()) + " labels for " + std::to_string(probs.rows()) +
                        " pixels");
  }
  for (auto l : labels) {
    if (l != kIgnoreLabel && l >= probs.cols()) throw DataError("loss: label " + std::to_string(l) + " out of range");
  }
}

// dL/dlogits from dL/dprobs through a row-wise softmax.
Mat softmax_backward(const Mat& probs, const Mat& gp) {
  Mat out = probs.array() * gp.array();
  const Eigen::VectorXd dots = out.rowwise().sum();
  out.array() -= probs.array().colwise() * dots.array();
  return out;
}

void add_ce_grad(const Mat& probs, std::span<const std::uint8_t> labels, std::span<const double> w,
                 const std::vector<bool>& mask, Mat& gp) {
  const auto n = std::count(mask.begin(), mask.end(), true);
  if (n == 0) return;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    if (!mask[r]) continue;
    const double p = probs(r, labels[r]);
    if (p > kLogClamp) gp(r, labels[r]) -= w[labels[r]] / (static_cast<double>(n) * p);
  }
}

void add_iou_grad(const Mat& probs, std::span<const std::uint8_t> labels, std::span<const int> important, Mat& gp) {
  std::vector<double> inter(important.size(), 0.0);
  std::vector<double> uni(important.size(), 0.0);
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    if (labels[r] == kIgnoreLabel) continue;
    for (std::size_t k = 0; k < important.size(); ++k) {
      const double p = probs(r, important[k]);
      const double g = labels[r] == important[k] ? 1.0 : 0.0;
      inter[k] += p * g;
      uni[k] += p + g - p * g;
    }
  }
  const auto used = std::count_if(uni.begin(), uni.end(), [](double u) { return u > 0.0; });
  if (used == 0) return;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    if (labels[r] == kIgnoreLabel) continue;
    for (std::size_t k = 0; k < important.size(); ++k) {
      if (!(uni[k] > 0.0)) continue;
      const double g = labels[r] == important[k] ? 1.0 : 0.0;
      // d(1 - I/U)/dp = -(g U - I (1 - g)) / U^2
      gp(r, important[k]) -= (g * uni[k] - inter[k] * (1.0 - g)) / (uni[k] * uni[k] * static_cast<double>(used));
    }
  }
}

}  // namespace

std::vector<int> LossConfig::important_classes() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < weights.important.size(); ++i) {
    if (weights.important[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

void LossConfig::validate(int n_classes) const {
  if (b1 < 0 || b2 < 0) throw ConfigError("loss.b1 and loss.b2 must be >= 0");
  if (!(ohem_thresh > 0 && ohem_thresh <= 1)) throw ConfigError("loss.ohem.thresh must be in (0, 1]");
  if (!(ohem_min_kept > 0)) throw ConfigError("loss.ohem.min_kept must be > 0");
  if (!weights.w.empty() && static_cast<int>(weights.w.size()) != n_classes) {
    throw ConfigError("loss weights have " + std::to_string(weights.w.size()) + " entries for " +
                      std::to_string(n_classes) + " classes");
  }
  if (use_iou && important_classes().empty()) throw ConfigError("loss.important must name at least one class");
}

std::size_t resolve_min_kept(double min_kept, std::size_t n_valid) {
  if (n_valid == 0) return 0;
  double k = min_kept < 1.0 ? std::floor(min_kept * static_cast<double>(n_valid)) : std::floor(min_kept);
  k = std::max(k, 1.0);
  return std::min(static_cast<std::size_t>(k), n_valid);
}

std::vector<bool> ohem_mask(std::span<const double> confidence, const std::vector<bool>& valid, double thresh,
                            std::size_t min_kept) {
  if (valid.size() != confidence.size()) throw ContractError("ohem_mask: size mismatch");
  std::vector<bool> mask(confidence.size(), false);
  std::vector<std::size_t> idx;
  std::size_t selected = 0;
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    if (!valid[i]) continue;
    idx.push_back(i);
    if (confidence[i] < thresh) {
      mask[i] = true;
      ++selected;
    }
  }
  const std::size_t keep = std::min(std::max<std::size_t>(min_kept, 1), idx.size());
  if (selected >= keep) return mask;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return confidence[a] < confidence[b]; });
  std::fill(mask.begin(), mask.end(), false);
  for (std::size_t j = 0; j < keep; ++j) mask[idx[j]] = true;
  return mask;
}

double weighted_ce(const Mat& probs, std::span<const std::uint8_t> labels, std::span<const double> w,
                   const std::vector<bool>& mask) {
  check_labels(probs, labels);
  double sum = 0.0;
  std::size_t n = 0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    if (!mask[r] || labels[r] == kIgnoreLabel) continue;
    sum += -w[labels[r]] * std::log(std::max(probs(r, labels[r]), kLogClamp));
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double soft_iou_loss(const Mat& probs, std::span<const std::uint8_t> labels, std::span<const int> important) {
  if (important.empty()) throw ConfigError("soft_iou_loss: empty important set");
  check_labels(probs, labels);
  double sum = 0.0;
  int used = 0;
  for (int cls : important) {
    double inter = 0.0;
    double uni = 0.0;
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      if (labels[r] == kIgnoreLabel) continue;
      const double p = probs(r, cls);
      const double g = labels[r] == cls ? 1.0 : 0.0;
      inter += p * g;
      uni += p + g - p * g;
    }
    if (uni > 0.0) {
      sum += 1.0 - inter / uni;
      ++used;
    }
  }
  return used == 0 ? 0.0 : sum / used;
}

std::vector<double> gt_confidence(const Mat& probs, std::span<const std::uint8_t> labels) {
  std::vector<double> c(labels.size(), 0.0);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] != kIgnoreLabel) c[r] = probs(static_cast<Eigen::Index>(r), labels[r]);
  }
  return c;
}

HeadLoss importance_aware_loss(const ag::Var& logits, std::span<const std::uint8_t> labels, const LossConfig& cfg) {
  const int n_cls = logits->shape.c;
  auto probs = std::make_shared<Mat>(softmax_rows(logits->value));
  check_labels(*probs, labels);
  const auto w = effective_weights(cfg, n_cls);

  std::vector<bool> valid(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) valid[r] = labels[r] != kIgnoreLabel;
  std::vector<bool> mask = valid;
  if (cfg.ohem_enabled) {
    const auto conf = gt_confidence(*probs, labels);
    const auto n_valid = static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
    mask = ohem_mask(conf, valid, cfg.ohem_thresh, resolve_min_kept(cfg.ohem_min_kept, n_valid));
  }

  HeadLoss out;
  out.ce = weighted_ce(*probs, labels, w, mask);
  std::vector<int> important;
  if (cfg.use_iou) {
    important = cfg.important_classes();
    if (cfg.ohem_on_iou) {
      std::vector<std::uint8_t> masked(labels.begin(), labels.end());
      for (std::size_t r = 0; r < masked.size(); ++r) {
        if (!mask[r]) masked[r] = kIgnoreLabel;
      }
      out.iou = soft_iou_loss(*probs, masked, important);
    } else {
      out.iou = soft_iou_loss(*probs, labels, important);
    }
  }

  auto lab = std::make_shared<std::vector<std::uint8_t>>(labels.begin(), labels.end());
  Mat value(1, 1);
  value(0, 0) = out.ce + out.iou;
  const bool iou_masked = cfg.ohem_on_iou;
  out.loss = ag::make_result(
      Shape{1, 1, 1, 1}, std::move(value), {logits},
      [probs, lab, w, mask, important, iou_masked](ag::Node& self) {
        const double g = self.grad(0, 0);
        Mat gp = Mat::Zero(probs->rows(), probs->cols());
        add_ce_grad(*probs, *lab, w, mask, gp);
        if (!important.empty()) {
          if (iou_masked) {
            std::vector<std::uint8_t> masked = *lab;
            for (std::size_t r = 0; r < masked.size(); ++r) {
              if (!mask[r]) masked[r] = kIgnoreLabel;
            }
            add_iou_grad(*probs, masked, important, gp);
          } else {
            add_iou_grad(*probs, *lab, important, gp);
          }
        }
        self.parents[0]->add_grad(g * softmax_backward(*probs, gp));
      });
  return out;
}

LossBreakdown combined_loss(const ag::Var& logits, const ag::Var& aux_logits, std::span<const std::uint8_t> labels,
                            const LossConfig& cfg) {
  LossBreakdown out;
  HeadLoss main = importance_aware_loss(logits, labels, cfg);
  out.main = ag::scalar(main.loss);
  out.ce = main.ce;
  out.iou = main.iou;
  if (aux_logits && cfg.aux_enabled && cfg.b2 > 0.0) {
    HeadLoss aux = importance_aware_loss(aux_logits, labels, cfg);
    out.aux = ag::scalar(aux.loss);
    const std::vector<ag::Var> terms{main.loss, aux.loss};
    const std::vector<double> coeffs{cfg.b1, cfg.b2};
    out.total = ag::weighted_sum(terms, coeffs);
  } else {
    out.total = ag::scale(main.loss, cfg.b1);
  }
  return out;
}

std::vector<std::uint8_t> flatten_labels(std::span<const LabelMap> labels) {
  std::vector<std::uint8_t> out;
  for (const auto& l : labels) out.insert(out.end(), l.labels.begin(), l.labels.end());
  return out;
}

}  // namespace semcom
