#pragma once

#include "semcom/baseline.hpp"
#include "semcom/channel.hpp"
#include "semcom/codec.hpp"
#include "semcom/data.hpp"
#include "semcom/loss.hpp"
#include "semcom/metrics.hpp"
#include "semcom/optim.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace semcom {

struct ForwardResult {
  ag::Var logits;
  ag::Var aux_logits;  // null unless requested
  ag::Var compressed;  // aggregator output (channel input before normalisation)
};

// Full semantic pipeline on a batch. channel == nullptr is the ideal link
// (gain 1, no noise), still routed through the symbol mapping. Image b uses
// an RNG seeded with block_seeds[b]. Inputs are reflect-padded to multiples
// of 32 and the logits cropped back.
ForwardResult forward(const SemanticCodec& model, const Tensor& images, const ChannelConfig* channel,
                      std::span<const std::uint64_t> block_seeds, bool with_aux);

// Channel-free segmentation (no tape).
std::vector<LabelMap> segment(const SemanticCodec& model, std::span<const Image> images);

struct TrainConfig {
  int iterations = 2000;
  int batch_size = 8;
  AdamConfig adam;
  double snr_low_db = 1.0;
  double snr_high_db = 20.0;
  bool channel_enabled = true;
  bool augment = true;
  int checkpoint_every = 0;  // 0: only the final checkpoint
  int log_every = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct StepResult {
  double loss = 0.0;
  double ce = 0.0;
  double iou = 0.0;
  double aux = 0.0;
  double snr_db = 0.0;
  double grad_norm = 0.0;
};

class Trainer {
 public:
  Trainer(SemanticCodec& model, TrainConfig train, ChannelConfig channel, LossConfig loss, DatasetSpec augmentation);

  // One Adam update on `batch`; `batch_ids` only feed diagnostics.
  // Throws NumericError naming iteration, SNR and batch ids on a non-finite loss.
  StepResult step(std::span<const Sample> batch, std::span<const std::size_t> batch_ids);

  // Runs until `iterations` updates have been applied. Each log line is
  // "iter,loss,ce,iou_loss,aux,snr_db". Checkpoints go to checkpoint_dir when non-empty.
  void run(const Dataset& data, std::ostream* log, const std::filesystem::path& checkpoint_dir = {},
           const std::function<void(std::uint64_t, const StepResult&)>& on_step = {});

  std::uint64_t iteration() const { return iteration_; }
  Rng& rng() { return rng_; }
  Adam& optimizer() { return adam_; }
  SemanticCodec& model() { return model_; }

  // Resumes from a checkpoint written by this trainer.
  void restore(const std::filesystem::path& checkpoint);
  void save(const std::filesystem::path& checkpoint) const;

 private:
  std::vector<std::size_t> next_batch(std::size_t dataset_size);

  SemanticCodec& model_;
  TrainConfig train_;
  ChannelConfig channel_;
  LossConfig loss_;
  DatasetSpec augmentation_;
  Adam adam_;
  Rng rng_;
  std::uint64_t iteration_ = 0;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

inline const char* kTrainLogHeader = "iter,loss,ce,iou_loss,aux,snr_db";

struct EvalConfig {
  std::vector<double> snr_grid;
  int n_realizations = 1;
  int batch_size = 8;
  std::uint64_t seed = 0;
};

// Evaluation SNR grid: lo, lo + step, ... <= hi.
std::vector<double> snr_range(double lo, double hi, double step);

struct EvalPoint {
  double snr_db = 0.0;
  ConfusionMatrix cm;
};

// One confusion matrix per SNR point; channel.snr_db is overridden by the grid.
std::vector<EvalPoint> evaluate(const SemanticCodec& model, const Dataset& data, const ChannelConfig& channel,
                                const EvalConfig& eval);
// Ideal link (gain 1, no noise).
ConfusionMatrix evaluate_clean(const SemanticCodec& model, const Dataset& data, int batch_size);

struct BaselineEvalPoint {
  double snr_db = 0.0;
  ConfusionMatrix cm;
  double mean_r = 0.0;
  double decode_success = 0.0;
  double coded_ber = 0.0;
};

std::vector<BaselineEvalPoint> evaluate_baseline(const SemanticCodec& segmenter, const Dataset& data,
                                                 const ChannelConfig& channel, const BaselineConfig& baseline,
                                                 const EvalConfig& eval);

MiouCurve to_curve(const std::string& scheme, double velocity_kmh, double r, const std::vector<EvalPoint>& points,
                   const std::vector<int>& subset = {});

}  // namespace semcom
