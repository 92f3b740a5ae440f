#include "semcom/trainer.hpp"

#include "semcom/checkpoint.hpp"
#include "semcom/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace semcom {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kChannelStream = 1;
constexpr std::uint64_t kEpochStream = 2;
constexpr std::uint64_t kAugmentStream = 3;
constexpr std::uint64_t kSnrStream = 4;

std::vector<SymbolAffine> identity_maps(const ag::Var& z) {
  const std::size_t reals = static_cast<std::size_t>(z->shape.h) * z->shape.w * z->shape.c;
  const std::size_t k = (reals + 1) / 2;
  SymbolAffine id;
  id.gain.assign(k, Complex(1.0, 0.0));
  id.offset.assign(k, Complex(0.0, 0.0));
  return std::vector<SymbolAffine>(z->shape.n, id);
}

std::vector<Sample> load_batch(const Dataset& data, std::span<const std::size_t> ids) {
  std::vector<Sample> out;
  out.reserve(ids.size());
  for (auto i : ids) out.push_back(data.get(i));
  return out;
}

std::vector<Image> images_of(std::span<const Sample> batch) {
  std::vector<Image> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(s.image);
  return out;
}

std::vector<LabelMap> labels_of(std::span<const Sample> batch) {
  std::vector<LabelMap> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(s.label);
  return out;
}

}  // namespace

ForwardResult forward(const SemanticCodec& model, const Tensor& images, const ChannelConfig* channel,
                      std::span<const std::uint64_t> block_seeds, bool with_aux) {
  const int h = images.shape.h;
  const int w = images.shape.w;
  ag::Var x = pad_reflect(ag::constant(images), 32);
  const FeaturePyramid pyr = model.encode(x);
  ForwardResult out;
  out.compressed = model.aggregate(pyr);
  std::vector<SymbolAffine> maps;
  if (channel) {
    if (static_cast<int>(block_seeds.size()) != images.shape.n) throw ContractError("forward: one seed per image required");
    const Tensor z(out.compressed->shape, out.compressed->value);
    for (int b = 0; b < images.shape.n; ++b) {
      Rng rng(block_seeds[b]);
      const TxSymbols tx = to_symbols(z, b);
      const Transmission t = transmit(tx.symbols, *channel, rng);
      maps.push_back(link_affine(t.realization, channel->equalizer, channel->mode));
    }
  } else {
    maps = identity_maps(out.compressed);
  }
  const ag::Var received = symbol_channel(out.compressed, maps);
  out.logits = model.reconstruct(model.decode_features(received), h, w);
  if (with_aux) out.aux_logits = model.aux_decode(pyr.f[2], h, w);
  return out;
}

std::vector<LabelMap> segment(const SemanticCodec& model, std::span<const Image> images) {
  ag::NoGradGuard guard;
  const ForwardResult r = forward(model, images_to_tensor(images), nullptr, {}, false);
  return argmax_labels(ag::to_tensor(r.logits));
}

void TrainConfig::validate() const {
  if (iterations < 0) throw ConfigError("train.iterations must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(snr_low_db <= snr_high_db)) throw ConfigError("train.snr_low_db must be <= train.snr_high_db");
  if (!(adam.lr > 0)) throw ConfigError("train.lr must be > 0");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  adam.validate();
}

Trainer::Trainer(SemanticCodec& model, TrainConfig train, ChannelConfig channel, LossConfig loss,
                 DatasetSpec augmentation)
    : model_(model),
      train_(std::move(train)),
      channel_(channel),
      loss_(std::move(loss)),
      augmentation_(std::move(augmentation)),
      adam_(model.params(), train_.adam),
      rng_(derive_seed(train_.seed, {0})) {
  train_.adam.validate();
  if (train_.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  channel_.validate();
  loss_.validate(model.config().n_classes);
}

std::vector<std::size_t> Trainer::next_batch(std::size_t n) {
  if (n == 0) throw ConfigError("training dataset is empty");
  std::vector<std::size_t> ids;
  const std::uint64_t first = iteration_ * static_cast<std::uint64_t>(train_.batch_size);
  for (int b = 0; b < train_.batch_size; ++b) {
    const std::uint64_t g = first + b;
    const std::uint64_t epoch = g / n;
    if (order_.size() != n || cursor_ != epoch) {
      order_.resize(n);
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      Rng r = make_rng(train_.seed, {kEpochStream, epoch});
      std::shuffle(order_.begin(), order_.end(), r);
      cursor_ = epoch;
    }
    ids.push_back(order_[g % n]);
  }
  return ids;
}

StepResult Trainer::step(std::span<const Sample> batch, std::span<const std::size_t> batch_ids) {
  if (batch.empty()) throw ContractError("train_step: empty batch");
  StepResult res;
  Rng snr_rng = make_rng(train_.seed, {kSnrStream, iteration_});
  res.snr_db = uniform(snr_rng, train_.snr_low_db, train_.snr_high_db);

  std::vector<Sample> aug;
  aug.reserve(batch.size());
  Rng aug_rng = make_rng(train_.seed, {kAugmentStream, iteration_});
  for (const auto& s : batch) aug.push_back(train_.augment ? augment(s, augmentation_, aug_rng) : s);

  ChannelConfig ch = channel_;
  ch.snr_db = res.snr_db;
  std::vector<std::uint64_t> seeds(aug.size());
  for (std::size_t b = 0; b < aug.size(); ++b) seeds[b] = derive_seed(train_.seed, {kChannelStream, iteration_, b});

  const bool with_aux = loss_.aux_enabled && loss_.b2 > 0.0;
  const bool was_training = model_.training();
  model_.set_training(true);
  model_.params().zero_grad();
  const auto images = images_of(aug);
  const auto labels = flatten_labels(labels_of(aug));
  const ForwardResult fw = forward(model_, images_to_tensor(images), train_.channel_enabled ? &ch : nullptr, seeds, with_aux);
  const LossBreakdown lb = combined_loss(fw.logits, fw.aux_logits, labels, loss_);
  model_.set_training(was_training);

  res.loss = ag::scalar(lb.total);
  res.ce = lb.ce;
  res.iou = lb.iou;
  res.aux = lb.aux;
  if (!std::isfinite(res.loss)) {
    std::ostringstream msg;
    msg << "non-finite loss at iteration " << iteration_ + 1 << ", snr_db " << res.snr_db << ", batch ids [";
    for (std::size_t i = 0; i < batch_ids.size(); ++i) msg << (i ? "," : "") << batch_ids[i];
    msg << "]";
    throw NumericError(msg.str());
  }
  ag::backward(lb.total);
  res.grad_norm = adam_.step();
  ++iteration_;
  return res;
}

void Trainer::run(const Dataset& data, std::ostream* log, const std::filesystem::path& checkpoint_dir,
                  const std::function<void(std::uint64_t, const StepResult&)>& on_step) {
  train_.validate();
  while (iteration_ < static_cast<std::uint64_t>(train_.iterations)) {
    const auto ids = next_batch(data.size());
    const auto batch = load_batch(data, ids);
    const StepResult r = step(batch, ids);
    if (log && train_.log_every > 0 && (iteration_ % train_.log_every == 0 || iteration_ == 1)) {
      *log << iteration_ << ',' << r.loss << ',' << r.ce << ',' << r.iou << ',' << r.aux << ',' << r.snr_db << '\n';
    }
    if (on_step) on_step(iteration_, r);
    if (!checkpoint_dir.empty() && train_.checkpoint_every > 0 && iteration_ % train_.checkpoint_every == 0 &&
        iteration_ < static_cast<std::uint64_t>(train_.iterations)) {
      save(checkpoint_dir / ("iter_" + std::to_string(iteration_) + ".ckpt"));
    }
  }
  if (!checkpoint_dir.empty()) save(checkpoint_dir / "final.ckpt");
}

void Trainer::save(const std::filesystem::path& path) const {
  save_checkpoint(path, make_checkpoint(model_, iteration_, &rng_, &adam_));
}

void Trainer::restore(const std::filesystem::path& path) {
  const Checkpoint ck = load_checkpoint(path);
  apply_checkpoint(model_, ck);
  if (!ck.optimizer.empty()) adam_.set_state(ck.optimizer, ck.optimizer_steps);
  if (!ck.rng_state.empty()) set_rng_state(rng_, ck.rng_state);
  iteration_ = ck.iteration;
}

std::vector<double> snr_range(double lo, double hi, double step) {
  if (!(step > 0) || hi < lo) throw ConfigError("invalid SNR range");
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double v = lo + i * step;
    if (v > hi + 1e-9) break;
    out.push_back(v);
  }
  return out;
}

std::vector<EvalPoint> evaluate(const SemanticCodec& model, const Dataset& data, const ChannelConfig& channel,
                                const EvalConfig& eval) {
  if (eval.snr_grid.empty()) throw ConfigError("evaluate: empty SNR grid");
  if (eval.n_realizations < 1 || eval.batch_size < 1) throw ConfigError("evaluate: invalid realizations/batch size");
  ag::NoGradGuard guard;
  std::vector<EvalPoint> out;
  for (std::size_t si = 0; si < eval.snr_grid.size(); ++si) {
    ChannelConfig ch = channel;
    ch.snr_db = eval.snr_grid[si];
    EvalPoint pt{ch.snr_db, ConfusionMatrix(model.config().n_classes)};
    for (std::size_t start = 0; start < data.size(); start += eval.batch_size) {
      const std::size_t end = std::min(data.size(), start + eval.batch_size);
      std::vector<std::size_t> ids(end - start);
      std::iota(ids.begin(), ids.end(), start);
      const auto batch = load_batch(data, ids);
      const Tensor images = images_to_tensor(images_of(batch));
      for (int r = 0; r < eval.n_realizations; ++r) {
        std::vector<std::uint64_t> seeds;
        for (auto i : ids) seeds.push_back(derive_seed(eval.seed, {si, i, static_cast<std::uint64_t>(r)}));
        const ForwardResult fw = forward(model, images, &ch, seeds, false);
        const auto pred = argmax_labels(ag::to_tensor(fw.logits));
        for (std::size_t b = 0; b < batch.size(); ++b) pt.cm.update(pred[b], batch[b].label);
      }
    }
    out.push_back(std::move(pt));
  }
  return out;
}

ConfusionMatrix evaluate_clean(const SemanticCodec& model, const Dataset& data, int batch_size) {
  if (batch_size < 1) throw ConfigError("evaluate: batch size must be >= 1");
  ConfusionMatrix cm(model.config().n_classes);
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    std::vector<std::size_t> ids(end - start);
    std::iota(ids.begin(), ids.end(), start);
    const auto batch = load_batch(data, ids);
    const auto pred = segment(model, images_of(batch));
    for (std::size_t b = 0; b < batch.size(); ++b) cm.update(pred[b], batch[b].label);
  }
  return cm;
}

std::vector<BaselineEvalPoint> evaluate_baseline(const SemanticCodec& segmenter, const Dataset& data,
                                                 const ChannelConfig& channel, const BaselineConfig& baseline,
                                                 const EvalConfig& eval) {
  if (eval.snr_grid.empty()) throw ConfigError("evaluate: empty SNR grid");
  std::vector<BaselineEvalPoint> out;
  for (std::size_t si = 0; si < eval.snr_grid.size(); ++si) {
    ChannelConfig ch = channel;
    ch.snr_db = eval.snr_grid[si];
    BaselineEvalPoint pt{ch.snr_db, ConfusionMatrix(segmenter.config().n_classes)};
    std::size_t runs = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const Sample s = data.get(i);
      for (int r = 0; r < eval.n_realizations; ++r) {
        Rng rng = make_rng(eval.seed, {si, i, static_cast<std::uint64_t>(r)});
        const BaselineResult res = run_baseline(s.image, baseline, ch, rng, &segmenter);
        pt.cm.update(res.labels, s.label);
        pt.mean_r += res.stats.r_achieved;
        pt.decode_success += res.stats.jpeg_decoded ? 1.0 : 0.0;
        pt.coded_ber += res.stats.coded_ber;
        ++runs;
      }
    }
    if (runs > 0) {
      pt.mean_r /= static_cast<double>(runs);
      pt.decode_success /= static_cast<double>(runs);
      pt.coded_ber /= static_cast<double>(runs);
    }
    out.push_back(std::move(pt));
  }
  return out;
}

MiouCurve to_curve(const std::string& scheme, double velocity_kmh, double r, const std::vector<EvalPoint>& points,
                   const std::vector<int>& subset) {
  MiouCurve c;
  c.scheme = scheme;
  c.velocity_kmh = velocity_kmh;
  c.r = r;
  for (const auto& p : points) c.points.push_back({p.snr_db, miou(p.cm, subset)});
  return c;
}

}  // namespace semcom
