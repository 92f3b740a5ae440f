#include "semcom/metrics.hpp"

#include "semcom/error.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

namespace semcom {

ConfusionMatrix::ConfusionMatrix(int n_classes) : n_(n_classes) {
  if (n_classes < 0) throw ConfigError("ConfusionMatrix: negative class count");
  counts_.assign(static_cast<std::size_t>(n_classes) * n_classes, 0);
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

void ConfusionMatrix::update(const LabelMap& pred, const LabelMap& gt) {
  if (pred.h != gt.h || pred.w != gt.w) {
    throw DataError("confusion_update: prediction " + std::to_string(pred.h) + "x" + std::to_string(pred.w) +
                    " vs ground truth " + std::to_string(gt.h) + "x" + std::to_string(gt.w));
  }
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const int g = gt.labels[i];
    if (g == kIgnoreLabel) continue;
    const int p = pred.labels[i];
    if (g >= n_ || p >= n_) throw DataError("confusion_update: label outside class range");
    ++counts_[static_cast<std::size_t>(g) * n_ + p];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n_ != n_) throw DataError("ConfusionMatrix::merge: class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm) {
  const int n = cm.n_classes();
  std::vector<std::optional<double>> out(n);
  for (int i = 0; i < n; ++i) {
    std::uint64_t row = 0;
    std::uint64_t col = 0;
    for (int j = 0; j < n; ++j) {
      row += cm.at(i, j);
      col += cm.at(j, i);
    }
    const std::uint64_t uni = row + col - cm.at(i, i);
    if (uni > 0) out[i] = static_cast<double>(cm.at(i, i)) / static_cast<double>(uni);
  }
  return out;
}

double miou(const ConfusionMatrix& cm, const std::vector<int>& subset) {
  const auto iou = iou_per_class(cm);
  double sum = 0.0;
  int count = 0;
  auto take = [&](int i) {
    if (i < 0 || i >= static_cast<int>(iou.size())) throw ConfigError("miou: class index out of range");
    if (iou[i]) {
      sum += *iou[i];
      ++count;
    }
  };
  if (subset.empty()) {
    for (int i = 0; i < static_cast<int>(iou.size()); ++i) take(i);
  } else {
    for (int i : subset) take(i);
  }
  if (count == 0) throw DataError("miou: no class has a defined IoU");
  return sum / count;
}

double compression_ratio(int h, int w, int k) {
  if (k <= 0) throw ConfigError("compression_ratio: K must be > 0");
  if (h <= 0 || w <= 0 || h % 16 != 0 || w % 16 != 0) throw ContractError("compression_ratio: H, W must be multiples of 16");
  const double source = static_cast<double>(h) * w * 3;
  const double sent = static_cast<double>(h / 16) * (w / 16) * k;
  return source / sent;
}

void MiouCurve::validate() const {
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i].snr_db > points[i - 1].snr_db)) throw DataError("curve '" + scheme + "': SNR not strictly increasing");
  }
}

double snr_at(const MiouCurve& c, double target) {
  c.validate();
  if (c.points.empty()) throw DataError("curve '" + c.scheme + "' is empty");
  if (c.points.front().miou >= target) {
    if (c.points.front().miou == target || c.points.size() == 1) return c.points.front().snr_db;
    throw DataError("curve '" + c.scheme + "' starts above the target mIoU; crossing is outside the grid");
  }
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    const auto& a = c.points[i - 1];
    const auto& b = c.points[i];
    if (a.miou < target && b.miou >= target) {
      return a.snr_db + (target - a.miou) / (b.miou - a.miou) * (b.snr_db - a.snr_db);
    }
  }
  throw DataError("curve '" + c.scheme + "' never reaches mIoU " + std::to_string(target));
}

double coding_gain(const MiouCurve& a, const MiouCurve& b, double target) {
  const double sa = snr_at(a, target);
  return snr_at(b, target) - sa;
}

ResultRow make_row(const std::string& scheme, double velocity_kmh, double r, double snr_db, const ConfusionMatrix& cm,
                   const std::vector<int>& subset) {
  ResultRow row;
  row.scheme = scheme;
  row.velocity_kmh = velocity_kmh;
  row.r = r;
  row.snr_db = snr_db;
  row.miou = miou(cm, subset);
  row.iou = iou_per_class(cm);
  return row;
}

std::string results_header(const std::vector<std::string>& class_names) {
  std::string h = "scheme,velocity_kmh,R,snr_db,miou";
  for (const auto& n : class_names) h += ",iou_" + n;
  return h;
}

void write_result_row(std::ostream& os, const ResultRow& row) {
  std::ostringstream line;
  line << std::setprecision(10) << row.scheme << ',' << row.velocity_kmh << ',' << row.r << ',' << row.snr_db << ','
       << row.miou;
  for (const auto& v : row.iou) {
    line << ',';
    if (v) line << *v;
  }
  os << line.str() << '\n';
}

void write_results_csv(std::ostream& os, const std::vector<std::string>& class_names,
                       const std::vector<ResultRow>& rows) {
  os << results_header(class_names) << '\n';
  for (const auto& r : rows) write_result_row(os, r);
}

}  // namespace semcom
