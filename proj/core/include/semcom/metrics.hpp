#pragma once

#include "semcom/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace semcom {

// counts[g][p]: pixels with ground truth g predicted as p; ignore pixels are skipped.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int n_classes = 0);

  int n_classes() const { return n_; }
  std::uint64_t at(int g, int p) const { return counts_[static_cast<std::size_t>(g) * n_ + p]; }
  std::uint64_t total() const;

  void update(const LabelMap& pred, const LabelMap& gt);
  void merge(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int n_ = 0;
  std::vector<std::uint64_t> counts_;
};

// nullopt marks a class absent from both prediction and ground truth.
std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm);
// Mean over defined classes; `subset` restricts the average when non-empty.
double miou(const ConfusionMatrix& cm, const std::vector<int>& subset = {});

// Source elements over transmitted elements: (H W 3) / ((H/16)(W/16) K) = 768 / K.
double compression_ratio(int h, int w, int k);

struct CurvePoint {
  double snr_db = 0.0;
  double miou = 0.0;
};

struct MiouCurve {
  std::string scheme;
  double velocity_kmh = 0.0;
  double r = 0.0;
  std::vector<CurvePoint> points;  // strictly increasing snr_db

  void validate() const;
};

// SNR (dB) at which the curve first reaches `target`, by linear interpolation.
double snr_at(const MiouCurve& c, double target);
// SNR_b(target) - SNR_a(target); positive when a needs less SNR.
double coding_gain(const MiouCurve& a, const MiouCurve& b, double target);

struct ResultRow {
  std::string scheme;
  double velocity_kmh = 0.0;
  double r = 0.0;
  double snr_db = 0.0;
  double miou = 0.0;
  std::vector<std::optional<double>> iou;
};

ResultRow make_row(const std::string& scheme, double velocity_kmh, double r, double snr_db, const ConfusionMatrix& cm,
                   const std::vector<int>& subset = {});
std::string results_header(const std::vector<std::string>& class_names);
// Undefined IoUs are written as empty fields.
void write_result_row(std::ostream& os, const ResultRow& row);
void write_results_csv(std::ostream& os, const std::vector<std::string>& class_names,
                       const std::vector<ResultRow>& rows);

}  // namespace semcom
