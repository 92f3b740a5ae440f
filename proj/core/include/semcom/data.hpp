#pragma once

#include "semcom/rng.hpp"
#include "semcom/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace semcom {

inline constexpr int kCityscapesClasses = 19;
extern const std::array<const char*, kCityscapesClasses> kCityscapesClassNames;

struct ClassWeights {
  std::vector<double> w;
  std::vector<bool> important;
};

// w_i = balance_i * (important_i ? 1.5 : 1.0).
ClassWeights class_weights(const std::vector<double>& balance, const std::vector<bool>& important);
// Balance/importance defaults for the 19 Cityscapes training classes.
ClassWeights cityscapes_default_weights();
int class_index(const std::vector<std::string>& names, const std::string& name);

struct PhotometricRanges {
  double brightness = 32.0 / 255.0;
  double contrast_lo = 0.5;
  double contrast_hi = 1.5;
  double saturation_lo = 0.5;
  double saturation_hi = 1.5;
  double hue_deg = 18.0;
};

struct DatasetSpec {
  std::filesystem::path root;
  std::string split = "train";
  int crop_h = 512;
  int crop_w = 1024;
  bool random_crop = true;
  bool flip = true;
  bool photometric = true;
  PhotometricRanges ranges;
  int n_classes = kCityscapesClasses;

  void validate() const;
};

// Maps raw Cityscapes label IDs (0..33) to train IDs (0..18) or 255.
std::uint8_t labelid_to_trainid(int raw);
LabelMap labelid_to_trainid(const LabelMap& raw);

// Random-access view over image/label pairs.
class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual std::size_t size() const = 0;
  virtual Sample get(std::size_t i) const = 0;
  virtual std::string name(std::size_t i) const { return std::to_string(i); }
};

class InMemoryDataset : public Dataset {
 public:
  explicit InMemoryDataset(std::vector<Sample> samples) : samples_(std::move(samples)) {}
  std::size_t size() const override { return samples_.size(); }
  Sample get(std::size_t i) const override { return samples_.at(i); }
  const std::vector<Sample>& samples() const { return samples_; }

 private:
  std::vector<Sample> samples_;
};

// Lazily decodes a Cityscapes split. Pairs are ordered by (city, stem).
class CityscapesDataset : public Dataset {
 public:
  explicit CityscapesDataset(const DatasetSpec& spec);
  std::size_t size() const override { return images_.size(); }
  Sample get(std::size_t i) const override;
  std::string name(std::size_t i) const override { return images_.at(i).string(); }

 private:
  std::vector<std::filesystem::path> images_;
  std::vector<std::filesystem::path> labels_;
};

std::unique_ptr<Dataset> load_cityscapes(const DatasetSpec& spec);

// Synthetic traffic-like scenes: background, a road band, rectangles,
// ellipses, triangles and one small rare square class (always the last
// class). Shape edges are snapped to an 8-pixel grid, the rare square to a
// 16-pixel grid.
std::vector<Sample> gen_synthetic(int n_images, int h, int w, int n_cls, std::uint64_t seed);
std::vector<std::string> synthetic_class_names(int n_cls);
inline int synthetic_rare_class(int n_cls) { return n_cls - 1; }

Sample flip_horizontal(const Sample& s);
Sample crop(const Sample& s, int y0, int x0, int h, int w);
Image photometric_distort(const Image& img, const PhotometricRanges& r, Rng& rng);
// Random crop, flip and photometric distortion as enabled in spec.
Sample augment(const Sample& s, const DatasetSpec& spec, Rng& rng);

}  // namespace semcom
