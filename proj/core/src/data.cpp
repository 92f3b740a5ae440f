#include "semcom/data.hpp"

#include "semcom/error.hpp"
#include "semcom/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace semcom {

const std::array<const char*, kCityscapesClasses> kCityscapesClassNames = {
    "road",   "sidewalk", "building", "wall",   "fence",  "pole",   "traffic_light",
    "traffic_sign", "vegetation", "terrain", "sky", "person", "rider", "car",
    "truck",  "bus",      "train",    "motorcycle", "bicycle"};

ClassWeights class_weights(const std::vector<double>& balance, const std::vector<bool>& important) {
  if (balance.size() != important.size()) throw ConfigError("class_weights: balance/importance length mismatch");
  ClassWeights cw;
  cw.important = important;
  cw.w.resize(balance.size());
  for (std::size_t i = 0; i < balance.size(); ++i) {
    if (!(balance[i] > 0)) throw ConfigError("class_weights: balance for class " + std::to_string(i) + " must be > 0");
    cw.w[i] = balance[i] * (important[i] ? 1.5 : 1.0);
  }
  return cw;
}

ClassWeights cityscapes_default_weights() {
  // Product weights of the listed classes; each carries attention 1.5.
  static const std::map<std::string, double> listed = {
      {"road", 1.25595},  {"sidewalk", 1.377},  {"building", 1.299}, {"vegetation", 1.3179},
      {"person", 1.47645}, {"rider", 1.6674},   {"car", 1.35555},    {"truck", 1.62975},
      {"bus", 1.64325},    {"train", 1.62975},  {"motorcycle", 1.72935}, {"bicycle", 1.57605}};
  std::vector<double> balance(kCityscapesClasses, 1.0);
  std::vector<bool> important(kCityscapesClasses, false);
  for (int i = 0; i < kCityscapesClasses; ++i) {
    auto it = listed.find(kCityscapesClassNames[i]);
    if (it == listed.end()) continue;
    balance[i] = it->second / 1.5;
    important[i] = true;
  }
  return class_weights(balance, important);
}

int class_index(const std::vector<std::string>& names, const std::string& name) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("unknown class name '" + name + "'");
  return static_cast<int>(it - names.begin());
}

void DatasetSpec::validate() const {
  if (split != "train" && split != "val" && split != "test") {
    throw ConfigError("data.split must be train, val or test (got '" + split + "')");
  }
  if (crop_h <= 0 || crop_w <= 0 || crop_h % 32 != 0 || crop_w % 32 != 0) {
    throw ConfigError("data crop " + std::to_string(crop_h) + "x" + std::to_string(crop_w) +
                      " must be positive multiples of 32");
  }
  if (n_classes < 2) throw ConfigError("data.n_classes must be >= 2");
}

std::uint8_t labelid_to_trainid(int raw) {
  static constexpr std::array<std::uint8_t, 34> table = {
      255, 255, 255, 255, 255, 255, 255, 0,  1,   255, 255, 2,   3,  4,  255, 255, 255,
      5,   255, 6,   7,   8,   9,   10,  11, 12,  13,  14,  15,  255, 255, 16, 17, 18};
  if (raw < 0 || raw >= static_cast<int>(table.size())) {
    throw DataError("label id " + std::to_string(raw) + " is outside 0..33");
  }
  return table[raw];
}

LabelMap labelid_to_trainid(const LabelMap& raw) {
  LabelMap out(raw.h, raw.w);
  for (std::size_t i = 0; i < raw.labels.size(); ++i) out.labels[i] = labelid_to_trainid(raw.labels[i]);
  return out;
}

CityscapesDataset::CityscapesDataset(const DatasetSpec& spec) {
  namespace fs = std::filesystem;
  const fs::path img_dir = spec.root / "leftImg8bit" / spec.split;
  const fs::path lbl_dir = spec.root / "gtFine" / spec.split;
  if (!fs::is_directory(img_dir)) throw ConfigError("missing image directory " + img_dir.string());
  if (!fs::is_directory(lbl_dir)) throw ConfigError("missing label directory " + lbl_dir.string());
  const std::string img_suffix = "_leftImg8bit.png";
  const std::string lbl_suffix = "_gtFine_labelIds.png";
  for (const auto& e : fs::recursive_directory_iterator(img_dir)) {
    if (!e.is_regular_file()) continue;
    const std::string fname = e.path().filename().string();
    if (fname.size() <= img_suffix.size() || !fname.ends_with(img_suffix)) continue;
    images_.push_back(e.path());
  }
  std::sort(images_.begin(), images_.end());
  if (images_.empty()) throw ConfigError("no images found under " + img_dir.string());
  for (const auto& img : images_) {
    const std::string fname = img.filename().string();
    const std::string stem = fname.substr(0, fname.size() - img_suffix.size());
    const fs::path city = img.parent_path().filename();
    fs::path lbl = lbl_dir / city / (stem + lbl_suffix);
    if (!fs::exists(lbl)) throw ConfigError("missing label file " + lbl.string());
    labels_.push_back(std::move(lbl));
  }
}

Sample CityscapesDataset::get(std::size_t i) const {
  Sample s;
  s.image = read_png_rgb(images_.at(i));
  s.label = labelid_to_trainid(read_png_gray(labels_.at(i)));
  if (s.image.h != s.label.h || s.image.w != s.label.w) {
    throw DataError("image/label size mismatch for " + images_[i].string());
  }
  return s;
}

std::unique_ptr<Dataset> load_cityscapes(const DatasetSpec& spec) {
  spec.validate();
  return std::make_unique<CityscapesDataset>(spec);
}

Sample flip_horizontal(const Sample& s) {
  Sample out = s;
  for (int y = 0; y < s.image.h; ++y) {
    for (int x = 0; x < s.image.w; ++x) {
      for (int ch = 0; ch < 3; ++ch) out.image.at(y, x, ch) = s.image.at(y, s.image.w - 1 - x, ch);
    }
  }
  for (int y = 0; y < s.label.h; ++y) {
    for (int x = 0; x < s.label.w; ++x) out.label.at(y, x) = s.label.at(y, s.label.w - 1 - x);
  }
  return out;
}

Sample crop(const Sample& s, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > s.image.h || x0 + w > s.image.w) {
    throw ConfigError("crop " + std::to_string(h) + "x" + std::to_string(w) + " exceeds image " +
                      std::to_string(s.image.h) + "x" + std::to_string(s.image.w));
  }
  Sample out{Image(h, w), LabelMap(h, w)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < 3; ++ch) out.image.at(y, x, ch) = s.image.at(y0 + y, x0 + x, ch);
      out.label.at(y, x) = s.label.at(y0 + y, x0 + x);
    }
  }
  return out;
}

namespace {

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0 ? d / mx : 0.0;
  if (d <= 0) {
    h = 0.0;
  } else if (mx == r) {
    h = 60.0 * std::fmod((g - b) / d, 6.0);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / d + 2.0);
  } else {
    h = 60.0 * ((r - g) / d + 4.0);
  }
  if (h < 0) h += 360.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double c = v * s;
  const double hp = std::fmod(h, 360.0) / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  switch (static_cast<int>(hp)) {
    case 0: r1 = c; g1 = x; break;
    case 1: r1 = x; g1 = c; break;
    case 2: g1 = c; b1 = x; break;
    case 3: g1 = x; b1 = c; break;
    case 4: r1 = x; b1 = c; break;
    default: r1 = c; b1 = x; break;
  }
  const double m = v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

bool coin(Rng& rng) { return std::uniform_int_distribution<int>(0, 1)(rng) == 1; }

}  // namespace

Image photometric_distort(const Image& img, const PhotometricRanges& r, Rng& rng) {
  Image out = img;
  auto clamp_all = [&out] {
    for (auto& v : out.pixels) v = std::clamp(v, 0.0, 1.0);
  };
  if (coin(rng)) {
    const double delta = uniform(rng, -r.brightness, r.brightness);
    for (auto& v : out.pixels) v += delta;
    clamp_all();
  }
  if (coin(rng)) {
    const double alpha = uniform(rng, r.contrast_lo, r.contrast_hi);
    for (auto& v : out.pixels) v *= alpha;
    clamp_all();
  }
  const bool do_sat = coin(rng);
  const double sat = do_sat ? uniform(rng, r.saturation_lo, r.saturation_hi) : 1.0;
  const bool do_hue = coin(rng);
  const double hue = do_hue ? uniform(rng, -r.hue_deg, r.hue_deg) : 0.0;
  if (do_sat || do_hue) {
    for (std::size_t i = 0; i < out.pixels.size(); i += 3) {
      double h = 0, s = 0, v = 0;
      rgb_to_hsv(out.pixels[i], out.pixels[i + 1], out.pixels[i + 2], h, s, v);
      s = std::clamp(s * sat, 0.0, 1.0);
      h = std::fmod(h + hue + 360.0, 360.0);
      hsv_to_rgb(h, s, v, out.pixels[i], out.pixels[i + 1], out.pixels[i + 2]);
    }
    clamp_all();
  }
  return out;
}

Sample augment(const Sample& s, const DatasetSpec& spec, Rng& rng) {
  if (spec.crop_h > s.image.h || spec.crop_w > s.image.w) {
    throw ConfigError("crop " + std::to_string(spec.crop_h) + "x" + std::to_string(spec.crop_w) +
                      " larger than image " + std::to_string(s.image.h) + "x" + std::to_string(s.image.w));
  }
  int y0 = (s.image.h - spec.crop_h) / 2;
  int x0 = (s.image.w - spec.crop_w) / 2;
  if (spec.random_crop) {
    y0 = std::uniform_int_distribution<int>(0, s.image.h - spec.crop_h)(rng);
    x0 = std::uniform_int_distribution<int>(0, s.image.w - spec.crop_w)(rng);
  }
  Sample out = crop(s, y0, x0, spec.crop_h, spec.crop_w);
  if (spec.flip && coin(rng)) out = flip_horizontal(out);
  if (spec.photometric) out.image = photometric_distort(out.image, spec.ranges, rng);
  return out;
}

}  // namespace semcom
