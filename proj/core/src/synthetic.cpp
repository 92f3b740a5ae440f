#include "semcom/data.hpp"

#include "semcom/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace semcom {

namespace {

enum class Kind { Road, Rectangle, Ellipse, Triangle };

constexpr int kCell = 8;
constexpr double kRareProbability = 0.22;

using Rgb = std::array<double, 3>;

const std::array<Rgb, 8> kPalette = {{{0.30, 0.30, 0.33},
                                      {0.85, 0.20, 0.15},
                                      {0.20, 0.65, 0.25},
                                      {0.95, 0.80, 0.10},
                                      {0.10, 0.40, 0.90},
                                      {0.90, 0.50, 0.10},
                                      {0.45, 0.25, 0.10},
                                      {0.10, 0.80, 0.80}}};
constexpr Rgb kRareColor{0.85, 0.15, 0.90};

Kind kind_of(int cls) {
  switch ((cls - 1) % 4) {
    case 0: return Kind::Road;
    case 1: return Kind::Rectangle;
    case 2: return Kind::Ellipse;
    default: return Kind::Triangle;
  }
}

int randint(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Rgb jitter(const Rgb& base, Rng& rng) {
  Rgb c;
  for (int i = 0; i < 3; ++i) c[i] = std::clamp(base[i] + uniform(rng, -0.06, 0.06), 0.0, 1.0);
  return c;
}

struct Canvas {
  Sample& s;
  void paint(int y, int x, const Rgb& c, int cls) {
    if (y < 0 || x < 0 || y >= s.image.h || x >= s.image.w) return;
    for (int ch = 0; ch < 3; ++ch) s.image.at(y, x, ch) = c[ch];
    s.label.at(y, x) = static_cast<std::uint8_t>(cls);
  }
};

void draw_shape(Canvas& cv, Kind kind, int cls, const Rgb& color, int cells_h, int cells_w, int scale, Rng& rng) {
  const int h = cv.s.image.h;
  const int w = cv.s.image.w;
  const int cell = kCell;
  if (kind == Kind::Road) {
    const int horizon = randint(rng, cells_h / 2, (3 * cells_h) / 4) * cell;
    for (int y = horizon; y < h; ++y) {
      for (int x = 0; x < w; ++x) cv.paint(y, x, color, cls);
    }
    return;
  }
  const int sh = randint(rng, 3 * scale, 5 * scale);
  const int sw = randint(rng, 3 * scale, 5 * scale);
  const int cy = randint(rng, 0, std::max(0, cells_h - sh));
  const int cx = randint(rng, 0, std::max(0, cells_w - sw));
  const int y0 = cy * cell;
  const int x0 = cx * cell;
  const int ph = sh * cell;
  const int pw = sw * cell;
  for (int y = y0; y < y0 + ph; ++y) {
    for (int x = x0; x < x0 + pw; ++x) {
      const double u = (x + 0.5 - x0) / pw;  // in (0, 1)
      const double v = (y + 0.5 - y0) / ph;
      bool inside = true;
      if (kind == Kind::Ellipse) {
        const double dx = 2.0 * u - 1.0;
        const double dy = 2.0 * v - 1.0;
        inside = dx * dx + dy * dy <= 1.0;
      } else if (kind == Kind::Triangle) {
        inside = std::abs(2.0 * u - 1.0) <= v;
      }
      if (inside) cv.paint(y, x, color, cls);
    }
  }
}

}  // namespace

std::vector<std::string> synthetic_class_names(int n_cls) {
  std::vector<std::string> names{"background"};
  static const std::array<const char*, 4> kinds = {"road", "rectangle", "ellipse", "triangle"};
  for (int c = 1; c < n_cls - 1; ++c) {
    std::string n = kinds[(c - 1) % 4];
    if (c > 4) n += std::to_string((c - 1) / 4 + 1);
    names.push_back(n);
  }
  if (n_cls >= 2) names.push_back("rare_square");
  return names;
}

std::vector<Sample> gen_synthetic(int n_images, int h, int w, int n_cls, std::uint64_t seed) {
  if (h <= 0 || w <= 0 || h % 32 != 0 || w % 32 != 0) {
    throw ConfigError("synthetic size " + std::to_string(h) + "x" + std::to_string(w) + " must be multiples of 32");
  }
  if (n_cls < 2) throw ConfigError("synthetic dataset needs n_cls >= 2");
  if (n_images < 0) throw ConfigError("n_images must be >= 0");
  const int cells_h = h / kCell;
  const int cells_w = w / kCell;
  const int scale = std::max(1, std::min(h, w) / 64);
  const int rare = synthetic_rare_class(n_cls);

  std::vector<Sample> out;
  out.reserve(n_images);
  for (int i = 0; i < n_images; ++i) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(i)});
    Sample s{Image(h, w), LabelMap(h, w, 0)};
    const Rgb top = jitter({0.55, 0.70, 0.90}, rng);
    const Rgb bottom = jitter({0.75, 0.75, 0.70}, rng);
    for (int y = 0; y < h; ++y) {
      const double t = (y + 0.5) / h;
      for (int x = 0; x < w; ++x) {
        for (int ch = 0; ch < 3; ++ch) s.image.at(y, x, ch) = (1 - t) * top[ch] + t * bottom[ch];
      }
    }
    Canvas cv{s};
    for (int cls = 1; cls < rare; ++cls) {
      const Kind kind = kind_of(cls);
      const int count = kind == Kind::Road ? 1 : randint(rng, 0, 2);
      const Rgb& base = kPalette[(cls - 1) % kPalette.size()];
      for (int k = 0; k < count; ++k) draw_shape(cv, kind, cls, jitter(base, rng), cells_h, cells_w, scale, rng);
    }
    if (uniform(rng, 0.0, 1.0) < kRareProbability) {
      const int side = 2 * scale;
      const int cy = side * randint(rng, 0, cells_h / side - 1);
      const int cx = side * randint(rng, 0, cells_w / side - 1);
      const Rgb color = jitter(kRareColor, rng);
      for (int y = cy * kCell; y < (cy + side) * kCell; ++y) {
        for (int x = cx * kCell; x < (cx + side) * kCell; ++x) cv.paint(y, x, color, rare);
      }
    }
    std::normal_distribution<double> noise(0.0, 0.03);
    for (auto& v : s.image.pixels) v = std::clamp(v + noise(rng), 0.0, 1.0);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace semcom
