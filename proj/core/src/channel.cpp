#include "semcom/channel.hpp"

#include "semcom/error.hpp"

#include <cmath>
#include <numbers>

namespace semcom {

ChannelMode parse_channel_mode(const std::string& s) {
  if (s == "awgn") return ChannelMode::Awgn;
  if (s == "rayleigh_doppler" || s == "rayleigh") return ChannelMode::RayleighDoppler;
  throw ConfigError("unknown channel.mode '" + s + "' (awgn | rayleigh_doppler)");
}

std::string to_string(ChannelMode m) { return m == ChannelMode::Awgn ? "awgn" : "rayleigh_doppler"; }

Equalizer parse_equalizer(const std::string& s) {
  if (s == "zf") return Equalizer::ZeroForcing;
  if (s == "raw") return Equalizer::Raw;
  throw ConfigError("unknown channel.equalizer '" + s + "' (zf | raw)");
}

std::string to_string(Equalizer e) { return e == Equalizer::ZeroForcing ? "zf" : "raw"; }

void ChannelConfig::validate() const {
  if (!std::isfinite(snr_db)) throw ConfigError("channel.snr_db must be finite");
  if (velocity_mps < 0) throw ConfigError("channel velocity must be >= 0");
  if (!(bandwidth_hz > 0)) throw ConfigError("channel.bandwidth must be > 0");
  if (!(carrier_hz > 0)) throw ConfigError("channel.carrier must be > 0");
  if (shadowing_std_db < 0) throw ConfigError("channel.shadowing_std_db must be >= 0");
}

double doppler_shift(double carrier_hz, double velocity_mps) {
  if (velocity_mps < 0) throw ContractError("doppler_shift: negative velocity");
  return carrier_hz * velocity_mps / kSpeedOfLight;
}

double snr_to_noise_var(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

double link_budget_snr_db(const ChannelConfig& cfg) {
  const double noise_dbm = -174.0 + 10.0 * std::log10(cfg.bandwidth_hz) + cfg.noise_figure_db;
  return cfg.tx_power_dbm - cfg.path_loss_db - noise_dbm;
}

std::vector<Complex> sample_fading(const ChannelConfig& cfg, std::size_t k, Rng& rng) {
  std::vector<Complex> h(k, Complex(1.0, 0.0));
  if (cfg.mode == ChannelMode::Awgn) return h;
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  const double re = n(rng);
  const double im = n(rng);
  const Complex gamma(re, im);
  const double step = 2.0 * std::numbers::pi * doppler_shift(cfg.carrier_hz, cfg.velocity_mps) / cfg.bandwidth_hz;
  for (std::size_t i = 0; i < k; ++i) h[i] = gamma * std::polar(1.0, step * static_cast<double>(i));
  return h;
}

Transmission transmit(std::span<const Complex> x, const ChannelConfig& cfg, Rng& rng) {
  if (!x.empty()) {
    double p = 0.0;
    for (const auto& v : x) p += std::norm(v);
    p /= static_cast<double>(x.size());
    if (std::abs(p - 1.0) > cfg.power_tolerance) {
      throw ContractError("transmit: average symbol power " + std::to_string(p) + " is not normalised");
    }
  }
  Transmission t;
  auto& r = t.realization;
  r.h = sample_fading(cfg, x.size(), rng);
  double snr = cfg.snr_db;
  if (cfg.link_budget) {
    r.shadow_db = std::normal_distribution<double>(0.0, cfg.shadowing_std_db)(rng);
    snr = link_budget_snr_db(cfg);
  }
  r.sigma2 = snr_to_noise_var(snr) * std::pow(10.0, r.shadow_db / 10.0);
  std::normal_distribution<double> n(0.0, std::sqrt(r.sigma2 / 2.0));
  r.noise.resize(x.size());
  t.rx.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double re = n(rng);
    const double im = n(rng);
    r.noise[i] = Complex(re, im);
    t.rx[i] = r.h[i] * x[i] + r.noise[i];
  }
  return t;
}

namespace {

constexpr double kErasureThreshold = 1e-12;

Complex zf_tap(Complex h, bool& erased) {
  const double mag2 = std::norm(h);
  erased = std::sqrt(mag2) < kErasureThreshold;
  return erased ? Complex(0.0, 0.0) : std::conj(h) / mag2;
}

}  // namespace

Equalized equalize(std::span<const Complex> y, const ChannelRealization& r, Equalizer eq, ChannelMode mode) {
  if (r.h.size() != y.size()) throw ContractError("equalize: realization length mismatch");
  Equalized out;
  out.symbols.resize(y.size());
  out.noise_var.assign(y.size(), r.sigma2);
  const bool identity = eq == Equalizer::Raw || mode == ChannelMode::Awgn;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (identity) {
      out.symbols[i] = y[i];
      continue;
    }
    bool erased = false;
    const Complex tap = zf_tap(r.h[i], erased);
    out.symbols[i] = tap * y[i];
    if (erased) {
      ++out.erased;
      out.noise_var[i] = std::numeric_limits<double>::infinity();
    } else {
      out.noise_var[i] = r.sigma2 / std::norm(r.h[i]);
    }
  }
  return out;
}

SymbolAffine link_affine(const ChannelRealization& r, Equalizer eq, ChannelMode mode) {
  SymbolAffine a;
  a.gain.resize(r.h.size());
  a.offset.resize(r.h.size());
  const bool identity = eq == Equalizer::Raw || mode == ChannelMode::Awgn;
  for (std::size_t i = 0; i < r.h.size(); ++i) {
    bool erased = false;
    const Complex tap = identity ? Complex(1.0, 0.0) : zf_tap(r.h[i], erased);
    a.gain[i] = tap * r.h[i];
    a.offset[i] = tap * r.noise[i];
  }
  return a;
}

}  // namespace semcom
