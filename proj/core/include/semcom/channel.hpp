#pragma once

#include "semcom/rng.hpp"
#include "semcom/symbols.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace semcom {

inline constexpr double kSpeedOfLight = 3e8;

enum class ChannelMode { Awgn, RayleighDoppler };
enum class Equalizer { ZeroForcing, Raw };

ChannelMode parse_channel_mode(const std::string& s);
std::string to_string(ChannelMode m);
Equalizer parse_equalizer(const std::string& s);
std::string to_string(Equalizer e);

struct ChannelConfig {
  ChannelMode mode = ChannelMode::RayleighDoppler;
  double snr_db = 10.0;
  double carrier_hz = 5.9e9;
  double velocity_mps = 50.0 / 3.6;
  double bandwidth_hz = 20e6;  // also the symbol rate
  // Link-budget mode derives the SNR from transmit power and path loss and
  // adds per-image log-normal shadowing; snr_db is ignored there.
  bool link_budget = false;
  double shadowing_std_db = 8.0;
  double tx_power_dbm = 23.0;
  double path_loss_db = 100.0;
  double noise_figure_db = 9.0;
  Equalizer equalizer = Equalizer::ZeroForcing;
  double power_tolerance = 0.25;  // accepted relative deviation of E|x|^2 from 1
  std::uint64_t seed = 0;

  void validate() const;
};

struct ChannelRealization {
  std::vector<Complex> h;      // per-symbol gain
  std::vector<Complex> noise;  // per-symbol additive noise
  double sigma2 = 1.0;         // noise variance actually applied
  double shadow_db = 0.0;
};

struct Transmission {
  std::vector<Complex> rx;
  ChannelRealization realization;
};

struct Equalized {
  std::vector<Complex> symbols;
  std::vector<double> noise_var;  // effective per-symbol noise variance after equalisation
  std::size_t erased = 0;
};

// f_d = f_c v / c.
double doppler_shift(double carrier_hz, double velocity_mps);
// sigma^2 = 10^(-snr_db/10) for unit-power symbols.
double snr_to_noise_var(double snr_db);
// Received SNR in link-budget mode, before shadowing.
double link_budget_snr_db(const ChannelConfig& cfg);

// h_n = gamma * exp(j 2 pi f_d n / R_s), gamma ~ CN(0, 1) drawn once per block.
std::vector<Complex> sample_fading(const ChannelConfig& cfg, std::size_t k, Rng& rng);

// y = h x + rho, rho ~ CN(0, sigma^2). Throws ContractError unless E|x|^2 ~ 1.
Transmission transmit(std::span<const Complex> x, const ChannelConfig& cfg, Rng& rng);

// Zero-forcing with perfect CSI (or identity for Equalizer::Raw / AWGN).
// Symbols with |h| < 1e-12 are zeroed and counted as erased.
Equalized equalize(std::span<const Complex> y, const ChannelRealization& r, Equalizer eq, ChannelMode mode);

// The transmit+equalise pair as one per-symbol affine map (for the training graph).
SymbolAffine link_affine(const ChannelRealization& r, Equalizer eq, ChannelMode mode);

// Independent RNG stream for block `block` of a run with this config.
inline Rng block_rng(const ChannelConfig& cfg, std::uint64_t block) { return make_rng(cfg.seed, {block}); }

}  // namespace semcom
