#include "hapfl/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hapfl/rng.hpp"

namespace hapfl {

double rician_power(Rng& rng, double k_factor_linear) {
  if (k_factor_linear < 0.0) throw std::invalid_argument("rician_power: negative K factor");
  // deterministic LOS amplitude plus circular scatter, normalized to E[g] = 1
  const double los = std::sqrt(k_factor_linear / (k_factor_linear + 1.0));
  const double sigma = std::sqrt(0.5 / (k_factor_linear + 1.0));
  const double re = los + sigma * rng.normal();
  const double im = sigma * rng.normal();
  return re * re + im * im;
}

double path_gain(double fading, double ref_gain, double distance_km, double ref_distance_km,
                 double exponent) {
  if (distance_km <= 0.0 || ref_distance_km <= 0.0)
    throw std::invalid_argument("path_gain: distances must be > 0");
  return fading * ref_gain * std::pow(distance_km / ref_distance_km, -exponent);
}

namespace {

constexpr std::uint64_t kDispTag = 0x64697370;  // displacement stream
constexpr std::uint64_t kFadeTag = 0x66616465;  // fading streams

double one_fade(const Scenario& s, int round, int k) {
  Rng r = Rng::stream(s.seed, mix_seed(kFadeTag, static_cast<std::uint64_t>(round)),
                      static_cast<std::uint64_t>(k));
  const double kf = std::pow(10.0, s.params.rician_k_factor_db / 10.0);
  return rician_power(r, kf);
}

}  // namespace

ChannelState realize_channel(const Scenario& s, int round, Exec mode) {
  if (round < 0) throw std::invalid_argument("realize_channel: round must be >= 0");
  ChannelState ch;
  ch.round = round;
  Rng disp = Rng::stream(s.seed, kDispTag, static_cast<std::uint64_t>(round));
  ch.displacement_km = std::sqrt(s.params.displacement_variance_km2) * disp.normal();

  const int n = s.client_count();
  ch.fading.resize(n);
  if (mode == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (int k = 0; k < n; ++k) ch.fading[k] = one_fade(s, round, k);
  } else {
    for (int k = 0; k < n; ++k) ch.fading[k] = one_fade(s, round, k);
  }

  ChannelState out = rebuild_gains(s, ch.fading, ch.displacement_km, round);
  return out;
}

ChannelState rebuild_gains(const Scenario& s, const std::vector<double>& fading,
                           double displacement_km, int round) {
  if (static_cast<int>(fading.size()) != s.client_count())
    throw std::invalid_argument("rebuild_gains: fading size mismatch");
  ChannelState ch;
  ch.round = round;
  ch.displacement_km = displacement_km;
  ch.fading = fading;
  ch.gain.resize(fading.size());
  const SystemParams& p = s.params;
  for (size_t k = 0; k < fading.size(); ++k) {
    const double d_eff =
        std::max(s.clients[k].distance_km + displacement_km, p.min_effective_distance_km);
    ch.gain[k] = path_gain(fading[k], p.reference_gain, d_eff, p.reference_distance_km, 2.0);
  }
  return ch;
}

double uplink_rate_bps(double bandwidth_hz, double power_w, double gain,
                       double noise_psd_w_per_hz) {
  if (bandwidth_hz < 0.0) throw std::invalid_argument("uplink_rate: bandwidth must be >= 0");
  if (power_w < 0.0) throw std::invalid_argument("uplink_rate: power must be >= 0");
  if (gain < 0.0) throw std::invalid_argument("uplink_rate: gain must be >= 0");
  if (noise_psd_w_per_hz <= 0.0) throw std::invalid_argument("uplink_rate: noise psd must be > 0");
  if (bandwidth_hz == 0.0) return 0.0;  // no slice, no rate
  const double snr = gain * power_w / (bandwidth_hz * noise_psd_w_per_hz);
  return bandwidth_hz * std::log2(1.0 + snr);
}

double downlink_rate_bps(double bandwidth_hz, double power_w,
                         const std::vector<double>& gains, double noise_psd_w_per_hz) {
  if (gains.empty())
    throw std::invalid_argument("downlink_rate: no receivers selected");
  const double worst = *std::min_element(gains.begin(), gains.end());
  return uplink_rate_bps(bandwidth_hz, power_w, worst, noise_psd_w_per_hz);
}

double min_gain(const ChannelState& ch, const std::vector<int>& selected) {
  if (selected.empty()) throw std::invalid_argument("min_gain: empty selection");
  double g = std::numeric_limits<double>::infinity();
  for (int k : selected) {
    if (k < 0 || k >= static_cast<int>(ch.gain.size()))
      throw std::invalid_argument("min_gain: client index out of range");
    g = std::min(g, ch.gain[k]);
  }
  return g;
}

}  // namespace hapfl
