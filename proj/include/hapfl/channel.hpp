#pragma once

// Air-to-ground links. Per round every client sees one shared slant-range
// displacement (platform drift) plus its own unit-mean Rician power fade on
// top of an inverse-square distance law anchored at reference_gain /
// reference_distance_km. Terrestrial links reuse the fade model with a
// steeper exponent.

#include <cstdint>
#include <vector>

#include "hapfl/exec.hpp"
#include "hapfl/scenario.hpp"

namespace hapfl {

struct ChannelState {
  int round = 0;
  double displacement_km = 0.0;   // shared by all clients this round
  std::vector<double> fading;     // g_k, unit-mean power fades
  std::vector<double> gain;       // h_k, end-to-end power gains
};

// one unit-mean Rician power draw; k_factor is linear (not dB)
double rician_power(class Rng& rng, double k_factor_linear);

// distance-law gain: fading * ref_gain * (d_eff / d_ref)^(-exponent)
double path_gain(double fading, double ref_gain, double distance_km, double ref_distance_km,
                 double exponent);

// Draw the round's displacement and every client's fade, then assemble gains.
// Clients use independent substreams keyed by (seed, round, client), so the
// parallel path is bit-identical to the serial one.
ChannelState realize_channel(const Scenario& s, int round, Exec mode = Exec::Serial);

// Recompute gains for given fades under a different displacement (used for
// paired-displacement experiments and consistency checks).
ChannelState rebuild_gains(const Scenario& s, const std::vector<double>& fading,
                           double displacement_km, int round = 0);

// Shannon uplink rate over a client's slice; bandwidth 0 yields rate 0.
double uplink_rate_bps(double bandwidth_hz, double power_w, double gain,
                       double noise_psd_w_per_hz);

// Broadcast rate over the full band, limited by the weakest listed gain.
// Throws std::invalid_argument on an empty selection.
double downlink_rate_bps(double bandwidth_hz, double power_w,
                         const std::vector<double>& gains, double noise_psd_w_per_hz);

double min_gain(const ChannelState& ch, const std::vector<int>& selected);

}  // namespace hapfl
