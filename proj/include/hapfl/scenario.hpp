#pragma once

// Deployment description: one high-altitude platform serving clients dropped
// uniformly over a ground disc, plus the knobs shared by every subsystem
// (spectrum, noise floor, update size, per-round energy budgets, and the
// terrestrial comparison topology). All fields carry units in their names;
// distances are km, rates Hz/bps, powers W, energies J.

#include <cstdint>
#include <string>
#include <vector>

namespace hapfl {

struct SystemParams {
  double bandwidth_hz = 2.0e7;                 // uplink spectrum shared by clients
  double noise_psd_w_per_hz = 3.9810717055349694e-21;  // -174 dBm/Hz
  double update_size_bits = 28100;             // model update payload per client
  double altitude_km = 25.0;
  double coverage_radius_km = 50.0;
  double reference_distance_km = 1.0;
  double reference_gain = 1.5488166189124821e-13;  // 128.1 dB path loss at 1 km
  double displacement_variance_km2 = 1.0;      // slant-range jitter per round
  double rician_k_factor_db = 10.0;
  double min_effective_distance_km = 1.0;      // clamp after displacement

  // client generation defaults (stored per client after generation)
  double client_max_power_w = 0.01;            // 10 dBm
  double client_energy_budget_j = 20.0;        // per round
  double client_cpu_hz_min = 1.0e8;
  double client_cpu_hz_max = 2.0e9;
  double client_cycles_per_sample_min = 1.0e4;
  double client_cycles_per_sample_max = 3.0e4;
  double client_capacitance = 1.0e-28;         // switched capacitance coefficient
  int client_samples = 500;

  // platform side
  double haps_bc_power_max_w = 100.0;          // 50 dBm broadcast cap
  double haps_cpu_hz_min = 1.0e9;
  double haps_cpu_hz_max = 2.0e10;
  double haps_capacitance = 1.0e-27;
  double haps_cycles_per_bit = 3.0e4;          // aggregation work per received bit
  double haps_energy_budget_j = 2.0e4;         // per round

  // terrestrial baseline topology
  int terr_mbs_count = 5;
  double terr_mbs_ring_km = 25.0;              // stations on a regular polygon
  double terr_cell_radius_km = 10.0;           // nominal cell size (coverage check)
  double terr_path_loss_exp = 4.0;
  double terr_min_distance_km = 0.1;           // ground-link clamp
  double terr_backhaul_bps = 1.0e9;            // wired station<->cloud hop
  double terr_bc_power_max_w = 100.0;
};

struct ClientProfile {
  int id = 0;
  double x_km = 0.0;
  double y_km = 0.0;
  double distance_km = 0.0;       // slant range to the platform, derived from x/y
  double cycles_per_sample = 2.0e4;
  double capacitance = 1.0e-28;
  double cpu_hz_min = 1.0e8;
  double cpu_hz_max = 2.0e9;
  double max_power_w = 0.01;
  double energy_budget_j = 20.0;
  int samples = 500;
};

struct Scenario {
  std::uint64_t seed = 0;
  SystemParams params;
  std::vector<ClientProfile> clients;

  int client_count() const { return static_cast<int>(clients.size()); }
};

// slant range from a ground offset (x, y) to the platform overhead at the disc center
double slant_range_km(double x_km, double y_km, double altitude_km);

// Uniform-in-area drop over the coverage disc plus per-client compute draws.
// Same seed, same scenario; throws std::invalid_argument on bad counts/params.
Scenario generate_scenario(std::uint64_t seed, int clients, const SystemParams& params = {});

// Plain-text round trip. Values are printed with max precision so that
// save -> load reproduces every double bit-for-bit. Loader throws
// std::runtime_error naming the offending line/field.
void save_scenario(const Scenario& s, const std::string& path);
std::string scenario_to_text(const Scenario& s);
Scenario load_scenario(const std::string& path);
Scenario scenario_from_text(const std::string& text);

void validate_scenario(const Scenario& s);  // throws std::invalid_argument

}  // namespace hapfl
