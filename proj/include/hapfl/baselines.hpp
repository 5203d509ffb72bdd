#pragma once

// Comparison systems driven through the same round loop as the optimized one:
// the platform serving every client with an equal spectrum split, and a
// terrestrial deployment (ring of base stations plus a wired cloud hop) with
// either full or random participation.

#include <cstdint>
#include <string>
#include <vector>

#include "hapfl/channel.hpp"
#include "hapfl/fl.hpp"
#include "hapfl/optimizer.hpp"
#include "hapfl/scenario.hpp"

namespace hapfl {

enum class SystemKind { Ccra, HapsNoSel, TerrNoSel, TerrRanSel };

std::string to_string(SystemKind kind);
SystemKind system_from_string(const std::string& name);  // throws on unknown names

struct TerrestrialTopology {
  std::vector<double> mbs_x_km;
  std::vector<double> mbs_y_km;
  std::vector<int> station_of;    // nearest station per client
  std::vector<double> ground_km;  // clamped ground distance to that station
  std::vector<int> beyond_cell;   // clients outside the nominal cell radius
};

TerrestrialTopology build_terrestrial(const Scenario& s);

// Ground-link gains: same per-round fades as the aerial channel, ground
// distances, steeper falloff, no platform drift.
std::vector<double> terrestrial_gains(const Scenario& s, const TerrestrialTopology& topo,
                                      const ChannelState& ch);

// Scripted-cohort plan: equal split of the full band across `chosen`, then
// per-client energy consistency and the platform running at its caps. A
// client whose budget cannot cover the assignment is dropped when
// drop_infeasible is set, otherwise the plan throws.
opt::SolveResult plan_forced(const Scenario& s, const ChannelState& ch, double iter_coeff,
                             double eta, const std::vector<int>& chosen,
                             bool drop_infeasible = false);

// plan_forced over every client
opt::SolveResult plan_haps_no_sel(const Scenario& s, const ChannelState& ch, double iter_coeff,
                                  double eta);

// Terrestrial round plan. Empty `chosen` means every client participates with
// an equal per-cell split; otherwise the cohort gets per-cell power and
// bandwidth balancing. Base stations are grid powered, the cloud reuses the
// platform compute constants, and each update pays one wired backhaul hop in
// both directions.
opt::SolveResult plan_terrestrial(const Scenario& s, const TerrestrialTopology& topo,
                                  const ChannelState& ch, double iter_coeff, double eta,
                                  const std::vector<int>& chosen);

// deterministic distinct draw of `count` clients for round-robin style cohorts
std::vector<int> random_cohort(std::uint64_t seed, int round, int clients, int count);

// Round planners matching the optimizer-backed one in fl.hpp.
RoundPlanner plan_with_haps_no_sel(double iter_coeff, double eta);
RoundPlanner plan_with_terr_no_sel(double iter_coeff, double eta);
RoundPlanner plan_with_terr_ran_sel(double iter_coeff, double eta, int select_count,
                                    std::uint64_t seed);

}  // namespace hapfl
