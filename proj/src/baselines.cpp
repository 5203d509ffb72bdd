#include "hapfl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hapfl/compute.hpp"
#include "hapfl/rng.hpp"

namespace hapfl {
namespace {

constexpr std::uint64_t kCohortTag = 0x636f686f;

double cp_time(const ClientProfile& c, double iter_coeff, double eta, double cpu_hz) {
  const double iters = eta >= 1.0 ? 0.0 : iter_coeff * std::log2(1.0 / eta);
  return client_compute_time_s(iters, c.cycles_per_sample, c.samples, cpu_hz);
}

opt::Allocation blank_allocation(const Scenario& s, double eta) {
  opt::Allocation a;
  const std::size_t n = static_cast<std::size_t>(s.client_count());
  a.selected.assign(n, 0);
  a.bandwidth_hz.assign(n, 0.0);
  a.power_w.assign(n, 0.0);
  a.upload_time_s.assign(n, 0.0);
  a.cpu_hz.resize(n);
  for (std::size_t k = 0; k < n; ++k) a.cpu_hz[k] = s.clients[k].cpu_hz_min;
  a.eta = eta;
  return a;
}

opt::SolveResult finish_plan(opt::Allocation alloc, opt::DelayBreakdown delay) {
  opt::SolveResult out;
  out.alloc = std::move(alloc);
  out.delay = delay;
  out.state.converged = true;
  out.state.delay_trace_s.push_back(delay.total_s);
  return out;
}

}  // namespace

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::Ccra: return "ccra";
    case SystemKind::HapsNoSel: return "haps-no-sel";
    case SystemKind::TerrNoSel: return "terr-no-sel";
    case SystemKind::TerrRanSel: return "terr-ran-sel";
  }
  return "unknown";
}

SystemKind system_from_string(const std::string& name) {
  if (name == "ccra") return SystemKind::Ccra;
  if (name == "haps-no-sel") return SystemKind::HapsNoSel;
  if (name == "terr-no-sel") return SystemKind::TerrNoSel;
  if (name == "terr-ran-sel") return SystemKind::TerrRanSel;
  throw std::invalid_argument("unknown system '" + name +
                              "' (expected ccra, haps-no-sel, terr-no-sel, terr-ran-sel)");
}

TerrestrialTopology build_terrestrial(const Scenario& s) {
  const SystemParams& sp = s.params;
  if (sp.terr_mbs_count < 1) throw std::invalid_argument("need at least one base station");
  TerrestrialTopology topo;
  for (int i = 0; i < sp.terr_mbs_count; ++i) {
    const double angle = 2.0 * M_PI * i / sp.terr_mbs_count;
    topo.mbs_x_km.push_back(sp.terr_mbs_ring_km * std::cos(angle));
    topo.mbs_y_km.push_back(sp.terr_mbs_ring_km * std::sin(angle));
  }
  for (const ClientProfile& c : s.clients) {
    int best = 0;
    double best_d = std::hypot(c.x_km - topo.mbs_x_km[0], c.y_km - topo.mbs_y_km[0]);
    for (int i = 1; i < sp.terr_mbs_count; ++i) {
      const double d = std::hypot(c.x_km - topo.mbs_x_km[static_cast<std::size_t>(i)],
                                  c.y_km - topo.mbs_y_km[static_cast<std::size_t>(i)]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    topo.station_of.push_back(best);
    topo.ground_km.push_back(std::max(best_d, sp.terr_min_distance_km));
    if (best_d > sp.terr_cell_radius_km) topo.beyond_cell.push_back(c.id);
  }
  return topo;
}

std::vector<double> terrestrial_gains(const Scenario& s, const TerrestrialTopology& topo,
                                      const ChannelState& ch) {
  const SystemParams& sp = s.params;
  std::vector<double> gains(static_cast<std::size_t>(s.client_count()));
  for (std::size_t k = 0; k < gains.size(); ++k) {
    gains[k] = path_gain(ch.fading[k], sp.reference_gain, topo.ground_km[k],
                         sp.reference_distance_km, sp.terr_path_loss_exp);
  }
  return gains;
}

opt::SolveResult plan_forced(const Scenario& s, const ChannelState& ch, double iter_coeff,
                             double eta, const std::vector<int>& chosen, bool drop_infeasible) {
  if (chosen.empty()) throw std::invalid_argument("forced plan needs a cohort");
  opt::Allocation alloc = blank_allocation(s, eta);
  const double share = s.params.bandwidth_hz / static_cast<double>(chosen.size());
  for (int k : chosen) {
    const std::size_t i = static_cast<std::size_t>(k);
    alloc.selected[i] = 1;
    alloc.bandwidth_hz[i] = share;
    alloc.power_w[i] = s.clients[i].max_power_w;
    alloc.cpu_hz[i] = s.clients[i].cpu_hz_max;
  }
  for (int k : chosen) {
    if (refresh_client_plan(s, ch, alloc, k, iter_coeff)) continue;
    opt::FeasibilityReport rep;
    rep.items.push_back({"client_energy(client " + std::to_string(k) + ")", 0.0, 0.0, false});
    rep.feasible = false;
    if (!drop_infeasible) {
      throw opt::InfeasibleError("client cannot meet its energy budget in the forced cohort", rep);
    }
    const std::size_t i = static_cast<std::size_t>(k);
    alloc.selected[i] = 0;
    alloc.bandwidth_hz[i] = 0.0;
    alloc.power_w[i] = 0.0;
    alloc.upload_time_s[i] = 0.0;
    alloc.cpu_hz[i] = s.clients[i].cpu_hz_min;
  }
  const std::vector<int> sel = alloc.selected_ids();
  if (sel.empty()) {
    opt::FeasibilityReport rep;
    rep.items.push_back({"client_energy", 0.0, 0.0, false});
    rep.feasible = false;
    throw opt::InfeasibleError("no client in the forced cohort can meet its energy budget", rep);
  }
  const opt::PlatformPlan plat =
      opt::plan_platform(s.params, min_gain(ch, sel), static_cast<int>(sel.size()),
                         s.params.update_size_bits, s.params.bandwidth_hz);
  alloc.haps_cpu_hz = plat.cpu_hz;
  alloc.haps_bc_power_w = plat.bc_power_w;
  alloc.haps_bc_time_s = plat.bc_time_s;

  const opt::FeasibilityReport rep = feasibility_check(s, ch, alloc, iter_coeff);
  if (!rep.feasible) {
    throw std::logic_error("forced plan is infeasible\n" + rep.to_string());
  }
  const opt::DelayBreakdown delay = delay_of(s, ch, alloc, iter_coeff);
  return finish_plan(std::move(alloc), delay);
}

opt::SolveResult plan_haps_no_sel(const Scenario& s, const ChannelState& ch, double iter_coeff,
                                  double eta) {
  std::vector<int> all(static_cast<std::size_t>(s.client_count()));
  for (int k = 0; k < s.client_count(); ++k) all[static_cast<std::size_t>(k)] = k;
  return plan_forced(s, ch, iter_coeff, eta, all, true);
}

opt::SolveResult plan_terrestrial(const Scenario& s, const TerrestrialTopology& topo,
                                  const ChannelState& ch, double iter_coeff, double eta,
                                  const std::vector<int>& chosen) {
  const SystemParams& sp = s.params;
  const std::vector<double> gains = terrestrial_gains(s, topo, ch);
  ChannelState tch{ch.round, 0.0, ch.fading, gains};

  std::vector<int> cohort = chosen;
  const bool balance_radio = !chosen.empty();
  if (cohort.empty()) {
    cohort.resize(static_cast<std::size_t>(s.client_count()));
    for (int k = 0; k < s.client_count(); ++k) cohort[static_cast<std::size_t>(k)] = k;
  }
  std::sort(cohort.begin(), cohort.end());

  opt::Allocation alloc = blank_allocation(s, eta);
  for (int k : cohort) {
    const std::size_t i = static_cast<std::size_t>(k);
    alloc.selected[i] = 1;
    alloc.power_w[i] = s.clients[i].max_power_w;
    alloc.cpu_hz[i] = s.clients[i].cpu_hz_max;
  }

  const double cell_band = sp.bandwidth_hz / sp.terr_mbs_count;
  for (int cell = 0; cell < sp.terr_mbs_count; ++cell) {
    std::vector<int> members;
    for (int k : cohort) {
      if (topo.station_of[static_cast<std::size_t>(k)] == cell) members.push_back(k);
    }
    if (members.empty()) continue;
    const double share = cell_band / static_cast<double>(members.size());
    for (int k : members) alloc.bandwidth_hz[static_cast<std::size_t>(k)] = share;
    for (int k : members) {
      if (!refresh_client_plan(s, tch, alloc, k, iter_coeff)) {
        alloc.selected[static_cast<std::size_t>(k)] = 0;
      }
    }
    members.erase(std::remove_if(members.begin(), members.end(),
                                 [&](int k) {
                                   return !alloc.selected[static_cast<std::size_t>(k)];
                                 }),
                  members.end());
    if (!balance_radio || members.empty()) continue;
    // per-cell spectrum balancing, same fixed point as the aerial system
    for (int pass = 0; pass < 40; ++pass) {
      std::vector<double> g(members.size());
      std::vector<double> p(members.size());
      for (std::size_t j = 0; j < members.size(); ++j) {
        g[j] = tch.gain[static_cast<std::size_t>(members[j])];
        p[j] = alloc.power_w[static_cast<std::size_t>(members[j])];
      }
      const std::vector<double> shares =
          opt::equalize_bandwidth(g, p, sp.noise_psd_w_per_hz, cell_band);
      double delta = 0.0;
      bool dropped = false;
      for (std::size_t j = 0; j < members.size(); ++j) {
        const std::size_t i = static_cast<std::size_t>(members[j]);
        if (shares[j] <= 0.0) {
          alloc.selected[i] = 0;
          alloc.bandwidth_hz[i] = 0.0;
          dropped = true;
          continue;
        }
        delta = std::max(delta, std::fabs(shares[j] - alloc.bandwidth_hz[i]));
        alloc.bandwidth_hz[i] = shares[j];
      }
      if (dropped) {
        members.erase(std::remove_if(members.begin(), members.end(),
                                     [&](int k) {
                                       return !alloc.selected[static_cast<std::size_t>(k)];
                                     }),
                      members.end());
        if (members.empty()) break;
        continue;
      }
      for (int k : members) {
        if (!refresh_client_plan(s, tch, alloc, k, iter_coeff)) {
          alloc.selected[static_cast<std::size_t>(k)] = 0;
        }
      }
      members.erase(std::remove_if(members.begin(), members.end(),
                                   [&](int k) {
                                     return !alloc.selected[static_cast<std::size_t>(k)];
                                   }),
                    members.end());
      if (members.empty() || delta <= 1e-9 * cell_band) break;
    }
  }

  const std::vector<int> survivors = alloc.selected_ids();
  if (survivors.empty()) {
    opt::FeasibilityReport rep;
    rep.items.push_back({"client_energy", 0.0, 0.0, false});
    rep.feasible = false;
    throw opt::InfeasibleError("no client can meet its budget on the ground links", rep);
  }

  // grid-powered cloud at full speed; every update crosses the wired hop
  const double cloud_hz = sp.haps_cpu_hz_max;
  const double cloud_s = haps_compute_time_s(sp.haps_cycles_per_bit, sp.update_size_bits,
                                             static_cast<int>(survivors.size()), cloud_hz);
  const double backhaul_s = sp.update_size_bits / sp.terr_backhaul_bps;

  double bc_s = 0.0;
  for (int cell = 0; cell < sp.terr_mbs_count; ++cell) {
    double gmin = 0.0;
    for (int k : survivors) {
      if (topo.station_of[static_cast<std::size_t>(k)] != cell) continue;
      const double g = tch.gain[static_cast<std::size_t>(k)];
      if (gmin == 0.0 || g < gmin) gmin = g;
    }
    if (gmin <= 0.0) continue;
    const double rate = uplink_rate_bps(cell_band, sp.terr_bc_power_max_w, gmin,
                                        sp.noise_psd_w_per_hz);
    bc_s = std::max(bc_s, sp.update_size_bits / rate);
  }

  opt::DelayBreakdown delay;
  for (int k : survivors) {
    const std::size_t i = static_cast<std::size_t>(k);
    const double finish = alloc.upload_time_s[i] +
                          cp_time(s.clients[i], iter_coeff, eta, alloc.cpu_hz[i]);
    if (delay.argmax_client < 0 || finish > delay.uplink_s) {
      delay.uplink_s = finish;
      delay.argmax_client = k;
    }
  }
  delay.uplink_s += backhaul_s;
  delay.downlink_s = bc_s + backhaul_s;
  delay.total_s = delay.uplink_s + cloud_s + delay.downlink_s;

  alloc.haps_cpu_hz = cloud_hz;
  alloc.haps_bc_power_w = sp.terr_bc_power_max_w;
  alloc.haps_bc_time_s = bc_s;
  return finish_plan(std::move(alloc), delay);
}

std::vector<int> random_cohort(std::uint64_t seed, int round, int clients, int count) {
  count = std::clamp(count, 1, clients);
  std::vector<int> ids(static_cast<std::size_t>(clients));
  for (int k = 0; k < clients; ++k) ids[static_cast<std::size_t>(k)] = k;
  Rng r = Rng::stream(seed, kCohortTag, static_cast<std::uint64_t>(round));
  for (int i = 0; i < count; ++i) {
    const int j = i + static_cast<int>(r.index(static_cast<std::uint64_t>(clients - i)));
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
  }
  ids.resize(static_cast<std::size_t>(count));
  std::sort(ids.begin(), ids.end());
  return ids;
}

RoundPlanner plan_with_haps_no_sel(double iter_coeff, double eta) {
  return [iter_coeff, eta](const Scenario& s, const ChannelState& ch, int) {
    return plan_haps_no_sel(s, ch, iter_coeff, eta);
  };
}

RoundPlanner plan_with_terr_no_sel(double iter_coeff, double eta) {
  return [iter_coeff, eta](const Scenario& s, const ChannelState& ch, int) {
    return plan_terrestrial(s, build_terrestrial(s), ch, iter_coeff, eta, {});
  };
}

RoundPlanner plan_with_terr_ran_sel(double iter_coeff, double eta, int select_count,
                                    std::uint64_t seed) {
  return [iter_coeff, eta, select_count, seed](const Scenario& s, const ChannelState& ch,
                                               int round) {
    const std::vector<int> cohort =
        random_cohort(seed, round, s.client_count(), select_count);
    return plan_terrestrial(s, build_terrestrial(s), ch, iter_coeff, eta, cohort);
  };
}

}  // namespace hapfl
