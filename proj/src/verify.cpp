#include "hapfl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

#include "hapfl/baselines.hpp"
#include "hapfl/channel.hpp"
#include "hapfl/fl.hpp"
#include "hapfl/optimizer.hpp"
#include "hapfl/rng.hpp"
#include "hapfl/scenario.hpp"

namespace hapfl {
namespace {

constexpr std::uint64_t kSuiteTag = 0x76657279;

double draw_log_uniform(Rng& r, double lo, double hi) {
  return std::exp(std::log(lo) + r.uniform() * (std::log(hi) - std::log(lo)));
}

}  // namespace

BoundSuiteResult run_bound_suite(int seeds, int rounds, int clients,
                                 const std::vector<int>& cohorts,
                                 const std::vector<double>& etas, Exec exec) {
  BoundSuiteResult out;
  // Generous per-round budgets: this suite certifies the learning bound, and a
  // freak deep fade must not evict anyone from the fixed cohorts it tracks.
  SystemParams roomy;
  roomy.client_energy_budget_j = 2000.0;
  for (int seed = 0; seed < seeds; ++seed) {
    const Scenario scenario =
        generate_scenario(1000 + static_cast<std::uint64_t>(seed), clients, roomy);
    const LossModel model = make_noniid_tasks(2000 + static_cast<std::uint64_t>(seed), clients,
                                              40, 8, 0.5);
    for (double eta : etas) {
      for (int m : cohorts) {
        std::vector<int> prefix(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) prefix[static_cast<std::size_t>(k)] = k;

        FlParams params;
        params.eta = eta;
        params.rounds = rounds;
        params.bound_subset = prefix;
        const FlDerived der = derive_fl(model, params);
        const RoundPlanner planner = [&prefix, &der, eta](const Scenario& s,
                                                          const ChannelState& ch, int) {
          return plan_forced(s, ch, der.iter_coeff, eta, prefix);
        };
        const FlRun run = run_training(scenario, model, params, planner, exec);

        // recursive re-evaluation of the closed-form bound
        const double rho = bound_decay_rate(der.smoothness, der.strong_convexity, params.xi, eta);
        const double drift = (der.smoothness * params.xi - der.strong_convexity) /
                             (2.0 * params.xi);
        double eps = run.initial_gap;
        for (const RoundRecord& rec : run.rounds) {
          if (static_cast<int>(rec.selected.size()) != m) {
            throw std::logic_error("forced cohort changed size during the bound suite");
          }
          eps = rho * eps + drift * rec.sum_sq_update / static_cast<double>(m);
          const double rel = std::fabs(eps - rec.bound) /
                             std::max({std::fabs(eps), std::fabs(rec.bound), 1e-300});
          out.max_recursive_gap = std::max(out.max_recursive_gap, rel);

          const double gap = rec.loss_selected - run.anchor_optimum;
          const double margin = rec.bound - gap;
          out.worst_margin = std::min(out.worst_margin, margin);
          if (gap > rec.bound + 1e-9 * std::max(1.0, std::fabs(rec.bound))) ++out.violations;
          ++out.rounds;
        }
        ++out.runs;
      }
    }
  }
  return out;
}

SolverSuiteResult run_solver_suite(int cases, const std::vector<int>& clients,
                                   std::uint64_t seed0, Exec exec) {
  if (clients.empty()) throw std::invalid_argument("solver suite needs client counts");
  SolverSuiteResult out;
  for (int i = 0; i < cases; ++i) {
    const int k = clients[static_cast<std::size_t>(i) % clients.size()];
    opt::SolveResult res;
    for (int attempt = 0;; ++attempt) {
      const std::uint64_t seed = mix_seed(seed0, kSuiteTag + static_cast<std::uint64_t>(i),
                                          static_cast<std::uint64_t>(attempt));
      const Scenario scenario = generate_scenario(seed, k);
      const ChannelState ch = realize_channel(scenario, 0, exec);
      Rng r = Rng::stream(seed, kSuiteTag, 99);
      opt::SolverOptions o;
      o.iter_coeff = draw_log_uniform(r, 10.0, 5000.0);
      o.exec = exec;
      try {
        res = opt::solve(scenario, ch, o);
      } catch (const opt::InfeasibleError&) {
        ++out.redraws;
        if (attempt >= 20) throw;
        continue;
      }
      break;
    }
    const std::vector<double>& trace = res.state.delay_trace_s;
    for (std::size_t j = 1; j < trace.size(); ++j) {
      if (trace[j] > trace[j - 1] * (1.0 + 1e-9)) ++out.trace_violations;
    }
    out.worst_kkt = std::max(out.worst_kkt, res.state.residuals.max());
    ++out.scenarios;
  }
  return out;
}

namespace {

// Cheapest finish time (upload plus local compute) for one client at a given
// bandwidth and accuracy level: grid over power and CPU speed under the
// energy budget, then one zoomed refinement around the best cell.
double best_finish(const Scenario& s, const ChannelState& ch, int k, double band, double eta,
                   double iter_coeff) {
  const ClientProfile& c = s.clients[static_cast<std::size_t>(k)];
  const SystemParams& sp = s.params;
  const double gain = ch.gain[static_cast<std::size_t>(k)];
  const double work = eta >= 1.0 ? 0.0 : iter_coeff * std::log2(1.0 / eta) *
                                             c.cycles_per_sample * c.samples;
  const auto eval = [&](double p, double f) {
    const double rate = uplink_rate_bps(band, p, gain, sp.noise_psd_w_per_hz);
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    const double slot = sp.update_size_bits / rate;
    const double energy = slot * p + c.capacitance * work * f * f;
    if (energy > c.energy_budget_j) return std::numeric_limits<double>::infinity();
    return slot + work / f;
  };
  const auto scan = [&](double p_lo, double p_hi, double f_lo, double f_hi, int steps,
                        double* best_p, double* best_f) {
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= steps; ++a) {
      const double p = p_lo * std::pow(p_hi / p_lo, static_cast<double>(a) / steps);
      for (int b = 0; b <= steps; ++b) {
        const double f = f_lo * std::pow(f_hi / f_lo, static_cast<double>(b) / steps);
        const double v = eval(p, f);
        if (v < best) {
          best = v;
          *best_p = p;
          *best_f = f;
        }
      }
    }
    return best;
  };
  double bp = c.max_power_w;
  double bf = c.cpu_hz_max;
  double best = scan(c.max_power_w * 1e-3, c.max_power_w, c.cpu_hz_min, c.cpu_hz_max, 12,
                     &bp, &bf);
  if (!std::isfinite(best)) return best;
  const double zoom = 1.4;
  best = std::min(best, scan(std::max(bp / zoom, c.max_power_w * 1e-4),
                             std::min(bp * zoom, c.max_power_w),
                             std::clamp(bf / zoom, c.cpu_hz_min, c.cpu_hz_max),
                             std::clamp(bf * zoom, c.cpu_hz_min, c.cpu_hz_max), 10, &bp, &bf));
  return best;
}

// Platform compute-plus-broadcast time for a cohort under the energy budget.
double best_platform(const Scenario& s, double min_gain, int cohort) {
  const SystemParams& sp = s.params;
  const double cycles = sp.haps_cycles_per_bit * sp.update_size_bits * cohort;
  const auto eval = [&](double f, double p) {
    const double rate = uplink_rate_bps(sp.bandwidth_hz, p, min_gain, sp.noise_psd_w_per_hz);
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    const double t_cp = cycles / f;
    const double t_bc = sp.update_size_bits / rate;
    const double energy = sp.haps_capacitance * f * f * cycles + p * t_bc;
    if (energy > sp.haps_energy_budget_j) return std::numeric_limits<double>::infinity();
    return t_cp + t_bc;
  };
  const auto scan = [&](double f_lo, double f_hi, double p_lo, double p_hi, int steps,
                        double* best_f, double* best_p) {
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= steps; ++a) {
      const double f = f_lo * std::pow(f_hi / f_lo, static_cast<double>(a) / steps);
      for (int b = 0; b <= steps; ++b) {
        const double p = p_lo * std::pow(p_hi / p_lo, static_cast<double>(b) / steps);
        const double v = eval(f, p);
        if (v < best) {
          best = v;
          *best_f = f;
          *best_p = p;
        }
      }
    }
    return best;
  };
  double bf = sp.haps_cpu_hz_max;
  double bp = sp.haps_bc_power_max_w;
  double best = scan(sp.haps_cpu_hz_min, sp.haps_cpu_hz_max, sp.haps_bc_power_max_w * 1e-3,
                     sp.haps_bc_power_max_w, 12, &bf, &bp);
  if (!std::isfinite(best)) return best;
  const double zoom = 1.4;
  best = std::min(best, scan(std::clamp(bf / zoom, sp.haps_cpu_hz_min, sp.haps_cpu_hz_max),
                             std::clamp(bf * zoom, sp.haps_cpu_hz_min, sp.haps_cpu_hz_max),
                             std::max(bp / zoom, sp.haps_bc_power_max_w * 1e-4),
                             std::min(bp * zoom, sp.haps_bc_power_max_w), 10, &bf, &bp));
  return best;
}

}  // namespace

double brute_force_delay(const Scenario& s, const ChannelState& ch, double iter_coeff,
                         double eta_cap, int min_selected) {
  const int clients = s.client_count();
  if (clients > 4) throw std::invalid_argument("brute force is sized for tiny fleets");

  std::vector<double> etas;
  for (double e : {0.30, 0.50, 0.70, 0.85}) {
    if (e < eta_cap) etas.push_back(e);
  }
  etas.push_back(eta_cap);

  // Shared spectrum shares on a 2% lattice: index i holds (i+1)*2%, so pairs
  // sum to 100% at i+j = 48 and triples at i+j+k = 47. The last slot is the
  // whole band for singleton cohorts.
  std::vector<double> lattice;
  for (int w = 2; w <= 98; w += 2) lattice.push_back(w / 100.0);
  lattice.push_back(1.0);

  // memoized per-client finish at (client, eta index, share index)
  std::map<std::tuple<int, int, int>, double> finish_memo;
  const auto finish_at = [&](int k, int ei, int wi) {
    const auto key = std::make_tuple(k, ei, wi);
    const auto it = finish_memo.find(key);
    if (it != finish_memo.end()) return it->second;
    const double v = best_finish(s, ch, k, lattice[static_cast<std::size_t>(wi)] *
                                               s.params.bandwidth_hz,
                                 etas[static_cast<std::size_t>(ei)], iter_coeff);
    finish_memo.emplace(key, v);
    return v;
  };

  double best = std::numeric_limits<double>::infinity();
  const int subsets = 1 << clients;
  for (int mask = 1; mask < subsets; ++mask) {
    std::vector<int> members;
    for (int k = 0; k < clients; ++k) {
      if (mask & (1 << k)) members.push_back(k);
    }
    if (static_cast<int>(members.size()) < min_selected) continue;

    const double platform = best_platform(s, min_gain(ch, members),
                                          static_cast<int>(members.size()));
    if (!std::isfinite(platform)) continue;

    for (int ei = 0; ei < static_cast<int>(etas.size()); ++ei) {
      const auto uplink_for = [&](const std::vector<int>& widx) {
        double worst = 0.0;
        for (std::size_t j = 0; j < members.size(); ++j) {
          worst = std::max(worst, finish_at(members[j], ei, widx[j]));
        }
        return worst;
      };
      if (members.size() == 1) {
        best = std::min(best, uplink_for({static_cast<int>(lattice.size()) - 1}) + platform);
      } else if (members.size() == 2) {
        for (int w = 0; w <= 48; ++w) {
          best = std::min(best, uplink_for({w, 48 - w}) + platform);
        }
      } else {
        for (int w1 = 0; w1 <= 47; ++w1) {
          for (int w2 = 0; w2 <= 47 - w1; ++w2) {
            best = std::min(best, uplink_for({w1, w2, 47 - w1 - w2}) + platform);
          }
        }
      }
    }
  }
  return best;
}

BruteSuiteResult run_brute_suite(int cases, std::uint64_t seed0) {
  BruteSuiteResult out;
  for (int i = 0; i < cases; ++i) {
    for (int attempt = 0;; ++attempt) {
      const std::uint64_t seed = mix_seed(seed0, 0x62727574 + static_cast<std::uint64_t>(i),
                                          static_cast<std::uint64_t>(attempt));
      const Scenario scenario = generate_scenario(seed, 3);
      const ChannelState ch = realize_channel(scenario, 0);
      Rng r = Rng::stream(seed, 0x62727574, 7);
      opt::SolverOptions o;
      o.iter_coeff = draw_log_uniform(r, 50.0, 2000.0);
      opt::SolveResult res;
      try {
        res = opt::solve(scenario, ch, o);
      } catch (const opt::InfeasibleError&) {
        if (attempt >= 20) throw;
        continue;
      }
      const double reference = brute_force_delay(scenario, ch, o.iter_coeff, o.eta_cap, 2);
      if (!std::isfinite(reference)) throw std::logic_error("brute force found no feasible plan");
      out.worst_ratio = std::max(out.worst_ratio, res.delay.total_s / reference);
      ++out.cases;
      break;
    }
  }
  return out;
}

}  // namespace hapfl
