#include "hapfl/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "hapfl/simplex.hpp"

namespace hapfl::opt {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLn2 = 0.6931471805599453;
constexpr double kGateTol = 1e-9;  // relative slack treated as satisfied

double log2_inv(double eta) { return eta >= 1.0 ? 0.0 : std::log2(1.0 / eta); }

double iters_at(double iter_coeff, double eta) { return iter_coeff * log2_inv(eta); }

double cp_time(const ClientProfile& c, double iter_coeff, double eta, double cpu_hz) {
  return client_compute_time_s(iters_at(iter_coeff, eta), c.cycles_per_sample, c.samples, cpu_hz);
}

// compute energy is coeff * f^2 with this coefficient
double cp_energy_coeff(const ClientProfile& c, double iter_coeff, double eta) {
  return c.capacitance * iters_at(iter_coeff, eta) * c.cycles_per_sample *
         static_cast<double>(c.samples);
}

double cp_energy(const ClientProfile& c, double iter_coeff, double eta, double cpu_hz) {
  return cp_energy_coeff(c, iter_coeff, eta) * cpu_hz * cpu_hz;
}

int resolve_min_selected(const SolverOptions& opt, int clients) {
  if (opt.min_selected < 0) return (clients + 1) / 2;
  return std::clamp(opt.min_selected, 1, clients);
}

void deselect(const Scenario& s, Allocation& alloc, int k) {
  alloc.selected[static_cast<std::size_t>(k)] = 0;
  alloc.bandwidth_hz[static_cast<std::size_t>(k)] = 0.0;
  alloc.power_w[static_cast<std::size_t>(k)] = 0.0;
  alloc.upload_time_s[static_cast<std::size_t>(k)] = 0.0;
  alloc.cpu_hz[static_cast<std::size_t>(k)] = s.clients[static_cast<std::size_t>(k)].cpu_hz_min;
}

double relative_gap(double x, double y) {
  return std::fabs(x - y) / std::max({std::fabs(x), std::fabs(y), 1e-30});
}

FeasibilityReport single_item_report(const std::string& constraint, double violation,
                                     double tolerance) {
  FeasibilityReport rep;
  rep.items.push_back({constraint, violation, tolerance, false});
  rep.feasible = false;
  return rep;
}

}  // namespace

int Allocation::selected_count() const {
  int n = 0;
  for (std::uint8_t a : selected) n += a != 0;
  return n;
}

std::vector<int> Allocation::selected_ids() const {
  std::vector<int> ids;
  for (std::size_t k = 0; k < selected.size(); ++k) {
    if (selected[k]) ids.push_back(static_cast<int>(k));
  }
  return ids;
}

double KktResiduals::max() const {
  return std::max({eta, cpu, power, bandwidth, haps_cpu, haps_power});
}

std::string FeasibilityReport::to_string() const {
  std::ostringstream out;
  for (const FeasibilityItem& it : items) {
    out << (it.ok ? "      ok " : "violated ") << it.constraint << "  slack_violation=" << it.violation
        << "  tolerance=" << it.tolerance << "\n";
  }
  for (const std::string& w : warnings) out << " warning " << w << "\n";
  return out.str();
}

InfeasibleError::InfeasibleError(const std::string& what, FeasibilityReport report)
    : std::runtime_error(what + "\n" + report.to_string()), report_(std::move(report)) {}

double min_upload_time_s(const Scenario& s, const ChannelState& ch, const Allocation& alloc,
                         int k) {
  const double rate =
      uplink_rate_bps(alloc.bandwidth_hz[static_cast<std::size_t>(k)],
                      alloc.power_w[static_cast<std::size_t>(k)],
                      ch.gain[static_cast<std::size_t>(k)], s.params.noise_psd_w_per_hz);
  return rate > 0.0 ? s.params.update_size_bits / rate : kInf;
}

DelayBreakdown delay_of(const Scenario& s, const ChannelState& ch, const Allocation& alloc,
                        double iter_coeff) {
  (void)ch;
  DelayBreakdown d;
  int cohort = 0;
  for (int k = 0; k < s.client_count(); ++k) {
    if (!alloc.selected[static_cast<std::size_t>(k)]) continue;
    ++cohort;
    const ClientProfile& c = s.clients[static_cast<std::size_t>(k)];
    const double dk = alloc.upload_time_s[static_cast<std::size_t>(k)] +
                      cp_time(c, iter_coeff, alloc.eta, alloc.cpu_hz[static_cast<std::size_t>(k)]);
    if (d.argmax_client < 0 || dk > d.uplink_s) {
      d.uplink_s = dk;
      d.argmax_client = k;
    }
  }
  if (cohort == 0) return d;
  d.downlink_s = alloc.haps_bc_time_s;
  d.total_s = d.uplink_s +
              haps_compute_time_s(s.params.haps_cycles_per_bit, s.params.update_size_bits, cohort,
                                  alloc.haps_cpu_hz) +
              d.downlink_s;
  return d;
}

double power_for_budget(double bandwidth_hz, double gain, double noise_w_hz, double bits,
                        double energy_j, double power_cap_w) {
  if (bandwidth_hz <= 0.0 || gain <= 0.0 || energy_j <= 0.0 || power_cap_w <= 0.0) return 0.0;
  const auto upload_energy = [&](double p) {
    return p * bits / uplink_rate_bps(bandwidth_hz, p, gain, noise_w_hz);
  };
  if (upload_energy(power_cap_w) <= energy_j) return power_cap_w;
  // energy per upload falls to this floor as power goes to zero
  const double floor = bits * noise_w_hz * kLn2 / gain;
  if (energy_j <= floor) return 0.0;
  double lo = 0.0;
  double hi = power_cap_w;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (upload_energy(mid) <= energy_j ? lo : hi) = mid;
  }
  return lo;
}

bool refresh_client_plan(const Scenario& s, const ChannelState& ch, Allocation& alloc, int k,
                         double iter_coeff) {
  const std::size_t i = static_cast<std::size_t>(k);
  const ClientProfile& c = s.clients[i];
  const SystemParams& sp = s.params;
  const double gain = ch.gain[i];
  const double band = alloc.bandwidth_hz[i];
  if (band <= 0.0 || gain <= 0.0) return false;
  const double coeff = cp_energy_coeff(c, iter_coeff, alloc.eta);

  double cpu = alloc.cpu_hz[i] > 0.0 ? alloc.cpu_hz[i] : c.cpu_hz_max;
  double power = alloc.power_w[i] > 0.0 ? alloc.power_w[i] : c.max_power_w;
  double slot = sp.update_size_bits / uplink_rate_bps(band, power, gain, sp.noise_psd_w_per_hz);
  for (int it = 0; it < 200; ++it) {
    double next_cpu = c.cpu_hz_max;
    if (coeff > 0.0) {
      const double e_compute = std::max(c.energy_budget_j - slot * power, 0.0);
      next_cpu = std::clamp(std::sqrt(e_compute / coeff), c.cpu_hz_min, c.cpu_hz_max);
    }
    const double e_upload = c.energy_budget_j - coeff * next_cpu * next_cpu;
    const double next_power = power_for_budget(band, gain, sp.noise_psd_w_per_hz,
                                               sp.update_size_bits, e_upload, c.max_power_w);
    if (next_power <= 0.0) return false;
    slot = sp.update_size_bits /
           uplink_rate_bps(band, next_power, gain, sp.noise_psd_w_per_hz);
    const bool settled = relative_gap(next_cpu, cpu) <= 1e-13 && relative_gap(next_power, power) <= 1e-13;
    cpu = next_cpu;
    power = next_power;
    if (settled) break;
  }
  alloc.cpu_hz[i] = cpu;
  alloc.power_w[i] = power;
  alloc.upload_time_s[i] = slot;
  return true;
}

std::vector<double> equalize_bandwidth(const std::vector<double>& gains,
                                       const std::vector<double>& powers, double noise_w_hz,
                                       double total_hz, double* price, double* taylor_point) {
  const std::size_t n = gains.size();
  if (powers.size() != n) throw std::invalid_argument("bandwidth split arity mismatch");
  if (price) *price = 0.0;
  if (taylor_point) *taylor_point = 0.0;
  std::vector<double> out(n, 0.0);
  if (total_hz <= 0.0) return out;

  std::vector<double> snr_hz(n, 0.0);  // received power over noise density
  double x0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (gains[i] > 0.0 && powers[i] > 0.0) {
      snr_hz[i] = gains[i] * powers[i] / noise_w_hz;
      x0 = std::max(x0, snr_hz[i]);
    }
  }
  if (x0 <= 0.0) return out;

  // Closed-form share per link at a common spectrum price (natural-log
  // units). Positive root of the stationarity quadratic; zero once the price
  // exceeds what the link can pay.
  const auto share = [&](std::size_t i, double psi) {
    const double pi = snr_hz[i];
    if (pi <= 0.0) return 0.0;
    const double b1 = std::log1p(pi / x0) - psi * kLn2;
    const double b2 = pi / (x0 * (x0 + pi));
    const double c1 = b1 + b2 * (x0 - pi);
    const double c0 = pi * (b1 + b2 * x0 + 1.0);
    if (c0 <= 0.0) return 0.0;
    return (c1 + std::sqrt(c1 * c1 + 4.0 * b2 * c0)) / (2.0 * b2);
  };
  const auto total = [&](double psi) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += share(i, psi);
    return acc;
  };

  // the total is strictly decreasing in the price wherever it is positive
  double lo;  // total(lo) >= total_hz
  double hi;  // total(hi) < total_hz
  if (total(0.0) >= total_hz) {
    lo = 0.0;
    hi = 1.0;
    while (total(hi) >= total_hz) hi *= 2.0;
  } else {
    hi = 0.0;
    lo = -1.0;
    while (total(lo) < total_hz) lo *= 2.0;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= std::min(lo, hi) || mid >= std::max(lo, hi)) break;
    (total(mid) >= total_hz ? lo : hi) = mid;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = share(i, hi);
  if (price) *price = hi;
  if (taylor_point) *taylor_point = x0;
  return out;
}

PlatformPlan plan_platform(const SystemParams& sp, double min_gain, int cohort, double bc_bits,
                           double bc_bandwidth_hz) {
  PlatformPlan plan;
  if (cohort <= 0) return plan;
  if (min_gain <= 0.0) throw std::invalid_argument("broadcast needs a positive min gain");

  const double cycles = sp.haps_cycles_per_bit * sp.update_size_bits * cohort;
  const auto cpu_energy = [&](double f) { return sp.haps_capacitance * f * f * cycles; };
  const auto bc_time = [&](double p) {
    return bc_bits / uplink_rate_bps(bc_bandwidth_hz, p, min_gain, sp.noise_psd_w_per_hz);
  };
  const auto bc_energy = [&](double p) { return p * bc_time(p); };

  double cpu = sp.haps_cpu_hz_max;
  double power = sp.haps_bc_power_max_w;
  if (cpu_energy(cpu) + bc_energy(power) > sp.haps_energy_budget_j) {
    const double floor =
        cpu_energy(sp.haps_cpu_hz_min) + bc_bits * sp.noise_psd_w_per_hz * kLn2 / min_gain;
    if (sp.haps_energy_budget_j <= floor) {
      throw InfeasibleError(
          "platform energy budget cannot cover aggregation plus broadcast",
          single_item_report("haps_energy", floor - sp.haps_energy_budget_j,
                             kGateTol * sp.haps_energy_budget_j));
    }
    // both knobs fall as the shared energy price rises
    const auto at_price = [&](double mu) {
      const double f = std::clamp(std::pow(2.0 * mu * sp.haps_capacitance, -1.0 / 3.0),
                                  sp.haps_cpu_hz_min, sp.haps_cpu_hz_max);
      const double p = std::min(sp.haps_bc_power_max_w,
                                std::sqrt(bc_bandwidth_hz * sp.noise_psd_w_per_hz /
                                          (mu * min_gain)));
      return std::make_pair(f, p);
    };
    const auto energy = [&](double mu) {
      const auto [f, p] = at_price(mu);
      return cpu_energy(f) + bc_energy(p);
    };
    double lo = 0.0;  // price 0 means both caps, already over budget here
    double hi = 1.0;
    while (energy(hi) > sp.haps_energy_budget_j) hi *= 4.0;
    for (int it = 0; it < 300; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (energy(mid) > sp.haps_energy_budget_j ? lo : hi) = mid;
    }
    std::tie(cpu, power) = at_price(hi);
  }
  plan.cpu_hz = cpu;
  plan.bc_power_w = power;
  plan.bc_time_s = bc_time(power);
  plan.cpu_price = 1.0 / (2.0 * sp.haps_capacitance * cpu * cpu * cpu);
  plan.bc_price = bc_bandwidth_hz * sp.noise_psd_w_per_hz / (power * power * min_gain);
  return plan;
}

void solve_upload_schedule(const Scenario& s, const ChannelState& ch, Allocation& alloc,
                           Multipliers& mult, const SolverOptions& opt) {
  const std::vector<int> sel = alloc.selected_ids();
  if (sel.empty()) return;
  for (int k : sel) {
    const double slot = min_upload_time_s(s, ch, alloc, k);
    if (!std::isfinite(slot)) {
      throw std::logic_error("selected client has a dead link in the schedule block");
    }
    alloc.upload_time_s[static_cast<std::size_t>(k)] = slot;
  }

  // tightest accuracy level every energy budget still supports
  double eta_lo = 1e-12;
  int binding = -1;
  double deficit = 0.0;
  for (int k : sel) {
    const std::size_t i = static_cast<std::size_t>(k);
    const ClientProfile& c = s.clients[i];
    const double per_log2 = c.capacitance * opt.iter_coeff * c.cycles_per_sample *
                            static_cast<double>(c.samples) * alloc.cpu_hz[i] * alloc.cpu_hz[i];
    const double e_avail = c.energy_budget_j - alloc.upload_time_s[i] * alloc.power_w[i];
    if (e_avail <= 0.0) {
      eta_lo = 2.0;
      binding = k;
      deficit = -e_avail;
      break;
    }
    const double lim = std::exp2(-e_avail / per_log2);
    if (lim > eta_lo) {
      eta_lo = lim;
      binding = k;
      deficit = 0.0;
    }
  }
  if (eta_lo > opt.eta_cap * (1.0 + 1e-12)) {
    std::ostringstream what;
    what << "accuracy cap " << opt.eta_cap << " is below the energy-feasible level " << eta_lo
         << " (client " << binding << ")";
    throw InfeasibleError(what.str(),
                          single_item_report("client_energy(client " + std::to_string(binding) + ")",
                                             deficit > 0.0 ? deficit : eta_lo - opt.eta_cap, 0.0));
  }

  // Uplink delay as a function of the accuracy level; the other delay terms do
  // not move with eta. Falls as eta grows, so the cap should win; the golden
  // search plus endpoint comparison keeps that honest.
  const auto uplink = [&](double eta) {
    double worst = 0.0;
    for (int k : sel) {
      const std::size_t i = static_cast<std::size_t>(k);
      const ClientProfile& c = s.clients[i];
      worst = std::max(worst, alloc.upload_time_s[i] + cp_time(c, opt.iter_coeff, eta, alloc.cpu_hz[i]));
    }
    return worst;
  };
  double a = std::min(eta_lo, opt.eta_cap);
  double b = opt.eta_cap;
  const double golden = 0.6180339887498949;
  double x1 = b - golden * (b - a);
  double x2 = a + golden * (b - a);
  double f1 = uplink(x1);
  double f2 = uplink(x2);
  for (int it = 0; it < 90 && b - a > 1e-14; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - golden * (b - a);
      f1 = uplink(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + golden * (b - a);
      f2 = uplink(x2);
    }
  }
  double best = opt.eta_cap;
  double best_cost = uplink(best);
  for (double cand : {std::min(eta_lo, opt.eta_cap), 0.5 * (a + b)}) {
    const double cost = uplink(cand);
    if (cost < best_cost) {
      best = cand;
      best_cost = cost;
    }
  }
  alloc.eta = best;

  // cap multiplier from the slowest client's stationarity
  const DelayBreakdown d = delay_of(s, ch, alloc, opt.iter_coeff);
  if (d.argmax_client >= 0) {
    const ClientProfile& c = s.clients[static_cast<std::size_t>(d.argmax_client)];
    const double slope = opt.iter_coeff * c.cycles_per_sample * static_cast<double>(c.samples) /
                         alloc.cpu_hz[static_cast<std::size_t>(d.argmax_client)];
    mult.eta_price = slope / (alloc.eta * kLn2);
  }
}

void solve_selection(const Scenario& s, const ChannelState& ch, Allocation& alloc,
                     Multipliers& mult, const SolverOptions& opt) {
  (void)mult;
  const SystemParams& sp = s.params;
  const std::vector<int> sel = alloc.selected_ids();
  if (sel.empty()) return;
  const double bits = sp.update_size_bits;

  // CPU speeds first: the fastest speed the leftover energy can drive
  for (int k : sel) {
    const std::size_t i = static_cast<std::size_t>(k);
    const ClientProfile& c = s.clients[i];
    const double coeff = cp_energy_coeff(c, opt.iter_coeff, alloc.eta);
    double cpu = c.cpu_hz_max;
    if (coeff > 0.0) {
      const double e_compute =
          std::max(c.energy_budget_j - alloc.upload_time_s[i] * alloc.power_w[i], 0.0);
      cpu = std::clamp(std::sqrt(e_compute / coeff), c.cpu_hz_min, c.cpu_hz_max);
    }
    alloc.cpu_hz[i] = cpu;
  }

  // participation gates at the frozen uplink plan
  std::vector<int> eligible;
  std::vector<double> finish;  // upload plus local compute per eligible client
  for (int k : sel) {
    const std::size_t i = static_cast<std::size_t>(k);
    const ClientProfile& c = s.clients[i];
    const double rate = uplink_rate_bps(alloc.bandwidth_hz[i], alloc.power_w[i], ch.gain[i],
                                        sp.noise_psd_w_per_hz);
    const bool up_ok = alloc.upload_time_s[i] * rate >= bits * (1.0 - kGateTol);
    const double spent = alloc.upload_time_s[i] * alloc.power_w[i] +
                         cp_energy(c, opt.iter_coeff, alloc.eta, alloc.cpu_hz[i]);
    const bool energy_ok = spent <= c.energy_budget_j * (1.0 + kGateTol);
    const double down_rate =
        uplink_rate_bps(sp.bandwidth_hz, alloc.haps_bc_power_w, ch.gain[i], sp.noise_psd_w_per_hz);
    const bool down_ok = alloc.haps_bc_time_s * down_rate >= bits * (1.0 - kGateTol);
    if (up_ok && energy_ok && down_ok) {
      eligible.push_back(k);
      finish.push_back(alloc.upload_time_s[i] +
                       cp_time(c, opt.iter_coeff, alloc.eta, alloc.cpu_hz[i]));
    }
  }
  if (eligible.empty()) return;  // the gates admit nobody new; keep the current set

  const int elig_n = static_cast<int>(eligible.size());
  // the platform-time budget admits as many uploads as it currently serves
  const int cap_units = static_cast<int>(sel.size());
  const int need = std::max(1, std::min({resolve_min_selected(opt, s.client_count()), elig_n,
                                         cap_units}));

  // Linear relaxation: finish-time epigraph plus platform work per upload.
  // Columns are scaled to [0, 1] before pivoting.
  const double d_max = *std::max_element(finish.begin(), finish.end());
  const double per_upload = sp.haps_cycles_per_bit * bits / alloc.haps_cpu_hz;
  const int cols = elig_n + 1;  // shares, then the scaled finish epigraph
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  std::vector<double> obj(static_cast<std::size_t>(cols), 0.0);
  for (int j = 0; j < elig_n; ++j) obj[static_cast<std::size_t>(j)] = -per_upload / d_max;
  obj[static_cast<std::size_t>(elig_n)] = -1.0;

  for (int j = 0; j < elig_n; ++j) {
    std::vector<double> row(static_cast<std::size_t>(cols), 0.0);
    row[static_cast<std::size_t>(j)] = finish[static_cast<std::size_t>(j)] / d_max;
    row[static_cast<std::size_t>(elig_n)] = -1.0;
    rows.push_back(std::move(row));
    rhs.push_back(0.0);
  }
  for (int j = 0; j < elig_n; ++j) {
    std::vector<double> row(static_cast<std::size_t>(cols), 0.0);
    row[static_cast<std::size_t>(j)] = 1.0;
    rows.push_back(std::move(row));
    rhs.push_back(1.0);
  }
  {
    std::vector<double> row(static_cast<std::size_t>(cols), 0.0);
    for (int j = 0; j < elig_n; ++j) row[static_cast<std::size_t>(j)] = 1.0;
    rows.push_back(row);
    rhs.push_back(static_cast<double>(cap_units));
    for (int j = 0; j < elig_n; ++j) {
      row[static_cast<std::size_t>(j)] =
          alloc.bandwidth_hz[static_cast<std::size_t>(eligible[static_cast<std::size_t>(j)])] /
          sp.bandwidth_hz;
    }
    row[static_cast<std::size_t>(elig_n)] = 0.0;
    rows.push_back(row);
    rhs.push_back(1.0);
    for (int j = 0; j < elig_n; ++j) row[static_cast<std::size_t>(j)] = -1.0;
    rows.push_back(row);
    rhs.push_back(-static_cast<double>(need));
  }

  const LpResult lp = solve_lp(rows, rhs, obj, opt.exec);
  if (lp.status != LpStatus::Optimal) return;

  // Every member costs platform work and the epigraph only grows with the
  // cohort, so the integral optimum keeps exactly the participation floor.
  // The relaxation spreads shares to flatten the epigraph; rank members by
  // the share the relaxation gave them, break ties toward the cheapest
  // spectrum (decisive once the radio block has equalized finish times),
  // then the earliest finish.
  std::vector<int> order(static_cast<std::size_t>(elig_n));
  for (int j = 0; j < elig_n; ++j) order[static_cast<std::size_t>(j)] = j;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double xa = lp.x[static_cast<std::size_t>(a)];
    const double xb = lp.x[static_cast<std::size_t>(b)];
    if (xa != xb) return xa > xb;
    const double ba = alloc.bandwidth_hz[static_cast<std::size_t>(eligible[static_cast<std::size_t>(a)])];
    const double bb = alloc.bandwidth_hz[static_cast<std::size_t>(eligible[static_cast<std::size_t>(b)])];
    if (ba != bb) return ba < bb;
    if (finish[static_cast<std::size_t>(a)] != finish[static_cast<std::size_t>(b)]) {
      return finish[static_cast<std::size_t>(a)] < finish[static_cast<std::size_t>(b)];
    }
    return a < b;
  });
  std::vector<int> picked;
  for (int j : order) {
    if (static_cast<int>(picked.size()) >= need) break;
    picked.push_back(eligible[static_cast<std::size_t>(j)]);
  }

  // rounding can overshoot the aggregate budgets; shed the slowest until it fits
  const auto fits = [&](const std::vector<int>& set) {
    double band = 0.0;
    for (int k : set) band += alloc.bandwidth_hz[static_cast<std::size_t>(k)];
    return band <= sp.bandwidth_hz * (1.0 + kGateTol) &&
           static_cast<int>(set.size()) <= cap_units;
  };
  const auto finish_of = [&](int k) {
    const std::size_t i = static_cast<std::size_t>(k);
    return alloc.upload_time_s[i] +
           cp_time(s.clients[i], opt.iter_coeff, alloc.eta, alloc.cpu_hz[i]);
  };
  while (picked.size() > 1 && !fits(picked)) {
    std::size_t worst = 0;
    for (std::size_t j = 1; j < picked.size(); ++j) {
      if (finish_of(picked[j]) > finish_of(picked[worst])) worst = j;
    }
    picked.erase(picked.begin() + static_cast<std::ptrdiff_t>(worst));
  }

  std::vector<std::uint8_t> keep(static_cast<std::size_t>(s.client_count()), 0);
  for (int k : picked) keep[static_cast<std::size_t>(k)] = 1;
  for (int k : sel) {
    if (!keep[static_cast<std::size_t>(k)]) deselect(s, alloc, k);
  }
}

void solve_radio(const Scenario& s, const ChannelState& ch, Allocation& alloc, Multipliers& mult,
                 const SolverOptions& opt) {
  const SystemParams& sp = s.params;
  for (int outer = 0; outer < 80; ++outer) {
    std::vector<int> sel = alloc.selected_ids();
    if (sel.empty()) {
      throw InfeasibleError("no client can meet its energy budget on the assigned spectrum",
                            single_item_report("client_energy", 0.0, 0.0));
    }

    // per-client consistency at the current spectrum split
    bool dropped = false;
    for (int k : sel) {
      if (!refresh_client_plan(s, ch, alloc, k, opt.iter_coeff)) {
        deselect(s, alloc, k);
        dropped = true;
      }
    }
    if (dropped) continue;

    // re-split the spectrum at the refreshed powers
    std::vector<double> gains(sel.size());
    std::vector<double> powers(sel.size());
    for (std::size_t j = 0; j < sel.size(); ++j) {
      gains[j] = ch.gain[static_cast<std::size_t>(sel[j])];
      powers[j] = alloc.power_w[static_cast<std::size_t>(sel[j])];
    }
    double psi = 0.0;
    double x0 = 0.0;
    const std::vector<double> shares =
        equalize_bandwidth(gains, powers, sp.noise_psd_w_per_hz, sp.bandwidth_hz, &psi, &x0);

    double delta = 0.0;
    for (std::size_t j = 0; j < sel.size(); ++j) {
      const std::size_t i = static_cast<std::size_t>(sel[j]);
      if (shares[j] <= 0.0) {
        deselect(s, alloc, sel[j]);  // priced out of the spectrum
        dropped = true;
        continue;
      }
      delta = std::max(delta, std::fabs(shares[j] - alloc.bandwidth_hz[i]));
      alloc.bandwidth_hz[i] = shares[j];
    }
    if (dropped) continue;
    mult.bandwidth_price = psi;
    mult.taylor_point = x0;

    // power and slot at the new split, CPU speed held
    for (int k : sel) {
      const std::size_t i = static_cast<std::size_t>(k);
      const ClientProfile& c = s.clients[i];
      const double e_upload =
          c.energy_budget_j - cp_energy(c, opt.iter_coeff, alloc.eta, alloc.cpu_hz[i]);
      const double power = power_for_budget(alloc.bandwidth_hz[i], ch.gain[i],
                                            sp.noise_psd_w_per_hz, sp.update_size_bits, e_upload,
                                            c.max_power_w);
      if (power <= 0.0) {
        deselect(s, alloc, k);
        dropped = true;
        continue;
      }
      alloc.power_w[i] = power;
      alloc.upload_time_s[i] = sp.update_size_bits / uplink_rate_bps(alloc.bandwidth_hz[i], power,
                                                                     ch.gain[i],
                                                                     sp.noise_psd_w_per_hz);
    }
    if (dropped) continue;
    if (delta <= 1e-10 * sp.bandwidth_hz) break;
  }
}

void solve_platform(const Scenario& s, const ChannelState& ch, Allocation& alloc,
                    Multipliers& mult, const SolverOptions& opt) {
  (void)opt;
  const std::vector<int> sel = alloc.selected_ids();
  if (sel.empty()) {
    alloc.haps_bc_time_s = 0.0;
    return;
  }
  const PlatformPlan plan = plan_platform(s.params, min_gain(ch, sel),
                                          static_cast<int>(sel.size()),
                                          s.params.update_size_bits, s.params.bandwidth_hz);
  alloc.haps_cpu_hz = plan.cpu_hz;
  alloc.haps_bc_power_w = plan.bc_power_w;
  alloc.haps_bc_time_s = plan.bc_time_s;
  mult.haps_cpu_price = plan.cpu_price;
  mult.haps_bc_price = plan.bc_price;
}

FeasibilityReport feasibility_check(const Scenario& s, const ChannelState& ch,
                                    const Allocation& alloc, double iter_coeff) {
  const SystemParams& sp = s.params;
  FeasibilityReport rep;
  const auto add = [&](const std::string& name, double violation, double tolerance) {
    FeasibilityItem it{name, violation, tolerance, violation <= tolerance};
    rep.feasible = rep.feasible && it.ok;
    rep.items.push_back(std::move(it));
  };
  const auto worst_of = [&](const char* family, auto&& per_client, double tolerance) {
    double worst = -kInf;
    int who = -1;
    for (int k = 0; k < s.client_count(); ++k) {
      if (!alloc.selected[static_cast<std::size_t>(k)]) continue;
      const double v = per_client(k);
      if (who < 0 || v > worst) {
        worst = v;
        who = k;
      }
    }
    if (who >= 0) {
      add(std::string(family) + "(client " + std::to_string(who) + ")", worst, tolerance);
    }
  };

  const std::vector<int> sel = alloc.selected_ids();
  const int cohort = static_cast<int>(sel.size());
  if (cohort == 0) {
    rep.warnings.push_back("no clients selected; per-client constraints are vacuous");
  } else {
    worst_of("uplink_data",
             [&](int k) {
               const std::size_t i = static_cast<std::size_t>(k);
               const double rate = uplink_rate_bps(alloc.bandwidth_hz[i], alloc.power_w[i],
                                                   ch.gain[i], sp.noise_psd_w_per_hz);
               return sp.update_size_bits - alloc.upload_time_s[i] * rate;
             },
             kGateTol * sp.update_size_bits);
    worst_of("downlink_data",
             [&](int k) {
               const std::size_t i = static_cast<std::size_t>(k);
               const double rate = uplink_rate_bps(sp.bandwidth_hz, alloc.haps_bc_power_w,
                                                   ch.gain[i], sp.noise_psd_w_per_hz);
               return sp.update_size_bits - alloc.haps_bc_time_s * rate;
             },
             kGateTol * sp.update_size_bits);
    worst_of("client_energy",
             [&](int k) {
               const std::size_t i = static_cast<std::size_t>(k);
               const ClientProfile& c = s.clients[i];
               return alloc.upload_time_s[i] * alloc.power_w[i] +
                      cp_energy(c, iter_coeff, alloc.eta, alloc.cpu_hz[i]) - c.energy_budget_j;
             },
             kGateTol * sp.client_energy_budget_j);
    worst_of("power_bounds",
             [&](int k) {
               const std::size_t i = static_cast<std::size_t>(k);
               return std::max(alloc.power_w[i] - s.clients[i].max_power_w, -alloc.power_w[i]);
             },
             kGateTol * sp.client_max_power_w);
    worst_of("cpu_bounds",
             [&](int k) {
               const std::size_t i = static_cast<std::size_t>(k);
               const ClientProfile& c = s.clients[i];
               return std::max(alloc.cpu_hz[i] - c.cpu_hz_max, c.cpu_hz_min - alloc.cpu_hz[i]);
             },
             kGateTol * sp.client_cpu_hz_max);
    worst_of("time_nonneg",
             [&](int k) { return -alloc.upload_time_s[static_cast<std::size_t>(k)]; }, 0.0);

    double band = 0.0;
    for (int k : sel) band += alloc.bandwidth_hz[static_cast<std::size_t>(k)];
    add("bandwidth_total", band - sp.bandwidth_hz, kGateTol * sp.bandwidth_hz);

    const double t_agg = haps_compute_time_s(sp.haps_cycles_per_bit, sp.update_size_bits, cohort,
                                             alloc.haps_cpu_hz);
    const double e_haps = haps_energy_j(sp.haps_capacitance, alloc.haps_cpu_hz, t_agg,
                                        alloc.haps_bc_power_w, alloc.haps_bc_time_s);
    add("haps_energy", e_haps - sp.haps_energy_budget_j, kGateTol * sp.haps_energy_budget_j);
    add("haps_cpu_bounds",
        std::max(alloc.haps_cpu_hz - sp.haps_cpu_hz_max, sp.haps_cpu_hz_min - alloc.haps_cpu_hz),
        kGateTol * sp.haps_cpu_hz_max);
    add("haps_bc_power", std::max(alloc.haps_bc_power_w - sp.haps_bc_power_max_w,
                                  -alloc.haps_bc_power_w),
        kGateTol * sp.haps_bc_power_max_w);
    add("bc_time_nonneg", -alloc.haps_bc_time_s, 0.0);
  }
  add("accuracy_range",
      alloc.eta <= 0.0 ? 1.0 : std::max(alloc.eta - 1.0, 0.0), 1e-12);
  return rep;
}

KktResiduals kkt_residuals(const Scenario& s, const ChannelState& ch, const Allocation& alloc,
                           const Multipliers& mult, double iter_coeff) {
  const SystemParams& sp = s.params;
  KktResiduals res;
  const std::vector<int> sel = alloc.selected_ids();
  if (sel.empty()) return res;

  // accuracy block: price times marginal delay of the slowest client
  const DelayBreakdown d = delay_of(s, ch, alloc, iter_coeff);
  if (d.argmax_client >= 0) {
    const ClientProfile& c = s.clients[static_cast<std::size_t>(d.argmax_client)];
    const double slope = iter_coeff * c.cycles_per_sample * static_cast<double>(c.samples) /
                         alloc.cpu_hz[static_cast<std::size_t>(d.argmax_client)];
    res.eta = relative_gap(mult.eta_price * alloc.eta * kLn2, slope);
  }

  std::vector<double> snr_hz(sel.size(), 0.0);
  for (std::size_t j = 0; j < sel.size(); ++j) {
    const std::size_t i = static_cast<std::size_t>(sel[j]);
    snr_hz[j] = ch.gain[i] * alloc.power_w[i] / sp.noise_psd_w_per_hz;
  }

  for (std::size_t j = 0; j < sel.size(); ++j) {
    const int k = sel[j];
    const std::size_t i = static_cast<std::size_t>(k);
    const ClientProfile& c = s.clients[i];

    // CPU closed form at the returned operating point
    const double coeff = cp_energy_coeff(c, iter_coeff, alloc.eta);
    double cpu_hat = c.cpu_hz_max;
    if (coeff > 0.0) {
      const double e_compute =
          std::max(c.energy_budget_j - alloc.upload_time_s[i] * alloc.power_w[i], 0.0);
      cpu_hat = std::clamp(std::sqrt(e_compute / coeff), c.cpu_hz_min, c.cpu_hz_max);
    }
    res.cpu = std::max(res.cpu, relative_gap(alloc.cpu_hz[i], cpu_hat));

    // power closed form: cap or the energy-binding level
    const double e_upload =
        c.energy_budget_j - cp_energy(c, iter_coeff, alloc.eta, alloc.cpu_hz[i]);
    const double p_hat = power_for_budget(alloc.bandwidth_hz[i], ch.gain[i],
                                          sp.noise_psd_w_per_hz, sp.update_size_bits, e_upload,
                                          c.max_power_w);
    res.power = std::max(res.power, relative_gap(alloc.power_w[i], p_hat));

    // bandwidth closed form at the recovered spectrum price
    const double pi = snr_hz[j];
    const double x0 = mult.taylor_point;
    if (pi > 0.0 && x0 > 0.0) {
      const double b1 = std::log1p(pi / x0) - mult.bandwidth_price * kLn2;
      const double b2 = pi / (x0 * (x0 + pi));
      const double c1 = b1 + b2 * (x0 - pi);
      const double c0 = pi * (b1 + b2 * x0 + 1.0);
      const double b_hat =
          c0 <= 0.0 ? 0.0 : (c1 + std::sqrt(c1 * c1 + 4.0 * b2 * c0)) / (2.0 * b2);
      res.bandwidth = std::max(res.bandwidth, relative_gap(alloc.bandwidth_hz[i], b_hat));
    }
  }

  // platform closed forms at the recovered energy prices
  const double f_hat = std::clamp(std::pow(2.0 * mult.haps_cpu_price * sp.haps_capacitance,
                                           -1.0 / 3.0),
                                  sp.haps_cpu_hz_min, sp.haps_cpu_hz_max);
  res.haps_cpu = relative_gap(alloc.haps_cpu_hz, f_hat);
  const double gmin = min_gain(ch, sel);
  if (gmin > 0.0 && mult.haps_bc_price > 0.0) {
    const double p_hat = std::min(sp.haps_bc_power_max_w,
                                  std::sqrt(sp.bandwidth_hz * sp.noise_psd_w_per_hz /
                                            (mult.haps_bc_price * gmin)));
    res.haps_power = relative_gap(alloc.haps_bc_power_w, p_hat);
  }
  return res;
}

ComputeLedger ledger_of(const Scenario& s, const ChannelState& ch, const Allocation& alloc,
                        double iter_coeff) {
  (void)ch;
  const SystemParams& sp = s.params;
  ComputeLedger led;
  const double iters = iters_at(iter_coeff, alloc.eta);
  int cohort = 0;
  for (int k = 0; k < s.client_count(); ++k) {
    const std::size_t i = static_cast<std::size_t>(k);
    if (!alloc.selected[i]) continue;
    ++cohort;
    const ClientProfile& c = s.clients[i];
    led.client_id.push_back(k);
    led.compute_time_s.push_back(
        client_compute_time_s(iters, c.cycles_per_sample, c.samples, alloc.cpu_hz[i]));
    led.compute_energy_j.push_back(
        client_compute_energy_j(iters, c.capacitance, c.cycles_per_sample, c.samples,
                                alloc.cpu_hz[i]));
    led.upload_time_s.push_back(alloc.upload_time_s[i]);
    led.upload_energy_j.push_back(upload_energy_j(alloc.upload_time_s[i], alloc.power_w[i]));
  }
  if (cohort > 0) {
    led.haps_compute_time_s = haps_compute_time_s(sp.haps_cycles_per_bit, sp.update_size_bits,
                                                  cohort, alloc.haps_cpu_hz);
    led.haps_compute_energy_j =
        cpu_power_w(sp.haps_capacitance, alloc.haps_cpu_hz) * led.haps_compute_time_s;
    led.haps_bc_time_s = alloc.haps_bc_time_s;
    led.haps_bc_energy_j = alloc.haps_bc_power_w * alloc.haps_bc_time_s;
  }
  return led;
}

SolveResult solve(const Scenario& s, const ChannelState& ch, const SolverOptions& opt) {
  validate_scenario(s);
  if (static_cast<int>(ch.gain.size()) != s.client_count()) {
    throw std::invalid_argument("channel state does not match the scenario");
  }
  if (opt.eta_cap <= 0.0 || opt.eta_cap > 1.0) throw std::invalid_argument("eta cap out of (0, 1]");
  if (opt.iter_coeff <= 0.0) throw std::invalid_argument("iteration coefficient must be positive");
  if (opt.max_cycles < 1) throw std::invalid_argument("need at least one cycle");
  if (opt.tolerance <= 0.0) throw std::invalid_argument("tolerance must be positive");

  const int clients = s.client_count();
  Allocation alloc;
  alloc.selected.assign(static_cast<std::size_t>(clients), 1);
  alloc.bandwidth_hz.assign(static_cast<std::size_t>(clients),
                            s.params.bandwidth_hz / clients);
  alloc.power_w.resize(static_cast<std::size_t>(clients));
  alloc.cpu_hz.resize(static_cast<std::size_t>(clients));
  alloc.upload_time_s.assign(static_cast<std::size_t>(clients), 0.0);
  for (int k = 0; k < clients; ++k) {
    alloc.power_w[static_cast<std::size_t>(k)] = s.clients[static_cast<std::size_t>(k)].max_power_w;
    alloc.cpu_hz[static_cast<std::size_t>(k)] = s.clients[static_cast<std::size_t>(k)].cpu_hz_max;
  }
  alloc.eta = opt.eta_cap;

  Multipliers mult;
  // coherent starting point: per-client fixed point, then platform caps
  solve_radio(s, ch, alloc, mult, opt);
  solve_platform(s, ch, alloc, mult, opt);

  SolverState st;
  double tau = delay_of(s, ch, alloc, opt.iter_coeff).total_s;
  st.delay_trace_s.push_back(tau);

  for (int cycle = 1; cycle <= opt.max_cycles; ++cycle) {
    Allocation cand = alloc;
    Multipliers mcand = mult;
    solve_upload_schedule(s, ch, cand, mcand, opt);
    solve_selection(s, ch, cand, mcand, opt);
    solve_radio(s, ch, cand, mcand, opt);
    solve_platform(s, ch, cand, mcand, opt);
    const double tau_new = delay_of(s, ch, cand, opt.iter_coeff).total_s;
    st.cycles = cycle;
    if (tau_new > tau * (1.0 + 1e-12)) {
      st.descent_stop = true;  // keep the previous point
      break;
    }
    alloc = std::move(cand);
    mult = mcand;
    st.delay_trace_s.push_back(tau_new);
    if (tau - tau_new <= opt.tolerance * std::max(tau, 1e-30)) {
      st.converged = true;
      tau = tau_new;
      break;
    }
    tau = tau_new;
  }

  // the slowest client can change across blocks; refresh the cap multiplier
  const DelayBreakdown d = delay_of(s, ch, alloc, opt.iter_coeff);
  if (d.argmax_client >= 0) {
    const ClientProfile& c = s.clients[static_cast<std::size_t>(d.argmax_client)];
    const double slope = opt.iter_coeff * c.cycles_per_sample * static_cast<double>(c.samples) /
                         alloc.cpu_hz[static_cast<std::size_t>(d.argmax_client)];
    mult.eta_price = slope / (alloc.eta * kLn2);
  }

  st.mult = mult;
  st.residuals = kkt_residuals(s, ch, alloc, mult, opt.iter_coeff);
  const FeasibilityReport rep = feasibility_check(s, ch, alloc, opt.iter_coeff);
  if (!rep.feasible) {
    throw std::logic_error("solver returned an infeasible point\n" + rep.to_string());
  }
  return {std::move(alloc), d, std::move(st)};
}

}  // namespace hapfl::opt
