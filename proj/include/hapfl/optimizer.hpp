#pragma once

// Per-round resource decision: which clients upload, their bandwidth, power,
// CPU speed and upload slot, the shared local-accuracy level, and the
// platform's CPU speed and broadcast power. Solved by cycling four blocks,
// each with a closed-form or one-dimensional-search solution, until the round
// delay stops improving.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hapfl/channel.hpp"
#include "hapfl/compute.hpp"
#include "hapfl/exec.hpp"
#include "hapfl/scenario.hpp"

namespace hapfl::opt {

struct Allocation {
  std::vector<std::uint8_t> selected;  // 0/1 per client
  std::vector<double> upload_time_s;
  std::vector<double> bandwidth_hz;
  std::vector<double> power_w;
  std::vector<double> cpu_hz;
  double eta = 0.95;
  double haps_cpu_hz = 0.0;
  double haps_bc_power_w = 0.0;
  double haps_bc_time_s = 0.0;

  int selected_count() const;
  std::vector<int> selected_ids() const;
};

struct DelayBreakdown {
  double uplink_s = 0.0;    // slowest selected client, upload plus local compute
  double downlink_s = 0.0;  // broadcast time
  double total_s = 0.0;     // uplink + platform compute + downlink
  int argmax_client = -1;   // slowest client, lowest index on ties
};

struct SolverOptions {
  double eta_cap = 0.95;
  double iter_coeff = 2.0;  // v in local iters = v * log2(1/eta)
  int min_selected = -1;    // participation floor; -1 selects ceil(K/2)
  int max_cycles = 50;
  double tolerance = 1e-6;  // relative delay change that counts as converged
  Exec exec = Exec::Serial;
};

// Multipliers recovered alongside the primal blocks, enough to evaluate the
// stationarity residuals of every closed form.
struct Multipliers {
  double eta_price = 0.0;        // accuracy-cap multiplier
  double bandwidth_price = 0.0;  // shared-spectrum multiplier
  double taylor_point = 0.0;     // linearization point for the bandwidth form
  double haps_cpu_price = 0.0;   // platform energy multiplier, CPU form
  double haps_bc_price = 0.0;    // platform energy multiplier, broadcast form
};

struct KktResiduals {
  double eta = 0.0;
  double cpu = 0.0;
  double power = 0.0;
  double bandwidth = 0.0;
  double haps_cpu = 0.0;
  double haps_power = 0.0;
  double max() const;
};

struct FeasibilityItem {
  std::string constraint;
  double violation = 0.0;  // positive means violated by this much
  double tolerance = 0.0;
  bool ok = true;
};

struct FeasibilityReport {
  std::vector<FeasibilityItem> items;
  std::vector<std::string> warnings;
  bool feasible = true;
  std::string to_string() const;
};

class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, FeasibilityReport report);
  const FeasibilityReport& report() const { return report_; }

 private:
  FeasibilityReport report_;
};

struct SolverState {
  int cycles = 0;
  bool converged = false;
  bool descent_stop = false;  // a cycle would have raised the delay; kept the prior point
  std::vector<double> delay_trace_s;
  Multipliers mult;
  KktResiduals residuals;
};

struct SolveResult {
  Allocation alloc;
  DelayBreakdown delay;
  SolverState state;
};

// Time to push one model through client k's current link; infinity when the
// link carries nothing.
double min_upload_time_s(const Scenario& s, const ChannelState& ch, const Allocation& alloc,
                         int k);

DelayBreakdown delay_of(const Scenario& s, const ChannelState& ch, const Allocation& alloc,
                        double iter_coeff);

FeasibilityReport feasibility_check(const Scenario& s, const ChannelState& ch,
                                    const Allocation& alloc, double iter_coeff);

KktResiduals kkt_residuals(const Scenario& s, const ChannelState& ch, const Allocation& alloc,
                           const Multipliers& mult, double iter_coeff);

// Per-party time/energy totals implied by an allocation.
ComputeLedger ledger_of(const Scenario& s, const ChannelState& ch, const Allocation& alloc,
                        double iter_coeff);

// Block steps, exposed individually for tests. Each updates alloc (and the
// multipliers it recovers) in place, holding the other blocks fixed.
void solve_upload_schedule(const Scenario& s, const ChannelState& ch, Allocation& alloc,
                           Multipliers& mult, const SolverOptions& opt);
void solve_selection(const Scenario& s, const ChannelState& ch, Allocation& alloc,
                     Multipliers& mult, const SolverOptions& opt);
void solve_radio(const Scenario& s, const ChannelState& ch, Allocation& alloc, Multipliers& mult,
                 const SolverOptions& opt);
void solve_platform(const Scenario& s, const ChannelState& ch, Allocation& alloc,
                    Multipliers& mult, const SolverOptions& opt);

// Shared water-filling helpers, reused by the baseline policies.
// Splits total_hz across the listed clients so every active link sees the
// same marginal rate gain; returns per-listed-client bandwidth.
std::vector<double> equalize_bandwidth(const std::vector<double>& gains,
                                       const std::vector<double>& powers, double noise_w_hz,
                                       double total_hz, double* price = nullptr,
                                       double* taylor_point = nullptr);

// Highest power that respects both the cap and the upload energy budget at
// the given bandwidth; returns 0 when no positive power fits the budget.
double power_for_budget(double bandwidth_hz, double gain, double noise_w_hz, double bits,
                        double energy_j, double power_cap_w);

// Per-client CPU/power/upload-slot consistency at the current bandwidth and
// accuracy level. Returns false when the energy budget cannot cover both the
// local compute and the upload on this link.
bool refresh_client_plan(const Scenario& s, const ChannelState& ch, Allocation& alloc, int k,
                         double iter_coeff);

// Platform CPU speed and broadcast power, capped by the platform energy
// budget; used for the real platform and for baseline cloud stand-ins.
struct PlatformPlan {
  double cpu_hz = 0.0;
  double bc_power_w = 0.0;
  double bc_time_s = 0.0;
  double cpu_price = 0.0;
  double bc_price = 0.0;
};
PlatformPlan plan_platform(const SystemParams& p, double min_gain, int cohort, double bc_bits,
                           double bc_bandwidth_hz);

SolveResult solve(const Scenario& s, const ChannelState& ch, const SolverOptions& opt);

}  // namespace hapfl::opt
