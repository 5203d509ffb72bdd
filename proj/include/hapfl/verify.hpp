#pragma once

// Self-check suites shared by the CLI and the acceptance harness: the error
// bound against measured gaps and a recursive oracle, solver delay traces and
// stationarity residuals over randomized scenarios, and a small brute-force
// cross-check of the whole per-round decision.

#include <cstdint>
#include <limits>
#include <vector>

#include "hapfl/exec.hpp"

namespace hapfl {

struct BoundSuiteResult {
  int runs = 0;
  int rounds = 0;
  int violations = 0;  // rounds where the measured gap exceeded the bound
  double worst_margin = std::numeric_limits<double>::infinity();  // min(bound - gap)
  double max_recursive_gap = 0.0;  // closed form vs recursive evaluation, relative
};

// Fixed-cohort training runs on a ridge task; checks that the recorded bound
// dominates the measured optimality gap round by round and agrees with a
// recursive re-evaluation.
BoundSuiteResult run_bound_suite(int seeds, int rounds, int clients,
                                 const std::vector<int>& cohorts,
                                 const std::vector<double>& etas, Exec exec = Exec::Serial);

struct SolverSuiteResult {
  int scenarios = 0;
  int redraws = 0;           // infeasible draws replaced by a fresh seed
  int trace_violations = 0;  // cycle-to-cycle delay increases
  double worst_kkt = 0.0;    // max relative stationarity residual
};

// Randomized scenarios through the full solver; checks monotone delay traces
// and closed-form consistency of the returned point.
SolverSuiteResult run_solver_suite(int cases, const std::vector<int>& clients,
                                   std::uint64_t seed0, Exec exec = Exec::Serial);

struct BruteSuiteResult {
  int cases = 0;
  double worst_ratio = 0.0;  // solver delay / brute-force grid delay
};

// Three-client scenarios solved both by the block solver and by exhaustive
// grids over selection, accuracy, spectrum shares, per-client power/CPU and
// the platform knobs (with one refinement pass).
BruteSuiteResult run_brute_suite(int cases, std::uint64_t seed0);

// Grid/refinement reference used by the brute suite; exposed for tests.
double brute_force_delay(const struct Scenario& s, const struct ChannelState& ch,
                         double iter_coeff, double eta_cap, int min_selected);

}  // namespace hapfl
