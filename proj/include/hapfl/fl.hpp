#pragma once

// Model-training side: per-client losses, the gradient-correction surrogate
// each client minimizes locally, the aggregation step, and the closed-form
// error bound that the round loop can use as a stopping rule.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "hapfl/compute.hpp"
#include "hapfl/exec.hpp"
#include "hapfl/optimizer.hpp"
#include "hapfl/scenario.hpp"

namespace hapfl {

enum class LossKind { Ridge, Logistic };

struct ClientData {
  Eigen::MatrixXd x;  // samples by features
  Eigen::VectorXd y;  // targets, or +/-1 labels for logistic
};

// Equal-weighted finite-sum objective over a set of clients. Both losses keep
// an explicit l2 term so the strong-convexity constant is known exactly.
struct LossModel {
  LossKind kind = LossKind::Ridge;
  double l2 = 0.1;
  std::vector<ClientData> clients;

  int client_count() const { return static_cast<int>(clients.size()); }
  int dim() const { return clients.empty() ? 0 : static_cast<int>(clients.front().x.cols()); }

  double client_loss(int k, const Eigen::VectorXd& w) const;
  Eigen::VectorXd client_grad(int k, const Eigen::VectorXd& w) const;
  double loss(const std::vector<int>& subset, const Eigen::VectorXd& w) const;
  Eigen::VectorXd grad(const std::vector<int>& subset, const Eigen::VectorXd& w) const;

  // Largest per-client curvature (exact eigenvalue for ridge, the standard
  // quarter-Gram bound for logistic) and the l2 strong-convexity floor.
  double smoothness() const;
  double strong_convexity() const { return l2; }
};

// Synthetic cross-client tasks. heterogeneity = 0 gives IID draws; larger
// values shift both the feature means and the per-client label models apart.
LossModel make_noniid_tasks(std::uint64_t seed, int clients, int samples_per_client, int dim,
                            double heterogeneity, LossKind kind = LossKind::Ridge, double l2 = 0.1,
                            double label_noise = 0.1);

// Anchor state shared by one client's local problem within a round.
struct SurrogateContext {
  Eigen::VectorXd anchor_w;        // global model the round started from
  Eigen::VectorXd client_grad_w;   // this client's gradient at anchor_w
  Eigen::VectorXd global_grad_w;   // aggregated gradient at anchor_w
  double xi = 1.0;
};

double surrogate_value(const LossModel& model, int k, const SurrogateContext& ctx,
                       const Eigen::VectorXd& z);
Eigen::VectorXd surrogate_gradient(const LossModel& model, int k, const SurrogateContext& ctx,
                                   const Eigen::VectorXd& z);

// Runs exactly `iters` full-batch descent steps on the surrogate from z = 0.
// Full-batch steps keep the per-step contraction that sizes `iters`, so the
// local accuracy target is met deterministically.
Eigen::VectorXd local_descent(const LossModel& model, int k, const SurrogateContext& ctx,
                              double step, int iters);

// Mean of the local updates applied to w. Enforces the mean-vs-mean-square
// norm inequality the error bound relies on.
Eigen::VectorXd aggregate(const Eigen::VectorXd& w, const std::vector<Eigen::VectorXd>& updates);

// Contraction factor per round for the error recursion.
double bound_decay_rate(double smoothness, double strong_convexity, double xi, double eta);

// Closed-form optimality-gap bound after processing the recorded rounds.
// cohort_sizes[j] and sum_sq_updates[j] describe round j; initial_gap is
// F(w0) - F(w*).
double convergence_bound(double smoothness, double strong_convexity, double xi, double eta,
                         const std::vector<int>& cohort_sizes,
                         const std::vector<double>& sum_sq_updates, double initial_gap);

// Minimizer of the equal-weighted objective over `subset` (all clients if
// empty). Direct solve for ridge, long-run batch descent for logistic.
Eigen::VectorXd solve_optimum(const LossModel& model, const std::vector<int>& subset = {});

struct FlParams {
  double xi = 1.0;
  double step_size = 0.0;        // 0 selects 1 / smoothness
  double eta = 0.95;             // local accuracy target, also the solver cap
  int local_iters_override = -1; // >= 0 forces a fixed local step count
  double epsilon_target = 0.0;   // stop once the bound drops below; 0 disables
  int rounds = 10;
  std::vector<int> bound_subset; // cohort anchoring the bound's objective; empty = population
};

// Constants derived from the loss model once per run.
struct FlDerived {
  double smoothness = 0.0;
  double strong_convexity = 0.0;
  double step = 0.0;
  double iter_coeff = 0.0;  // v in iters = ceil(v * log2(1/eta))
};
FlDerived derive_fl(const LossModel& model, const FlParams& params);

struct RoundRecord {
  int round = 0;
  std::vector<int> selected;
  double eta = 0.0;
  int local_iters = 0;
  double sum_sq_update = 0.0;
  double loss_selected = 0.0;    // cohort objective at the post-round model
  double loss_population = 0.0;  // all-client objective at the post-round model
  double bound = 0.0;
  opt::DelayBreakdown delay;
  double cumulative_delay_s = 0.0;
  ComputeLedger ledger;
};

struct FlRun {
  Eigen::VectorXd w;
  std::vector<RoundRecord> rounds;
  double initial_gap = 0.0;      // objective gap of w0 on the bound's anchor cohort
  double anchor_optimum = 0.0;   // optimal objective value on that cohort
  bool reached_target = false;
  FlDerived derived;
};

// Produces the per-round resource decision; lets callers swap the optimizer
// for baseline policies or scripted selections.
using RoundPlanner = std::function<opt::SolveResult(const Scenario&, const ChannelState&, int round)>;

RoundPlanner plan_with_solver(opt::SolverOptions options);

FlRun run_training(const Scenario& scenario, const LossModel& model, const FlParams& params,
                   const RoundPlanner& planner, Exec mode = Exec::Serial);

}  // namespace hapfl
