#include "hapfl/fl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hapfl/rng.hpp"

namespace hapfl {
namespace {

constexpr std::uint64_t kTaskTag = 0x7461736b;

// log(1 + e^t) without overflow for large |t|
double softplus(double t) {
  return std::max(t, 0.0) + std::log1p(std::exp(-std::fabs(t)));
}

std::vector<int> resolve_subset(const LossModel& model, const std::vector<int>& subset) {
  if (!subset.empty()) return subset;
  std::vector<int> all(model.client_count());
  for (int k = 0; k < model.client_count(); ++k) all[k] = k;
  return all;
}

Eigen::VectorXd mean_vector(const std::vector<Eigen::VectorXd>& vs) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(vs.front().size());
  for (const Eigen::VectorXd& v : vs) acc += v;
  return acc / static_cast<double>(vs.size());
}

}  // namespace

double LossModel::client_loss(int k, const Eigen::VectorXd& w) const {
  const ClientData& c = clients.at(static_cast<std::size_t>(k));
  const double reg = 0.5 * l2 * w.squaredNorm();
  const Eigen::VectorXd scores = c.x * w;
  if (kind == LossKind::Ridge) {
    return (scores - c.y).squaredNorm() / (2.0 * static_cast<double>(c.y.size())) + reg;
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) acc += softplus(-c.y[i] * scores[i]);
  return acc / static_cast<double>(scores.size()) + reg;
}

Eigen::VectorXd LossModel::client_grad(int k, const Eigen::VectorXd& w) const {
  const ClientData& c = clients.at(static_cast<std::size_t>(k));
  const double inv_n = 1.0 / static_cast<double>(c.y.size());
  const Eigen::VectorXd scores = c.x * w;
  if (kind == LossKind::Ridge) {
    return inv_n * (c.x.transpose() * (scores - c.y)) + l2 * w;
  }
  Eigen::VectorXd weights(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    weights[i] = -c.y[i] / (1.0 + std::exp(c.y[i] * scores[i]));
  }
  return inv_n * (c.x.transpose() * weights) + l2 * w;
}

double LossModel::loss(const std::vector<int>& subset, const Eigen::VectorXd& w) const {
  const std::vector<int> ids = resolve_subset(*this, subset);
  double acc = 0.0;
  for (int k : ids) acc += client_loss(k, w);
  return acc / static_cast<double>(ids.size());
}

Eigen::VectorXd LossModel::grad(const std::vector<int>& subset, const Eigen::VectorXd& w) const {
  const std::vector<int> ids = resolve_subset(*this, subset);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(w.size());
  for (int k : ids) acc += client_grad(k, w);
  return acc / static_cast<double>(ids.size());
}

double LossModel::smoothness() const {
  if (clients.empty()) throw std::invalid_argument("loss model has no clients");
  double worst = 0.0;
  for (const ClientData& c : clients) {
    const Eigen::MatrixXd gram =
        (c.x.transpose() * c.x) / static_cast<double>(c.y.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double top = eig.eigenvalues().maxCoeff();
    worst = std::max(worst, kind == LossKind::Ridge ? top : top / 4.0);
  }
  return worst + l2;
}

LossModel make_noniid_tasks(std::uint64_t seed, int clients, int samples_per_client, int dim,
                            double heterogeneity, LossKind kind, double l2, double label_noise) {
  if (clients <= 0 || samples_per_client <= 0 || dim <= 0) {
    throw std::invalid_argument("task generator needs positive counts");
  }
  if (heterogeneity < 0.0) throw std::invalid_argument("heterogeneity must be nonnegative");
  // Mean separation per unit of heterogeneity; keeps the feature shift the
  // dominant effect without sending logistic scores into saturation.
  const double sep = 5.0;

  LossModel model;
  model.kind = kind;
  model.l2 = l2;
  model.clients.resize(static_cast<std::size_t>(clients));

  Rng shared = Rng::stream(seed, kTaskTag, 0);
  Eigen::VectorXd w_true(dim);
  for (int j = 0; j < dim; ++j) w_true[j] = shared.normal();

  for (int k = 0; k < clients; ++k) {
    Rng r = Rng::stream(seed, kTaskTag, 1 + static_cast<std::uint64_t>(k));
    Eigen::VectorXd mean_dir(dim);
    Eigen::VectorXd model_dir(dim);
    for (int j = 0; j < dim; ++j) mean_dir[j] = r.normal();
    for (int j = 0; j < dim; ++j) model_dir[j] = r.normal();
    mean_dir.normalize();
    model_dir.normalize();
    const Eigen::VectorXd mu = heterogeneity * sep * mean_dir;
    const Eigen::VectorXd w_k = w_true + heterogeneity * model_dir;

    ClientData data;
    data.x.resize(samples_per_client, dim);
    data.y.resize(samples_per_client);
    for (int i = 0; i < samples_per_client; ++i) {
      for (int j = 0; j < dim; ++j) data.x(i, j) = mu[j] + r.normal();
      const double clean = data.x.row(i).dot(w_k);
      const double noisy = clean + label_noise * r.normal();
      data.y[i] = kind == LossKind::Ridge ? noisy : (noisy >= 0.0 ? 1.0 : -1.0);
    }
    model.clients[static_cast<std::size_t>(k)] = std::move(data);
  }
  return model;
}

double surrogate_value(const LossModel& model, int k, const SurrogateContext& ctx,
                       const Eigen::VectorXd& z) {
  const Eigen::VectorXd correction = ctx.client_grad_w - ctx.xi * ctx.global_grad_w;
  return model.client_loss(k, ctx.anchor_w + z) - correction.dot(z);
}

Eigen::VectorXd surrogate_gradient(const LossModel& model, int k, const SurrogateContext& ctx,
                                   const Eigen::VectorXd& z) {
  return model.client_grad(k, ctx.anchor_w + z) - ctx.client_grad_w +
         ctx.xi * ctx.global_grad_w;
}

Eigen::VectorXd local_descent(const LossModel& model, int k, const SurrogateContext& ctx,
                              double step, int iters) {
  if (step <= 0.0) throw std::invalid_argument("descent step must be positive");
  Eigen::VectorXd z = Eigen::VectorXd::Zero(ctx.anchor_w.size());
  for (int i = 0; i < iters; ++i) {
    z -= step * surrogate_gradient(model, k, ctx, z);
  }
  return z;
}

Eigen::VectorXd aggregate(const Eigen::VectorXd& w, const std::vector<Eigen::VectorXd>& updates) {
  if (updates.empty()) throw std::invalid_argument("aggregate needs at least one update");
  const Eigen::VectorXd mean = mean_vector(updates);
  double mean_sq = 0.0;
  for (const Eigen::VectorXd& z : updates) mean_sq += z.squaredNorm();
  mean_sq /= static_cast<double>(updates.size());
  if (mean.squaredNorm() > mean_sq * (1.0 + 1e-9) + 1e-18) {
    throw std::logic_error("aggregated update exceeds the mean-square envelope");
  }
  return w + mean;
}

double bound_decay_rate(double smoothness, double strong_convexity, double xi, double eta) {
  if (smoothness <= 0.0 || strong_convexity <= 0.0 || xi <= 0.0) {
    throw std::invalid_argument("bound needs positive curvature constants");
  }
  if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("eta must lie in [0, 1]");
  if (strong_convexity > smoothness * xi) {
    throw std::invalid_argument("bound requires strong convexity <= smoothness * xi");
  }
  const double rho = 1.0 - (1.0 - eta) * strong_convexity * strong_convexity * xi /
                               (2.0 * smoothness * smoothness);
  if (rho < 0.0) throw std::invalid_argument("contraction factor fell below zero; reduce xi");
  return rho;
}

double convergence_bound(double smoothness, double strong_convexity, double xi, double eta,
                         const std::vector<int>& cohort_sizes,
                         const std::vector<double>& sum_sq_updates, double initial_gap) {
  if (cohort_sizes.size() != sum_sq_updates.size()) {
    throw std::invalid_argument("bound history lengths differ");
  }
  const double rho = bound_decay_rate(smoothness, strong_convexity, xi, eta);
  const double drift = (smoothness * xi - strong_convexity) / (2.0 * xi);
  const int n = static_cast<int>(cohort_sizes.size());
  double acc = 0.0;
  double weight = 1.0;  // rho^(n-1-j), built from the newest round backwards
  for (int j = n - 1; j >= 0; --j) {
    if (cohort_sizes[static_cast<std::size_t>(j)] <= 0) {
      throw std::invalid_argument("bound history has an empty cohort");
    }
    acc += weight * sum_sq_updates[static_cast<std::size_t>(j)] /
           static_cast<double>(cohort_sizes[static_cast<std::size_t>(j)]);
    weight *= rho;
  }
  return weight * initial_gap + drift * acc;
}

Eigen::VectorXd solve_optimum(const LossModel& model, const std::vector<int>& subset) {
  const std::vector<int> ids = resolve_subset(model, subset);
  const int d = model.dim();
  if (model.kind == LossKind::Ridge) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
    for (int k : ids) {
      const ClientData& c = model.clients.at(static_cast<std::size_t>(k));
      const double inv_n = 1.0 / static_cast<double>(c.y.size());
      h += inv_n * (c.x.transpose() * c.x);
      rhs += inv_n * (c.x.transpose() * c.y);
    }
    const double inv_m = 1.0 / static_cast<double>(ids.size());
    h = inv_m * h + model.l2 * Eigen::MatrixXd::Identity(d, d);
    return h.ldlt().solve(inv_m * rhs);
  }
  // batch descent to machine-level stationarity
  const double step = 1.0 / model.smoothness();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  for (int it = 0; it < 500000; ++it) {
    const Eigen::VectorXd g = model.grad(ids, w);
    if (g.norm() <= 1e-10) break;
    w -= step * g;
  }
  return w;
}

FlDerived derive_fl(const LossModel& model, const FlParams& params) {
  FlDerived der;
  der.smoothness = model.smoothness();
  der.strong_convexity = model.strong_convexity();
  der.step = params.step_size > 0.0 ? params.step_size : 1.0 / der.smoothness;
  der.iter_coeff = iteration_coefficient(der.smoothness, der.strong_convexity, der.step);
  return der;
}

RoundPlanner plan_with_solver(opt::SolverOptions options) {
  return [options](const Scenario& s, const ChannelState& ch, int) {
    return opt::solve(s, ch, options);
  };
}

FlRun run_training(const Scenario& scenario, const LossModel& model, const FlParams& params,
                   const RoundPlanner& planner, Exec mode) {
  if (model.client_count() != scenario.client_count()) {
    throw std::invalid_argument("loss model and scenario disagree on client count");
  }
  if (params.rounds <= 0) throw std::invalid_argument("rounds must be positive");
  if (params.eta <= 0.0 || params.eta > 1.0) {
    throw std::invalid_argument("eta must lie in (0, 1]");
  }

  FlRun run;
  run.derived = derive_fl(model, params);
  const FlDerived& der = run.derived;

  std::vector<int> all(static_cast<std::size_t>(model.client_count()));
  for (int k = 0; k < model.client_count(); ++k) all[static_cast<std::size_t>(k)] = k;
  const std::vector<int>& anchor = params.bound_subset.empty() ? all : params.bound_subset;
  const Eigen::VectorXd w_star = solve_optimum(model, anchor);
  run.anchor_optimum = model.loss(anchor, w_star);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(model.dim());
  run.initial_gap = model.loss(anchor, w) - run.anchor_optimum;

  const bool par = mode == Exec::Parallel && parallel_available();
  std::vector<int> cohorts;
  std::vector<double> sums;
  double cum_delay = 0.0;

  for (int round = 0; round < params.rounds; ++round) {
    const ChannelState ch = realize_channel(scenario, round, mode);
    const opt::SolveResult plan = planner(scenario, ch, round);
    const std::vector<int> sel = plan.alloc.selected_ids();
    if (sel.empty()) throw std::runtime_error("round planner selected no clients");

    const int iters = params.local_iters_override >= 0
                          ? params.local_iters_override
                          : local_iterations(der.iter_coeff, plan.alloc.eta);
    const int cohort = static_cast<int>(sel.size());

    std::vector<Eigen::VectorXd> grads(sel.size());
#pragma omp parallel for if (par) schedule(static)
    for (int i = 0; i < cohort; ++i) {
      grads[static_cast<std::size_t>(i)] = model.client_grad(sel[static_cast<std::size_t>(i)], w);
    }
    const Eigen::VectorXd global_grad = mean_vector(grads);

    std::vector<Eigen::VectorXd> updates(sel.size());
#pragma omp parallel for if (par) schedule(static)
    for (int i = 0; i < cohort; ++i) {
      SurrogateContext ctx{w, grads[static_cast<std::size_t>(i)], global_grad, params.xi};
      updates[static_cast<std::size_t>(i)] =
          local_descent(model, sel[static_cast<std::size_t>(i)], ctx, der.step, iters);
    }
    w = aggregate(w, updates);

    double sum_sq = 0.0;
    for (const Eigen::VectorXd& z : updates) sum_sq += z.squaredNorm();
    cohorts.push_back(cohort);
    sums.push_back(sum_sq);

    RoundRecord rec;
    rec.round = round;
    rec.selected = sel;
    rec.eta = plan.alloc.eta;
    rec.local_iters = iters;
    rec.sum_sq_update = sum_sq;
    rec.loss_selected = model.loss(sel, w);
    rec.loss_population = model.loss(all, w);
    rec.bound = convergence_bound(der.smoothness, der.strong_convexity, params.xi, params.eta,
                                  cohorts, sums, run.initial_gap);
    rec.delay = plan.delay;
    cum_delay += plan.delay.total_s;
    rec.cumulative_delay_s = cum_delay;
    rec.ledger = opt::ledger_of(scenario, ch, plan.alloc, der.iter_coeff);
    run.rounds.push_back(std::move(rec));

    if (params.epsilon_target > 0.0 && run.rounds.back().bound <= params.epsilon_target) {
      run.reached_target = true;
      break;
    }
  }
  run.w = w;
  return run;
}

}  // namespace hapfl
