#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "hapfl/baselines.hpp"
#include "hapfl/fl.hpp"
#include "hapfl/rng.hpp"

using namespace hapfl;

namespace {

// central finite difference of a scalar field
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& at, double h = 1e-6) {
  Eigen::VectorXd g(at.size());
  for (Eigen::Index j = 0; j < at.size(); ++j) {
    Eigen::VectorXd hi = at;
    Eigen::VectorXd lo = at;
    hi[j] += h;
    lo[j] -= h;
    g[j] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("task generation is deterministic and shaped as requested") {
  const LossModel a = make_noniid_tasks(77, 6, 25, 5, 0.8);
  const LossModel b = make_noniid_tasks(77, 6, 25, 5, 0.8);
  REQUIRE(a.client_count() == 6);
  CHECK(a.dim() == 5);
  for (int k = 0; k < 6; ++k) {
    CHECK(a.clients[k].x == b.clients[k].x);
    CHECK(a.clients[k].y == b.clients[k].y);
    CHECK(a.clients[k].x.rows() == 25);
  }
  const LossModel c = make_noniid_tasks(78, 6, 25, 5, 0.8);
  CHECK(a.clients[0].x != c.clients[0].x);

  const LossModel lg = make_noniid_tasks(9, 3, 20, 4, 0.5, LossKind::Logistic);
  for (int k = 0; k < 3; ++k) {
    for (Eigen::Index i = 0; i < lg.clients[k].y.size(); ++i) {
      CHECK(std::fabs(lg.clients[k].y[i]) == 1.0);
    }
  }
  CHECK_THROWS_AS(make_noniid_tasks(1, 0, 10, 4, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(make_noniid_tasks(1, 2, 10, 4, -0.5), std::invalid_argument);
}

TEST_CASE("heterogeneity moves the client tasks apart") {
  // zero heterogeneity: every client samples the same distribution, so the
  // per-client gradients at the origin agree up to sampling error
  const LossModel iid = make_noniid_tasks(5, 3, 4000, 4, 0.0);
  const Eigen::VectorXd g0 = iid.client_grad(0, Eigen::VectorXd::Zero(4));
  const Eigen::VectorXd g1 = iid.client_grad(1, Eigen::VectorXd::Zero(4));
  CHECK((g0 - g1).norm() < 0.15 * g0.norm());

  // strong heterogeneity: feature means sit sep * het apart from the origin
  const LossModel far = make_noniid_tasks(5, 3, 4000, 4, 2.0);
  Eigen::VectorXd mean0 = far.clients[0].x.colwise().mean();
  Eigen::VectorXd mean1 = far.clients[1].x.colwise().mean();
  CHECK(mean0.norm() == doctest::Approx(10.0).epsilon(0.05));
  CHECK((mean0 - mean1).norm() > 1.0);
}

TEST_CASE("loss and gradient agree with finite differences") {
  for (LossKind kind : {LossKind::Ridge, LossKind::Logistic}) {
    const LossModel m = make_noniid_tasks(13, 3, 30, 4, 0.6, kind);
    Eigen::VectorXd w(4);
    w << 0.3, -0.8, 0.05, 1.2;
    for (int k = 0; k < 3; ++k) {
      const Eigen::VectorXd g = m.client_grad(k, w);
      const Eigen::VectorXd g_fd =
          fd_gradient([&](const Eigen::VectorXd& v) { return m.client_loss(k, v); }, w);
      CHECK((g - g_fd).norm() < 1e-5 * std::max(1.0, g.norm()));
    }
    // subset loss is the plain average of member losses
    const double avg = 0.5 * (m.client_loss(0, w) + m.client_loss(2, w));
    CHECK(m.loss({0, 2}, w) == doctest::Approx(avg).epsilon(1e-15));
    const Eigen::VectorXd gavg = 0.5 * (m.client_grad(0, w) + m.client_grad(2, w));
    CHECK((m.grad({0, 2}, w) - gavg).norm() < 1e-15 * std::max(1.0, gavg.norm()));
  }
}

TEST_CASE("smoothness bounds the gradient field") {
  const LossModel m = make_noniid_tasks(17, 4, 40, 6, 0.5);
  const double M = m.smoothness();
  CHECK(M > m.strong_convexity());
  // ridge: exact top curvature of client k is ||grad(w) - grad(v)|| / ||w - v||
  // along any direction; sample a few random pairs
  Rng r(99);
  auto rng_vec = [&](int d) {
    Eigen::VectorXd v(d);
    for (int j = 0; j < d; ++j) v[j] = r.normal();
    return v;
  };
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd w = rng_vec(6);
    const Eigen::VectorXd v = rng_vec(6);
    for (int k = 0; k < 4; ++k) {
      const double lhs = (m.client_grad(k, w) - m.client_grad(k, v)).norm();
      CHECK(lhs <= M * (w - v).norm() * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("surrogate value and gradient") {
  const LossModel m = make_noniid_tasks(23, 4, 30, 5, 0.7);
  Rng r(5);
  Eigen::VectorXd w(5), z(5), gg(5);
  for (int j = 0; j < 5; ++j) {
    w[j] = r.normal();
    z[j] = 0.3 * r.normal();
    gg[j] = r.normal();
  }
  SurrogateContext ctx{w, m.client_grad(1, w), gg, 0.8};

  // at z = 0 the surrogate equals the local loss and its gradient collapses
  // to xi times the aggregated gradient
  CHECK(surrogate_value(m, 1, ctx, Eigen::VectorXd::Zero(5)) ==
        doctest::Approx(m.client_loss(1, w)).epsilon(1e-15));
  const Eigen::VectorXd g0 = surrogate_gradient(m, 1, ctx, Eigen::VectorXd::Zero(5));
  CHECK((g0 - 0.8 * gg).norm() < 1e-12 * std::max(1.0, gg.norm()));

  const Eigen::VectorXd g = surrogate_gradient(m, 1, ctx, z);
  const Eigen::VectorXd g_fd =
      fd_gradient([&](const Eigen::VectorXd& v) { return surrogate_value(m, 1, ctx, v); }, z);
  CHECK((g - g_fd).norm() < 1e-5 * std::max(1.0, g.norm()));
}

TEST_CASE("local descent meets the accuracy contract against an exact solve") {
  const LossModel m = make_noniid_tasks(29, 3, 40, 6, 0.5);
  const double M = m.smoothness();
  const double u = m.strong_convexity();
  const double step = 1.0 / M;
  const double v = iteration_coefficient(M, u, step);

  Rng r(7);
  Eigen::VectorXd w(6), gg(6);
  for (int j = 0; j < 6; ++j) {
    w[j] = r.normal();
    gg[j] = 0.5 * r.normal();
  }
  const int k = 1;
  SurrogateContext ctx{w, m.client_grad(k, w), gg, 1.0};

  // ridge surrogate minimizer in closed form: (H)(w + z*) = q + correction
  const ClientData& c = m.clients[k];
  const double inv_n = 1.0 / static_cast<double>(c.y.size());
  const Eigen::MatrixXd H = inv_n * (c.x.transpose() * c.x) +
                            m.l2 * Eigen::MatrixXd::Identity(6, 6);
  const Eigen::VectorXd q = inv_n * (c.x.transpose() * c.y);
  const Eigen::VectorXd corr = ctx.client_grad_w - ctx.xi * ctx.global_grad_w;
  const Eigen::VectorXd z_star = H.ldlt().solve(q + corr) - w;
  const double g_star = surrogate_value(m, k, ctx, z_star);
  const double g_zero = surrogate_value(m, k, ctx, Eigen::VectorXd::Zero(6));

  for (double eta : {0.1, 0.3, 0.5, 0.9}) {
    const int iters = local_iterations(v, eta);
    const Eigen::VectorXd z = local_descent(m, k, ctx, step, iters);
    const double achieved = surrogate_value(m, k, ctx, z) - g_star;
    CHECK(achieved <= eta * (g_zero - g_star) + 1e-12);
    CHECK(achieved >= -1e-12);
  }
  CHECK_THROWS_AS(local_descent(m, k, ctx, 0.0, 3), std::invalid_argument);
}

TEST_CASE("aggregation applies the mean update") {
  Eigen::VectorXd w(3);
  w << 1.0, 2.0, 3.0;
  Eigen::VectorXd z1(3), z2(3);
  z1 << 0.1, 0.0, -0.2;
  z2 << 0.3, -0.4, 0.0;
  const Eigen::VectorXd out = aggregate(w, {z1, z2});
  CHECK((out - (w + 0.5 * (z1 + z2))).norm() < 1e-15);
  CHECK_THROWS_AS(aggregate(w, {}), std::invalid_argument);
}

TEST_CASE("error recursion constants") {
  // rho = 1 - (1 - eta) u^2 xi / (2 M^2)
  CHECK(bound_decay_rate(2.0, 0.5, 1.0, 0.3) == doctest::Approx(0.978125).epsilon(1e-15));
  CHECK(bound_decay_rate(1.0, 1.0, 1.0, 1.0) == 1.0);
  CHECK_THROWS_AS(bound_decay_rate(1.0, 2.0, 1.0, 0.5), std::invalid_argument);  // u > M xi
  CHECK_THROWS_AS(bound_decay_rate(1.0, 1.0, 3.0, 0.0), std::invalid_argument);  // rho < 0
  CHECK_THROWS_AS(bound_decay_rate(1.0, 1.0, 1.0, 1.5), std::invalid_argument);

  // frozen three-round history evaluated independently
  CHECK(convergence_bound(2.0, 0.5, 1.0, 0.3, {4, 5, 3}, {2.0, 1.5, 0.25}, 10.0) ==
        doctest::Approx(9.999352111816407).epsilon(1e-14));

  // closed form equals the per-round recursion on a longer random history
  Rng r(31);
  std::vector<int> cohorts;
  std::vector<double> sums;
  for (int j = 0; j < 25; ++j) {
    cohorts.push_back(1 + static_cast<int>(r.index(40)));
    sums.push_back(std::exp(r.uniform(-3.0, 3.0)));
  }
  const double M = 3.0, u = 0.4, xi = 1.2, eta = 0.6, f0 = 7.5;
  const double rho = bound_decay_rate(M, u, xi, eta);
  const double drift = (M * xi - u) / (2.0 * xi);
  double eps = f0;
  for (std::size_t j = 0; j < cohorts.size(); ++j) {
    eps = rho * eps + drift * sums[j] / cohorts[j];
  }
  CHECK(convergence_bound(M, u, xi, eta, cohorts, sums, f0) ==
        doctest::Approx(eps).epsilon(1e-12));

  CHECK_THROWS_AS(convergence_bound(M, u, xi, eta, {2, 3}, {1.0}, f0), std::invalid_argument);
  CHECK_THROWS_AS(convergence_bound(M, u, xi, eta, {0}, {1.0}, f0), std::invalid_argument);
}

TEST_CASE("optimum solves to stationarity") {
  const LossModel m = make_noniid_tasks(37, 5, 30, 4, 0.8);
  const Eigen::VectorXd w_all = solve_optimum(m);
  CHECK(m.grad({}, w_all).norm() < 1e-10);
  const Eigen::VectorXd w_sub = solve_optimum(m, {1, 3});
  CHECK(m.grad({1, 3}, w_sub).norm() < 1e-10);
  CHECK(m.loss({1, 3}, w_sub) <= m.loss({1, 3}, w_all));

  const LossModel lg = make_noniid_tasks(37, 3, 30, 4, 0.4, LossKind::Logistic);
  const Eigen::VectorXd w_lg = solve_optimum(lg);
  CHECK(lg.grad({}, w_lg).norm() < 1e-8);
}

TEST_CASE("derived constants") {
  const LossModel m = make_noniid_tasks(41, 4, 30, 5, 0.5);
  FlParams params;
  const FlDerived der = derive_fl(m, params);
  CHECK(der.smoothness == m.smoothness());
  CHECK(der.strong_convexity == m.strong_convexity());
  CHECK(der.step == doctest::Approx(1.0 / der.smoothness).epsilon(1e-15));
  // with step 1/M the coefficient collapses to 2M/u
  CHECK(der.iter_coeff ==
        doctest::Approx(2.0 * der.smoothness / der.strong_convexity).epsilon(1e-12));

  params.step_size = 0.01;
  CHECK(derive_fl(m, params).step == 0.01);
}

TEST_CASE("training loop accounting") {
  const Scenario scenario = generate_scenario(51, 6);
  // moderate heterogeneity: strong enough to matter, tame enough that the
  // corrected local steps still descend on the population objective
  const LossModel model = make_noniid_tasks(52, 6, 30, 4, 0.3);
  FlParams params;
  params.rounds = 6;
  params.eta = 0.9;
  const FlDerived der = derive_fl(model, params);
  const FlRun run = run_training(scenario, model, params,
                                 plan_with_haps_no_sel(der.iter_coeff, params.eta));
  REQUIRE(static_cast<int>(run.rounds.size()) == 6);

  // cumulative delay is the running sum of round delays
  double acc = 0.0;
  std::vector<int> cohorts;
  std::vector<double> sums;
  for (const RoundRecord& rec : run.rounds) {
    acc += rec.delay.total_s;
    CHECK(rec.cumulative_delay_s == doctest::Approx(acc).epsilon(1e-15));
    CHECK(rec.local_iters == local_iterations(der.iter_coeff, rec.eta));
    cohorts.push_back(static_cast<int>(rec.selected.size()));
    sums.push_back(rec.sum_sq_update);
    // recorded bound matches a fresh closed-form evaluation of the history
    CHECK(rec.bound == doctest::Approx(convergence_bound(der.smoothness, der.strong_convexity,
                                                         params.xi, params.eta, cohorts, sums,
                                                         run.initial_gap))
                           .epsilon(1e-14));
  }
  // full-participation training makes clear progress from the zero model
  CHECK(run.rounds.back().loss_population < run.rounds.front().loss_population);
  CHECK(run.initial_gap > 0.0);

  // the stop rule fires the first time the bound reaches the target
  FlParams stop = params;
  stop.epsilon_target = run.rounds[0].bound;  // met immediately
  const FlRun stopped = run_training(scenario, model, stop,
                                     plan_with_haps_no_sel(der.iter_coeff, params.eta));
  CHECK(stopped.reached_target);
  CHECK(static_cast<int>(stopped.rounds.size()) == 1);

  stop.epsilon_target = 1e-12;  // out of reach in six rounds
  const FlRun capped = run_training(scenario, model, stop,
                                    plan_with_haps_no_sel(der.iter_coeff, params.eta));
  CHECK_FALSE(capped.reached_target);
  CHECK(static_cast<int>(capped.rounds.size()) == 6);

  // anchoring the bound to a cohort changes the tracked objective
  FlParams anchored = params;
  anchored.bound_subset = {0, 2};
  const FlRun arun = run_training(scenario, model, anchored,
                                  plan_with_haps_no_sel(der.iter_coeff, params.eta));
  const Eigen::VectorXd w_star = solve_optimum(model, {0, 2});
  CHECK(arun.anchor_optimum == doctest::Approx(model.loss({0, 2}, w_star)).epsilon(1e-12));
  CHECK(arun.initial_gap ==
        doctest::Approx(model.loss({0, 2}, Eigen::VectorXd::Zero(4)) - arun.anchor_optimum)
            .epsilon(1e-12));

  CHECK_THROWS_AS(run_training(generate_scenario(51, 5), model, params,
                               plan_with_haps_no_sel(der.iter_coeff, params.eta)),
                  std::invalid_argument);
}
