// Timing comparison between the serial reference kernels and their threaded
// counterparts. The two paths are required to agree bit for bit (the unit
// tests enforce it); this harness only reports wall time, so on a single-core
// machine the ratio simply hovers around 1.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "hapfl/baselines.hpp"
#include "hapfl/channel.hpp"
#include "hapfl/fl.hpp"
#include "hapfl/optimizer.hpp"
#include "hapfl/rng.hpp"
#include "hapfl/scenario.hpp"
#include "hapfl/simplex.hpp"

using namespace hapfl;

namespace {

double time_median_s(const std::function<void()>& body, int reps) {
  std::vector<double> times;
  body();  // warm up
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

void report(const char* name, double serial_s, double parallel_s) {
  std::printf("%-28s serial %10.4f ms   parallel %10.4f ms   speedup %5.2fx\n", name,
              serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s);
}

}  // namespace

int main() {
  // channel realization over a large fleet
  {
    const Scenario s = generate_scenario(1, 20000);
    const auto run = [&s](Exec mode) {
      double sink = 0.0;
      for (int round = 0; round < 10; ++round) sink += realize_channel(s, round, mode).gain[0];
      return sink;
    };
    const double ts = time_median_s([&] { run(Exec::Serial); }, 5);
    const double tp = time_median_s([&] { run(Exec::Parallel); }, 5);
    report("channel draws (20k x 10)", ts, tp);
  }

  // dense LP pivoting
  {
    Rng rng(99);
    const int m = 150;
    const int n = 120;
    std::vector<std::vector<double>> a(m, std::vector<double>(n));
    std::vector<double> b(m);
    std::vector<double> c(n);
    for (auto& row : a) {
      for (double& v : row) v = rng.uniform() * 2.0 - 0.5;
    }
    for (double& v : b) v = rng.uniform() * 5.0 + 1.0;
    for (double& v : c) v = rng.uniform();
    const double ts = time_median_s([&] { solve_lp(a, b, c, Exec::Serial); }, 5);
    const double tp = time_median_s([&] { solve_lp(a, b, c, Exec::Parallel); }, 5);
    report("lp solve (150x120)", ts, tp);
  }

  // full per-round resource decision
  {
    const Scenario s = generate_scenario(2, 300);
    const ChannelState ch = realize_channel(s, 0);
    opt::SolverOptions serial_opt;
    serial_opt.iter_coeff = 500.0;
    opt::SolverOptions parallel_opt = serial_opt;
    parallel_opt.exec = Exec::Parallel;
    const double ts = time_median_s([&] { opt::solve(s, ch, serial_opt); }, 3);
    const double tp = time_median_s([&] { opt::solve(s, ch, parallel_opt); }, 3);
    report("resource solve (K=300)", ts, tp);
  }

  // a handful of training rounds end to end
  {
    const Scenario s = generate_scenario(3, 60);
    const LossModel model = make_noniid_tasks(4, 60, 120, 16, 0.5);
    FlParams p;
    p.rounds = 3;
    p.eta = 0.5;
    const FlDerived d = derive_fl(model, p);
    opt::SolverOptions o;
    o.iter_coeff = d.iter_coeff;
    o.eta_cap = p.eta;
    const double ts =
        time_median_s([&] { run_training(s, model, p, plan_with_solver(o), Exec::Serial); }, 3);
    const double tp =
        time_median_s([&] { run_training(s, model, p, plan_with_solver(o), Exec::Parallel); }, 3);
    report("training (K=60, 3 rounds)", ts, tp);
  }

  return 0;
}
