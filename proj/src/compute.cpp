#include "hapfl/compute.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hapfl {

double iteration_coefficient(double smoothness, double strong_convexity, double step_size) {
  if (smoothness <= 0.0 || strong_convexity <= 0.0)
    throw std::invalid_argument("iteration_coefficient: curvature bounds must be > 0");
  if (strong_convexity > smoothness)
    throw std::invalid_argument("iteration_coefficient: strong convexity exceeds smoothness");
  if (!(step_size > 0.0) || !(step_size < 2.0 / smoothness))
    throw std::invalid_argument("iteration_coefficient: step must satisfy 0 < step < 2/M");
  return 2.0 / ((2.0 - smoothness * step_size) * step_size * strong_convexity);
}

int local_iterations(double v, double eta) {
  if (v <= 0.0) throw std::invalid_argument("local_iterations: v must be > 0");
  if (!(eta > 0.0) || eta > 1.0)
    throw std::invalid_argument("local_iterations: eta must be in (0, 1]");
  if (eta == 1.0) return 0;
  return static_cast<int>(std::ceil(v * std::log2(1.0 / eta)));
}

double client_compute_time_s(double iterations, double cycles_per_sample, int samples,
                             double cpu_hz) {
  if (iterations < 0.0) throw std::invalid_argument("client_compute_time: iterations < 0");
  if (cycles_per_sample <= 0.0 || samples < 1)
    throw std::invalid_argument("client_compute_time: bad workload");
  if (cpu_hz <= 0.0) throw std::invalid_argument("client_compute_time: cpu_hz must be > 0");
  return iterations * cycles_per_sample * samples / cpu_hz;
}

double cpu_power_w(double capacitance, double cpu_hz) {
  if (capacitance <= 0.0 || cpu_hz < 0.0) throw std::invalid_argument("cpu_power: bad arguments");
  return capacitance * cpu_hz * cpu_hz * cpu_hz;
}

double client_compute_energy_j(double iterations, double capacitance, double cycles_per_sample,
                               int samples, double cpu_hz) {
  // time * cap * f^3 == iters * cap * C * J * f^2
  return client_compute_time_s(iterations, cycles_per_sample, samples, cpu_hz) *
         cpu_power_w(capacitance, cpu_hz);
}

double upload_energy_j(double upload_time_s, double power_w) {
  if (upload_time_s < 0.0 || power_w < 0.0)
    throw std::invalid_argument("upload_energy: negative time or power");
  return upload_time_s * power_w;
}

double haps_compute_time_s(double cycles_per_bit, double update_size_bits, int selected_count,
                           double cpu_hz) {
  if (cycles_per_bit <= 0.0 || update_size_bits <= 0.0)
    throw std::invalid_argument("haps_compute_time: bad workload");
  if (selected_count < 0) throw std::invalid_argument("haps_compute_time: negative count");
  if (cpu_hz <= 0.0) throw std::invalid_argument("haps_compute_time: cpu_hz must be > 0");
  return cycles_per_bit * update_size_bits * selected_count / cpu_hz;
}

double haps_energy_j(double capacitance, double cpu_hz, double compute_time_s,
                     double bc_power_w, double bc_time_s) {
  if (compute_time_s < 0.0 || bc_power_w < 0.0 || bc_time_s < 0.0)
    throw std::invalid_argument("haps_energy: negative component");
  return cpu_power_w(capacitance, cpu_hz) * compute_time_s + bc_power_w * bc_time_s;
}

double ComputeLedger::total_client_energy_j() const {
  double e = 0.0;
  e = std::accumulate(compute_energy_j.begin(), compute_energy_j.end(), e);
  e = std::accumulate(upload_energy_j.begin(), upload_energy_j.end(), e);
  return e;
}

}  // namespace hapfl
