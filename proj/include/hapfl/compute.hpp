#pragma once

// Local training cost model: iteration counts from the target local accuracy,
// cycle-accurate compute times, and cubic-in-frequency dynamic power. The
// platform pays per received bit for aggregation plus broadcast energy.

#include <vector>

namespace hapfl {

// v = 2 / ((2 - M*step) * step * u); requires 0 < step < 2/M
double iteration_coefficient(double smoothness, double strong_convexity, double step_size);

// ceil(v * log2(1/eta)); eta = 1 means no local work
int local_iterations(double v, double eta);

double client_compute_time_s(double iterations, double cycles_per_sample, int samples,
                             double cpu_hz);

double cpu_power_w(double capacitance, double cpu_hz);  // capacitance * f^3

// equals cpu_power_w * compute_time; kept in the bilinear form so the
// identity E = iters * cap * C * J * f^2 holds to rounding
double client_compute_energy_j(double iterations, double capacitance, double cycles_per_sample,
                               int samples, double cpu_hz);

double upload_energy_j(double upload_time_s, double power_w);

double haps_compute_time_s(double cycles_per_bit, double update_size_bits, int selected_count,
                           double cpu_hz);

double haps_energy_j(double capacitance, double cpu_hz, double compute_time_s,
                     double bc_power_w, double bc_time_s);

// per-round accounting, exported to CSV
struct ComputeLedger {
  std::vector<int> client_id;
  std::vector<double> compute_time_s;
  std::vector<double> compute_energy_j;
  std::vector<double> upload_time_s;
  std::vector<double> upload_energy_j;
  double haps_compute_time_s = 0.0;
  double haps_compute_energy_j = 0.0;
  double haps_bc_time_s = 0.0;
  double haps_bc_energy_j = 0.0;

  double total_client_energy_j() const;
  double total_haps_energy_j() const { return haps_compute_energy_j + haps_bc_energy_j; }
};

}  // namespace hapfl
