#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "hapfl/compute.hpp"

using namespace hapfl;

TEST_CASE("iteration coefficient") {
  // 2 / ((2 - M*step) * step * u)
  CHECK(iteration_coefficient(4.0, 1.0, 0.25) == doctest::Approx(8.0).epsilon(1e-15));
  CHECK(iteration_coefficient(2.0, 0.5, 0.5) == doctest::Approx(8.0).epsilon(1e-15));
  CHECK(iteration_coefficient(1.0, 1.0, 1.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(iteration_coefficient(0.0, 1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(iteration_coefficient(1.0, 2.0, 0.5), std::invalid_argument);  // u > M
  CHECK_THROWS_AS(iteration_coefficient(1.0, 1.0, 2.0), std::invalid_argument);  // step = 2/M
  CHECK_THROWS_AS(iteration_coefficient(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("local iteration count") {
  CHECK(local_iterations(8.0, 0.5) == 8);
  CHECK(local_iterations(8.0, 0.3) == 14);   // ceil(8 * log2(1/0.3))
  CHECK(local_iterations(8.0, 0.85) == 2);
  CHECK(local_iterations(8.0, 1.0) == 0);    // no local work requested
  CHECK_THROWS_AS(local_iterations(0.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(local_iterations(8.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(local_iterations(8.0, 1.5), std::invalid_argument);
}

TEST_CASE("client compute time, power and energy") {
  // 5 iterations of 2e4 cycles over 500 samples at 2 GHz
  CHECK(client_compute_time_s(5.0, 2e4, 500, 2e9) == doctest::Approx(0.025).epsilon(1e-15));
  CHECK(cpu_power_w(1e-28, 2e9) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(client_compute_energy_j(5.0, 1e-28, 2e4, 500, 2e9) ==
        doctest::Approx(0.02).epsilon(1e-15));

  // bilinear identity: energy equals power times time
  const double t = client_compute_time_s(7.0, 1.7e4, 320, 9.1e8);
  const double p = cpu_power_w(1e-28, 9.1e8);
  CHECK(client_compute_energy_j(7.0, 1e-28, 1.7e4, 320, 9.1e8) ==
        doctest::Approx(t * p).epsilon(1e-14));

  CHECK(client_compute_time_s(0.0, 2e4, 500, 2e9) == 0.0);
  CHECK_THROWS_AS(client_compute_time_s(-1.0, 2e4, 500, 2e9), std::invalid_argument);
  CHECK_THROWS_AS(client_compute_time_s(1.0, 2e4, 500, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(cpu_power_w(0.0, 1e9), std::invalid_argument);
}

TEST_CASE("upload energy") {
  CHECK(upload_energy_j(2.5, 0.01) == doctest::Approx(0.025).epsilon(1e-15));
  CHECK_THROWS_AS(upload_energy_j(-1.0, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(upload_energy_j(1.0, -0.01), std::invalid_argument);
}

TEST_CASE("platform compute time and energy") {
  // 3e4 cycles per bit, 28100-bit updates, 20 uploads, 20 GHz
  CHECK(haps_compute_time_s(3e4, 28100.0, 20, 2e10) == doctest::Approx(0.843).epsilon(1e-15));
  CHECK(haps_compute_time_s(3e4, 28100.0, 0, 2e10) == 0.0);
  CHECK_THROWS_AS(haps_compute_time_s(3e4, 28100.0, -1, 2e10), std::invalid_argument);
  CHECK_THROWS_AS(haps_compute_time_s(3e4, 28100.0, 20, 0.0), std::invalid_argument);

  // cap * f^3 * t_cp + p_bc * t_bc
  CHECK(haps_energy_j(1e-27, 2e10, 0.843, 100.0, 0.5) ==
        doctest::Approx(6794.0).epsilon(1e-14));
  CHECK_THROWS_AS(haps_energy_j(1e-27, 2e10, -0.1, 100.0, 0.5), std::invalid_argument);
}

TEST_CASE("ledger totals") {
  ComputeLedger led;
  led.client_id = {0, 2};
  led.compute_time_s = {0.1, 0.2};
  led.compute_energy_j = {0.01, 0.03};
  led.upload_time_s = {1.0, 2.0};
  led.upload_energy_j = {0.004, 0.006};
  led.haps_compute_energy_j = 100.0;
  led.haps_bc_energy_j = 25.0;
  CHECK(led.total_client_energy_j() == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(led.total_haps_energy_j() == doctest::Approx(125.0).epsilon(1e-15));
}
