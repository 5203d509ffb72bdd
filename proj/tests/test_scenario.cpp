#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "hapfl/scenario.hpp"

using namespace hapfl;

TEST_CASE("slant range is the 3d hypotenuse") {
  CHECK(slant_range_km(30.0, 40.0, 25.0) == doctest::Approx(55.90169943749474).epsilon(1e-15));
  CHECK(slant_range_km(0.0, 0.0, 25.0) == 25.0);
}

TEST_CASE("generation is deterministic and respects the parameter ranges") {
  const Scenario a = generate_scenario(42, 64);
  const Scenario b = generate_scenario(42, 64);
  CHECK(scenario_to_text(a) == scenario_to_text(b));
  CHECK(a.client_count() == 64);

  const Scenario c = generate_scenario(43, 64);
  CHECK(scenario_to_text(a) != scenario_to_text(c));

  const SystemParams& p = a.params;
  for (const ClientProfile& cl : a.clients) {
    CHECK(cl.x_km * cl.x_km + cl.y_km * cl.y_km <= p.coverage_radius_km * p.coverage_radius_km);
    CHECK(cl.distance_km ==
          doctest::Approx(slant_range_km(cl.x_km, cl.y_km, p.altitude_km)).epsilon(1e-15));
    CHECK(cl.distance_km >= p.altitude_km);
    CHECK(cl.cycles_per_sample >= p.client_cycles_per_sample_min);
    CHECK(cl.cycles_per_sample <= p.client_cycles_per_sample_max);
    CHECK(cl.samples == p.client_samples);
  }
  for (int k = 0; k < a.client_count(); ++k) CHECK(a.clients[k].id == k);
}

TEST_CASE("positions are uniform in area over the disc") {
  // E[r^2] = R^2/2 for a uniform-in-area drop; 4000 samples put the mean
  // within a few sd of that
  const Scenario s = generate_scenario(7, 4000);
  double mean_r2 = 0.0;
  for (const ClientProfile& c : s.clients) mean_r2 += c.x_km * c.x_km + c.y_km * c.y_km;
  mean_r2 /= s.client_count();
  const double R2 = s.params.coverage_radius_km * s.params.coverage_radius_km;
  CHECK(mean_r2 > 0.5 * R2 - 0.03 * R2);
  CHECK(mean_r2 < 0.5 * R2 + 0.03 * R2);
}

TEST_CASE("text round trip reproduces every field bit for bit") {
  SystemParams tweaked;
  tweaked.displacement_variance_km2 = 0.3141592653589793;
  tweaked.client_energy_budget_j = 19.999999999999996;
  const Scenario a = generate_scenario(123456789012345ULL, 17, tweaked);
  const std::string text = scenario_to_text(a);
  const Scenario b = scenario_from_text(text);
  CHECK(scenario_to_text(b) == text);
  CHECK(b.seed == a.seed);
  CHECK(b.params.displacement_variance_km2 == a.params.displacement_variance_km2);
  CHECK(b.params.client_energy_budget_j == a.params.client_energy_budget_j);
  REQUIRE(b.client_count() == a.client_count());
  for (int k = 0; k < a.client_count(); ++k) {
    CHECK(b.clients[k].x_km == a.clients[k].x_km);
    CHECK(b.clients[k].y_km == a.clients[k].y_km);
    CHECK(b.clients[k].distance_km == a.clients[k].distance_km);
    CHECK(b.clients[k].cycles_per_sample == a.clients[k].cycles_per_sample);
  }
}

TEST_CASE("file round trip") {
  const Scenario a = generate_scenario(5, 3);
  const std::string path = "scenario_roundtrip_test.txt";
  save_scenario(a, path);
  const Scenario b = load_scenario(path);
  CHECK(scenario_to_text(b) == scenario_to_text(a));
  std::remove(path.c_str());
}

TEST_CASE("parser reports malformed input") {
  const Scenario a = generate_scenario(9, 2);
  const std::string good = scenario_to_text(a);

  SUBCASE("missing field") {
    std::string text = good;
    const std::string needle = "altitude_km";
    text.replace(text.find(needle), needle.size(), "altitude_xx");
    CHECK_THROWS_AS(scenario_from_text(text), std::runtime_error);
  }
  SUBCASE("bad number") {
    std::string text = good;
    const std::string needle = "altitude_km = 25";
    text.replace(text.find(needle), needle.size(), "altitude_km = banana");
    CHECK_THROWS_AS(scenario_from_text(text), std::runtime_error);
  }
  SUBCASE("client count mismatch") {
    std::string text = good;
    const std::string needle = "clients = 2";
    text.replace(text.find(needle), needle.size(), "clients = 3");
    CHECK_THROWS_AS(scenario_from_text(text), std::runtime_error);
  }
  SUBCASE("short client row") {
    std::string text = good;
    text += "client 2 1.0 2.0\n";
    CHECK_THROWS_AS(scenario_from_text(text), std::runtime_error);
  }
  SUBCASE("garbage line") {
    CHECK_THROWS_AS(scenario_from_text(good + "what is this\n"), std::runtime_error);
  }
  SUBCASE("duplicate key") {
    CHECK_THROWS_AS(scenario_from_text(good + "altitude_km = 30\n"), std::runtime_error);
  }
}

TEST_CASE("validation rejects broken scenarios") {
  CHECK_THROWS_AS(generate_scenario(1, 0), std::invalid_argument);

  Scenario s = generate_scenario(1, 2);
  SUBCASE("nonpositive bandwidth") {
    s.params.bandwidth_hz = 0.0;
    CHECK_THROWS_AS(validate_scenario(s), std::invalid_argument);
  }
  SUBCASE("negative displacement variance") {
    s.params.displacement_variance_km2 = -1.0;
    CHECK_THROWS_AS(validate_scenario(s), std::invalid_argument);
  }
  SUBCASE("client cpu bounds inverted") {
    s.clients[0].cpu_hz_min = 10.0 * s.clients[0].cpu_hz_max;
    CHECK_THROWS_AS(validate_scenario(s), std::invalid_argument);
  }
  SUBCASE("client energy budget zero") {
    s.clients[1].energy_budget_j = 0.0;
    CHECK_THROWS_AS(validate_scenario(s), std::invalid_argument);
  }
}
