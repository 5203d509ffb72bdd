#include "hapfl/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "hapfl/rng.hpp"

namespace hapfl {

double slant_range_km(double x_km, double y_km, double altitude_km) {
  return std::sqrt(x_km * x_km + y_km * y_km + altitude_km * altitude_km);
}

Scenario generate_scenario(std::uint64_t seed, int clients, const SystemParams& params) {
  if (clients < 1) throw std::invalid_argument("generate_scenario: clients must be >= 1");
  Scenario s;
  s.seed = seed;
  s.params = params;
  s.clients.resize(clients);

  Rng pos = Rng::stream(seed, 0x706f73);   // positions
  Rng hw = Rng::stream(seed, 0x6877);      // per-client compute draws
  const double R = params.coverage_radius_km;
  for (int k = 0; k < clients; ++k) {
    ClientProfile& c = s.clients[k];
    c.id = k;
    const double r = R * std::sqrt(pos.uniform());  // uniform in area
    const double th = 2.0 * M_PI * pos.uniform();
    c.x_km = r * std::cos(th);
    c.y_km = r * std::sin(th);
    c.distance_km = slant_range_km(c.x_km, c.y_km, params.altitude_km);
    c.cycles_per_sample =
        hw.uniform(params.client_cycles_per_sample_min, params.client_cycles_per_sample_max);
    c.capacitance = params.client_capacitance;
    c.cpu_hz_min = params.client_cpu_hz_min;
    c.cpu_hz_max = params.client_cpu_hz_max;
    c.max_power_w = params.client_max_power_w;
    c.energy_budget_j = params.client_energy_budget_j;
    c.samples = params.client_samples;
  }
  validate_scenario(s);
  return s;
}

void validate_scenario(const Scenario& s) {
  const SystemParams& p = s.params;
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string("scenario: ") + name + " must be > 0");
  };
  positive(p.bandwidth_hz, "bandwidth_hz");
  positive(p.noise_psd_w_per_hz, "noise_psd_w_per_hz");
  positive(p.update_size_bits, "update_size_bits");
  positive(p.altitude_km, "altitude_km");
  positive(p.coverage_radius_km, "coverage_radius_km");
  positive(p.reference_distance_km, "reference_distance_km");
  positive(p.reference_gain, "reference_gain");
  positive(p.min_effective_distance_km, "min_effective_distance_km");
  if (p.displacement_variance_km2 < 0.0)
    throw std::invalid_argument("scenario: displacement_variance_km2 must be >= 0");
  positive(p.haps_bc_power_max_w, "haps_bc_power_max_w");
  positive(p.haps_cpu_hz_min, "haps_cpu_hz_min");
  positive(p.haps_cpu_hz_max, "haps_cpu_hz_max");
  if (p.haps_cpu_hz_min > p.haps_cpu_hz_max)
    throw std::invalid_argument("scenario: haps_cpu_hz_min exceeds haps_cpu_hz_max");
  positive(p.haps_capacitance, "haps_capacitance");
  positive(p.haps_cycles_per_bit, "haps_cycles_per_bit");
  positive(p.haps_energy_budget_j, "haps_energy_budget_j");
  if (s.clients.empty()) throw std::invalid_argument("scenario: no clients");
  for (const ClientProfile& c : s.clients) {
    if (c.cpu_hz_min <= 0.0 || c.cpu_hz_min > c.cpu_hz_max)
      throw std::invalid_argument("scenario: client cpu bounds invalid (id " +
                                  std::to_string(c.id) + ")");
    if (c.max_power_w <= 0.0)
      throw std::invalid_argument("scenario: client max_power_w must be > 0 (id " +
                                  std::to_string(c.id) + ")");
    if (c.energy_budget_j <= 0.0)
      throw std::invalid_argument("scenario: client energy_budget_j must be > 0 (id " +
                                  std::to_string(c.id) + ")");
    if (c.cycles_per_sample <= 0.0 || c.capacitance <= 0.0 || c.samples < 1)
      throw std::invalid_argument("scenario: client compute fields invalid (id " +
                                  std::to_string(c.id) + ")");
  }
}

// ---- text format ----
//
// key = value lines, then one "client" row per client. Doubles use %.17g so a
// save/load cycle is exact. '#' starts a comment.

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

constexpr const char* kClientFields =
    "id x_km y_km cycles_per_sample capacitance cpu_hz_min cpu_hz_max "
    "max_power_w energy_budget_j samples";

}  // namespace

std::string scenario_to_text(const Scenario& s) {
  const SystemParams& p = s.params;
  std::ostringstream out;
  out << "# hapfl scenario v1\n";
  out << "seed = " << s.seed << "\n";
  out << "clients = " << s.clients.size() << "\n";
  out << "bandwidth_hz = " << fmt(p.bandwidth_hz) << "\n";
  out << "noise_psd_w_per_hz = " << fmt(p.noise_psd_w_per_hz) << "\n";
  out << "update_size_bits = " << fmt(p.update_size_bits) << "\n";
  out << "altitude_km = " << fmt(p.altitude_km) << "\n";
  out << "coverage_radius_km = " << fmt(p.coverage_radius_km) << "\n";
  out << "reference_distance_km = " << fmt(p.reference_distance_km) << "\n";
  out << "reference_gain = " << fmt(p.reference_gain) << "\n";
  out << "displacement_variance_km2 = " << fmt(p.displacement_variance_km2) << "\n";
  out << "rician_k_factor_db = " << fmt(p.rician_k_factor_db) << "\n";
  out << "min_effective_distance_km = " << fmt(p.min_effective_distance_km) << "\n";
  out << "client_max_power_w = " << fmt(p.client_max_power_w) << "\n";
  out << "client_energy_budget_j = " << fmt(p.client_energy_budget_j) << "\n";
  out << "client_cpu_hz_min = " << fmt(p.client_cpu_hz_min) << "\n";
  out << "client_cpu_hz_max = " << fmt(p.client_cpu_hz_max) << "\n";
  out << "client_cycles_per_sample_min = " << fmt(p.client_cycles_per_sample_min) << "\n";
  out << "client_cycles_per_sample_max = " << fmt(p.client_cycles_per_sample_max) << "\n";
  out << "client_capacitance = " << fmt(p.client_capacitance) << "\n";
  out << "client_samples = " << p.client_samples << "\n";
  out << "haps_bc_power_max_w = " << fmt(p.haps_bc_power_max_w) << "\n";
  out << "haps_cpu_hz_min = " << fmt(p.haps_cpu_hz_min) << "\n";
  out << "haps_cpu_hz_max = " << fmt(p.haps_cpu_hz_max) << "\n";
  out << "haps_capacitance = " << fmt(p.haps_capacitance) << "\n";
  out << "haps_cycles_per_bit = " << fmt(p.haps_cycles_per_bit) << "\n";
  out << "haps_energy_budget_j = " << fmt(p.haps_energy_budget_j) << "\n";
  out << "terr_mbs_count = " << p.terr_mbs_count << "\n";
  out << "terr_mbs_ring_km = " << fmt(p.terr_mbs_ring_km) << "\n";
  out << "terr_cell_radius_km = " << fmt(p.terr_cell_radius_km) << "\n";
  out << "terr_path_loss_exp = " << fmt(p.terr_path_loss_exp) << "\n";
  out << "terr_min_distance_km = " << fmt(p.terr_min_distance_km) << "\n";
  out << "terr_backhaul_bps = " << fmt(p.terr_backhaul_bps) << "\n";
  out << "terr_bc_power_max_w = " << fmt(p.terr_bc_power_max_w) << "\n";
  out << "# client fields: " << kClientFields << "\n";
  for (const ClientProfile& c : s.clients) {
    out << "client " << c.id << ' ' << fmt(c.x_km) << ' ' << fmt(c.y_km) << ' '
        << fmt(c.cycles_per_sample) << ' ' << fmt(c.capacitance) << ' ' << fmt(c.cpu_hz_min)
        << ' ' << fmt(c.cpu_hz_max) << ' ' << fmt(c.max_power_w) << ' '
        << fmt(c.energy_budget_j) << ' ' << c.samples << "\n";
  }
  return out.str();
}

void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_scenario: cannot open " + path);
  f << scenario_to_text(s);
  if (!f) throw std::runtime_error("save_scenario: write failed for " + path);
}

namespace {

double parse_double(const std::string& v, int line, const std::string& key) {
  try {
    size_t used = 0;
    double x = std::stod(v, &used);
    while (used < v.size() && std::isspace(static_cast<unsigned char>(v[used]))) ++used;
    if (used != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw std::runtime_error("scenario parse: line " + std::to_string(line) +
                             ": bad number for '" + key + "': " + v);
  }
}

}  // namespace

Scenario scenario_from_text(const std::string& text) {
  Scenario s;
  std::map<std::string, std::string> kv;
  std::map<std::string, int> kv_line;
  std::vector<ClientProfile> clients;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first == "client") {
      ClientProfile c;
      if (!(ls >> c.id >> c.x_km >> c.y_km >> c.cycles_per_sample >> c.capacitance >>
            c.cpu_hz_min >> c.cpu_hz_max >> c.max_power_w >> c.energy_budget_j >> c.samples)) {
        throw std::runtime_error("scenario parse: line " + std::to_string(lineno) +
                                 ": client row needs fields: " + kClientFields);
      }
      std::string extra;
      if (ls >> extra)
        throw std::runtime_error("scenario parse: line " + std::to_string(lineno) +
                                 ": unexpected trailing token '" + extra + "'");
      clients.push_back(c);
      continue;
    }
    // key = value
    std::string eq, value;
    if (!(ls >> eq) || eq != "=")
      throw std::runtime_error("scenario parse: line " + std::to_string(lineno) +
                               ": expected 'key = value', got '" + first + "'");
    std::getline(ls, value);
    const size_t b = value.find_first_not_of(" \t");
    if (b == std::string::npos)
      throw std::runtime_error("scenario parse: line " + std::to_string(lineno) +
                               ": missing value for '" + first + "'");
    const size_t e = value.find_last_not_of(" \t\r");
    value = value.substr(b, e - b + 1);
    if (kv.count(first))
      throw std::runtime_error("scenario parse: line " + std::to_string(lineno) +
                               ": duplicate key '" + first + "'");
    kv[first] = value;
    kv_line[first] = lineno;
  }

  auto take = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end())
      throw std::runtime_error(std::string("scenario parse: missing required field '") + key + "'");
    std::string v = it->second;
    int ln = kv_line[key];
    kv.erase(it);
    return std::pair<std::string, int>(v, ln);
  };
  auto take_d = [&](const char* key) {
    auto [v, ln] = take(key);
    return parse_double(v, ln, key);
  };
  auto take_i = [&](const char* key) {
    auto [v, ln] = take(key);
    const double d = parse_double(v, ln, key);
    if (d != std::floor(d))
      throw std::runtime_error("scenario parse: line " + std::to_string(ln) + ": '" + key +
                               "' must be an integer");
    return static_cast<long long>(d);
  };

  s.seed = static_cast<std::uint64_t>(take_i("seed"));
  const long long n = take_i("clients");
  SystemParams& p = s.params;
  p.bandwidth_hz = take_d("bandwidth_hz");
  p.noise_psd_w_per_hz = take_d("noise_psd_w_per_hz");
  p.update_size_bits = take_d("update_size_bits");
  p.altitude_km = take_d("altitude_km");
  p.coverage_radius_km = take_d("coverage_radius_km");
  p.reference_distance_km = take_d("reference_distance_km");
  p.reference_gain = take_d("reference_gain");
  p.displacement_variance_km2 = take_d("displacement_variance_km2");
  p.rician_k_factor_db = take_d("rician_k_factor_db");
  p.min_effective_distance_km = take_d("min_effective_distance_km");
  p.client_max_power_w = take_d("client_max_power_w");
  p.client_energy_budget_j = take_d("client_energy_budget_j");
  p.client_cpu_hz_min = take_d("client_cpu_hz_min");
  p.client_cpu_hz_max = take_d("client_cpu_hz_max");
  p.client_cycles_per_sample_min = take_d("client_cycles_per_sample_min");
  p.client_cycles_per_sample_max = take_d("client_cycles_per_sample_max");
  p.client_capacitance = take_d("client_capacitance");
  p.client_samples = static_cast<int>(take_i("client_samples"));
  p.haps_bc_power_max_w = take_d("haps_bc_power_max_w");
  p.haps_cpu_hz_min = take_d("haps_cpu_hz_min");
  p.haps_cpu_hz_max = take_d("haps_cpu_hz_max");
  p.haps_capacitance = take_d("haps_capacitance");
  p.haps_cycles_per_bit = take_d("haps_cycles_per_bit");
  p.haps_energy_budget_j = take_d("haps_energy_budget_j");
  p.terr_mbs_count = static_cast<int>(take_i("terr_mbs_count"));
  p.terr_mbs_ring_km = take_d("terr_mbs_ring_km");
  p.terr_cell_radius_km = take_d("terr_cell_radius_km");
  p.terr_path_loss_exp = take_d("terr_path_loss_exp");
  p.terr_min_distance_km = take_d("terr_min_distance_km");
  p.terr_backhaul_bps = take_d("terr_backhaul_bps");
  p.terr_bc_power_max_w = take_d("terr_bc_power_max_w");

  if (!kv.empty())
    throw std::runtime_error("scenario parse: line " + std::to_string(kv_line[kv.begin()->first]) +
                             ": unknown key '" + kv.begin()->first + "'");
  if (static_cast<long long>(clients.size()) != n)
    throw std::runtime_error("scenario parse: 'clients = " + std::to_string(n) + "' but " +
                             std::to_string(clients.size()) + " client rows present");
  for (size_t k = 0; k < clients.size(); ++k) {
    if (clients[k].id != static_cast<int>(k))
      throw std::runtime_error("scenario parse: client ids must be 0..n-1 in order (got " +
                               std::to_string(clients[k].id) + " at position " +
                               std::to_string(k) + ")");
    clients[k].distance_km = slant_range_km(clients[k].x_km, clients[k].y_km, p.altitude_km);
  }
  s.clients = std::move(clients);
  validate_scenario(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_scenario: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return scenario_from_text(ss.str());
}

}  // namespace hapfl
