#include "hapfl/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace hapfl {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_header() {
  return "scenario,system,seed,round,selected,eta,tau_ul_s,tau_dl_s,tau_fl_s,cum_delay_s,"
         "loss,loss_population,bound,sum_sq_update,client_energy_j,haps_energy_j";
}

std::string csv_row(const RunRecord& r) {
  std::ostringstream out;
  out << r.scenario_id << ',' << r.system << ',' << r.seed << ',' << r.round << ','
      << r.selected << ',' << format_double(r.eta) << ',' << format_double(r.tau_ul_s) << ','
      << format_double(r.tau_dl_s) << ',' << format_double(r.tau_fl_s) << ','
      << format_double(r.cum_delay_s) << ',' << format_double(r.loss) << ','
      << format_double(r.loss_population) << ',' << format_double(r.bound) << ','
      << format_double(r.sum_sq_update) << ',' << format_double(r.client_energy_j) << ','
      << format_double(r.haps_energy_j);
  return out.str();
}

std::vector<RunRecord> records_from_run(const std::string& scenario_id, const std::string& system,
                                        std::uint64_t seed, const FlRun& run) {
  std::vector<RunRecord> out;
  out.reserve(run.rounds.size());
  for (const RoundRecord& rr : run.rounds) {
    RunRecord r;
    r.scenario_id = scenario_id;
    r.system = system;
    r.seed = seed;
    r.round = rr.round;
    r.selected = static_cast<int>(rr.selected.size());
    r.eta = rr.eta;
    r.tau_ul_s = rr.delay.uplink_s;
    r.tau_dl_s = rr.delay.downlink_s;
    r.tau_fl_s = rr.delay.total_s;
    r.cum_delay_s = rr.cumulative_delay_s;
    r.loss = rr.loss_selected;
    r.loss_population = rr.loss_population;
    r.bound = rr.bound;
    r.sum_sq_update = rr.sum_sq_update;
    r.client_energy_j = rr.ledger.total_client_energy_j();
    r.haps_energy_j = rr.ledger.total_haps_energy_j();
    out.push_back(std::move(r));
  }
  return out;
}

void write_csv(const std::string& path, const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out << csv_header() << '\n';
  for (const RunRecord& r : records) out << csv_row(r) << '\n';
  write_text(path, out.str());
}

RunSummary summarize(const std::vector<RunRecord>& records, bool reached_target) {
  if (records.empty()) throw std::invalid_argument("cannot summarize an empty run");
  RunSummary s;
  s.scenario_id = records.front().scenario_id;
  s.system = records.front().system;
  s.seed = records.front().seed;
  s.rounds = static_cast<int>(records.size());
  for (const RunRecord& r : records) {
    s.mean_selected += r.selected;
    s.total_client_energy_j += r.client_energy_j;
    s.total_haps_energy_j += r.haps_energy_j;
  }
  s.mean_selected /= static_cast<double>(records.size());
  s.final_loss = records.back().loss;
  s.final_loss_population = records.back().loss_population;
  s.final_bound = records.back().bound;
  s.total_delay_s = records.back().cum_delay_s;
  s.reached_target = reached_target;
  return s;
}

std::string summary_to_json(const RunSummary& s) {
  nlohmann::ordered_json j;
  j["scenario"] = s.scenario_id;
  j["system"] = s.system;
  j["seed"] = s.seed;
  j["rounds"] = s.rounds;
  j["mean_selected"] = s.mean_selected;
  j["final_loss"] = s.final_loss;
  j["final_loss_population"] = s.final_loss_population;
  j["final_bound"] = s.final_bound;
  j["total_delay_s"] = s.total_delay_s;
  j["total_client_energy_j"] = s.total_client_energy_j;
  j["total_haps_energy_j"] = s.total_haps_energy_j;
  j["reached_target"] = s.reached_target;
  return j.dump(2) + "\n";
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace hapfl
