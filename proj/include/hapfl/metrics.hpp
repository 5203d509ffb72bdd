#pragma once

// Flat per-round records plus their CSV/JSON forms. Floats are printed with
// a fixed max-precision format so the same run always produces byte-identical
// files.

#include <cstdint>
#include <string>
#include <vector>

#include "hapfl/fl.hpp"

namespace hapfl {

struct RunRecord {
  std::string scenario_id;
  std::string system;
  std::uint64_t seed = 0;
  int round = 0;
  int selected = 0;
  double eta = 0.0;
  double tau_ul_s = 0.0;
  double tau_dl_s = 0.0;
  double tau_fl_s = 0.0;
  double cum_delay_s = 0.0;
  double loss = 0.0;             // cohort objective after the round
  double loss_population = 0.0;  // all-client objective after the round
  double bound = 0.0;
  double sum_sq_update = 0.0;
  double client_energy_j = 0.0;
  double haps_energy_j = 0.0;
};

std::string format_double(double v);  // %.17g, shared by every writer

std::string csv_header();
std::string csv_row(const RunRecord& r);

std::vector<RunRecord> records_from_run(const std::string& scenario_id, const std::string& system,
                                        std::uint64_t seed, const FlRun& run);

void write_csv(const std::string& path, const std::vector<RunRecord>& records);

struct RunSummary {
  std::string scenario_id;
  std::string system;
  std::uint64_t seed = 0;
  int rounds = 0;
  double mean_selected = 0.0;
  double final_loss = 0.0;
  double final_loss_population = 0.0;
  double final_bound = 0.0;
  double total_delay_s = 0.0;
  double total_client_energy_j = 0.0;
  double total_haps_energy_j = 0.0;
  bool reached_target = false;
};

RunSummary summarize(const std::vector<RunRecord>& records, bool reached_target);

std::string summary_to_json(const RunSummary& s);
void write_text(const std::string& path, const std::string& text);

}  // namespace hapfl
