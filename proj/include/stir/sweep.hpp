#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "stir/eval.hpp"
#include "stir/training.hpp"

namespace stir {

/// False-negative cost grids per stage; the edit stage keeps its trained cost
/// and every false-positive cost is `fp_cost`.
struct SweepGrid {
  std::vector<double> rp_start_fn;
  std::vector<double> rm_start_fn;
  std::vector<double> rp_end_fn;
  std::vector<std::size_t> capacities;
  double fp_cost = 1.0;

  /// rp_start {1..128}, rm_start {1..16}, rp_end {1..128} in powers of two; capacities {1, 2}.
  static SweepGrid full();
  std::size_t cost_configs() const { return rp_start_fn.size() * rm_start_fn.size() * rp_end_fn.size(); }
};

struct SweepSetting {
  double rp_start_fn = 1.0;
  double rm_start_fn = 1.0;
  double rp_end_fn = 1.0;
  std::size_t capacity = 1;

  std::string key() const;
  friend bool operator==(const SweepSetting&, const SweepSetting&) = default;
};

/// Capacity-major, then rp_start, rm_start, rp_end costs in grid order.
std::vector<SweepSetting> enumerate_settings(const SweepGrid& grid);

struct SweepResult {
  SweepSetting setting;
  MetricsReport report;
};

struct SweepOptions {
  std::size_t workers = 1;
  /// JSON-lines file holding one finished setting per line. Settings already
  /// present are not re-run; new ones are appended as they finish.
  std::filesystem::path results;
  /// Stop after this many newly evaluated settings (0: no limit).
  std::size_t limit = 0;
  double edit_fn = 1.0;
};

std::string result_json(const SweepResult& r);
/// Parses a results line; returns false on a malformed or truncated line.
bool parse_result_json(const std::string& line, SweepResult& out);

/// Trains one forest per (stage, cost) on `examples`, then runs every grid
/// setting over `test` with `lms`. Results come back in enumeration order with
/// total scores assigned; settings cut off by `limit` are missing.
std::vector<SweepResult> run_sweep(const LanguageModels& lms, const StageDatasets& examples,
                                   const ForestParams& params, const std::vector<Utterance>& test,
                                   const SweepGrid& grid, const SweepOptions& options);

/// Runs one trained forest set over a corpus and evaluates it.
MetricsReport evaluate_forests(const LanguageModels& lms, const ForestSet& forests,
                               const std::vector<Utterance>& test, std::size_t capacity);

void write_sweep_table(std::ostream& out, const std::vector<SweepResult>& results);

}  // namespace stir
