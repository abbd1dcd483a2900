#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "irsfd/overhead.hpp"
#include "irsfd/schemes.hpp"
#include "irsfd/types.hpp"

namespace irsfd {

enum class ExperimentKind {
  Convergence,
  SweepT,
  SweepPower,
  SweepSi,
  SweepQuantization,
  SweepDelay,
  SweepError,
  Overhead,
  SampleCount,
  LayerCount,
  AntennaSweep,
  RandomLocations,
};

std::string experiment_name(ExperimentKind k);
ExperimentKind parse_experiment_kind(const std::string& name);

/// Name of the swept quantity and its unit, e.g. "ap_power_dbm".
std::string sweep_parameter(ExperimentKind k);
/// Sweep points used when the experiment leaves `values` empty.
std::vector<double> default_sweep_values(ExperimentKind k);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::SweepT;
  std::vector<Scheme> schemes;
  ScenarioConfig scenario = desk_scenario();
  SchemeSettings settings{};
  std::vector<std::uint64_t> seeds;
  std::vector<double> values;  // sweep points; empty selects the defaults
  OverheadParams overhead{};   // base parameters of the overhead experiment
  /// Seed of the training pool of the shared unfolding network (one network
  /// per sweep point).
  std::uint64_t model_seed = 1000;
  int threads = 1;
  bool gnuplot = false;  // also emit plot.gp

  void validate() const;
};

/// Reads an experiment description. Keys: kind, schemes, seeds, values,
/// threads, model_seed, gnuplot, scenario (object, same schema as scenario
/// files), settings, overhead. Missing keys keep the defaults.
ExperimentSpec parse_experiment(const std::string& json_text);
ExperimentSpec load_experiment(const std::string& path);

/// Output of one run: file name -> file content.
struct ExperimentReport {
  std::map<std::string, std::string> files;
  int failures = 0;  // rows whose status is not "ok"
};

/// Applies the sweep coordinate `value` of `kind` to a scenario and settings.
void apply_sweep_value(ExperimentKind kind, double value, ScenarioConfig& cfg, SchemeSettings& s);

/// Runs every (sweep point, seed) in parallel and every scheme on it. The
/// main CSV (results.csv) depends only on the experiment description: columns
///   experiment,scheme,parameter,value,delay_correlation,seed,ul_rate,dl_rate,total_rate,status
/// Wall-clock seconds go to timing.csv. Per-point failures are logged to
/// stderr, recorded in the status column, and the run continues.
/// Convergence runs produce bcd_trace.csv and ssca_trace.csv (plus
/// train_trace.csv when unfolding is selected); overhead runs produce
/// overhead.csv.
ExperimentReport run_experiment(const ExperimentSpec& spec);

/// Writes every report file into `dir` (created if needed).
void write_report(const ExperimentReport& report, const std::string& dir);

}  // namespace irsfd
