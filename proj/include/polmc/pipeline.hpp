#pragma once

// simulate -> dataset -> train -> infer on a small built-in sweep.

#include <functional>
#include <string>
#include <vector>

#include "polmc/dataset.hpp"
#include "polmc/inverse.hpp"

namespace polmc {

struct PipelineConfig {
  SweepSpec sweep;
  Architecture architecture; // input/output widths are filled in from the data
  TrainConfig training;
  double train_fraction = 0.7;
  std::uint64_t seed = 42;
  double probe_value = 1.3; // property value of the stand-alone probe simulation
  std::string out_dir;      // empty: keep everything in memory
};

/// 64 samples of n_particle in [1.1, 1.5] at 2e4 photons, 3000 training steps.
PipelineConfig default_pipeline_config();

struct PipelineResult {
  Dataset train_set;
  Dataset test_set;
  LossCurves curves;
  Model model;
  std::vector<double> truth;      // held-out targets (first property)
  std::vector<double> prediction; // held-out predictions (first property)
  double heldout_mae = 0.0;
  double probe_truth = 0.0;
  double probe_prediction = 0.0;
  std::vector<std::pair<std::string, double>> stage_seconds;
  std::vector<std::string> files; // written artefacts
};

/// Human-readable stage list; touches nothing.
std::vector<std::string> pipeline_plan(const PipelineConfig &config);

/// Runs all stages. A failing stage rethrows with its name prefixed.
PipelineResult end_to_end(const PipelineConfig &config,
                          const std::function<void(const std::string &)> &log = {});

} // namespace polmc
