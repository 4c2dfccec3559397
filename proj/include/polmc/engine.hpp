#pragma once

// Parallel photon batches with reproducible per-photon random streams.

#include <cstdint>
#include <string>
#include <vector>

#include "polmc/detection.hpp"
#include "polmc/medium.hpp"
#include "polmc/transport.hpp"

namespace polmc {

enum class SourcePolarization { LinearX, Linear45, CircularRight, CircularLeft, Custom };

struct DetectorConfig {
  GridGeometry geometry;
  double solid_angle = 0.01;
  std::uint32_t lateral_bins = 0; // 0 disables the (x_s, y_s) grid
  double lateral_width = 4.0;
};

struct VarianceReduction {
  double roulette_threshold = 1e-4;
  double roulette_survival = 0.1;
  bool partial_photon = true;
};

struct SimConfig {
  MediumSpec medium;
  double wavelength = 0.632; // um, vacuum
  std::uint64_t n_photons = 100'000;
  std::uint64_t photon_offset = 0; // first photon index (for split runs)
  std::uint64_t seed = 42;
  SourcePolarization source_polarization = SourcePolarization::LinearX;
  JonesVector custom_jones{cdouble(1.0, 0.0), cdouble(0.0, 0.0)};
  double incidence_angle = 0.0; // radians
  DetectorConfig detector;
  VarianceReduction variance_reduction;
  unsigned n_workers = 0; // 0 = hardware concurrency
  int n_theta = 1801;
  std::uint64_t max_steps = 1'000'000;
  bool coherent_channel = false;

  /// Throws ValidationError itemising every invalid field.
  void validate() const;
  JonesVector source_jones() const;
};

struct Diagnostics {
  std::uint64_t photons = 0;
  std::uint64_t exit_top = 0;
  std::uint64_t exit_bottom = 0;
  std::uint64_t absorbed = 0;
  std::uint64_t roulette_killed = 0;
  std::uint64_t step_capped = 0;
  std::uint64_t scatter_events = 0;
  std::uint64_t rejection_trials = 0;
  std::uint64_t rejection_accepts = 0;
  double wall_seconds = 0.0;
  std::vector<std::string> warnings;

  double rejection_efficiency() const {
    return rejection_trials ? static_cast<double>(rejection_accepts) / rejection_trials : 0.0;
  }
};

/// Mean and standard error of a per-photon estimator.
struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct SimResult {
  PhotonTally tally;
  Diagnostics diagnostics;
  double mu_s = 0.0;

  explicit SimResult(const GridGeometry &g, std::uint32_t lateral_bins = 0,
                     double lateral_width = 4.0)
      : tally(g, lateral_bins, lateral_width) {}

  const DetectorGrid &grid() const { return tally.grid; }
  const DetectorGrid &partial_grid() const { return tally.partial; }
  const EnergyLedger &ledger() const { return tally.ledger; }

  /// Partial-photon (local estimate) detected weight per launched photon.
  Estimate partial_signal() const;
  /// Weight exiting the top surface inside the detector cone per photon.
  Estimate analog_signal() const;
  /// |mean coherent specular amplitude|^2 with a delta-method error.
  Estimate coherent_reflectance() const;

  /// Ledger and diagnostics as JSON text.
  std::string summary_json() const;
};

SimResult run(const SimConfig &config);

/// Element-wise sum; geometry must match.
SimResult merge(const std::vector<SimResult> &results);

/// Number of fixed photon blocks; reduction happens in block order so that
/// results are independent of the worker count.
inline constexpr std::uint64_t kPhotonBlocks = 64;

} // namespace polmc
