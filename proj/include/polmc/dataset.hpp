#pragma once

// Labelled samples for the inverse problem: simulated channel images paired
// with the optical properties that produced them.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "polmc/detection.hpp"
#include "polmc/engine.hpp"

namespace polmc {

/// Downsampled image layout: 4 channels (p_xx, p_xy, p_pp, p_pm), each
/// rows (depth) x cols (radius), channel-major.
struct FeatureSpec {
  std::uint32_t rows = 16;
  std::uint32_t cols = 16;
  bool use_partial_grid = false;

  std::size_t length() const { return 4u * rows * cols; }
};

/// Maps every grid bin onto the feature cell floor(d rows / n_depth),
/// floor(r cols / n_radius) and sums channel values divided by `launched`.
std::vector<double> extract_features(const DetectorGrid &grid, const FeatureSpec &spec,
                                     double launched);

struct PropertyRange {
  std::string name; // n_particle, n_host, particle_radius, number_density,
                    // volume_fraction, mu_a, delta_n, chi, thickness
  double lo = 0.0;
  double hi = 0.0;
};

/// Sets one named property on a medium.
void set_property(MediumSpec &medium, const std::string &name, double value);

struct TrainingSample {
  std::vector<double> features;
  std::vector<double> target;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;

  bool operator==(const TrainingSample &) const = default;
};

struct Dataset {
  std::vector<std::string> target_names;
  FeatureSpec feature_spec;
  GridGeometry grid_geometry;
  std::uint64_t photons_per_sample = 0;
  std::vector<TrainingSample> samples;

  std::size_t size() const { return samples.size(); }
  std::size_t feature_length() const { return feature_spec.length(); }

  /// Binary "POLD" layout.
  void write(std::ostream &out) const;
  static Dataset read(std::istream &in);
  void write_file(const std::string &path) const;
  static Dataset read_file(const std::string &path);
  void write_csv(std::ostream &out) const;
};

struct SweepSpec {
  SimConfig base;
  std::vector<PropertyRange> ranges{{"n_particle", 1.1, 1.5}};
  std::uint32_t n_samples = 64;
  std::uint64_t seed = 1;
  FeatureSpec features;
};

struct SweepReport {
  std::uint32_t requested = 0;
  std::uint32_t succeeded = 0;
  std::uint32_t failed = 0;
  std::vector<std::string> failures;
};

/// Scrambled Halton point `index` (1-based) in [0, 1)^dims.
std::vector<double> low_discrepancy_point(std::uint64_t index, std::size_t dims,
                                          std::uint64_t seed);

Dataset sweep(const SweepSpec &spec, SweepReport *report = nullptr);

/// Seeded shuffle then ceil(train_fraction N) / remainder.
std::pair<Dataset, Dataset> split(const Dataset &data, double train_fraction = 0.7,
                                  std::uint64_t seed = 0);

/// Per-feature affine map to zero mean and unit variance.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> scale; // 1/stddev, or 0 for constant features
  std::vector<std::uint32_t> constant;

  std::vector<double> apply(const std::vector<double> &x) const;
  /// Inverse map; constant features come back as their mean.
  std::vector<double> invert(const std::vector<double> &z) const;
  bool operator==(const Normalization &) const = default;
};

Normalization fit_normalization(const std::vector<std::vector<double>> &rows);
Normalization fit_feature_normalization(const Dataset &train);
Normalization fit_target_normalization(const Dataset &train);

/// Returns a copy with normalised features.
Dataset normalize_features(const Dataset &data, const Normalization &norm);

} // namespace polmc
