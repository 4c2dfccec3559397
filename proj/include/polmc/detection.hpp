#pragma once

// Binned Stokes accumulators over (exit radius, penetration depth) and the
// polarisation channels derived from them.

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace polmc {

using cdouble = std::complex<double>;
using JonesVector = std::array<cdouble, 2>;

struct Stokes {
  double i = 0.0;
  double q = 0.0;
  double u = 0.0;
  double v = 0.0;
};

/// I = |Ex|^2 + |Ey|^2, Q = |Ex|^2 - |Ey|^2, U = 2 Re(Ex Ey*), V = -2 Im(Ex Ey*).
Stokes stokes_from_jones(const JonesVector &e);

/// One detected contribution: a photon leaving through the top surface or a
/// partial-photon deposit. Jones components are in the laboratory x/y basis.
struct ExitRecord {
  double x = 0.0;
  double y = 0.0;
  double depth = 0.0;
  double weight = 0.0;
  JonesVector jones{cdouble(1.0, 0.0), cdouble(0.0, 0.0)};
};

struct GridGeometry {
  std::uint32_t n_radius = 50;
  std::uint32_t n_depth = 50;
  double radius_width = 4.0; // um
  double depth_width = 4.0;  // um

  bool operator==(const GridGeometry &) const = default;
  void validate() const;
};

/// Per-bin sums. Field amplitudes are accumulated as sqrt(W) * E so that
/// |sum E|^2 has intensity units.
struct BinSums {
  double w = 0.0;
  double i = 0.0;
  double q = 0.0;
  double u = 0.0;
  double v = 0.0;
  cdouble e_plus;
  cdouble e_minus;
  double count = 0.0;
  // Per-photon coherence-weighted cross sums: sum W DOC_n (1 - Q_n/I_n) and
  // sum W DOC_n (1 - V_n/I_n).
  double xy_doc = 0.0;
  double pm_doc = 0.0;

  BinSums &operator+=(const BinSums &o);
  bool operator==(const BinSums &) const = default;
};

class DetectorGrid {
public:
  DetectorGrid() : DetectorGrid(GridGeometry{}) {}
  explicit DetectorGrid(const GridGeometry &geometry);

  const GridGeometry &geometry() const { return geometry_; }
  std::uint32_t n_radius() const { return geometry_.n_radius; }
  std::uint32_t n_depth() const { return geometry_.n_depth; }

  /// Flat index; arrays are row-major over (radius, depth).
  std::size_t index(std::uint32_t radius_bin, std::uint32_t depth_bin) const {
    return static_cast<std::size_t>(radius_bin) * geometry_.n_depth + depth_bin;
  }

  const BinSums &bin(std::uint32_t radius_bin, std::uint32_t depth_bin) const {
    return bins_[index(radius_bin, depth_bin)];
  }
  BinSums &bin(std::uint32_t radius_bin, std::uint32_t depth_bin) {
    return bins_[index(radius_bin, depth_bin)];
  }
  const std::vector<BinSums> &bins() const { return bins_; }

  /// Records falling outside the grid land here.
  const BinSums &overflow() const { return overflow_; }

  void accumulate(const ExitRecord &record);
  void merge(const DetectorGrid &other);

  double total_weight() const;

  /// Serialises in the little-endian "POLG" layout.
  void write(std::ostream &out) const;
  static DetectorGrid read(std::istream &in);
  void write_file(const std::string &path) const;
  static DetectorGrid read_file(const std::string &path);

  /// One CSV row per bin.
  void write_csv(std::ostream &out) const;

  bool operator==(const DetectorGrid &) const = default;

private:
  GridGeometry geometry_;
  std::vector<BinSums> bins_;
  BinSums overflow_;
};

/// Optional lateral (x_s, y_s) accumulator of W and I for media without
/// azimuthal symmetry. Square, centred on the incidence point.
struct LateralGrid {
  std::uint32_t n = 0;
  double width = 4.0;
  std::vector<double> w;
  std::vector<double> i;

  LateralGrid() = default;
  LateralGrid(std::uint32_t bins, double bin_width);

  bool enabled() const { return n > 0; }
  /// Bin index of a coordinate, or -1 outside the grid.
  int bin_of(double coord) const;
  void accumulate(const ExitRecord &record);
  void merge(const LateralGrid &other);
  double intensity(std::uint32_t ix, std::uint32_t iy) const { return i[iy * n + ix]; }
  double weight(std::uint32_t ix, std::uint32_t iy) const { return w[iy * n + ix]; }
};

struct Channels {
  double p_xx = 0.0;
  double p_xy = 0.0;
  double p_pp = 0.0;
  double p_pm = 0.0;
};

/// Co/cross linear and co/cross circular channels from the bin aggregates:
/// p_xx = sum_W (1 + Q/I), p_xy = sum_W (1 - Q/I), p_pp and p_pm with V.
/// A bin with sum_I = 0 yields all-zero channels.
Channels bin_channels(const BinSums &b);
std::vector<Channels> channels(const DetectorGrid &grid);

/// 2 Re(E+ E-*) / (|E+|^2 + |E-|^2); 0 when both field sums vanish.
double bin_degree_of_coherence(const BinSums &b);
std::vector<double> degree_of_coherence(const DetectorGrid &grid);

enum class DocMode { PerBin, PerPhoton };

struct CrossChannels {
  double p_xy_doc = 0.0;
  double p_pm_doc = 0.0;
};

/// Cross channels weighted by the degree of coherence. PerBin applies the
/// bin's DOC to the aggregate cross channel; PerPhoton uses the sums of
/// W DOC_n [1 - Q_n/I_n] collected at accumulation time.
CrossChannels bin_doc_weighted_cross(const BinSums &b, DocMode mode = DocMode::PerBin);
std::vector<CrossChannels> doc_weighted_cross_channels(const DetectorGrid &grid,
                                                       DocMode mode = DocMode::PerBin);

enum class ChannelSelector {
  Weight,
  Intensity,
  Pxx,
  Pxy,
  Ppp,
  Ppm,
  PxyDoc,
  PpmDoc,
  Doc,
  Count,
};

ChannelSelector parse_channel(std::string_view name);
std::string_view channel_name(ChannelSelector selector);

/// Dense depth x radius image (rows are depth bins).
struct Image {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<double> values;

  double at(std::uint32_t row, std::uint32_t col) const { return values[row * cols + col]; }
};

Image bscan_image(const DetectorGrid &grid, ChannelSelector selector);

/// 8-bit binary graymap with linear min-max scaling:
///   pixel = round(255 (v - min) / (max - min)), all zero when max == min.
struct GraymapScaling {
  double min = 0.0;
  double max = 0.0;
};

GraymapScaling write_pgm(const Image &image, std::ostream &out);

/// Fraction p_co / (p_co + p_cross) along depth in one radius column, for
/// linear (xx/xy) or circular (++/+-) channels. Bins with fewer than
/// min_count detections are reported as NaN.
std::vector<double> co_polarized_fraction(const DetectorGrid &grid, std::uint32_t radius_bin,
                                          bool circular, double min_count = 1.0);

} // namespace polmc
