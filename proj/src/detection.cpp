#include "polmc/detection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>

#include "polmc/error.hpp"
#include "polmc/io.hpp"

namespace polmc {
namespace {

constexpr std::string_view kGridMagic = "POLG";
constexpr std::uint32_t kGridVersion = 1;
constexpr std::uint32_t kGridExtraArrays = 2;

// Field order of the core arrays in the file.
constexpr int kCoreFields = 10;

double core_field(const BinSums &b, int f) {
  switch (f) {
  case 0: return b.w;
  case 1: return b.i;
  case 2: return b.q;
  case 3: return b.u;
  case 4: return b.v;
  case 5: return b.e_plus.real();
  case 6: return b.e_plus.imag();
  case 7: return b.e_minus.real();
  case 8: return b.e_minus.imag();
  default: return b.count;
  }
}

void set_core_field(BinSums &b, int f, double v) {
  switch (f) {
  case 0: b.w = v; break;
  case 1: b.i = v; break;
  case 2: b.q = v; break;
  case 3: b.u = v; break;
  case 4: b.v = v; break;
  case 5: b.e_plus.real(v); break;
  case 6: b.e_plus.imag(v); break;
  case 7: b.e_minus.real(v); break;
  case 8: b.e_minus.imag(v); break;
  default: b.count = v; break;
  }
}

} // namespace

Stokes stokes_from_jones(const JonesVector &e) {
  const double ix = std::norm(e[0]);
  const double iy = std::norm(e[1]);
  const cdouble c = e[0] * std::conj(e[1]);
  return {ix + iy, ix - iy, 2.0 * c.real(), -2.0 * c.imag()};
}

void GridGeometry::validate() const {
  if (n_radius == 0 || n_depth == 0)
    throw ValidationError("detector grid must have at least one bin per axis");
  if (!(radius_width > 0.0) || !(depth_width > 0.0) || !std::isfinite(radius_width) ||
      !std::isfinite(depth_width))
    throw ValidationError("detector bin widths must be > 0");
}

BinSums &BinSums::operator+=(const BinSums &o) {
  w += o.w;
  i += o.i;
  q += o.q;
  u += o.u;
  v += o.v;
  e_plus += o.e_plus;
  e_minus += o.e_minus;
  count += o.count;
  xy_doc += o.xy_doc;
  pm_doc += o.pm_doc;
  return *this;
}

DetectorGrid::DetectorGrid(const GridGeometry &geometry) : geometry_(geometry) {
  geometry_.validate();
  bins_.resize(static_cast<std::size_t>(geometry_.n_radius) * geometry_.n_depth);
}

void DetectorGrid::accumulate(const ExitRecord &r) {
  const Stokes s = stokes_from_jones(r.jones);
  const double root_w = std::sqrt(r.weight);
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const cdouble i_unit(0.0, 1.0);
  const cdouble e_plus = (r.jones[0] - i_unit * r.jones[1]) * kInvSqrt2;
  const cdouble e_minus = (r.jones[0] + i_unit * r.jones[1]) * kInvSqrt2;

  BinSums add;
  add.w = r.weight;
  add.i = r.weight * s.i;
  add.q = r.weight * s.q;
  add.u = r.weight * s.u;
  add.v = r.weight * s.v;
  add.e_plus = root_w * e_plus;
  add.e_minus = root_w * e_minus;
  add.count = 1.0;
  if (s.i > 0.0) {
    const double denom = std::norm(e_plus) + std::norm(e_minus);
    const double doc = denom > 0.0 ? 2.0 * (e_plus * std::conj(e_minus)).real() / denom : 0.0;
    add.xy_doc = r.weight * doc * (1.0 - s.q / s.i);
    add.pm_doc = r.weight * doc * (1.0 - s.v / s.i);
  }

  const double radius = std::hypot(r.x, r.y);
  const double rb = std::floor(radius / geometry_.radius_width);
  const double db = std::floor(r.depth / geometry_.depth_width);
  if (rb >= 0.0 && rb < geometry_.n_radius && db >= 0.0 && db < geometry_.n_depth)
    bins_[index(static_cast<std::uint32_t>(rb), static_cast<std::uint32_t>(db))] += add;
  else
    overflow_ += add;
}

void DetectorGrid::merge(const DetectorGrid &other) {
  if (!(other.geometry_ == geometry_))
    throw ValidationError("cannot merge detector grids with different geometry");
  for (std::size_t k = 0; k < bins_.size(); ++k)
    bins_[k] += other.bins_[k];
  overflow_ += other.overflow_;
}

double DetectorGrid::total_weight() const {
  double sum = 0.0;
  for (const auto &b : bins_)
    sum += b.w;
  return sum + overflow_.w;
}

void DetectorGrid::write(std::ostream &out) const {
  io::BinaryWriter w(out);
  w.magic(kGridMagic);
  w.u32(kGridVersion);
  w.u32(geometry_.n_radius);
  w.u32(geometry_.n_depth);
  w.f64(geometry_.radius_width);
  w.f64(geometry_.depth_width);
  for (int f = 0; f < kCoreFields; ++f)
    for (const auto &b : bins_)
      w.f64(core_field(b, f));
  w.u32(kGridExtraArrays);
  for (const auto &b : bins_)
    w.f64(b.xy_doc);
  for (const auto &b : bins_)
    w.f64(b.pm_doc);
  for (int f = 0; f < kCoreFields; ++f)
    w.f64(core_field(overflow_, f));
  w.f64(overflow_.xy_doc);
  w.f64(overflow_.pm_doc);
}

DetectorGrid DetectorGrid::read(std::istream &in) {
  io::BinaryReader r(in);
  r.expect_magic(kGridMagic);
  r.expect_version(kGridVersion);
  GridGeometry g;
  g.n_radius = r.u32();
  g.n_depth = r.u32();
  if (g.n_radius == 0 || g.n_depth == 0 || g.n_radius > (1u << 16) || g.n_depth > (1u << 16))
    r.fail("implausible grid dimensions");
  g.radius_width = r.f64();
  g.depth_width = r.f64();
  if (!(g.radius_width > 0.0) || !(g.depth_width > 0.0))
    r.fail("non-positive bin width");
  DetectorGrid grid(g);
  for (int f = 0; f < kCoreFields; ++f)
    for (auto &b : grid.bins_) {
      const double v = r.f64();
      if (!std::isfinite(v))
        r.fail("non-finite accumulator value");
      set_core_field(b, f, v);
    }
  if (r.u32() != kGridExtraArrays)
    r.fail("unexpected number of extension arrays");
  for (auto &b : grid.bins_)
    b.xy_doc = r.f64();
  for (auto &b : grid.bins_)
    b.pm_doc = r.f64();
  for (int f = 0; f < kCoreFields; ++f)
    set_core_field(grid.overflow_, f, r.f64());
  grid.overflow_.xy_doc = r.f64();
  grid.overflow_.pm_doc = r.f64();
  if (in.peek() != std::char_traits<char>::eof())
    r.fail("trailing bytes after grid");
  return grid;
}

void DetectorGrid::write_file(const std::string &path) const {
  io::atomic_write(path, [this](std::ostream &out) { write(out); });
}

DetectorGrid DetectorGrid::read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ValidationError("cannot open grid file: " + path);
  return read(in);
}

void DetectorGrid::write_csv(std::ostream &out) const {
  out << "radius_bin,depth_bin,radius_um,depth_um,sum_w,sum_i,sum_q,sum_u,sum_v,"
         "re_e_plus,im_e_plus,re_e_minus,im_e_minus,count,p_xx,p_xy,p_pp,p_pm,doc\n";
  out << std::setprecision(17);
  for (std::uint32_t r = 0; r < n_radius(); ++r)
    for (std::uint32_t d = 0; d < n_depth(); ++d) {
      const BinSums &b = bin(r, d);
      const Channels c = bin_channels(b);
      out << r << ',' << d << ',' << (r + 0.5) * geometry_.radius_width << ','
          << (d + 0.5) * geometry_.depth_width;
      for (int f = 0; f < kCoreFields; ++f)
        out << ',' << core_field(b, f);
      out << ',' << c.p_xx << ',' << c.p_xy << ',' << c.p_pp << ',' << c.p_pm << ','
          << bin_degree_of_coherence(b) << '\n';
    }
}

LateralGrid::LateralGrid(std::uint32_t bins, double bin_width)
    : n(bins), width(bin_width), w(static_cast<std::size_t>(bins) * bins, 0.0),
      i(static_cast<std::size_t>(bins) * bins, 0.0) {
  if (bins > 0 && !(bin_width > 0.0))
    throw ValidationError("lateral bin width must be > 0");
}

int LateralGrid::bin_of(double coord) const {
  const double b = std::floor(coord / width + 0.5 * n);
  if (b < 0.0 || b >= n)
    return -1;
  return static_cast<int>(b);
}

void LateralGrid::accumulate(const ExitRecord &r) {
  if (n == 0)
    return;
  const int ix = bin_of(r.x);
  const int iy = bin_of(r.y);
  if (ix < 0 || iy < 0)
    return;
  const std::size_t k = static_cast<std::size_t>(iy) * n + ix;
  w[k] += r.weight;
  i[k] += r.weight * stokes_from_jones(r.jones).i;
}

void LateralGrid::merge(const LateralGrid &o) {
  if (o.n != n || o.width != width)
    throw ValidationError("cannot merge lateral grids with different geometry");
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] += o.w[k];
    i[k] += o.i[k];
  }
}

Channels bin_channels(const BinSums &b) {
  if (b.i == 0.0)
    return {};
  const double lin = b.w * (b.q / b.i);
  const double circ = b.w * (b.v / b.i);
  return {b.w + lin, b.w - lin, b.w + circ, b.w - circ};
}

std::vector<Channels> channels(const DetectorGrid &grid) {
  std::vector<Channels> out;
  out.reserve(grid.bins().size());
  for (const auto &b : grid.bins())
    out.push_back(bin_channels(b));
  return out;
}

double bin_degree_of_coherence(const BinSums &b) {
  const double denom = std::norm(b.e_plus) + std::norm(b.e_minus);
  if (denom == 0.0)
    return 0.0;
  return 2.0 * (b.e_plus * std::conj(b.e_minus)).real() / denom;
}

std::vector<double> degree_of_coherence(const DetectorGrid &grid) {
  std::vector<double> out;
  out.reserve(grid.bins().size());
  for (const auto &b : grid.bins())
    out.push_back(bin_degree_of_coherence(b));
  return out;
}

CrossChannels bin_doc_weighted_cross(const BinSums &b, DocMode mode) {
  if (b.i == 0.0)
    return {};
  if (mode == DocMode::PerPhoton)
    return {b.xy_doc, b.pm_doc};
  const Channels c = bin_channels(b);
  const double doc = bin_degree_of_coherence(b);
  return {doc * c.p_xy, doc * c.p_pm};
}

std::vector<CrossChannels> doc_weighted_cross_channels(const DetectorGrid &grid, DocMode mode) {
  std::vector<CrossChannels> out;
  out.reserve(grid.bins().size());
  for (const auto &b : grid.bins())
    out.push_back(bin_doc_weighted_cross(b, mode));
  return out;
}

namespace {

constexpr std::array<std::pair<ChannelSelector, std::string_view>, 10> kChannelNames{{
    {ChannelSelector::Weight, "weight"},
    {ChannelSelector::Intensity, "intensity"},
    {ChannelSelector::Pxx, "pxx"},
    {ChannelSelector::Pxy, "pxy"},
    {ChannelSelector::Ppp, "ppp"},
    {ChannelSelector::Ppm, "ppm"},
    {ChannelSelector::PxyDoc, "pxy_doc"},
    {ChannelSelector::PpmDoc, "ppm_doc"},
    {ChannelSelector::Doc, "doc"},
    {ChannelSelector::Count, "count"},
}};

double select(const BinSums &b, ChannelSelector s) {
  switch (s) {
  case ChannelSelector::Weight: return b.w;
  case ChannelSelector::Intensity: return b.i;
  case ChannelSelector::Pxx: return bin_channels(b).p_xx;
  case ChannelSelector::Pxy: return bin_channels(b).p_xy;
  case ChannelSelector::Ppp: return bin_channels(b).p_pp;
  case ChannelSelector::Ppm: return bin_channels(b).p_pm;
  case ChannelSelector::PxyDoc: return bin_doc_weighted_cross(b).p_xy_doc;
  case ChannelSelector::PpmDoc: return bin_doc_weighted_cross(b).p_pm_doc;
  case ChannelSelector::Doc: return bin_degree_of_coherence(b);
  case ChannelSelector::Count: return b.count;
  }
  return 0.0;
}

} // namespace

ChannelSelector parse_channel(std::string_view name) {
  for (const auto &[sel, n] : kChannelNames)
    if (n == name)
      return sel;
  throw ValidationError("unknown channel: " + std::string(name));
}

std::string_view channel_name(ChannelSelector selector) {
  for (const auto &[sel, n] : kChannelNames)
    if (sel == selector)
      return n;
  return "?";
}

Image bscan_image(const DetectorGrid &grid, ChannelSelector selector) {
  Image img;
  img.rows = grid.n_depth();
  img.cols = grid.n_radius();
  img.values.resize(static_cast<std::size_t>(img.rows) * img.cols);
  for (std::uint32_t d = 0; d < img.rows; ++d)
    for (std::uint32_t r = 0; r < img.cols; ++r)
      img.values[d * img.cols + r] = select(grid.bin(r, d), selector);
  return img;
}

GraymapScaling write_pgm(const Image &image, std::ostream &out) {
  GraymapScaling s;
  if (!image.values.empty()) {
    const auto [lo, hi] = std::minmax_element(image.values.begin(), image.values.end());
    s = {*lo, *hi};
  }
  out << "P5\n" << image.cols << ' ' << image.rows << "\n255\n";
  const double span = s.max - s.min;
  for (double v : image.values) {
    unsigned char px = 0;
    if (span > 0.0)
      px = static_cast<unsigned char>(std::lround(255.0 * (v - s.min) / span));
    out.put(static_cast<char>(px));
  }
  return s;
}

std::vector<double> co_polarized_fraction(const DetectorGrid &grid, std::uint32_t radius_bin,
                                          bool circular, double min_count) {
  std::vector<double> out(grid.n_depth(), std::numeric_limits<double>::quiet_NaN());
  for (std::uint32_t d = 0; d < grid.n_depth(); ++d) {
    const BinSums &b = grid.bin(radius_bin, d);
    if (b.count < min_count || b.i == 0.0)
      continue;
    const Channels c = bin_channels(b);
    const double co = circular ? c.p_pp : c.p_xx;
    const double cross = circular ? c.p_pm : c.p_xy;
    if (co + cross > 0.0)
      out[d] = co / (co + cross);
  }
  return out;
}

} // namespace polmc
