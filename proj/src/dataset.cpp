#include "polmc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "polmc/config.hpp"
#include "polmc/error.hpp"
#include "polmc/io.hpp"
#include "polmc/rng.hpp"

namespace polmc {
namespace {

constexpr std::string_view kDatasetMagic = "POLD";
constexpr std::uint32_t kDatasetVersion = 1;

constexpr std::uint32_t kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

double radical_inverse(std::uint64_t index, std::uint32_t base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

} // namespace

std::vector<double> extract_features(const DetectorGrid &grid, const FeatureSpec &spec,
                                     double launched) {
  if (spec.rows == 0 || spec.cols == 0)
    throw ValidationError("feature image must have at least one row and column");
  if (!(launched > 0.0))
    throw ValidationError("extract_features: launched weight must be > 0");
  const std::uint32_t nr = grid.n_radius();
  const std::uint32_t nd = grid.n_depth();
  const std::size_t plane = static_cast<std::size_t>(spec.rows) * spec.cols;
  std::vector<double> f(spec.length(), 0.0);
  for (std::uint32_t r = 0; r < nr; ++r) {
    const std::uint32_t col = static_cast<std::uint32_t>(std::uint64_t(r) * spec.cols / nr);
    for (std::uint32_t d = 0; d < nd; ++d) {
      const std::uint32_t row = static_cast<std::uint32_t>(std::uint64_t(d) * spec.rows / nd);
      const Channels c = bin_channels(grid.bin(r, d));
      const std::size_t k = static_cast<std::size_t>(row) * spec.cols + col;
      f[k] += c.p_xx / launched;
      f[plane + k] += c.p_xy / launched;
      f[2 * plane + k] += c.p_pp / launched;
      f[3 * plane + k] += c.p_pm / launched;
    }
  }
  return f;
}

void set_property(MediumSpec &m, const std::string &name, double value) {
  if (name == "n_particle")
    m.n_particle = value;
  else if (name == "n_host")
    m.n_host = value;
  else if (name == "particle_radius")
    m.particle_radius = value;
  else if (name == "number_density")
    m.number_density = value;
  else if (name == "volume_fraction")
    m.number_density = value / m.particle_volume();
  else if (name == "mu_a")
    m.mu_a = value;
  else if (name == "delta_n")
    m.delta_n = value;
  else if (name == "chi")
    m.chi = value;
  else if (name == "thickness")
    m.thickness = value;
  else
    throw ValidationError("unknown optical property: " + name);
}

std::vector<double> low_discrepancy_point(std::uint64_t index, std::size_t dims,
                                          std::uint64_t seed) {
  if (dims > std::size(kPrimes))
    throw ValidationError("low_discrepancy_point: at most 12 dimensions");
  std::vector<double> p(dims);
  RandomStream shift(mix_seed(seed, 0x48616c746f6eull), 0);
  for (std::size_t d = 0; d < dims; ++d) {
    const double v = radical_inverse(index, kPrimes[d]) + shift.uniform_closed_open();
    p[d] = v - std::floor(v);
  }
  return p;
}

Dataset sweep(const SweepSpec &spec, SweepReport *report) {
  if (spec.n_samples < 10)
    throw ValidationError("sweep: n_samples must be >= 10");
  if (spec.ranges.empty())
    throw ValidationError("sweep: at least one property range is required");
  for (const auto &r : spec.ranges) {
    if (!(r.hi >= r.lo) || !std::isfinite(r.lo) || !std::isfinite(r.hi))
      throw ValidationError("sweep: range for " + r.name + " must satisfy lo <= hi");
    MediumSpec probe = spec.base.medium;
    set_property(probe, r.name, r.lo); // rejects unknown names early
  }
  spec.base.validate();

  Dataset data;
  data.feature_spec = spec.features;
  data.grid_geometry = spec.base.detector.geometry;
  data.photons_per_sample = spec.base.n_photons;
  for (const auto &r : spec.ranges)
    data.target_names.push_back(r.name);

  SweepReport local;
  local.requested = spec.n_samples;
  for (std::uint32_t s = 0; s < spec.n_samples; ++s) {
    const auto u = low_discrepancy_point(s + 1, spec.ranges.size(), spec.seed);
    SimConfig cfg = spec.base;
    cfg.seed = mix_seed(spec.seed, s);
    TrainingSample sample;
    for (std::size_t d = 0; d < spec.ranges.size(); ++d) {
      const auto &r = spec.ranges[d];
      const double value = r.lo == r.hi ? r.lo : r.lo + (r.hi - r.lo) * u[d];
      set_property(cfg.medium, r.name, value);
      sample.target.push_back(value);
    }
    try {
      const SimResult result = run(cfg);
      const DetectorGrid &grid = spec.features.use_partial_grid ? result.partial_grid()
                                                                : result.grid();
      sample.features =
          extract_features(grid, spec.features, static_cast<double>(cfg.n_photons));
      sample.config_hash = config_hash(cfg);
      sample.seed = cfg.seed;
      data.samples.push_back(std::move(sample));
      ++local.succeeded;
    } catch (const std::exception &e) {
      ++local.failed;
      local.failures.push_back("sample " + std::to_string(s) + ": " + e.what());
    }
  }
  if (report)
    *report = local;
  return data;
}

std::pair<Dataset, Dataset> split(const Dataset &data, double train_fraction, std::uint64_t seed) {
  if (data.size() < 4)
    throw ValidationError("split: dataset needs at least 4 samples");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ValidationError("split: train fraction must lie in (0, 1)");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  RandomStream rng(mix_seed(seed, 0x73706c6974ull), 0);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
    std::swap(order[i], order[j]);
  }
  const std::size_t n_train =
      static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(data.size()) - 1e-9));
  Dataset train = data, test = data;
  train.samples.clear();
  test.samples.clear();
  for (std::size_t k = 0; k < order.size(); ++k)
    (k < n_train ? train : test).samples.push_back(data.samples[order[k]]);
  return {std::move(train), std::move(test)};
}

std::vector<double> Normalization::apply(const std::vector<double> &x) const {
  if (x.size() != mean.size())
    throw ValidationError("normalization: length mismatch");
  std::vector<double> z(x.size());
  for (std::size_t k = 0; k < x.size(); ++k)
    z[k] = (x[k] - mean[k]) * scale[k];
  return z;
}

std::vector<double> Normalization::invert(const std::vector<double> &z) const {
  if (z.size() != mean.size())
    throw ValidationError("normalization: length mismatch");
  std::vector<double> x(z.size());
  for (std::size_t k = 0; k < z.size(); ++k)
    x[k] = scale[k] != 0.0 ? z[k] / scale[k] + mean[k] : mean[k];
  return x;
}

Normalization fit_normalization(const std::vector<std::vector<double>> &rows) {
  if (rows.empty())
    throw ValidationError("normalization: no rows");
  const std::size_t n = rows.front().size();
  Normalization norm;
  norm.mean.assign(n, 0.0);
  norm.scale.assign(n, 0.0);
  for (const auto &r : rows) {
    if (r.size() != n)
      throw ValidationError("normalization: ragged rows");
    for (std::size_t k = 0; k < n; ++k)
      norm.mean[k] += r[k];
  }
  const double count = static_cast<double>(rows.size());
  for (auto &m : norm.mean)
    m /= count;
  std::vector<double> var(n, 0.0);
  for (const auto &r : rows)
    for (std::size_t k = 0; k < n; ++k) {
      const double d = r[k] - norm.mean[k];
      var[k] += d * d;
    }
  for (std::size_t k = 0; k < n; ++k) {
    const double sd = std::sqrt(var[k] / count);
    if (sd > 1e-12 * std::max(1.0, std::abs(norm.mean[k]))) {
      norm.scale[k] = 1.0 / sd;
    } else {
      norm.scale[k] = 0.0;
      norm.constant.push_back(static_cast<std::uint32_t>(k));
    }
  }
  return norm;
}

Normalization fit_feature_normalization(const Dataset &train) {
  std::vector<std::vector<double>> rows;
  rows.reserve(train.size());
  for (const auto &s : train.samples)
    rows.push_back(s.features);
  return fit_normalization(rows);
}

Normalization fit_target_normalization(const Dataset &train) {
  std::vector<std::vector<double>> rows;
  rows.reserve(train.size());
  for (const auto &s : train.samples)
    rows.push_back(s.target);
  return fit_normalization(rows);
}

Dataset normalize_features(const Dataset &data, const Normalization &norm) {
  Dataset out = data;
  for (auto &s : out.samples)
    s.features = norm.apply(s.features);
  return out;
}

void Dataset::write(std::ostream &out) const {
  io::BinaryWriter w(out);
  const std::uint32_t f_len = static_cast<std::uint32_t>(feature_length());
  const std::uint32_t t_len = static_cast<std::uint32_t>(target_names.size());
  w.magic(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u32(f_len);
  w.u32(t_len);
  w.u64(samples.size());
  // Metadata: feature image shape, source grid geometry, target names.
  w.u32(feature_spec.rows);
  w.u32(feature_spec.cols);
  w.u32(feature_spec.use_partial_grid ? 1u : 0u);
  w.u32(grid_geometry.n_radius);
  w.u32(grid_geometry.n_depth);
  w.f64(grid_geometry.radius_width);
  w.f64(grid_geometry.depth_width);
  w.u64(photons_per_sample);
  for (const auto &name : target_names)
    w.str(name);
  for (const auto &s : samples) {
    if (s.features.size() != f_len || s.target.size() != t_len)
      throw ValidationError("dataset: sample length mismatch");
    w.u64(s.config_hash);
    w.u64(s.seed);
    w.f64s(s.features);
    w.f64s(s.target);
  }
}

Dataset Dataset::read(std::istream &in) {
  io::BinaryReader r(in);
  r.expect_magic(kDatasetMagic);
  r.expect_version(kDatasetVersion);
  const std::uint32_t f_len = r.u32();
  const std::uint32_t t_len = r.u32();
  const std::uint64_t count = r.u64();
  if (t_len == 0 || t_len > 64)
    r.fail("implausible target length");
  if (count > (1ull << 32))
    r.fail("implausible sample count");
  Dataset d;
  d.feature_spec.rows = r.u32();
  d.feature_spec.cols = r.u32();
  d.feature_spec.use_partial_grid = r.u32() != 0;
  if (d.feature_spec.length() != f_len)
    r.fail("feature length does not match the image shape");
  d.grid_geometry.n_radius = r.u32();
  d.grid_geometry.n_depth = r.u32();
  d.grid_geometry.radius_width = r.f64();
  d.grid_geometry.depth_width = r.f64();
  d.photons_per_sample = r.u64();
  for (std::uint32_t k = 0; k < t_len; ++k)
    d.target_names.push_back(r.str());
  d.samples.reserve(count);
  for (std::uint64_t s = 0; s < count; ++s) {
    TrainingSample t;
    t.config_hash = r.u64();
    t.seed = r.u64();
    t.features = r.f64s(f_len);
    t.target = r.f64s(t_len);
    d.samples.push_back(std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof())
    r.fail("trailing bytes after dataset");
  return d;
}

void Dataset::write_file(const std::string &path) const {
  io::atomic_write(path, [this](std::ostream &out) { write(out); });
}

Dataset Dataset::read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ValidationError("cannot open dataset file: " + path);
  return read(in);
}

void Dataset::write_csv(std::ostream &out) const {
  out << "sample,config_hash,seed";
  for (const auto &n : target_names)
    out << ',' << n;
  for (std::size_t k = 0; k < feature_length(); ++k)
    out << ",f" << k;
  out << '\n' << std::setprecision(17);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    out << s << ',' << samples[s].config_hash << ',' << samples[s].seed;
    for (double v : samples[s].target)
      out << ',' << v;
    for (double v : samples[s].features)
      out << ',' << v;
    out << '\n';
  }
}

} // namespace polmc
