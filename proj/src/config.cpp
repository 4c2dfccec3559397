#include "polmc/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "polmc/error.hpp"

namespace polmc {
namespace {

using nlohmann::json;

template <typename T>
void take(const json &j, const char *key, T &dst) {
  if (j.contains(key))
    dst = j.at(key).get<T>();
}

void check_keys(const json &j, std::initializer_list<const char *> allowed, const char *where) {
  if (!j.is_object())
    throw ValidationError(std::string(where) + " must be a JSON object");
  for (const auto &[key, _] : j.items()) {
    bool ok = false;
    for (const char *a : allowed)
      ok = ok || key == a;
    if (!ok)
      throw ValidationError(std::string("unknown key \"") + key + "\" in " + where);
  }
}

void read_medium(const json &j, MediumSpec &m) {
  check_keys(j,
             {"particle_radius", "n_particle", "n_host", "number_density", "volume_fraction",
              "mu_a", "delta_n", "chi", "birefringence_axis", "thickness"},
             "medium");
  take(j, "particle_radius", m.particle_radius);
  take(j, "n_particle", m.n_particle);
  take(j, "n_host", m.n_host);
  take(j, "number_density", m.number_density);
  take(j, "mu_a", m.mu_a);
  take(j, "delta_n", m.delta_n);
  take(j, "chi", m.chi);
  take(j, "thickness", m.thickness);
  if (j.contains("volume_fraction")) {
    if (j.contains("number_density"))
      throw ValidationError("medium: give number_density or volume_fraction, not both");
    m.number_density = j.at("volume_fraction").get<double>() / m.particle_volume();
  }
  if (j.contains("birefringence_axis")) {
    const auto a = j.at("birefringence_axis").get<std::vector<double>>();
    if (a.size() != 2 && a.size() != 3)
      throw ValidationError("birefringence_axis must have 2 or 3 components");
    m.birefringence_axis = {a[0], a[1], a.size() == 3 ? a[2] : 0.0};
  }
}

void apply_json(const json &j, SimConfig &c) {
  check_keys(j,
             {"medium", "wavelength", "n_photons", "photon_offset", "seed", "source_polarization",
              "custom_jones", "incidence_angle", "detector", "variance_reduction", "n_workers",
              "n_theta", "max_steps", "coherent_channel"},
             "config");
  if (j.contains("medium"))
    read_medium(j.at("medium"), c.medium);
  take(j, "wavelength", c.wavelength);
  if (j.contains("n_photons")) {
    const auto v = j.at("n_photons").get<std::int64_t>();
    if (v < 0)
      throw ValidationError("n_photons must be >= 1");
    c.n_photons = static_cast<std::uint64_t>(v);
  }
  take(j, "photon_offset", c.photon_offset);
  take(j, "seed", c.seed);
  if (j.contains("source_polarization"))
    c.source_polarization = parse_polarization(j.at("source_polarization").get<std::string>());
  if (j.contains("custom_jones")) {
    const auto v = j.at("custom_jones").get<std::vector<std::vector<double>>>();
    if (v.size() != 2 || v[0].size() != 2 || v[1].size() != 2)
      throw ValidationError("custom_jones must be [[re, im], [re, im]]");
    c.custom_jones = {cdouble(v[0][0], v[0][1]), cdouble(v[1][0], v[1][1])};
  }
  take(j, "incidence_angle", c.incidence_angle);
  if (j.contains("detector")) {
    const json &d = j.at("detector");
    check_keys(d,
               {"radial_bins", "radial_width", "depth_bins", "depth_width", "solid_angle",
                "lateral_bins", "lateral_width"},
               "detector");
    take(d, "radial_bins", c.detector.geometry.n_radius);
    take(d, "radial_width", c.detector.geometry.radius_width);
    take(d, "depth_bins", c.detector.geometry.n_depth);
    take(d, "depth_width", c.detector.geometry.depth_width);
    take(d, "solid_angle", c.detector.solid_angle);
    take(d, "lateral_bins", c.detector.lateral_bins);
    take(d, "lateral_width", c.detector.lateral_width);
  }
  if (j.contains("variance_reduction")) {
    const json &v = j.at("variance_reduction");
    check_keys(v, {"roulette_threshold", "roulette_survival", "partial_photon"},
               "variance_reduction");
    take(v, "roulette_threshold", c.variance_reduction.roulette_threshold);
    take(v, "roulette_survival", c.variance_reduction.roulette_survival);
    take(v, "partial_photon", c.variance_reduction.partial_photon);
  }
  take(j, "n_workers", c.n_workers);
  take(j, "n_theta", c.n_theta);
  take(j, "max_steps", c.max_steps);
  take(j, "coherent_channel", c.coherent_channel);
}

json parse(const std::string &text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error &e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
}

} // namespace

SourcePolarization parse_polarization(const std::string &name) {
  if (name == "linear_x")
    return SourcePolarization::LinearX;
  if (name == "linear_45")
    return SourcePolarization::Linear45;
  if (name == "circular_right")
    return SourcePolarization::CircularRight;
  if (name == "circular_left")
    return SourcePolarization::CircularLeft;
  if (name == "custom")
    return SourcePolarization::Custom;
  throw ValidationError("unknown source_polarization: " + name);
}

std::string polarization_name(SourcePolarization p) {
  switch (p) {
  case SourcePolarization::LinearX: return "linear_x";
  case SourcePolarization::Linear45: return "linear_45";
  case SourcePolarization::CircularRight: return "circular_right";
  case SourcePolarization::CircularLeft: return "circular_left";
  case SourcePolarization::Custom: return "custom";
  }
  return "custom";
}

SimConfig sim_config_from_json(const std::string &text) {
  SimConfig c;
  try {
    apply_json(parse(text), c);
  } catch (const json::exception &e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

SimConfig sim_config_from_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return sim_config_from_json(buf.str());
}

void apply_sim_config_overrides(SimConfig &config, const std::string &overrides_json) {
  try {
    apply_json(parse(overrides_json), config);
  } catch (const json::exception &e) {
    throw ValidationError(std::string("config override: ") + e.what());
  }
}

std::string sim_config_to_json(const SimConfig &c) {
  const MediumSpec &m = c.medium;
  json j;
  j["medium"] = {{"particle_radius", m.particle_radius},
                 {"n_particle", m.n_particle},
                 {"n_host", m.n_host},
                 {"number_density", m.number_density},
                 {"mu_a", m.mu_a},
                 {"delta_n", m.delta_n},
                 {"chi", m.chi},
                 {"birefringence_axis",
                  {m.birefringence_axis.x, m.birefringence_axis.y, m.birefringence_axis.z}},
                 {"thickness", m.thickness}};
  j["wavelength"] = c.wavelength;
  j["n_photons"] = c.n_photons;
  j["photon_offset"] = c.photon_offset;
  j["seed"] = c.seed;
  j["source_polarization"] = polarization_name(c.source_polarization);
  j["custom_jones"] = {{c.custom_jones[0].real(), c.custom_jones[0].imag()},
                       {c.custom_jones[1].real(), c.custom_jones[1].imag()}};
  j["incidence_angle"] = c.incidence_angle;
  j["detector"] = {{"radial_bins", c.detector.geometry.n_radius},
                   {"radial_width", c.detector.geometry.radius_width},
                   {"depth_bins", c.detector.geometry.n_depth},
                   {"depth_width", c.detector.geometry.depth_width},
                   {"solid_angle", c.detector.solid_angle},
                   {"lateral_bins", c.detector.lateral_bins},
                   {"lateral_width", c.detector.lateral_width}};
  j["variance_reduction"] = {{"roulette_threshold", c.variance_reduction.roulette_threshold},
                             {"roulette_survival", c.variance_reduction.roulette_survival},
                             {"partial_photon", c.variance_reduction.partial_photon}};
  j["n_workers"] = c.n_workers;
  j["n_theta"] = c.n_theta;
  j["max_steps"] = c.max_steps;
  j["coherent_channel"] = c.coherent_channel;
  return j.dump(2);
}

std::uint64_t config_hash(const SimConfig &config) {
  // FNV-1a over the canonical JSON (worker count excluded: it cannot change results).
  SimConfig c = config;
  c.n_workers = 0;
  const std::string text = sim_config_to_json(c);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

} // namespace polmc
