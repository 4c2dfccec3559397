#include "polmc/medium.hpp"

#include <numbers>
#include <sstream>

#include "polmc/error.hpp"

namespace polmc {

double MediumSpec::particle_volume() const {
  return 4.0 / 3.0 * std::numbers::pi * particle_radius * particle_radius * particle_radius;
}

void MediumSpec::validate() const {
  std::ostringstream problems;
  auto check = [&](bool ok, const char *msg) {
    if (!ok)
      problems << "\n  - " << msg;
  };
  check(std::isfinite(particle_radius) && particle_radius > 0.0, "particle_radius must be > 0");
  check(std::isfinite(n_particle) && n_particle >= 1.0, "n_particle must be >= 1");
  check(std::isfinite(n_host) && n_host >= 1.0, "n_host must be >= 1");
  check(std::isfinite(number_density) && number_density >= 0.0, "number_density must be >= 0");
  check(std::isfinite(mu_a) && mu_a >= 0.0, "mu_a must be >= 0");
  check(std::isfinite(delta_n) && delta_n >= 0.0, "delta_n must be >= 0");
  check(std::isfinite(chi) && chi >= 0.0, "chi must be >= 0");
  check(std::isfinite(thickness) && thickness > 0.0, "thickness must be > 0");
  const double axis_norm = norm(birefringence_axis);
  check(std::isfinite(axis_norm) && std::abs(axis_norm - 1.0) < 1e-9 &&
            std::abs(birefringence_axis.z) < 1e-12,
        "birefringence_axis must be a unit vector in the slab plane");
  const auto msg = problems.str();
  if (!msg.empty())
    throw ValidationError("invalid medium:" + msg);
}

} // namespace polmc
