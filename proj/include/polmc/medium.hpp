#pragma once

#include "polmc/vec3.hpp"

namespace polmc {

/// Optical properties of the single-layer slab occupying 0 <= z <= thickness.
/// Lengths in micrometres.
struct MediumSpec {
  double particle_radius = 0.07;
  double n_particle = 1.2;
  double n_host = 1.0;
  double number_density = 0.0; // scatterers per um^3
  double mu_a = 0.0;           // absorption, 1/um
  double delta_n = 0.0;        // linear birefringence
  double chi = 0.0;            // optical activity, rad/um
  Vec3 birefringence_axis{1.0, 0.0, 0.0};
  double thickness = 200.0;

  double particle_volume() const;
  double volume_fraction() const { return number_density * particle_volume(); }

  /// Throws ValidationError listing every invalid field.
  void validate() const;
};

/// Volume fraction above which the independent-scattering approximation is
/// considered violated; the engine warns past this point.
inline constexpr double kDiluteVolumeFraction = 0.01;

} // namespace polmc
