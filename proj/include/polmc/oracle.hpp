#pragma once

// Effective-medium TE reflection of a dilute half-space of spheres.

#include <complex>
#include <vector>

#include "polmc/mie.hpp"

namespace polmc {

struct SimConfig;

struct EffectiveMediumParams {
  double gamma = 0.0;   // 2 pi rho / k^3
  double theta_i = 0.0; // incidence angle, radians
  double k = 1.0;       // host wavenumber, 1/um
  MieCoefficients coeffs;

  double k_z_incident() const;
  void validate() const;
};

/// gamma = 2 pi rho / k^3 with k = 2 pi n_host / lambda.
double density_parameter(double number_density, double host_wavenumber);

EffectiveMediumParams make_effective_medium_params(const MediumSpec &medium, double wavelength,
                                                   double theta_i);

struct SPlusMinus {
  cdouble plus;
  cdouble minus;
};

/// S+ = [S(0) + S_m(pi - 2 theta_i)] / 2 and S- = S(0) - S_m(pi - 2 theta_i),
/// with S_m the order-m amplitude (m = 1 or 2).
SPlusMinus s_plus_minus(double theta_i, int order, const MieCoefficients &coeffs);

struct EffectiveConstants {
  cdouble mu_eff;
  cdouble eps_eff;
};

/// Rejects incidence above 89 degrees.
EffectiveConstants effective_constants(const EffectiveMediumParams &params);

/// r = (mu_eff k_z - k_z_eff) / (mu_eff k_z + k_z_eff) with
/// k_z_eff = k sqrt(eps mu - sin^2) on the branch Im >= 0 (decaying
/// transmitted wave; for Im = 0 the branch with Re >= 0).
cdouble te_reflection(const EffectiveMediumParams &params);

struct ReflectanceRow {
  double theta_deg = 0.0;
  double r_theory = 0.0;
  double r_sim = 0.0;
  double sim_stderr = 0.0;
};

/// Runs the Monte Carlo engine once per incidence angle and pairs the
/// coherent specular reflectance with the theory. Warns (via `warnings`) for
/// non-dilute media.
std::vector<ReflectanceRow> validate_reflectance(const SimConfig &base,
                                                 const std::vector<double> &angles_deg,
                                                 std::vector<std::string> *warnings = nullptr);

} // namespace polmc
