#include "polmc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "polmc/engine.hpp"
#include "polmc/error.hpp"

namespace polmc {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMaxIncidence = 89.0 * kPi / 180.0;

} // namespace

double EffectiveMediumParams::k_z_incident() const { return k * std::cos(theta_i); }

void EffectiveMediumParams::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw ValidationError("effective medium: gamma must be >= 0");
  if (!(theta_i >= 0.0 && theta_i < kPi / 2.0))
    throw ValidationError("effective medium: theta_i must lie in [0, pi/2)");
  if (theta_i > kMaxIncidence)
    throw ValidationError("effective medium: incidence above 89 degrees diverges");
  if (!(k > 0.0))
    throw ValidationError("effective medium: k must be > 0");
  if (coeffs.n_max() < 1)
    throw ValidationError("effective medium: missing Mie coefficients");
}

double density_parameter(double number_density, double host_wavenumber) {
  return 2.0 * kPi * number_density / (host_wavenumber * host_wavenumber * host_wavenumber);
}

EffectiveMediumParams make_effective_medium_params(const MediumSpec &medium, double wavelength,
                                                   double theta_i) {
  EffectiveMediumParams p;
  p.k = 2.0 * kPi * medium.n_host / wavelength;
  p.gamma = density_parameter(medium.number_density, p.k);
  p.theta_i = theta_i;
  p.coeffs = mie_coefficients(size_parameter(medium, wavelength), relative_index(medium));
  return p;
}

SPlusMinus s_plus_minus(double theta_i, int order, const MieCoefficients &coeffs) {
  if (order != 1 && order != 2)
    throw ValidationError("s_plus_minus: order must be 1 or 2");
  if (!(theta_i >= 0.0 && theta_i < kPi / 2.0))
    throw ValidationError("s_plus_minus: theta_i must lie in [0, pi/2)");
  const cdouble forward = amplitude_functions(0.0, coeffs).s1;
  const Amplitudes back = amplitude_functions(kPi - 2.0 * theta_i, coeffs);
  const cdouble s_m = order == 1 ? back.s1 : back.s2;
  return {0.5 * (forward + s_m), forward - s_m};
}

EffectiveConstants effective_constants(const EffectiveMediumParams &params) {
  params.validate();
  const cdouble i(0.0, 1.0);
  const SPlusMinus s = s_plus_minus(params.theta_i, 1, params.coeffs);
  const double c = std::cos(params.theta_i);
  const double t = std::tan(params.theta_i);
  const cdouble mu = 1.0 + i * params.gamma * s.minus / (c * c);
  const cdouble eps = 1.0 + i * params.gamma * (2.0 * s.plus - s.minus * t * t);
  return {mu, eps};
}

cdouble te_reflection(const EffectiveMediumParams &params) {
  const EffectiveConstants ec = effective_constants(params);
  const double s = std::sin(params.theta_i);
  cdouble kz_eff = params.k * std::sqrt(ec.eps_eff * ec.mu_eff - s * s);
  if (kz_eff.imag() < 0.0 || (kz_eff.imag() == 0.0 && kz_eff.real() < 0.0))
    kz_eff = -kz_eff;
  const cdouble a = ec.mu_eff * params.k_z_incident();
  return (a - kz_eff) / (a + kz_eff);
}

std::vector<ReflectanceRow> validate_reflectance(const SimConfig &base,
                                                 const std::vector<double> &angles_deg,
                                                 std::vector<std::string> *warnings) {
  base.validate();
  if (warnings && base.medium.volume_fraction() > kDiluteVolumeFraction) {
    std::ostringstream w;
    w << "volume fraction " << base.medium.volume_fraction()
      << " is not dilute; the effective-medium reflection assumes low density";
    warnings->push_back(w.str());
  }

  const MieTable table = build_mie_table(base.medium, base.wavelength, base.n_theta);
  const double mu_t = table.mu_s() + base.medium.mu_a;

  std::vector<ReflectanceRow> rows;
  rows.reserve(angles_deg.size());
  for (double deg : angles_deg) {
    const double theta = deg * kPi / 180.0;
    if (!(theta >= 0.0 && theta <= kMaxIncidence))
      throw ValidationError("validate: incidence angles must lie in [0, 89] degrees");

    ReflectanceRow row;
    row.theta_deg = deg;
    const EffectiveMediumParams params =
        make_effective_medium_params(base.medium, base.wavelength, theta);
    row.r_theory = std::norm(te_reflection(params));

    SimConfig cfg = base;
    cfg.incidence_angle = theta;
    cfg.coherent_channel = true;
    cfg.variance_reduction.partial_photon = false;
    // The theory describes a half-space: make the slab deep enough that the
    // mean field is extinguished (exp(-12)) before reaching the far side.
    if (mu_t > 0.0)
      cfg.medium.thickness = std::max(cfg.medium.thickness, 12.0 * std::cos(theta) / mu_t);
    const SimResult result = run(cfg);
    const Estimate r = result.coherent_reflectance();
    row.r_sim = r.mean;
    row.sim_stderr = r.stderr_;
    rows.push_back(row);
  }
  return rows;
}

} // namespace polmc
