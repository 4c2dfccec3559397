#pragma once

// Lorenz-Mie scattering by a homogeneous sphere.
//
// Coefficients follow the Bohren & Huffman conventions: the incident field is
// decomposed parallel/perpendicular to the scattering plane and the far field
// is diag(S2, S1) applied to that pair. S3 = S4 = 0 for spheres.

#include <complex>
#include <vector>

#include "polmc/medium.hpp"

namespace polmc {

using cdouble = std::complex<double>;

struct MieCoefficients {
  double size_param = 0.0;
  cdouble rel_index{1.0, 0.0};
  std::vector<cdouble> a; // a[n-1] holds a_n
  std::vector<cdouble> b;

  int n_max() const { return static_cast<int>(a.size()); }
};

/// Wiscombe truncation ceil(x + 4 x^(1/3) + 2).
int wiscombe_terms(double size_param);

/// Mie series coefficients a_n, b_n for n = 1..n_max. The logarithmic
/// derivative of psi_n(m x) is obtained by downward recurrence started at
/// max(n_max, |m x|) + 15.
MieCoefficients mie_coefficients(double size_param, cdouble rel_index, int n_max);
MieCoefficients mie_coefficients(double size_param, cdouble rel_index);

struct Amplitudes {
  cdouble s1;
  cdouble s2;
};

Amplitudes amplitude_functions(double theta, const MieCoefficients &coeffs);

struct MuellerElements {
  double s11;
  double s12;
};

MuellerElements mueller_elements(double theta, const MieCoefficients &coeffs);

double extinction_efficiency(const MieCoefficients &coeffs);
double scattering_efficiency(const MieCoefficients &coeffs);

/// Tabulated, immutable scattering description shared by all photon workers.
///
/// The angular density for a photon with Stokes vector (I, Q, U) in its local
/// frame is
///   P(theta, phi) = [S11 I + S12 (Q cos 2phi + U sin 2phi)] / phase_norm
/// per steradian, with phase_norm = 2 pi int S11 sin(theta) dtheta. The phi
/// terms integrate to zero, so a single normalisation serves every incident
/// polarisation.
class MieTable {
public:
  static constexpr int kDefaultThetaPoints = 1801;

  /// Builds from amplitudes sampled on a uniform grid over [0, pi].
  /// n_theta must be odd (composite Simpson). `mu_s` sets the scattering
  /// coefficient the transport uses with this table.
  static MieTable from_amplitudes(std::vector<cdouble> s1, std::vector<cdouble> s2,
                                  double mu_s = 0.0);

  int size() const { return static_cast<int>(theta_.size()); }
  double theta_step() const { return step_; }
  const std::vector<double> &theta() const { return theta_; }
  const std::vector<cdouble> &s1() const { return s1_; }
  const std::vector<cdouble> &s2() const { return s2_; }
  const std::vector<double> &s11() const { return s11_; }
  const std::vector<double> &s12() const { return s12_; }

  double phase_norm() const { return phase_norm_; }
  double asymmetry() const { return g_; }
  double max_s11() const { return max_s11_; }

  double q_sca() const { return q_sca_; }
  double q_ext() const { return q_ext_; }
  double size_param() const { return coeffs_.size_param; }
  cdouble rel_index() const { return coeffs_.rel_index; }
  const MieCoefficients &coefficients() const { return coeffs_; }

  /// Scattering cross section (um^2) and scattering coefficient (1/um).
  double sigma_sca() const { return sigma_sca_; }
  double mu_s() const { return mu_s_; }

  /// Linear interpolation on the grid; theta in [0, pi].
  Amplitudes amplitudes_at(double theta) const;
  MuellerElements mueller_at(double theta) const;

  /// Angular density (per steradian) for a unit-intensity Stokes input.
  double density(double theta, double phi, double q, double u) const;

private:
  friend MieTable build_mie_table(const MediumSpec &, double, int);

  void finish();

  std::vector<double> theta_;
  std::vector<cdouble> s1_, s2_;
  std::vector<double> s11_, s12_;
  double step_ = 0.0;
  double phase_norm_ = 0.0;
  double g_ = 0.0;
  double max_s11_ = 0.0;
  double q_sca_ = 0.0;
  double q_ext_ = 0.0;
  double sigma_sca_ = 0.0;
  double mu_s_ = 0.0;
  MieCoefficients coeffs_;
};

/// Tabulates the medium's scatterer at the given vacuum wavelength (um).
/// Throws RuntimeError when the grid cannot resolve the angular oscillation
/// of the series (advising a larger n_theta).
MieTable build_mie_table(const MediumSpec &medium, double wavelength,
                         int n_theta = MieTable::kDefaultThetaPoints);

/// Size parameter 2 pi r n_host / lambda and relative index n_particle / n_host.
double size_parameter(const MediumSpec &medium, double wavelength);
cdouble relative_index(const MediumSpec &medium);

} // namespace polmc
