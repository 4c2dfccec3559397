#include "polmc/mie.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "polmc/error.hpp"

namespace polmc {
namespace {

constexpr double kPi = std::numbers::pi;

// Composite Simpson on a uniform grid with an even number of intervals.
double simpson(const std::vector<double> &f, double h) {
  const std::size_t n = f.size();
  double sum = f.front() + f.back();
  for (std::size_t i = 1; i + 1 < n; ++i)
    sum += (i % 2 == 1 ? 4.0 : 2.0) * f[i];
  return sum * h / 3.0;
}

void check_theta(double theta) {
  if (!(theta >= 0.0 && theta <= kPi))
    throw ValidationError("scattering angle outside [0, pi]: " + std::to_string(theta));
}

} // namespace

int wiscombe_terms(double size_param) {
  return static_cast<int>(std::ceil(size_param + 4.0 * std::cbrt(size_param) + 2.0));
}

MieCoefficients mie_coefficients(double size_param, cdouble rel_index) {
  return mie_coefficients(size_param, rel_index, wiscombe_terms(size_param));
}

MieCoefficients mie_coefficients(double x, cdouble m, int n_max) {
  if (!std::isfinite(x) || !std::isfinite(m.real()) || !std::isfinite(m.imag()))
    throw ValidationError("mie_coefficients: non-finite input");
  if (x <= 0.0)
    throw ValidationError("mie_coefficients: size parameter must be > 0");
  if (n_max < 1)
    throw ValidationError("mie_coefficients: n_max must be >= 1");
  if (n_max < wiscombe_terms(x))
    throw ValidationError("mie_coefficients: n_max below the Wiscombe cutoff " +
                          std::to_string(wiscombe_terms(x)));

  const cdouble mx = m * x;
  const int n_start = std::max(n_max, static_cast<int>(std::ceil(std::abs(mx)))) + 15;

  // Logarithmic derivatives D_n(mx) and D_n(x), both by downward recurrence.
  std::vector<cdouble> d_mx(n_start + 1, cdouble(0.0, 0.0));
  std::vector<double> d_x(n_start + 1, 0.0);
  for (int n = n_start; n >= 1; --n) {
    const double nn = n;
    d_mx[n - 1] = nn / mx - 1.0 / (d_mx[n] + nn / mx);
    d_x[n - 1] = nn / x - 1.0 / (d_x[n] + nn / x);
  }

  MieCoefficients out;
  out.size_param = x;
  out.rel_index = m;
  out.a.resize(n_max);
  out.b.resize(n_max);

  // psi_n = psi_{n-1} / (D_n(x) + n/x) is stable in both regimes; chi_n grows
  // and is safe to recur upward.
  double psi_prev = std::sin(x);
  double chi_prev2 = -std::sin(x); // chi_{-1}
  double chi_prev = std::cos(x);   // chi_0
  for (int n = 1; n <= n_max; ++n) {
    const double nn = n;
    const double psi = psi_prev / (d_x[n] + nn / x);
    const double chi = (2.0 * nn - 1.0) / x * chi_prev - chi_prev2;
    const cdouble xi(psi, -chi);
    const cdouble xi_prev(psi_prev, -chi_prev);

    const cdouble ta = d_mx[n] / m + nn / x;
    const cdouble tb = d_mx[n] * m + nn / x;
    out.a[n - 1] = (ta * psi - psi_prev) / (ta * xi - xi_prev);
    out.b[n - 1] = (tb * psi - psi_prev) / (tb * xi - xi_prev);

    psi_prev = psi;
    chi_prev2 = chi_prev;
    chi_prev = chi;
  }
  return out;
}

Amplitudes amplitude_functions(double theta, const MieCoefficients &c) {
  check_theta(theta);
  const double mu = std::cos(theta);
  double pi_prev = 0.0; // pi_0
  double pi_n = 1.0;    // pi_1
  cdouble s1, s2;
  for (int n = 1; n <= c.n_max(); ++n) {
    const double nn = n;
    const double tau_n = nn * mu * pi_n - (nn + 1.0) * pi_prev;
    const double f = (2.0 * nn + 1.0) / (nn * (nn + 1.0));
    s1 += f * (c.a[n - 1] * pi_n + c.b[n - 1] * tau_n);
    s2 += f * (c.a[n - 1] * tau_n + c.b[n - 1] * pi_n);
    const double pi_next = ((2.0 * nn + 1.0) * mu * pi_n - (nn + 1.0) * pi_prev) / nn;
    pi_prev = pi_n;
    pi_n = pi_next;
  }
  return {s1, s2};
}

MuellerElements mueller_elements(double theta, const MieCoefficients &c) {
  const auto [s1, s2] = amplitude_functions(theta, c);
  const double i1 = std::norm(s1);
  const double i2 = std::norm(s2);
  return {(i2 + i1) / 2.0, (i2 - i1) / 2.0};
}

double extinction_efficiency(const MieCoefficients &c) {
  double sum = 0.0;
  for (int n = 1; n <= c.n_max(); ++n)
    sum += (2.0 * n + 1.0) * (c.a[n - 1] + c.b[n - 1]).real();
  return 2.0 / (c.size_param * c.size_param) * sum;
}

double scattering_efficiency(const MieCoefficients &c) {
  double sum = 0.0;
  for (int n = 1; n <= c.n_max(); ++n)
    sum += (2.0 * n + 1.0) * (std::norm(c.a[n - 1]) + std::norm(c.b[n - 1]));
  return 2.0 / (c.size_param * c.size_param) * sum;
}

double size_parameter(const MediumSpec &medium, double wavelength) {
  return 2.0 * kPi * medium.particle_radius * medium.n_host / wavelength;
}

cdouble relative_index(const MediumSpec &medium) {
  return {medium.n_particle / medium.n_host, 0.0};
}

MieTable MieTable::from_amplitudes(std::vector<cdouble> s1, std::vector<cdouble> s2,
                                   double mu_s) {
  if (s1.size() != s2.size())
    throw ValidationError("MieTable: s1 and s2 sizes differ");
  if (s1.size() < 3 || s1.size() % 2 == 0)
    throw ValidationError("MieTable: grid size must be odd and >= 3");
  MieTable t;
  t.s1_ = std::move(s1);
  t.s2_ = std::move(s2);
  t.mu_s_ = mu_s;
  t.finish();
  return t;
}

void MieTable::finish() {
  const int n = static_cast<int>(s1_.size());
  step_ = kPi / (n - 1);
  theta_.resize(n);
  s11_.resize(n);
  s12_.resize(n);
  std::vector<double> w_norm(n), w_cos(n);
  for (int i = 0; i < n; ++i) {
    theta_[i] = i == n - 1 ? kPi : i * step_;
    const double i1 = std::norm(s1_[i]);
    const double i2 = std::norm(s2_[i]);
    s11_[i] = (i2 + i1) / 2.0;
    s12_[i] = (i2 - i1) / 2.0;
    const double st = std::sin(theta_[i]);
    w_norm[i] = s11_[i] * st;
    w_cos[i] = s11_[i] * st * std::cos(theta_[i]);
  }
  const double integral = simpson(w_norm, step_);
  if (!(integral > 0.0))
    throw RuntimeError("MieTable: phase function integrates to zero");
  phase_norm_ = 2.0 * kPi * integral;
  g_ = simpson(w_cos, step_) / integral;
  max_s11_ = *std::max_element(s11_.begin(), s11_.end());
}

MieTable build_mie_table(const MediumSpec &medium, double wavelength, int n_theta) {
  if (!(wavelength > 0.0) || !std::isfinite(wavelength))
    throw ValidationError("build_mie_table: wavelength must be > 0");
  if (n_theta < MieTable::kDefaultThetaPoints)
    throw ValidationError("build_mie_table: n_theta must be >= 1801");
  if (n_theta % 2 == 0)
    throw ValidationError("build_mie_table: n_theta must be odd");

  const double x = size_parameter(medium, wavelength);
  MieCoefficients coeffs = mie_coefficients(x, relative_index(medium));

  // The highest angular harmonic in S11 is of degree 2 n_max; Simpson needs
  // several points per oscillation to stay well below 1e-6.
  const double h = kPi / (n_theta - 1);
  if (h * 2.0 * coeffs.n_max() > 0.1) {
    std::ostringstream msg;
    msg << "build_mie_table: " << n_theta << " angular points cannot resolve size parameter "
        << x << "; use n_theta >= " << static_cast<int>(std::ceil(kPi * 20.0 * coeffs.n_max())) + 1;
    throw RuntimeError(msg.str());
  }

  std::vector<cdouble> s1(n_theta), s2(n_theta);
  for (int i = 0; i < n_theta; ++i) {
    const double theta = i == n_theta - 1 ? kPi : i * h;
    const auto amp = amplitude_functions(theta, coeffs);
    s1[i] = amp.s1;
    s2[i] = amp.s2;
  }

  MieTable t = MieTable::from_amplitudes(std::move(s1), std::move(s2));
  t.q_ext_ = extinction_efficiency(coeffs);
  t.q_sca_ = scattering_efficiency(coeffs);
  t.sigma_sca_ = t.q_sca_ * kPi * medium.particle_radius * medium.particle_radius;
  t.mu_s_ = medium.number_density * t.sigma_sca_;
  t.coeffs_ = std::move(coeffs);
  return t;
}

Amplitudes MieTable::amplitudes_at(double theta) const {
  check_theta(theta);
  const double pos = theta / step_;
  const int n = size();
  const int i = std::min(static_cast<int>(pos), n - 2);
  const double f = pos - i;
  return {s1_[i] * (1.0 - f) + s1_[i + 1] * f, s2_[i] * (1.0 - f) + s2_[i + 1] * f};
}

MuellerElements MieTable::mueller_at(double theta) const {
  const double pos = theta / step_;
  const int i = std::clamp(static_cast<int>(pos), 0, size() - 2);
  const double f = pos - i;
  return {s11_[i] * (1.0 - f) + s11_[i + 1] * f, s12_[i] * (1.0 - f) + s12_[i + 1] * f};
}

double MieTable::density(double theta, double phi, double q, double u) const {
  const auto [s11, s12] = mueller_at(theta);
  return (s11 + s12 * (q * std::cos(2.0 * phi) + u * std::sin(2.0 * phi))) / phase_norm_;
}

} // namespace polmc
