#pragma once

// Quad-precision Mie series, independent of the library: spherical Bessel
// j_n by power series, y_n by upward recurrence from closed forms, and the
// coefficient formulas written directly in terms of psi and xi.

#include <complex>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_complex.hpp>

namespace oracle {

using Real = boost::multiprecision::cpp_bin_float_quad;
using Complex = boost::multiprecision::cpp_complex_quad;

inline Complex sph_j(int n, const Complex &z) {
  Real dfact = 1;
  for (int k = 3; k <= 2 * n + 1; k += 2) dfact *= k;
  Complex zn = 1;
  for (int k = 0; k < n; ++k) zn *= z;
  const Complex w = -z * z / Real(2);
  Complex term = 1, sum = 1;
  for (int k = 1; k < 400; ++k) {
    term *= w / Real(k * (2 * n + 2 * k + 1));
    sum += term;
    if (abs(term) < Real("1e-40") * abs(sum)) break;
  }
  return zn / dfact * sum;
}

inline std::vector<Real> sph_y(int n_max, const Real &x) {
  std::vector<Real> y(n_max + 1);
  y[0] = -cos(x) / x;
  if (n_max >= 1) y[1] = -cos(x) / (x * x) - sin(x) / x;
  for (int n = 1; n < n_max; ++n) y[n + 1] = Real(2 * n + 1) / x * y[n] - y[n - 1];
  return y;
}

struct Coefficients {
  std::vector<Complex> a, b; // index 0 unused
  Real x;
};

inline Coefficients coefficients(double x_in, std::complex<double> m_in, int n_max) {
  const Real x = x_in;
  const Complex m(Real(m_in.real()), Real(m_in.imag()));
  const Complex mx = m * Complex(x);
  const auto y = sph_y(n_max, x);
  Coefficients c;
  c.x = x;
  c.a.assign(n_max + 1, Complex(0));
  c.b.assign(n_max + 1, Complex(0));
  const Complex i(Real(0), Real(1));
  Complex jx_prev = sph_j(0, Complex(x)), jm_prev = sph_j(0, mx);
  for (int n = 1; n <= n_max; ++n) {
    const Complex jx = sph_j(n, Complex(x)), jm = sph_j(n, mx);
    const Complex psi_x = Complex(x) * jx;
    const Complex dpsi_x = Complex(x) * jx_prev - Complex(Real(n)) * jx;
    const Complex psi_m = mx * jm;
    const Complex dpsi_m = mx * jm_prev - Complex(Real(n)) * jm;
    const Complex h = jx + i * Complex(y[n]);
    const Complex h_prev = jx_prev + i * Complex(y[n - 1]);
    const Complex xi = Complex(x) * h;
    const Complex dxi = Complex(x) * h_prev - Complex(Real(n)) * h;
    c.a[n] = (m * psi_m * dpsi_x - psi_x * dpsi_m) / (m * psi_m * dxi - xi * dpsi_m);
    c.b[n] = (psi_m * dpsi_x - m * psi_x * dpsi_m) / (psi_m * dxi - m * xi * dpsi_m);
    jx_prev = jx;
    jm_prev = jm;
  }
  return c;
}

struct Amplitudes {
  Complex s1, s2;
};

inline Amplitudes amplitudes(const Coefficients &c, double theta) {
  const Real mu = cos(Real(theta));
  Real pi_prev = 0, pi_n = 1;
  Amplitudes s{Complex(0), Complex(0)};
  for (std::size_t n = 1; n < c.a.size(); ++n) {
    const Real tau = Real(n) * mu * pi_n - Real(n + 1) * pi_prev;
    const Real f = Real(2 * n + 1) / Real(n * (n + 1));
    s.s1 += Complex(f) * (c.a[n] * Complex(pi_n) + c.b[n] * Complex(tau));
    s.s2 += Complex(f) * (c.a[n] * Complex(tau) + c.b[n] * Complex(pi_n));
    const Real pi_next = (Real(2 * n + 1) * mu * pi_n - Real(n + 1) * pi_prev) / Real(n);
    pi_prev = pi_n;
    pi_n = pi_next;
  }
  return s;
}

inline Real q_ext(const Coefficients &c) {
  Real s = 0;
  for (std::size_t n = 1; n < c.a.size(); ++n) s += Real(2 * n + 1) * real(c.a[n] + c.b[n]);
  return 2 * s / (c.x * c.x);
}

inline Real q_sca(const Coefficients &c) {
  Real s = 0;
  for (std::size_t n = 1; n < c.a.size(); ++n)
    s += Real(2 * n + 1) * (norm(c.a[n]) + norm(c.b[n]));
  return 2 * s / (c.x * c.x);
}

/// Asymmetry parameter from the coefficient series.
inline Real asymmetry(const Coefficients &c) {
  Real s = 0;
  const std::size_t N = c.a.size() - 1;
  for (std::size_t n = 1; n <= N; ++n) {
    if (n < N)
      s += Real(n * (n + 2)) / Real(n + 1) *
           real(c.a[n] * conj(c.a[n + 1]) + c.b[n] * conj(c.b[n + 1]));
    s += Real(2 * n + 1) / Real(n * (n + 1)) * real(c.a[n] * conj(c.b[n]));
  }
  return 4 * s / (c.x * c.x * q_sca(c));
}

inline std::complex<double> to_double(const Complex &z) {
  return {static_cast<double>(real(z)), static_cast<double>(imag(z))};
}

} // namespace oracle
