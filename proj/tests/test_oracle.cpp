#include <doctest.h>

#include <cmath>

#include "oracles/mie_reference.hpp"
#include "polmc/engine.hpp"
#include "polmc/error.hpp"
#include "polmc/oracle.hpp"

using namespace polmc;

namespace {

constexpr double kPi = 3.14159265358979323846;

MediumSpec dilute_medium(double f) {
  MediumSpec m;
  m.particle_radius = 0.07;
  m.n_particle = 1.2;
  m.number_density = f / m.particle_volume();
  return m;
}

} // namespace

TEST_SUITE("oracle") {

TEST_CASE("density parameter") {
  CHECK(density_parameter(0.0, 10.0) == 0.0);
  CHECK(density_parameter(3.0, 2.0) == doctest::Approx(2 * kPi * 3.0 / 8.0).epsilon(1e-15));
  const auto p = make_effective_medium_params(dilute_medium(1e-3), 0.632, 0.3);
  CHECK(p.k == doctest::Approx(2 * kPi / 0.632));
  CHECK(p.gamma == doctest::Approx(2 * kPi * dilute_medium(1e-3).number_density / std::pow(p.k, 3)));
  CHECK(p.k_z_incident() == doctest::Approx(p.k * std::cos(0.3)));
}

TEST_CASE("S plus and S minus") {
  const auto c = mie_coefficients(0.696, cdouble(1.2, 0.0));
  const double th = 0.4;
  const auto f = amplitude_functions(0.0, c).s1;
  const auto b = amplitude_functions(kPi - 2 * th, c);
  const auto s1 = s_plus_minus(th, 1, c);
  CHECK(std::abs(s1.plus - 0.5 * (f + b.s1)) < 1e-14);
  CHECK(std::abs(s1.minus - (f - b.s1)) < 1e-14);
  const auto s2 = s_plus_minus(th, 2, c);
  CHECK(std::abs(s2.minus - (f - b.s2)) < 1e-14);
  CHECK_THROWS_AS(s_plus_minus(th, 3, c), ValidationError);
  CHECK_THROWS_AS(s_plus_minus(kPi / 2, 1, c), ValidationError);
}

TEST_CASE("S plus and S minus identities and extended precision") {
  const auto c = mie_coefficients(0.696, cdouble(1.2, 0.0));
  const auto f = amplitude_functions(0.0, c).s1;
  for (double th : {0.0, 0.2, 0.7, 1.2}) {
    const auto s = s_plus_minus(th, 1, c);
    CHECK(std::abs(s.plus + 0.5 * s.minus - f) < 1e-14);
  }
  const auto s0 = s_plus_minus(0.0, 1, c);
  const auto back = amplitude_functions(kPi, c).s1;
  CHECK(std::abs(s0.plus - 0.5 * (f + back)) < 1e-15);

  const auto ref = oracle::coefficients(0.696, 1.2, 12);
  const double th = 30.0 * kPi / 180.0;
  const auto rf = oracle::amplitudes(ref, 0.0).s1;
  const auto rb = oracle::amplitudes(ref, kPi - 2 * th).s1;
  const auto plus = oracle::to_double((rf + rb) / 2);
  const auto minus = oracle::to_double(rf - rb);
  const auto s = s_plus_minus(th, 1, c);
  CHECK(std::abs(s.plus - plus) < 1e-10 * std::abs(plus));
  CHECK(std::abs(s.minus - minus) < 1e-10 * std::abs(minus));
}

TEST_CASE("effective constants at normal incidence") {
  auto p = make_effective_medium_params(dilute_medium(1e-3), 0.632, 0.0);
  p.gamma = 1e-6;
  const auto s = s_plus_minus(0.0, 1, p.coeffs);
  const auto ec = effective_constants(p);
  const cdouble i(0.0, 1.0);
  CHECK(std::abs(ec.eps_eff - (1.0 + 2.0 * i * p.gamma * s.plus)) < 1e-15);
  // Dilute effective index squared: 1 + 2 i gamma S(0) + O(gamma^2).
  const auto s0 = amplitude_functions(0.0, p.coeffs).s1;
  const double bound = 10.0 * p.gamma * p.gamma * std::max(1.0, std::norm(s0));
  CHECK(std::abs(ec.eps_eff * ec.mu_eff - (1.0 + 2.0 * i * p.gamma * s0)) < bound);
}

TEST_CASE("empty medium reflects nothing") {
  auto p = make_effective_medium_params(dilute_medium(1e-3), 0.632, 0.2);
  p.gamma = 0.0;
  const auto ec = effective_constants(p);
  CHECK(ec.mu_eff == cdouble(1.0));
  CHECK(ec.eps_eff == cdouble(1.0));
  CHECK(std::abs(te_reflection(p)) < 1e-15);
}

TEST_CASE("dilute limit reduces to single backscatter") {
  // First order in gamma: r = -i gamma S1(pi - 2 theta) / (2 cos^2 theta).
  const double x = 0.696;
  const auto ref = oracle::coefficients(x, 1.2, 12);
  for (double deg : {0.0, 20.0, 40.0, 60.0}) {
    const double th = deg * kPi / 180.0;
    auto p = make_effective_medium_params(dilute_medium(1e-3), 0.632, th);
    p.gamma = 1e-7;
    const auto s = oracle::to_double(oracle::amplitudes(ref, kPi - 2 * th).s1);
    const double c = std::cos(th);
    const double expected = std::norm(p.gamma * s / (2 * c * c));
    CHECK(std::norm(te_reflection(p)) == doctest::Approx(expected).epsilon(1e-5));
  }
}

TEST_CASE("reflection is physical") {
  for (double f : {1e-4, 1e-3, 1e-2, 0.1})
    for (int deg = 0; deg <= 89; ++deg) {
      const auto p = make_effective_medium_params(dilute_medium(f), 0.632, deg * kPi / 180.0);
      const auto r = te_reflection(p);
      CHECK(std::isfinite(std::norm(r)));
      CHECK(std::norm(r) < 1.0);
    }
}

TEST_CASE("parameter validation") {
  auto p = make_effective_medium_params(dilute_medium(1e-3), 0.632, 0.0);
  p.theta_i = 89.5 * kPi / 180.0;
  CHECK_THROWS_AS(effective_constants(p), ValidationError);
  p.theta_i = 0.1;
  p.gamma = -1.0;
  CHECK_THROWS_AS(effective_constants(p), ValidationError);
  p.gamma = 1e-3;
  p.coeffs = MieCoefficients{};
  CHECK_THROWS_AS(effective_constants(p), ValidationError);
}

TEST_CASE("validation run pairs theory with simulation") {
  SimConfig cfg;
  cfg.medium = dilute_medium(1e-3);
  cfg.n_photons = 2000;
  cfg.seed = 3;
  std::vector<std::string> warnings;
  const auto rows = validate_reflectance(cfg, {0.0, 30.0}, &warnings);
  REQUIRE(rows.size() == 2);
  CHECK(warnings.empty());
  CHECK(rows[1].theta_deg == 30.0);
  for (const auto &r : rows) {
    CHECK(r.r_theory > 0.0);
    CHECK(r.r_sim > 0.0);
    CHECK(r.sim_stderr >= 0.0);
  }
  CHECK_THROWS_AS(validate_reflectance(cfg, {95.0}), ValidationError);

  cfg.medium = dilute_medium(0.05);
  validate_reflectance(cfg, {0.0}, &warnings);
  CHECK(warnings.size() == 1);
}

TEST_CASE("particle-free medium gives zero in both columns") {
  SimConfig cfg;
  cfg.medium.number_density = 0.0;
  cfg.n_photons = 100;
  const auto rows = validate_reflectance(cfg, {0.0, 45.0});
  for (const auto &r : rows) {
    CHECK(r.r_theory == 0.0);
    CHECK(r.r_sim == 0.0);
  }
}

TEST_CASE("simulated reflectance error scales as one over root N") {
  SimConfig cfg;
  cfg.medium = dilute_medium(1e-3);
  cfg.medium.thickness = 50.0;
  cfg.n_photons = 5000;
  const double small = validate_reflectance(cfg, {0.0})[0].sim_stderr;
  cfg.n_photons = 20000;
  const double large = validate_reflectance(cfg, {0.0})[0].sim_stderr;
  CHECK(small / large == doctest::Approx(2.0).epsilon(0.2));
}

} // TEST_SUITE
