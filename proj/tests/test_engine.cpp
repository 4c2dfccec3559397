#include <doctest.h>

#include <cmath>
#include <string>

#include "polmc/engine.hpp"
#include "polmc/error.hpp"

using namespace polmc;

namespace {

SimConfig base_config(std::uint64_t photons, double f = 0.01) {
  SimConfig c;
  c.medium.particle_radius = 0.07;
  c.medium.n_particle = 1.5;
  c.medium.number_density = f / c.medium.particle_volume();
  c.medium.mu_a = 1e-4;
  c.n_photons = photons;
  c.n_workers = 1;
  return c;
}

} // namespace

TEST_SUITE("engine") {

TEST_CASE("identical seeds give identical grids") {
  const auto c = base_config(3000);
  const auto a = run(c);
  const auto b = run(c);
  CHECK(a.grid() == b.grid());
  CHECK(a.partial_grid() == b.partial_grid());
  auto d = c;
  d.seed = 43;
  CHECK_FALSE(run(d).grid() == a.grid());
}

TEST_CASE("worker count does not change results") {
  auto c = base_config(3000);
  const auto one = run(c);
  for (unsigned w : {4u, 16u}) {
    c.n_workers = w;
    const auto many = run(c);
    CHECK(one.grid() == many.grid());
    CHECK(one.partial_grid() == many.partial_grid());
    CHECK(one.ledger().absorbed == many.ledger().absorbed);
    CHECK(one.diagnostics.scatter_events == many.diagnostics.scatter_events);
  }
}

TEST_CASE("split runs merge to the full run") {
  auto c = base_config(100'000);
  const auto full = run(c);
  c.n_photons = 50'000;
  const auto first = run(c);
  c.photon_offset = 50'000;
  const auto second = run(c);
  const auto merged = merge({first, second});
  CHECK(merged.diagnostics.photons == 100'000);
  CHECK(merged.diagnostics.scatter_events == full.diagnostics.scatter_events);
  CHECK(merged.ledger().detected_top == doctest::Approx(full.ledger().detected_top).epsilon(1e-12));
  for (std::size_t k = 0; k < full.grid().bins().size(); ++k)
    CHECK(merged.grid().bins()[k].count == full.grid().bins()[k].count);

  CHECK(merged.ledger().absorbed == doctest::Approx(full.ledger().absorbed).epsilon(1e-12));
  CHECK(merged.partial_signal().mean == doctest::Approx(full.partial_signal().mean).epsilon(1e-12));

  const auto ab = merge({first, second}), ba = merge({second, first});
  CHECK(ab.grid() == ba.grid());
  const SimResult empty(first.grid().geometry());
  const auto same = merge({first, empty});
  CHECK(same.grid() == first.grid());
  CHECK(same.diagnostics.photons == first.diagnostics.photons);

  auto other = base_config(10);
  other.detector.geometry.n_depth = 7;
  CHECK_THROWS_AS(merge({first, run(other)}), ValidationError);
  CHECK_THROWS_AS(merge({}), ValidationError);
}

TEST_CASE("energy is conserved") {
  auto c = base_config(2000, 0.05);
  SUBCASE("default") {}
  SUBCASE("absorbing") { c.medium.mu_a = 0.01; }
  SUBCASE("birefringent and chiral") {
    c.medium.delta_n = 1e-3;
    c.medium.chi = 0.01;
    c.medium.birefringence_axis = {0.6, 0.8, 0.0};
  }
  SUBCASE("oblique circular") {
    c.incidence_angle = 0.5;
    c.source_polarization = SourcePolarization::CircularRight;
  }
  SUBCASE("aggressive roulette") {
    c.variance_reduction.roulette_threshold = 0.5;
    c.variance_reduction.roulette_survival = 0.3;
  }
  const auto r = run(c);
  CHECK(r.ledger().launched == 2000.0);
  CHECK(r.ledger().relative_imbalance() < 1e-12);
  const auto &d = r.diagnostics;
  CHECK(d.exit_top + d.exit_bottom + d.absorbed + d.roulette_killed + d.step_capped == 2000);
}

TEST_CASE("ledger balances at 1e5 photons without absorption") {
  auto c = base_config(100'000, 0.05);
  c.medium.mu_a = 0.0;
  const auto r = run(c);
  CHECK(r.ledger().absorbed == 0.0);
  CHECK(r.ledger().relative_imbalance() < 1e-9);
}

TEST_CASE("channels of simulated grids") {
  const auto r = run(base_config(5000, 0.05));
  for (const auto &b : r.grid().bins()) {
    const auto ch = bin_channels(b);
    if (b.i > 0.0)
      CHECK(ch.p_xx + ch.p_xy == doctest::Approx(2.0 * b.w).epsilon(1e-12));
  }
  CHECK(r.grid().total_weight() == doctest::Approx(r.ledger().detected_top).epsilon(1e-10));
}

TEST_CASE("local estimate agrees with the analog cone") {
  const auto r = run(base_config(1'000'000, 0.05));
  const auto p = r.partial_signal();
  const auto a = r.analog_signal();
  REQUIRE(a.stderr_ > 0.0);
  const double z = std::abs(p.mean - a.mean) / std::hypot(p.stderr_, a.stderr_);
  CHECK(z < 3.0);
  CHECK(p.stderr_ < a.stderr_);
}

TEST_CASE("standard error falls as one over root N") {
  const auto small = run(base_config(5000)).partial_signal();
  const auto large = run(base_config(20000)).partial_signal();
  const double ratio = small.stderr_ / large.stderr_;
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.5);
}

TEST_CASE("lateral exits are mirror symmetric for x polarisation") {
  auto c = base_config(40'000, 0.05);
  c.detector.lateral_bins = 20;
  c.detector.lateral_width = 10.0;
  const auto r = run(c);
  const auto &lat = r.tally.lateral;
  double left = 0.0, right = 0.0, below = 0.0, above = 0.0;
  for (std::uint32_t iy = 0; iy < lat.n; ++iy)
    for (std::uint32_t ix = 0; ix < lat.n; ++ix) {
      (ix < lat.n / 2 ? left : right) += lat.weight(ix, iy);
      (iy < lat.n / 2 ? below : above) += lat.weight(ix, iy);
    }
  // Counting noise on roughly 1e4 exits.
  CHECK(std::abs(left - right) / (left + right) < 0.05);
  CHECK(std::abs(below - above) / (below + above) < 0.05);
}

TEST_CASE("non-dilute media warn") {
  CHECK(run(base_config(100, 0.005)).diagnostics.warnings.empty());
  CHECK(run(base_config(100, 0.05)).diagnostics.warnings.size() == 1);
}

TEST_CASE("config validation lists every problem") {
  auto c = base_config(0);
  c.wavelength = -1.0;
  c.n_theta = 1800;
  try {
    c.validate();
    FAIL("expected ValidationError");
  } catch (const ValidationError &e) {
    const std::string msg = e.what();
    CHECK(msg.find("n_photons") != std::string::npos);
    CHECK(msg.find("wavelength") != std::string::npos);
    CHECK(msg.find("n_theta") != std::string::npos);
  }
  CHECK_THROWS_AS(run(c), ValidationError);
}

TEST_CASE("source polarisations") {
  SimConfig c;
  auto s = stokes_from_jones(c.source_jones());
  CHECK(s.q == doctest::Approx(1.0));
  c.source_polarization = SourcePolarization::Linear45;
  CHECK(stokes_from_jones(c.source_jones()).u == doctest::Approx(1.0));
  c.source_polarization = SourcePolarization::CircularRight;
  CHECK(std::abs(stokes_from_jones(c.source_jones()).v) == doctest::Approx(1.0));
  c.source_polarization = SourcePolarization::Custom;
  c.custom_jones = {cdouble(3.0), cdouble(0.0, 4.0)};
  s = stokes_from_jones(c.source_jones());
  CHECK(s.i == doctest::Approx(1.0));
  c.custom_jones = {cdouble(0.0), cdouble(0.0)};
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("summary json") {
  const auto r = run(base_config(500));
  const auto j = r.summary_json();
  for (const char *key : {"ledger", "diagnostics", "partial_signal", "analog_signal", "mu_s"})
    CHECK(j.find(key) != std::string::npos);
}

} // TEST_SUITE
