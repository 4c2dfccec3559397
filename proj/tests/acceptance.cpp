// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "oracles/mie_reference.hpp"
#include "polmc/config.hpp"
#include "polmc/dataset.hpp"
#include "polmc/detection.hpp"
#include "polmc/engine.hpp"
#include "polmc/inverse.hpp"
#include "polmc/mie.hpp"
#include "polmc/oracle.hpp"
#include "polmc/pipeline.hpp"
#include "polmc/rng.hpp"
#include "polmc/transport.hpp"

using namespace polmc;

namespace {

constexpr double kPi = 3.14159265358979323846;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string &what) {
    if (!ok) {
      pass = false;
      note("failed: " + what);
    }
  }
  void note(const std::string &s) {
    if (!detail.empty()) detail += "; ";
    detail += s;
  }
};

std::string fmt(const char *f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char *f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char *f, double a, double b, double c) {
  char buf[192];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

MediumSpec sphere(double x, double m) {
  MediumSpec s;
  s.n_particle = m;
  s.particle_radius = x * 0.632 / (2.0 * kPi);
  s.number_density = 1.0;
  return s;
}

void set_volume_fraction(MediumSpec &m, double f) { m.number_density = f / m.particle_volume(); }

// ---- 1: coherent reflectance against effective-medium theory ----
Outcome reflectance() {
  Outcome o;
  SimConfig cfg;
  cfg.medium.particle_radius = 0.07;
  cfg.medium.n_particle = 1.2;
  set_volume_fraction(cfg.medium, 1e-3);
  cfg.wavelength = 0.632;
  cfg.n_photons = 1'000'000;
  cfg.seed = 7;
  const auto t0 = Clock::now();
  const auto rows = validate_reflectance(cfg, {0.0});
  const double dt = seconds_since(t0);
  const auto &r = rows.at(0);
  const double tol = std::max(0.1 * r.r_theory, 3.0 * r.sim_stderr);
  o.note(fmt("R_theory %.4e R_sim %.4e stderr %.2e", r.r_theory, r.r_sim, r.sim_stderr));
  o.require(std::abs(r.r_sim - r.r_theory) <= tol, "|R_sim - R_theory| <= max(10%, 3 sigma)");
  o.note(fmt("%.1f s", dt));
  o.require(dt <= 300.0, "runtime <= 300 s");
  return o;
}

// ---- 2: energy ledger over a 3x3 design ----
Outcome energy() {
  Outcome o;
  struct Case {
    double mu_a, f, thickness;
  };
  // Each absorption level meets every scattering level and every thickness once.
  const Case cases[] = {{0.0, 0.01, 1000.0}, {0.0, 0.1, 200.0},   {0.0, 0.3, 50.0},
                        {1e-3, 0.01, 200.0}, {1e-3, 0.1, 50.0},   {1e-3, 0.3, 500.0},
                        {1e-2, 0.01, 50.0},  {1e-2, 0.1, 1000.0}, {1e-2, 0.3, 200.0}};
  double worst = 0.0;
  for (const auto &c : cases) {
    SimConfig cfg;
    cfg.medium.mu_a = c.mu_a;
    cfg.medium.thickness = c.thickness;
    set_volume_fraction(cfg.medium, c.f);
    cfg.n_photons = 100'000;
    cfg.seed = 11;
    const auto res = run(cfg);
    const double imb = res.ledger().relative_imbalance();
    worst = std::max(worst, imb);
    o.require(imb < 1e-9, fmt("mu_a %g mu_s %.3g thickness %g", c.mu_a, res.mu_s, c.thickness));
  }
  o.note(fmt("9 configs, worst imbalance %.2e", worst));
  return o;
}

// ---- 3: sampled scattering angles against the tabulated density ----
double chi2_pvalue(double chi2, double dof) {
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), chi2));
}

double sampling_pvalue(const MieTable &table, const Stokes &in, std::uint64_t seed) {
  const int n_mu = 20, n_phi = 12, sub = 32;
  std::vector<double> s11_bin(n_mu, 0.0), s12_bin(n_mu, 0.0);
  for (int b = 0; b < n_mu; ++b) {
    const double lo = -1.0 + 2.0 * b / n_mu, h = 2.0 / n_mu / sub;
    for (int k = 0; k <= sub; ++k) {
      const double w = (k == 0 || k == sub) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      const auto m = table.mueller_at(std::acos(std::clamp(lo + k * h, -1.0, 1.0)));
      s11_bin[b] += w * h / 3.0 * m.s11;
      s12_bin[b] += w * h / 3.0 * m.s12;
    }
  }
  RandomStream rng(seed, 0);
  const int n = 1'000'000;
  std::vector<double> counts(n_mu * n_phi, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto [theta, phi] = sample_scattering_angles(table, in, rng);
    const int bm = std::min(n_mu - 1, static_cast<int>((std::cos(theta) + 1.0) / 2.0 * n_mu));
    const int bp = std::min(n_phi - 1, static_cast<int>(phi / (2 * kPi) * n_phi));
    counts[bm * n_phi + bp] += 1.0;
  }
  double chi2 = 0.0, pooled_e = 0.0, pooled_o = 0.0;
  int cells = 0;
  for (int bm = 0; bm < n_mu; ++bm)
    for (int bp = 0; bp < n_phi; ++bp) {
      const double p0 = 2 * kPi * bp / n_phi, p1 = 2 * kPi * (bp + 1) / n_phi;
      const double c2 = (std::sin(2 * p1) - std::sin(2 * p0)) / 2.0;
      const double s2 = (std::cos(2 * p0) - std::cos(2 * p1)) / 2.0;
      const double prob =
          (s11_bin[bm] * (p1 - p0) + s12_bin[bm] * (in.q * c2 + in.u * s2)) / table.phase_norm();
      const double e = prob * n, obs = counts[bm * n_phi + bp];
      if (e < 5.0) {
        pooled_e += e;
        pooled_o += obs;
        continue;
      }
      chi2 += (obs - e) * (obs - e) / e;
      ++cells;
    }
  if (pooled_e > 0.0) {
    chi2 += (pooled_o - pooled_e) * (pooled_o - pooled_e) / pooled_e;
    ++cells;
  }
  return chi2_pvalue(chi2, cells - 1);
}

Outcome phase_function() {
  Outcome o;
  std::uint64_t seed = 100;
  for (double x : {0.05, 0.696, 3.0}) {
    const auto table = build_mie_table(sphere(x, 1.2), 0.632);
    for (const Stokes in : {Stokes{1.0, 0.0, 0.0, 0.0}, Stokes{1.0, 0.6, 0.8, 0.0}}) {
      const double p = sampling_pvalue(table, in, ++seed);
      const char *label = in.q == 0.0 ? "unpol" : "pol";
      o.note(std::string(label) + fmt(" x=%g p=%.3f", x, p));
      o.require(p > 0.01, fmt("chi2 x=%g", x));
    }
    const auto ref = oracle::coefficients(x, cdouble(1.2, 0.0), wiscombe_terms(x));
    const double expected = kPi * x * x * static_cast<double>(oracle::q_sca(ref));
    const double err = std::abs(table.phase_norm() - expected) / expected;
    o.note(fmt("norm err %.1e", err));
    o.require(err < 1e-6, fmt("normalization x=%g", x));
  }
  return o;
}

// ---- 4: Mie series consistency ----
Outcome mie_oracle() {
  Outcome o;
  double worst_theorem = 0.0, worst_doubling = 0.0;
  for (double x : {0.05, 0.696, 1.5, 3.0, 5.0}) {
    for (cdouble m : {cdouble(1.2, 0.0), cdouble(1.5, 0.01), cdouble(1.33, 0.0)}) {
      const auto c = mie_coefficients(x, m);
      const double q_theorem = 4.0 / (x * x) * amplitude_functions(0.0, c).s1.real();
      const double q = extinction_efficiency(c);
      worst_theorem = std::max(worst_theorem, std::abs(q_theorem - q) / q);

      const auto c2 = mie_coefficients(x, m, 2 * c.n_max());
      for (int i = 0; i <= 180; ++i) {
        const double th = kPi * i / 180.0;
        const auto a = amplitude_functions(th, c), b = amplitude_functions(th, c2);
        worst_doubling = std::max({worst_doubling, std::abs(a.s1 - b.s1) / std::max(std::abs(b.s1), 1e-300),
                                   std::abs(a.s2 - b.s2) / std::max(std::abs(b.s2), 1e-300)});
      }
    }
  }
  const auto c = mie_coefficients(0.05, cdouble(1.2, 0.0));
  const double s0 = mueller_elements(0.0, c).s11;
  double worst_shape = 0.0;
  for (int i = 0; i <= 180; ++i) {
    const double th = kPi * i / 180.0;
    const double ideal = 0.5 * (1.0 + std::cos(th) * std::cos(th));
    worst_shape = std::max(worst_shape, std::abs(mueller_elements(th, c).s11 / s0 - ideal) / ideal);
  }
  o.note(fmt("optical theorem %.1e, Rayleigh shape %.1e, doubled terms %.1e", worst_theorem,
             worst_shape, worst_doubling));
  o.require(worst_theorem < 1e-8, "optical theorem");
  o.require(worst_shape < 0.01, "Rayleigh S11 shape");
  o.require(worst_doubling < 1e-10, "doubled truncation");
  return o;
}

// ---- 5: detection channel identities on simulated grids ----
Outcome channel_identities() {
  Outcome o;
  std::size_t populated = 0, exact = 0, checked = 0;
  double worst_sum = 0.0, worst_reduction = 0.0;
  for (auto pol : {SourcePolarization::LinearX, SourcePolarization::CircularRight}) {
    SimConfig cfg;
    set_volume_fraction(cfg.medium, 0.05);
    cfg.medium.n_particle = 1.5;
    cfg.source_polarization = pol;
    cfg.n_photons = 50'000;
    cfg.seed = 5;
    const auto res = run(cfg);
    for (const DetectorGrid *g : {&res.grid(), &res.partial_grid()}) {
      for (const auto &b : g->bins()) {
        const Channels c = bin_channels(b);
        const double two_w = 2.0 * b.w;
        // Two floating additions of a shared term: bit equality or one rounding.
        const double tol = 4.0 * std::numeric_limits<double>::epsilon() * two_w;
        const double e1 = std::abs(c.p_xx + c.p_xy - two_w);
        const double e2 = std::abs(c.p_pp + c.p_pm - two_w);
        ++checked;
        exact += (e1 == 0.0 && e2 == 0.0);
        worst_sum = std::max({worst_sum, two_w > 0 ? e1 / two_w : e1, two_w > 0 ? e2 / two_w : e2});
        o.require(e1 <= tol && e2 <= tol, "p_xx + p_xy = p_pp + p_pm = 2 sum W");
        if (b.count == 0.0) continue;
        ++populated;
        const double doc = bin_degree_of_coherence(b);
        o.require(doc >= -1.0 && doc <= 1.0, "DOC in [-1, 1]");

        BinSums coherent = b;
        coherent.e_minus = coherent.e_plus;
        const auto w = bin_doc_weighted_cross(coherent);
        const Channels plain = bin_channels(coherent);
        worst_reduction = std::max({worst_reduction,
                                    std::abs(w.p_xy_doc - plain.p_xy) / std::max(plain.p_xy, 1e-300),
                                    std::abs(w.p_pm_doc - plain.p_pm) / std::max(plain.p_pm, 1e-300)});
      }
    }
  }
  o.require(populated > 100, "enough populated bins");
  o.require(worst_reduction < 1e-14, "DOC = 1 reduces to the plain cross channels");
  o.note(fmt("%.0f bins, %.0f populated, %.0f bit-exact", double(checked), double(populated),
             double(exact)));
  o.note(fmt("max sum deviation %.1e, DOC=1 reduction %.1e", worst_sum, worst_reduction));
  return o;
}

// ---- 6: co-polarized fraction decays with depth ----
std::vector<double> ranks(const std::vector<double> &v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * (i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

struct Spearman {
  double rho = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

Spearman spearman(const std::vector<double> &x, const std::vector<double> &y) {
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  Spearman s;
  s.n = x.size();
  s.rho = sxy / std::sqrt(sxx * syy);
  if (s.n > 2 && std::abs(s.rho) < 1.0) {
    const double t = s.rho * std::sqrt((n - 2.0) / (1.0 - s.rho * s.rho));
    boost::math::students_t dist(n - 2.0);
    s.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  } else if (s.n > 2) {
    s.p = 0.0;
  }
  return s;
}

Outcome co_polarization() {
  Outcome o;
  const auto t0 = Clock::now();
  for (auto [pol, circular] : {std::pair{SourcePolarization::LinearX, false},
                               std::pair{SourcePolarization::CircularRight, true}}) {
    SimConfig cfg;
    cfg.medium.particle_radius = 0.07;
    cfg.medium.n_particle = 1.5;
    cfg.medium.mu_a = 0.0;
    set_volume_fraction(cfg.medium, 0.1);
    cfg.wavelength = 0.632;
    cfg.detector.geometry.depth_width = 4.0;
    cfg.detector.geometry.radius_width = 4.0;
    cfg.source_polarization = pol;
    cfg.n_photons = 100'000;
    cfg.seed = 42;
    const auto res = run(cfg);
    const auto frac = co_polarized_fraction(res.grid(), 0, circular);
    std::vector<double> depth, value;
    for (std::size_t k = 0; k < frac.size(); ++k)
      if (std::isfinite(frac[k])) {
        depth.push_back((k + 0.5) * cfg.detector.geometry.depth_width);
        value.push_back(frac[k]);
      }
    const auto s = spearman(depth, value);
    o.note(std::string(circular ? "circular" : "linear") +
           fmt(" rho %.3f p %.2e over %.0f bins", s.rho, s.p, double(s.n)));
    o.require(s.n >= 5 && s.rho < 0.0 && s.p < 0.05, circular ? "circular trend" : "linear trend");
  }
  const double dt = seconds_since(t0);
  o.note(fmt("%.1f s", dt));
  o.require(dt <= 600.0, "runtime <= 600 s");
  return o;
}

// ---- 7: worker-count invariance ----
Outcome determinism() {
  Outcome o;
  SimConfig cfg = sim_config_from_file(std::string(POLMC_SOURCE_DIR) + "/configs/example.json");
  cfg.n_photons = 20'000;
  cfg.n_workers = 1;
  const auto ref = run(cfg);
  for (unsigned w : {1u, 4u, 16u}) {
    cfg.n_workers = w;
    const auto r = run(cfg);
    const bool same = r.grid() == ref.grid() && r.partial_grid() == ref.partial_grid() &&
                      r.ledger().absorbed == ref.ledger().absorbed &&
                      r.ledger().detected_top == ref.ledger().detected_top;
    o.require(same, fmt("workers %g", double(w)));
  }
  o.note("workers 1, 4, 16 give identical grids and ledgers");
  return o;
}

// ---- 8: network numerics ----
Batch random_batch(const Architecture &a, std::size_t n, std::uint64_t seed) {
  RandomStream rng(seed, 0);
  Batch b;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> x(a.input_dim), y(a.output_dim);
    for (auto &v : x) v = 2.0 * rng.uniform() - 1.0;
    for (auto &v : y) v = 2.0 * rng.uniform() - 1.0;
    b.x.push_back(x);
    b.y.push_back(y);
  }
  return b;
}

// Worst relative central-difference error inside one layer's parameters.
double layer_gradient_error(Network &net, const Network::Dense &d, const Batch &b,
                            const std::vector<std::vector<double>> *noise) {
  std::vector<double> grad;
  net.loss_and_gradient(b, grad, noise);
  auto p = net.parameters();
  double worst = 0.0;
  for (std::size_t k = d.offset; k < d.offset + d.size(); ++k) {
    const double keep = p[k], h = 1e-6;
    p[k] = keep + h;
    const double up = net.loss(b, noise);
    p[k] = keep - h;
    const double down = net.loss(b, noise);
    p[k] = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad[k]) / std::max(1e-6, std::abs(fd) + std::abs(grad[k])));
  }
  return worst;
}

Outcome network() {
  Outcome o;
  Architecture a;
  a.input_dim = 7;
  a.width = 6;
  a.n_blocks = 2;
  a.latent_dim = 3;
  a.output_dim = 2;
  double worst = 0.0;
  for (bool variational : {false, true}) {
    a.variational = variational;
    a.kl_weight = 0.1;
    Network net(a, 3);
    const auto batch = random_batch(a, 5, 8);
    std::vector<std::vector<double>> noise;
    RandomStream nr(9, 0);
    for (int k = 0; k < 5; ++k) {
      std::vector<double> e(a.latent_dim);
      for (auto &v : e) v = 4.0 * nr.uniform() - 2.0;
      noise.push_back(e);
    }
    const auto *np = variational ? &noise : nullptr;
    std::vector<const Network::Dense *> layers{&net.input_layer()};
    for (const auto &d : net.block_layers()) layers.push_back(&d);
    layers.push_back(&net.latent_layer());
    layers.push_back(&net.head_layer());
    for (const auto *d : layers) worst = std::max(worst, layer_gradient_error(net, *d, batch, np));
  }
  o.note(fmt("FD gradient %.1e", worst));
  o.require(worst < 1e-4, "finite-difference gradients");

  // y = A x with a held-out validation set.
  const double A[2][6] = {{0.5, -0.3, 0.2, 0.0, 0.4, -0.1}, {-0.2, 0.1, 0.3, 0.5, -0.4, 0.2}};
  Architecture lin;
  lin.input_dim = 6;
  lin.width = 32;
  lin.n_blocks = 2;
  lin.latent_dim = 8;
  lin.output_dim = 2;
  Network net(lin, 1);
  RandomStream rng(4, 0);
  Batch tr, va;
  for (int k = 0; k < 320; ++k) {
    std::vector<double> x(6), y(2, 0.0);
    for (auto &v : x) v = 2.0 * rng.uniform() - 1.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 6; ++j) y[i] += A[i][j] * x[j];
    Batch &dst = k < 256 ? tr : va;
    dst.x.push_back(x);
    dst.y.push_back(y);
  }
  TrainConfig cfg;
  cfg.steps = 5000;
  cfg.batch_size = 32;
  cfg.adam.base_lr = 1e-2;
  const auto curves = train(net, tr, va, cfg);
  const double ratio = curves.best_validation / curves.validation.front();
  o.note(fmt("linear task validation ratio %.1e at step %.0f", ratio, double(curves.best_step)));
  o.require(ratio < 1e-3, "linear task below 1e-3 of initial validation loss");
  o.require(std::abs(net.loss(va) - curves.best_validation) <= 1e-12 * curves.best_validation,
            "best checkpoint restored");

  bool steps_ok = curves.learning_rate.size() == 5000;
  for (std::size_t t = 0; steps_ok && t < curves.learning_rate.size(); ++t) {
    const double expect = 1e-2 * std::pow(0.5, static_cast<double>(t / 500));
    steps_ok = curves.learning_rate[t] == expect;
    if (t > 0) steps_ok = steps_ok && ((curves.learning_rate[t] != curves.learning_rate[t - 1]) ==
                                       (t % 500 == 0));
  }
  o.require(steps_ok, "learning rate halves exactly at multiples of 500");

  bool split_ok = true;
  for (std::size_t n : {10u, 20u, 64u, 100u, 333u}) {
    Dataset d;
    d.target_names = {"n_particle"};
    for (std::size_t k = 0; k < n; ++k) {
      TrainingSample s;
      s.target = {double(k)};
      s.seed = k;
      d.samples.push_back(s);
    }
    const auto [train_part, test_part] = split(d, 0.7, 3);
    const auto expect = static_cast<std::size_t>(std::ceil(0.7 * static_cast<double>(n) - 1e-9));
    std::vector<std::uint64_t> seen;
    for (const auto &s : train_part.samples) seen.push_back(s.seed);
    for (const auto &s : test_part.samples) seen.push_back(s.seed);
    std::sort(seen.begin(), seen.end());
    split_ok = split_ok && train_part.size() == expect && test_part.size() == n - expect &&
               std::adjacent_find(seen.begin(), seen.end()) == seen.end() && seen.size() == n;
  }
  o.require(split_ok, "0.7/0.3 split sizes");
  o.note("split and schedule checked");
  return o;
}

// ---- 9: simulate, train and invert end to end ----
Outcome pipeline() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto cfg = default_pipeline_config();
  const auto r = end_to_end(cfg);
  const double dt = seconds_since(t0);
  bool finite = !r.curves.train.empty() && r.curves.train.size() == r.curves.validation.size();
  for (double v : r.curves.train) finite = finite && std::isfinite(v);
  for (double v : r.curves.validation) finite = finite && std::isfinite(v);
  for (double v : r.curves.batch_loss) finite = finite && std::isfinite(v);
  o.require(finite, "loss curves finite");
  const double first = r.curves.validation.front(), last = r.curves.validation.back();
  o.note(fmt("validation %.3e -> %.3e, held-out MAE %.4f", first, last, r.heldout_mae));
  o.require(last < 0.5 * first, "final validation < 0.5 x initial");
  o.require(r.heldout_mae < 0.1, "held-out MAE < 0.1");
  o.require(cfg.sweep.n_samples == 64 && cfg.sweep.base.n_photons == 20'000 &&
                r.curves.learning_rate.size() == 3000,
            "64 samples, 2e4 photons, 3000 steps");
  o.note(fmt("%.1f s", dt));
  o.require(dt <= 1800.0, "runtime <= 1800 s");
  return o;
}

} // namespace

int main() {
  const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria{
      {"AC1 coherent reflectance", reflectance},
      {"AC2 energy conservation", energy},
      {"AC3 phase-function sampling", phase_function},
      {"AC4 Mie series", mie_oracle},
      {"AC5 channel identities", channel_identities},
      {"AC6 co-polarization decay", co_polarization},
      {"AC7 scheduling invariance", determinism},
      {"AC8 network numerics", network},
      {"AC9 end-to-end pipeline", pipeline},
  };
  int failures = 0;
  for (const auto &[name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception &e) {
      o.pass = false;
      o.note(std::string("exception: ") + e.what());
    }
    failures += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
