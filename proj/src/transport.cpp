#include "polmc/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "polmc/error.hpp"

namespace polmc {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::uint64_t kMaxRejectionTrials = 1'000'000;

void renormalize_jones(JonesVector &e) {
  const double n = std::sqrt(std::norm(e[0]) + std::norm(e[1]));
  e[0] /= n;
  e[1] /= n;
}

// e^z - 1 without cancellation for small |z|.
cdouble expm1_complex(cdouble z) {
  const double em1 = std::expm1(z.real());
  const double half = std::sin(z.imag() / 2.0);
  const double re = em1 * std::cos(z.imag()) - 2.0 * half * half;
  const double im = (em1 + 1.0) * std::sin(z.imag());
  return {re, im};
}

} // namespace

Photon launch_photon(const JonesVector &source, double incidence_angle) {
  Photon p;
  const double s = std::sin(incidence_angle);
  const double c = std::cos(incidence_angle);
  p.direction = {s, 0.0, c};
  p.e1 = {c, 0.0, -s};
  p.e2 = {0.0, 1.0, 0.0};
  p.jones = source;
  renormalize_jones(p.jones);
  return p;
}

Stokes local_stokes(const Photon &p) { return stokes_from_jones(p.jones); }

JonesVector lab_jones(const Photon &p) {
  const Vec3 &d = p.direction;
  Vec3 x_ref = Vec3{1.0, 0.0, 0.0} - d.x * d;
  if (norm(x_ref) < 1e-9)
    x_ref = cross(Vec3{0.0, 1.0, 0.0}, d);
  x_ref = normalized(x_ref);
  const Vec3 y_ref = cross(x_ref, d);
  // Field vector components along the reference axes.
  const cdouble ex = p.jones[0] * dot(p.e1, x_ref) + p.jones[1] * dot(p.e2, x_ref);
  const cdouble ey = p.jones[0] * dot(p.e1, y_ref) + p.jones[1] * dot(p.e2, y_ref);
  return {ex, ey};
}

EnergyLedger &EnergyLedger::operator+=(const EnergyLedger &o) {
  launched += o.launched;
  detected_top += o.detected_top;
  detected_bottom += o.detected_bottom;
  absorbed += o.absorbed;
  terminated += o.terminated;
  return *this;
}

double EnergyLedger::relative_imbalance() const {
  if (launched == 0.0)
    return std::abs(accounted());
  return std::abs(accounted() - launched) / launched;
}

TransportContext::TransportContext(const MediumSpec &medium_, const MieTable &table_,
                                   double wavelength_, const TransportOptions &options_,
                                   double incidence_angle)
    : medium(medium_), table(table_), wavelength(wavelength_), options(options_),
      mu_s(table_.mu_s()), mu_t(table_.mu_s() + medium_.mu_a),
      cone_cos(1.0 - options_.detector_solid_angle / kTwoPi),
      k_host(kTwoPi * medium_.n_host / wavelength_), incidence_cos(std::cos(incidence_angle)) {
  // Thin-layer specular amplitude -(2 pi rho / (k^2 cos)) S1(pi - 2 theta_i);
  // the depth phase exp(2 i k cos z) is applied along the ballistic track.
  const double theta_back = kPi - 2.0 * incidence_angle;
  cdouble s_back;
  if (table.coefficients().n_max() > 0)
    s_back = amplitude_functions(std::clamp(theta_back, 0.0, kPi), table.coefficients()).s1;
  else
    s_back = table.amplitudes_at(std::clamp(theta_back, 0.0, kPi)).s1;
  coherent_amplitude =
      -(kTwoPi * medium.number_density / (k_host * k_host * incidence_cos)) * s_back;
}

PhotonTally::PhotonTally(const GridGeometry &geometry, std::uint32_t lateral_bins,
                         double lateral_width)
    : grid(geometry), partial(geometry), lateral(lateral_bins, lateral_width) {}

void PhotonTally::merge(const PhotonTally &o) {
  grid.merge(o.grid);
  partial.merge(o.partial);
  if (lateral.enabled())
    lateral.merge(o.lateral);
  ledger += o.ledger;
  for (int k = 0; k < 5; ++k)
    events[k] += o.events[k];
  scatter_events += o.scatter_events;
  rejection_trials += o.rejection_trials;
  rejection_accepts += o.rejection_accepts;
  partial_sum += o.partial_sum;
  partial_sq += o.partial_sq;
  cone_sum += o.cone_sum;
  cone_sq += o.cone_sq;
  coh_re += o.coh_re;
  coh_im += o.coh_im;
  coh_re2 += o.coh_re2;
  coh_im2 += o.coh_im2;
  coh_reim += o.coh_reim;
}

double sample_step(double mu_s, double u) {
  if (!(u > 0.0 && u <= 1.0))
    throw ValidationError("sample_step: uniform must lie in (0, 1]");
  if (!(mu_s > 0.0))
    throw ValidationError("sample_step: mu_s must be > 0");
  return -std::log(u) / mu_s;
}

double attenuate(Photon &p, double step, double mu_a) {
  if (mu_a == 0.0 || step == 0.0)
    return 0.0;
  const double before = p.weight;
  p.weight = before * std::exp(-mu_a * step);
  return before - p.weight;
}

JonesVector rotate_jones(const JonesVector &e, double phi) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  return {c * e[0] + s * e[1], -s * e[0] + c * e[1]};
}

Frame update_direction(const Vec3 &d, const Vec3 &e1, const Vec3 &e2, double theta, double phi) {
  const double cp = std::cos(phi), sp = std::sin(phi);
  const double ct = std::cos(theta), st = std::sin(theta);
  const Vec3 m = cp * e1 + sp * e2;
  const Vec3 n = -sp * e1 + cp * e2;
  const Vec3 d_new = normalized(ct * d + st * m);
  Vec3 m_new = ct * m - st * d;
  m_new = normalized(m_new - dot(m_new, d_new) * d_new);
  const Vec3 n_new = cross(d_new, m_new);
  (void)n;
  return {d_new, m_new, n_new};
}

std::pair<double, double> sample_scattering_angles(const MieTable &table, const Stokes &s,
                                                   RandomStream &rng, RejectionStats *stats) {
  const double i0 = s.i;
  const double envelope = table.max_s11() * (i0 + std::abs(s.q) + std::abs(s.u));
  for (std::uint64_t trial = 1; trial <= kMaxRejectionTrials; ++trial) {
    const double mu = 2.0 * rng.uniform() - 1.0;
    const double theta = std::acos(std::clamp(mu, -1.0, 1.0));
    const double phi = kTwoPi * rng.uniform_closed_open();
    const auto [s11, s12] = table.mueller_at(theta);
    const double value = s11 * i0 + s12 * (s.q * std::cos(2.0 * phi) + s.u * std::sin(2.0 * phi));
    if (rng.uniform() * envelope <= value) {
      if (stats) {
        stats->trials += trial;
        ++stats->accepts;
      }
      return {theta, phi};
    }
  }
  throw RuntimeError("sample_scattering_angles: rejection sampling exceeded 1e6 attempts");
}

bool apply_scattering(Photon &p, double theta, double phi, const MieTable &table) {
  const JonesVector rotated = rotate_jones(p.jones, phi);
  const auto amp = table.amplitudes_at(theta);
  JonesVector out{amp.s2 * rotated[0], amp.s1 * rotated[1]};
  const double n2 = std::norm(out[0]) + std::norm(out[1]);
  if (!(n2 > 0.0))
    return false;
  renormalize_jones(out);
  p.jones = out;
  const Frame f = update_direction(p.direction, p.e1, p.e2, theta, phi);
  p.direction = f.direction;
  p.e1 = f.e1;
  p.e2 = f.e2;
  return true;
}

std::array<cdouble, 4> medium_jones_matrix(double retardance, double axis_angle, double rotation) {
  const double g1 = 0.5 * retardance * std::sin(2.0 * axis_angle);
  const double g2 = rotation;
  const double g3 = 0.5 * retardance * std::cos(2.0 * axis_angle);
  const double mag = std::sqrt(g1 * g1 + g2 * g2 + g3 * g3);
  if (mag == 0.0)
    return {cdouble(1.0), cdouble(0.0), cdouble(0.0), cdouble(1.0)};
  const double c = std::cos(mag);
  const double s = std::sin(mag) / mag;
  // cos|g| I - i sin|g| (g . sigma) / |g|
  return {cdouble(c, -s * g3), cdouble(-s * g2, -s * g1), cdouble(s * g2, -s * g1),
          cdouble(c, s * g3)};
}

void apply_medium_optics(Photon &p, double step, const MediumSpec &medium, double wavelength) {
  if (step <= 0.0 || (medium.delta_n == 0.0 && medium.chi == 0.0))
    return;
  const double a1 = dot(medium.birefringence_axis, p.e1);
  const double a2 = dot(medium.birefringence_axis, p.e2);
  const double projected = a1 * a1 + a2 * a2;
  const double retardance = kTwoPi * medium.delta_n * step * projected / wavelength;
  const double axis_angle = projected > 0.0 ? std::atan2(a2, a1) : 0.0;
  const auto m = medium_jones_matrix(retardance, axis_angle, medium.chi * step);
  JonesVector out{m[0] * p.jones[0] + m[1] * p.jones[1], m[2] * p.jones[0] + m[3] * p.jones[1]};
  renormalize_jones(out);
  p.jones = out;
}

bool russian_roulette(Photon &p, double threshold, double survival_p, double u,
                      EnergyLedger &ledger) {
  if (p.weight >= threshold)
    return true;
  if (u <= survival_p) {
    const double boosted = p.weight / survival_p;
    ledger.terminated -= boosted - p.weight;
    p.weight = boosted;
    return true;
  }
  ledger.terminated += p.weight;
  p.weight = 0.0;
  p.alive = false;
  return false;
}

std::optional<ExitRecord> partial_photon_contribution(const Photon &p,
                                                      const TransportContext &ctx) {
  const double depth = p.position.z;
  const double attenuation = std::exp(-ctx.mu_t * depth);
  if (attenuation < ctx.options.partial_cutoff)
    return std::nullopt;

  const Vec3 up{0.0, 0.0, -1.0};
  const double cos_theta = std::clamp(dot(p.direction, up), -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  const double a = dot(up, p.e1);
  const double b = dot(up, p.e2);
  const double phi = (a == 0.0 && b == 0.0) ? 0.0 : std::atan2(b, a);

  const Stokes s = local_stokes(p);
  const double density = ctx.table.density(theta, phi, s.q / s.i, s.u / s.i);
  const double deposit =
      p.weight * std::max(density, 0.0) * ctx.options.detector_solid_angle * attenuation;
  if (!(deposit > 0.0))
    return std::nullopt;

  Photon probe = p;
  if (!apply_scattering(probe, theta, phi, ctx.table))
    return std::nullopt;
  apply_medium_optics(probe, depth, ctx.medium, ctx.wavelength);

  ExitRecord rec;
  rec.x = p.position.x;
  rec.y = p.position.y;
  rec.depth = std::max(p.max_depth, depth);
  rec.weight = deposit;
  rec.jones = lab_jones(probe);
  return rec;
}

TerminalEvent propagate_photon(Photon &p, const TransportContext &ctx, RandomStream &rng,
                               PhotonTally &tally) {
  const MediumSpec &medium = ctx.medium;
  const TransportOptions &opt = ctx.options;
  const double thickness = medium.thickness;
  EnergyLedger &ledger = tally.ledger;
  ledger.launched += p.weight;

  double partial_total = 0.0;
  double cone_total = 0.0;
  cdouble coherent;
  RejectionStats rejection;
  TerminalEvent event = TerminalEvent::StepCap;

  for (std::uint64_t steps = 0;; ++steps) {
    if (steps >= opt.max_steps) {
      ledger.terminated += p.weight;
      p.weight = 0.0;
      p.alive = false;
      event = TerminalEvent::StepCap;
      break;
    }

    double step = ctx.mu_s > 0.0 ? sample_step(ctx.mu_s, rng.uniform())
                                 : std::numeric_limits<double>::infinity();
    const double dz = p.direction.z;
    double to_boundary = std::numeric_limits<double>::infinity();
    if (dz > 0.0)
      to_boundary = (thickness - p.position.z) / dz;
    else if (dz < 0.0)
      to_boundary = -p.position.z / dz;
    const bool leaving = step >= to_boundary;
    if (leaving)
      step = to_boundary;

    if (opt.coherent_channel && p.n_scatter == 0) {
      // Track-length estimate of the mean-field specular amplitude.
      const double c = ctx.incidence_cos;
      const cdouble beta(-medium.mu_a / c, 2.0 * ctx.k_host * c);
      const double z1 = p.position.z + step * dz;
      coherent += ctx.coherent_amplitude * p.weight *
                  (expm1_complex(beta * z1) - expm1_complex(beta * p.position.z)) / beta;
    }

    p.position += step * p.direction;
    if (leaving)
      p.position.z = dz > 0.0 ? thickness : 0.0;
    p.path_length += step;
    ledger.absorbed += attenuate(p, step, medium.mu_a);
    apply_medium_optics(p, step, medium, ctx.wavelength);
    p.max_depth = std::max(p.max_depth, p.position.z);

    if (leaving) {
      p.alive = false;
      if (dz < 0.0) {
        ledger.detected_top += p.weight;
        ExitRecord rec{p.position.x, p.position.y, p.max_depth, p.weight, lab_jones(p)};
        tally.grid.accumulate(rec);
        tally.lateral.accumulate(rec);
        if (-dz >= ctx.cone_cos)
          cone_total += p.weight;
        event = TerminalEvent::ExitTop;
      } else {
        ledger.detected_bottom += p.weight;
        event = TerminalEvent::ExitBottom;
      }
      break;
    }

    if (opt.partial_photon) {
      if (auto deposit = partial_photon_contribution(p, ctx)) {
        tally.partial.accumulate(*deposit);
        partial_total += deposit->weight;
      }
    }

    const auto [theta, phi] = sample_scattering_angles(ctx.table, local_stokes(p), rng, &rejection);
    if (!apply_scattering(p, theta, phi, ctx.table)) {
      ledger.absorbed += p.weight;
      p.weight = 0.0;
      p.alive = false;
      event = TerminalEvent::Absorbed;
      break;
    }
    ++p.n_scatter;

    if (!russian_roulette(p, opt.roulette_threshold, opt.roulette_survival, rng.uniform(),
                          ledger)) {
      event = TerminalEvent::RouletteKilled;
      break;
    }
  }

  tally.events[static_cast<int>(event)] += 1;
  tally.scatter_events += p.n_scatter;
  tally.rejection_trials += rejection.trials;
  tally.rejection_accepts += rejection.accepts;
  tally.partial_sum += partial_total;
  tally.partial_sq += partial_total * partial_total;
  tally.cone_sum += cone_total;
  tally.cone_sq += cone_total * cone_total;
  tally.coh_re += coherent.real();
  tally.coh_im += coherent.imag();
  tally.coh_re2 += coherent.real() * coherent.real();
  tally.coh_im2 += coherent.imag() * coherent.imag();
  tally.coh_reim += coherent.real() * coherent.imag();
  return event;
}

} // namespace polmc
