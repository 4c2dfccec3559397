#pragma once

// Single-photon polarised transport through an index-matched slab.
//
// Each photon carries a normalised Jones vector (E1, E2) expressed in a local
// frame (e1, e2) with e1 x e2 = direction. Intensity changes are carried by
// the weight alone.

#include <cstdint>
#include <optional>
#include <utility>

#include "polmc/detection.hpp"
#include "polmc/medium.hpp"
#include "polmc/mie.hpp"
#include "polmc/rng.hpp"
#include "polmc/vec3.hpp"

namespace polmc {

struct Photon {
  Vec3 position;
  Vec3 direction{0.0, 0.0, 1.0};
  Vec3 e1{1.0, 0.0, 0.0};
  Vec3 e2{0.0, 1.0, 0.0};
  JonesVector jones{cdouble(1.0, 0.0), cdouble(0.0, 0.0)};
  double weight = 1.0;
  double path_length = 0.0;
  double max_depth = 0.0;
  std::uint32_t n_scatter = 0;
  bool alive = true;
};

/// Photon at the origin entering the slab at `incidence_angle` (radians, in
/// the x-z plane) with `source` given in the laboratory x/y basis.
Photon launch_photon(const JonesVector &source, double incidence_angle = 0.0);

/// Stokes vector of the photon in its own local frame.
Stokes local_stokes(const Photon &p);

/// Jones components projected on the laboratory x/y axes as seen looking
/// along the propagation direction (valid for photons heading towards -z).
JonesVector lab_jones(const Photon &p);

struct EnergyLedger {
  double launched = 0.0;
  double detected_top = 0.0;
  double detected_bottom = 0.0;
  double absorbed = 0.0;
  // Net weight removed by termination: roulette losses minus roulette
  // survivor boosts, plus step-cap kills. Can be negative.
  double terminated = 0.0;

  EnergyLedger &operator+=(const EnergyLedger &o);
  double accounted() const { return detected_top + detected_bottom + absorbed + terminated; }
  /// |accounted - launched| / launched.
  double relative_imbalance() const;
};

enum class TerminalEvent { ExitTop, ExitBottom, Absorbed, RouletteKilled, StepCap };

struct TransportOptions {
  double roulette_threshold = 1e-4;
  double roulette_survival = 0.1;
  bool partial_photon = true;
  double detector_solid_angle = 0.01; // sr, around -z
  std::uint64_t max_steps = 1'000'000;
  bool coherent_channel = false;
  double partial_cutoff = 1e-12;
};

/// Everything a worker needs that is shared read-only between photons.
struct TransportContext {
  TransportContext(const MediumSpec &medium, const MieTable &table, double wavelength,
                   const TransportOptions &options, double incidence_angle = 0.0);

  const MediumSpec &medium;
  const MieTable &table;
  double wavelength;
  TransportOptions options;
  double mu_s;
  double mu_t;
  double cone_cos; // cosine of the detector acceptance half-angle
  double k_host;   // host wavenumber, 1/um
  // Specular reflection amplitude per unit depth of the coherent
  // (mean-field) channel at the configured incidence angle.
  cdouble coherent_amplitude;
  double incidence_cos;
};

/// Per-worker accumulators.
struct PhotonTally {
  explicit PhotonTally(const GridGeometry &geometry, std::uint32_t lateral_bins = 0,
                       double lateral_width = 4.0);

  DetectorGrid grid;    // photons exiting the top surface
  DetectorGrid partial; // partial-photon deposits
  LateralGrid lateral;
  EnergyLedger ledger;

  std::uint64_t events[5] = {0, 0, 0, 0, 0};
  std::uint64_t scatter_events = 0;
  std::uint64_t rejection_trials = 0;
  std::uint64_t rejection_accepts = 0;

  // Per-photon estimator moments: sum and sum of squares of each photon's
  // total contribution.
  double partial_sum = 0.0, partial_sq = 0.0;
  double cone_sum = 0.0, cone_sq = 0.0;
  // Coherent specular amplitude: sums of Re, Im, Re^2, Im^2, Re*Im.
  double coh_re = 0.0, coh_im = 0.0, coh_re2 = 0.0, coh_im2 = 0.0, coh_reim = 0.0;

  void merge(const PhotonTally &o);
};

/// Free path -ln(u)/mu_s for u in (0, 1].
double sample_step(double mu_s, double u);

/// Applies exp(-mu_a step) to the weight and returns the absorbed weight.
double attenuate(Photon &p, double step, double mu_a);

/// Jones components after rotating the local basis by phi about the direction.
JonesVector rotate_jones(const JonesVector &e, double phi);

struct Frame {
  Vec3 direction;
  Vec3 e1;
  Vec3 e2;
};

/// Deflects by polar angle theta at azimuth phi measured from e1 towards e2.
/// The new e1 lies in the scattering plane; the frame is re-orthonormalised.
Frame update_direction(const Vec3 &direction, const Vec3 &e1, const Vec3 &e2, double theta,
                       double phi);

struct RejectionStats {
  std::uint64_t trials = 0;
  std::uint64_t accepts = 0;
};

/// Draws (theta, phi) from the polarisation-dependent phase function for the
/// local Stokes vector `s` by rejection against max S11 (I + |Q| + |U|).
std::pair<double, double> sample_scattering_angles(const MieTable &table, const Stokes &s,
                                                   RandomStream &rng,
                                                   RejectionStats *stats = nullptr);

/// Applies diag(S2, S1) in the scattering plane and turns the photon.
/// Returns false when both amplitudes vanish at theta.
bool apply_scattering(Photon &p, double theta, double phi, const MieTable &table);

/// Jones matrix of a path segment with linear retardance and circular
/// rotation acting simultaneously: exp(-i (delta/2 (cos2a s3 + sin2a s1) + rho s2)).
std::array<cdouble, 4> medium_jones_matrix(double retardance, double axis_angle, double rotation);

/// Propagates the Jones vector over `step` um of birefringent, optically
/// active host. The linear retardance uses the birefringence axis projected
/// onto the local frame.
void apply_medium_optics(Photon &p, double step, const MediumSpec &medium, double wavelength);

/// Roulette for low weights. Returns false when the photon is killed.
bool russian_roulette(Photon &p, double threshold, double survival_p, double u,
                      EnergyLedger &ledger);

/// Local-estimate deposit toward the -z detector from the current scattering
/// site; std::nullopt when the attenuation drops below the cutoff.
std::optional<ExitRecord> partial_photon_contribution(const Photon &p,
                                                      const TransportContext &ctx);

TerminalEvent propagate_photon(Photon &p, const TransportContext &ctx, RandomStream &rng,
                               PhotonTally &tally);

} // namespace polmc
