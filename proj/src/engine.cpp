#include "polmc/engine.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "polmc/error.hpp"
#include "polmc/mie.hpp"

namespace polmc {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

Estimate mean_and_error(double sum, double sq, std::uint64_t n) {
  Estimate e;
  if (n == 0)
    return e;
  const double nn = static_cast<double>(n);
  e.mean = sum / nn;
  const double var = std::max(sq / nn - e.mean * e.mean, 0.0);
  e.stderr_ = n > 1 ? std::sqrt(var / (nn - 1.0)) : 0.0;
  return e;
}

} // namespace

void SimConfig::validate() const {
  std::ostringstream problems;
  try {
    medium.validate();
  } catch (const ValidationError &e) {
    problems << "\n  - " << e.what();
  }
  auto check = [&](bool ok, const char *msg) {
    if (!ok)
      problems << "\n  - " << msg;
  };
  check(n_photons >= 1, "n_photons must be >= 1");
  check(std::isfinite(wavelength) && wavelength > 0.0, "wavelength must be > 0");
  check(detector.geometry.n_radius > 0 && detector.geometry.n_depth > 0,
        "detector bin counts must be > 0");
  check(detector.geometry.radius_width > 0.0 && detector.geometry.depth_width > 0.0,
        "detector bin widths must be > 0");
  check(detector.solid_angle > 0.0 && detector.solid_angle < 2.0 * M_PI,
        "detector solid angle must lie in (0, 2 pi)");
  check(detector.lateral_bins == 0 || detector.lateral_width > 0.0,
        "lateral bin width must be > 0");
  check(variance_reduction.roulette_survival > 0.0 && variance_reduction.roulette_survival < 1.0,
        "roulette survival probability must lie in (0, 1)");
  check(variance_reduction.roulette_threshold >= 0.0, "roulette threshold must be >= 0");
  check(std::isfinite(incidence_angle) && incidence_angle >= 0.0 &&
            incidence_angle < M_PI / 2.0,
        "incidence_angle must lie in [0, pi/2)");
  check(n_theta >= 1801 && n_theta % 2 == 1, "n_theta must be odd and >= 1801");
  check(max_steps >= 1, "max_steps must be >= 1");
  if (source_polarization == SourcePolarization::Custom)
    check(std::norm(custom_jones[0]) + std::norm(custom_jones[1]) > 0.0,
          "custom Jones vector must be non-zero");
  const auto msg = problems.str();
  if (!msg.empty())
    throw ValidationError("invalid simulation config:" + msg);
}

JonesVector SimConfig::source_jones() const {
  const cdouble one(1.0, 0.0), i(0.0, 1.0);
  switch (source_polarization) {
  case SourcePolarization::LinearX: return {one, cdouble(0.0)};
  case SourcePolarization::Linear45: return {kInvSqrt2 * one, kInvSqrt2 * one};
  case SourcePolarization::CircularRight: return {kInvSqrt2 * one, kInvSqrt2 * i};
  case SourcePolarization::CircularLeft: return {kInvSqrt2 * one, -kInvSqrt2 * i};
  case SourcePolarization::Custom: break;
  }
  const double n = std::sqrt(std::norm(custom_jones[0]) + std::norm(custom_jones[1]));
  return {custom_jones[0] / n, custom_jones[1] / n};
}

Estimate SimResult::partial_signal() const {
  return mean_and_error(tally.partial_sum, tally.partial_sq, diagnostics.photons);
}

Estimate SimResult::analog_signal() const {
  return mean_and_error(tally.cone_sum, tally.cone_sq, diagnostics.photons);
}

Estimate SimResult::coherent_reflectance() const {
  Estimate e;
  const std::uint64_t n = diagnostics.photons;
  if (n < 2)
    return e;
  const double nn = static_cast<double>(n);
  const double re = tally.coh_re / nn;
  const double im = tally.coh_im / nn;
  const double var_re = std::max(tally.coh_re2 / nn - re * re, 0.0) / (nn - 1.0);
  const double var_im = std::max(tally.coh_im2 / nn - im * im, 0.0) / (nn - 1.0);
  const double cov = (tally.coh_reim / nn - re * im) / (nn - 1.0);
  e.mean = re * re + im * im;
  e.stderr_ = std::sqrt(std::max(4.0 * (re * re * var_re + im * im * var_im + 2.0 * re * im * cov),
                                 0.0));
  return e;
}

std::string SimResult::summary_json() const {
  using nlohmann::json;
  const EnergyLedger &l = tally.ledger;
  const Estimate partial = partial_signal();
  const Estimate analog = analog_signal();
  const Estimate coherent = coherent_reflectance();
  json j;
  j["ledger"] = {{"launched", l.launched},
                 {"detected_top", l.detected_top},
                 {"detected_bottom", l.detected_bottom},
                 {"absorbed", l.absorbed},
                 {"terminated", l.terminated},
                 {"relative_imbalance", l.relative_imbalance()}};
  j["diagnostics"] = {{"photons", diagnostics.photons},
                      {"exit_top", diagnostics.exit_top},
                      {"exit_bottom", diagnostics.exit_bottom},
                      {"absorbed", diagnostics.absorbed},
                      {"roulette_killed", diagnostics.roulette_killed},
                      {"step_capped", diagnostics.step_capped},
                      {"scatter_events", diagnostics.scatter_events},
                      {"rejection_efficiency", diagnostics.rejection_efficiency()},
                      {"wall_seconds", diagnostics.wall_seconds},
                      {"warnings", diagnostics.warnings}};
  j["mu_s"] = mu_s;
  j["partial_signal"] = {{"mean", partial.mean}, {"stderr", partial.stderr_}};
  j["analog_signal"] = {{"mean", analog.mean}, {"stderr", analog.stderr_}};
  j["coherent_reflectance"] = {{"mean", coherent.mean}, {"stderr", coherent.stderr_}};
  return j.dump(2);
}

SimResult run(const SimConfig &config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  const MieTable table = build_mie_table(config.medium, config.wavelength, config.n_theta);

  TransportOptions options;
  options.roulette_threshold = config.variance_reduction.roulette_threshold;
  options.roulette_survival = config.variance_reduction.roulette_survival;
  options.partial_photon = config.variance_reduction.partial_photon;
  options.detector_solid_angle = config.detector.solid_angle;
  options.max_steps = config.max_steps;
  options.coherent_channel = config.coherent_channel;
  const TransportContext ctx(config.medium, table, config.wavelength, options,
                             config.incidence_angle);
  const JonesVector source = config.source_jones();

  const GridGeometry &geometry = config.detector.geometry;
  const std::uint32_t lateral_bins = config.detector.lateral_bins;
  const double lateral_width = config.detector.lateral_width;

  const std::uint64_t n = config.n_photons;
  const std::uint64_t n_blocks = std::min<std::uint64_t>(kPhotonBlocks, n);
  unsigned workers = config.n_workers ? config.n_workers : std::thread::hardware_concurrency();
  workers = static_cast<unsigned>(std::clamp<std::uint64_t>(workers, 1, n_blocks));

  SimResult result(geometry, lateral_bins, lateral_width);
  result.mu_s = table.mu_s();
  if (config.medium.volume_fraction() > kDiluteVolumeFraction) {
    std::ostringstream w;
    w << "volume fraction " << config.medium.volume_fraction()
      << " exceeds " << kDiluteVolumeFraction
      << "; independent single-particle scattering is not a good approximation";
    result.diagnostics.warnings.push_back(w.str());
  }

  // Blocks finish in any order but are folded into the result strictly in
  // block order.
  std::vector<std::optional<PhotonTally>> finished(n_blocks);
  std::uint64_t next_to_merge = 0;
  std::mutex merge_mutex;
  std::atomic<std::uint64_t> next_block{0};
  std::atomic<bool> abort{false};
  std::exception_ptr failure;
  std::atomic<std::uint64_t> photons_done{0};

  auto worker = [&]() {
    while (!abort.load()) {
      const std::uint64_t b = next_block.fetch_add(1);
      if (b >= n_blocks)
        return;
      const std::uint64_t begin = n * b / n_blocks;
      const std::uint64_t end = n * (b + 1) / n_blocks;
      try {
        PhotonTally tally(geometry, lateral_bins, lateral_width);
        for (std::uint64_t i = begin; i < end && !abort.load(); ++i) {
          RandomStream rng(config.seed, config.photon_offset + i);
          Photon photon = launch_photon(source, config.incidence_angle);
          propagate_photon(photon, ctx, rng, tally);
          photons_done.fetch_add(1, std::memory_order_relaxed);
        }
        std::lock_guard<std::mutex> lock(merge_mutex);
        finished[b].emplace(std::move(tally));
        while (next_to_merge < n_blocks && finished[next_to_merge]) {
          result.tally.merge(*finished[next_to_merge]);
          finished[next_to_merge].reset();
          ++next_to_merge;
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(merge_mutex);
        if (!failure)
          failure = std::current_exception();
        abort.store(true);
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back(worker);
    for (auto &t : pool)
      t.join();
  }

  if (failure) {
    std::string what = "unknown error";
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception &e) {
      what = e.what();
    } catch (...) {
    }
    throw RuntimeError("simulation failed after " + std::to_string(photons_done.load()) + " of " +
                       std::to_string(n) + " photons: " + what);
  }

  Diagnostics &d = result.diagnostics;
  d.photons = n;
  d.exit_top = result.tally.events[static_cast<int>(TerminalEvent::ExitTop)];
  d.exit_bottom = result.tally.events[static_cast<int>(TerminalEvent::ExitBottom)];
  d.absorbed = result.tally.events[static_cast<int>(TerminalEvent::Absorbed)];
  d.roulette_killed = result.tally.events[static_cast<int>(TerminalEvent::RouletteKilled)];
  d.step_capped = result.tally.events[static_cast<int>(TerminalEvent::StepCap)];
  d.scatter_events = result.tally.scatter_events;
  d.rejection_trials = result.tally.rejection_trials;
  d.rejection_accepts = result.tally.rejection_accepts;
  d.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

SimResult merge(const std::vector<SimResult> &results) {
  if (results.empty())
    throw ValidationError("merge: no results");
  SimResult out = results.front();
  for (std::size_t k = 1; k < results.size(); ++k) {
    const SimResult &r = results[k];
    if (!(r.grid().geometry() == out.grid().geometry()) ||
        r.tally.lateral.n != out.tally.lateral.n)
      throw ValidationError("merge: detector geometry mismatch");
    out.tally.merge(r.tally);
    Diagnostics &d = out.diagnostics;
    const Diagnostics &o = r.diagnostics;
    d.photons += o.photons;
    d.exit_top += o.exit_top;
    d.exit_bottom += o.exit_bottom;
    d.absorbed += o.absorbed;
    d.roulette_killed += o.roulette_killed;
    d.step_capped += o.step_capped;
    d.scatter_events += o.scatter_events;
    d.rejection_trials += o.rejection_trials;
    d.rejection_accepts += o.rejection_accepts;
    d.wall_seconds += o.wall_seconds;
    d.warnings.insert(d.warnings.end(), o.warnings.begin(), o.warnings.end());
  }
  return out;
}

} // namespace polmc
