#include "polmc/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "polmc/error.hpp"
#include "polmc/io.hpp"
#include "polmc/rng.hpp"

namespace polmc {

PipelineConfig default_pipeline_config() {
  PipelineConfig c;
  SimConfig &base = c.sweep.base;
  base.medium.particle_radius = 0.07;
  base.medium.n_host = 1.0;
  base.medium.n_particle = 1.3;
  base.medium.number_density =
      kDiluteVolumeFraction / base.medium.particle_volume(); // at the dilute limit
  base.medium.thickness = 200.0;
  base.wavelength = 0.632;
  base.n_photons = 20'000;
  c.sweep.ranges = {{"n_particle", 1.1, 1.5}};
  c.sweep.n_samples = 64;
  c.sweep.seed = c.seed;
  c.training.steps = 3000;
  c.training.batch_size = 32;
  c.training.seed = c.seed;
  return c;
}

namespace {

std::string join(const std::string &dir, const std::string &name) {
  return (std::filesystem::path(dir) / name).string();
}

template <class F> auto stage(const std::string &name, PipelineResult &res,
                              const std::function<void(const std::string &)> &log, F &&f) {
  if (log) log("stage " + name);
  const auto t0 = std::chrono::steady_clock::now();
  auto finish = [&] {
    res.stage_seconds.emplace_back(
        name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  };
  try {
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      finish();
    } else {
      auto r = f();
      finish();
      return r;
    }
  } catch (const ValidationError &e) {
    throw ValidationError("stage '" + name + "': " + e.what());
  } catch (const std::exception &e) {
    throw RuntimeError("stage '" + name + "': " + e.what());
  }
}

} // namespace

std::vector<std::string> pipeline_plan(const PipelineConfig &c) {
  std::vector<std::string> plan;
  std::ostringstream s;
  const auto &b = c.sweep.base;
  s << "simulate: probe medium with " << c.sweep.ranges.front().name << " = " << c.probe_value
    << ", " << b.n_photons << " photons";
  plan.push_back(s.str());
  s.str("");
  s << "dataset: " << c.sweep.n_samples << " samples over";
  for (const auto &r : c.sweep.ranges) s << ' ' << r.name << " [" << r.lo << ", " << r.hi << ']';
  s << ", " << b.n_photons << " photons each, features " << c.sweep.features.rows << 'x'
    << c.sweep.features.cols << "x4";
  plan.push_back(s.str());
  s.str("");
  s << "split: " << c.train_fraction << " train / " << 1.0 - c.train_fraction << " test";
  plan.push_back(s.str());
  s.str("");
  s << "train: " << (c.training.steps ? std::to_string(c.training.steps) + " steps"
                                      : std::to_string(c.training.epochs) + " epochs")
    << ", batch " << c.training.batch_size << ", width " << c.architecture.width << ", "
    << c.architecture.n_blocks << " residual blocks, latent " << c.architecture.latent_dim;
  plan.push_back(s.str());
  plan.push_back("infer: held-out mean absolute error and probe prediction");
  if (!c.out_dir.empty()) {
    for (const char *f : {"probe_grid.polg", "dataset.pold", "model.poln", "loss.csv",
                          "predictions.csv", "summary.json"})
      plan.push_back("write " + join(c.out_dir, f));
  }
  return plan;
}

PipelineResult end_to_end(const PipelineConfig &config,
                          const std::function<void(const std::string &)> &log) {
  if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0))
    throw ValidationError("train_fraction must lie in (0, 1)");
  if (config.sweep.ranges.empty()) throw ValidationError("pipeline needs a property range");
  if (!config.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(config.out_dir, ec);
    if (ec || !std::filesystem::is_directory(config.out_dir))
      throw ValidationError("output directory '" + config.out_dir + "' is not writable");
  }
  PipelineResult res;
  const std::string target = config.sweep.ranges.front().name;

  const DetectorGrid probe_grid = stage("simulate", res, log, [&] {
    SimConfig cfg = config.sweep.base;
    set_property(cfg.medium, target, config.probe_value);
    cfg.seed = mix_seed(config.seed, 0x70726f6265);
    SimResult r = run(cfg);
    DetectorGrid g = config.sweep.features.use_partial_grid ? r.partial_grid() : r.grid();
    if (!config.out_dir.empty()) {
      g.write_file(join(config.out_dir, "probe_grid.polg"));
      res.files.push_back(join(config.out_dir, "probe_grid.polg"));
    }
    return g;
  });
  res.probe_truth = config.probe_value;

  const Dataset data = stage("dataset", res, log, [&] {
    SweepReport report;
    Dataset d = sweep(config.sweep, &report);
    if (report.failed) {
      if (log)
        for (const auto &f : report.failures) log("  " + f);
    }
    if (d.size() < 4) throw RuntimeError("too few successful samples");
    if (!config.out_dir.empty()) {
      d.write_file(join(config.out_dir, "dataset.pold"));
      res.files.push_back(join(config.out_dir, "dataset.pold"));
    }
    return d;
  });

  stage("train", res, log, [&] {
    auto parts = split(data, config.train_fraction, config.seed);
    res.train_set = std::move(parts.first);
    res.test_set = std::move(parts.second);
    Model &m = res.model;
    m.features = fit_feature_normalization(res.train_set);
    m.targets = fit_target_normalization(res.train_set);
    m.feature_spec = data.feature_spec;
    m.grid_geometry = data.grid_geometry;
    m.target_names = data.target_names;
    m.reference_photons = data.photons_per_sample;
    Architecture arch = config.architecture;
    arch.input_dim = static_cast<std::uint32_t>(data.feature_length());
    arch.output_dim = static_cast<std::uint32_t>(data.target_names.size());
    m.net = Network(arch, config.seed);
    const Batch tr = make_batch(res.train_set, m.features, m.targets);
    const Batch te = make_batch(res.test_set, m.features, m.targets);
    res.curves = train(m.net, tr, te, config.training);
    if (!config.out_dir.empty()) {
      m.write_file(join(config.out_dir, "model.poln"));
      io::atomic_write(join(config.out_dir, "loss.csv"),
                       [&](std::ostream &o) { res.curves.write_csv(o); }, false);
      res.files.push_back(join(config.out_dir, "model.poln"));
      res.files.push_back(join(config.out_dir, "loss.csv"));
    }
  });

  stage("infer", res, log, [&] {
    double abs_err = 0.0;
    for (const auto &s : res.test_set.samples) {
      const auto p = infer_features(res.model, s.features);
      res.truth.push_back(s.target.front());
      res.prediction.push_back(p.values.front());
      abs_err += std::abs(p.values.front() - s.target.front());
    }
    res.heldout_mae = res.truth.empty() ? 0.0 : abs_err / res.truth.size();
    res.probe_prediction = infer(res.model, probe_grid).values.front();
    if (!config.out_dir.empty()) {
      io::atomic_write(
          join(config.out_dir, "predictions.csv"),
          [&](std::ostream &o) {
            o.precision(17);
            o << "truth,prediction\n";
            for (std::size_t i = 0; i < res.truth.size(); ++i)
              o << res.truth[i] << ',' << res.prediction[i] << '\n';
          },
          false);
      io::atomic_write(
          join(config.out_dir, "summary.json"),
          [&](std::ostream &o) {
            o.precision(17);
            o << "{\n  \"target\": \"" << target << "\",\n  \"heldout_mae\": " << res.heldout_mae
              << ",\n  \"probe_truth\": " << res.probe_truth
              << ",\n  \"probe_prediction\": " << res.probe_prediction
              << ",\n  \"best_step\": " << res.curves.best_step
              << ",\n  \"best_validation\": " << res.curves.best_validation
              << ",\n  \"train_samples\": " << res.train_set.size()
              << ",\n  \"test_samples\": " << res.test_set.size() << "\n}\n";
          },
          false);
      res.files.push_back(join(config.out_dir, "predictions.csv"));
      res.files.push_back(join(config.out_dir, "summary.json"));
    }
  });
  return res;
}

} // namespace polmc
