#include "polmc/polmc.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "polmc/config.hpp"
#include "polmc/dataset.hpp"
#include "polmc/engine.hpp"
#include "polmc/error.hpp"
#include "polmc/inverse.hpp"
#include "polmc/io.hpp"
#include "polmc/mie.hpp"
#include "polmc/oracle.hpp"
#include "polmc/pipeline.hpp"

struct polmc_config {
  polmc::SimConfig value;
};
struct polmc_result {
  polmc::SimResult value;
};
struct polmc_grid {
  polmc::DetectorGrid value;
};
struct polmc_mie_table {
  polmc::MieTable value;
};
struct polmc_dataset {
  polmc::Dataset value;
};
struct polmc_model {
  polmc::Model value;
};

namespace {

thread_local std::string g_last_error;

polmc_status fail(polmc_status s, const std::string &msg) {
  g_last_error = msg;
  return s;
}

template <class F> polmc_status guard(F &&f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const polmc::FormatError &e) {
    return fail(POLMC_ERR_FORMAT, e.what());
  } catch (const polmc::ValidationError &e) {
    return fail(POLMC_ERR_VALIDATION, e.what());
  } catch (const polmc::RuntimeError &e) {
    return fail(POLMC_ERR_RUNTIME, e.what());
  } catch (const std::bad_alloc &) {
    return fail(POLMC_ERR_RUNTIME, "out of memory");
  } catch (const std::exception &e) {
    return fail(POLMC_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(POLMC_ERR_INTERNAL, "unknown error");
  }
}

#define POLMC_REQUIRE(p)                                                                           \
  do {                                                                                             \
    if (!(p)) return fail(POLMC_ERR_NULL, #p " must not be NULL");                                 \
  } while (0)

char *dup_string(const std::string &s) {
  char *out = static_cast<char *>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<polmc::PropertyRange> parse_ranges(const std::string &text) {
  std::vector<polmc::PropertyRange> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto a = item.find(':');
    const auto b = a == std::string::npos ? a : item.find(':', a + 1);
    if (b == std::string::npos)
      throw polmc::ValidationError("range '" + item + "' must have the form name:lo:hi");
    polmc::PropertyRange r;
    r.name = item.substr(0, a);
    try {
      std::size_t used = 0;
      const std::string lo = item.substr(a + 1, b - a - 1), hi = item.substr(b + 1);
      r.lo = std::stod(lo, &used);
      if (used != lo.size()) throw std::invalid_argument(lo);
      r.hi = std::stod(hi, &used);
      if (used != hi.size()) throw std::invalid_argument(hi);
    } catch (const std::logic_error &) {
      throw polmc::ValidationError("range '" + item + "' has a non-numeric bound");
    }
    out.push_back(r);
  }
  if (out.empty()) throw polmc::ValidationError("no property ranges given");
  return out;
}

std::uint64_t fnv1a(const std::string &s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

} // namespace

extern "C" {

const char *polmc_last_error(void) { return g_last_error.c_str(); }

const char *polmc_status_string(polmc_status status) {
  switch (status) {
  case POLMC_OK: return "ok";
  case POLMC_ERR_VALIDATION: return "validation error";
  case POLMC_ERR_FORMAT: return "format error";
  case POLMC_ERR_RUNTIME: return "runtime error";
  case POLMC_ERR_NULL: return "null argument";
  case POLMC_ERR_RANGE: return "out of range";
  case POLMC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char *polmc_version(void) { return "0.1.0"; }

void polmc_string_free(char *s) { std::free(s); }

polmc_status polmc_config_default(polmc_config **out) {
  POLMC_REQUIRE(out);
  return guard([&] {
    *out = new polmc_config{};
    return POLMC_OK;
  });
}

polmc_status polmc_config_from_json(const char *json, polmc_config **out) {
  POLMC_REQUIRE(json);
  POLMC_REQUIRE(out);
  return guard([&] {
    *out = new polmc_config{polmc::sim_config_from_json(json)};
    return POLMC_OK;
  });
}

polmc_status polmc_config_from_file(const char *path, polmc_config **out) {
  POLMC_REQUIRE(path);
  POLMC_REQUIRE(out);
  return guard([&] {
    *out = new polmc_config{polmc::sim_config_from_file(path)};
    return POLMC_OK;
  });
}

polmc_status polmc_config_apply_json(polmc_config *config, const char *json) {
  POLMC_REQUIRE(config);
  POLMC_REQUIRE(json);
  return guard([&] {
    polmc::SimConfig copy = config->value;
    polmc::apply_sim_config_overrides(copy, json);
    config->value = copy;
    return POLMC_OK;
  });
}

polmc_status polmc_config_set_photons(polmc_config *config, uint64_t n) {
  POLMC_REQUIRE(config);
  config->value.n_photons = n;
  return POLMC_OK;
}

polmc_status polmc_config_set_seed(polmc_config *config, uint64_t seed) {
  POLMC_REQUIRE(config);
  config->value.seed = seed;
  return POLMC_OK;
}

polmc_status polmc_config_set_workers(polmc_config *config, unsigned n) {
  POLMC_REQUIRE(config);
  config->value.n_workers = n;
  return POLMC_OK;
}

polmc_status polmc_config_validate(const polmc_config *config) {
  POLMC_REQUIRE(config);
  return guard([&] {
    config->value.validate();
    return POLMC_OK;
  });
}

polmc_status polmc_config_to_json(const polmc_config *config, char **out) {
  POLMC_REQUIRE(config);
  POLMC_REQUIRE(out);
  return guard([&] {
    *out = dup_string(polmc::sim_config_to_json(config->value));
    return POLMC_OK;
  });
}

polmc_status polmc_config_hash(const polmc_config *config, uint64_t *out) {
  POLMC_REQUIRE(config);
  POLMC_REQUIRE(out);
  return guard([&] {
    *out = polmc::config_hash(config->value);
    return POLMC_OK;
  });
}

void polmc_config_free(polmc_config *config) { delete config; }

polmc_status polmc_simulate(const polmc_config *config, polmc_result **out) {
  POLMC_REQUIRE(config);
  POLMC_REQUIRE(out);
  return guard([&] {
    *out = new polmc_result{polmc::run(config->value)};
    return POLMC_OK;
  });
}

polmc_status polmc_result_ledger(const polmc_result *result, polmc_ledger *out) {
  POLMC_REQUIRE(result);
  POLMC_REQUIRE(out);
  const auto &l = result->value.ledger();
  *out = {l.launched, l.detected_top, l.detected_bottom, l.absorbed, l.terminated};
  return POLMC_OK;
}

polmc_status polmc_result_grid(const polmc_result *result, int which, polmc_grid **out) {
  POLMC_REQUIRE(result);
  POLMC_REQUIRE(out);
  if (which != 0 && which != 1) return fail(POLMC_ERR_RANGE, "grid selector must be 0 or 1");
  return guard([&] {
    *out = new polmc_grid{which == 0 ? result->value.grid() : result->value.partial_grid()};
    return POLMC_OK;
  });
}

polmc_status polmc_result_summary_json(const polmc_result *result, char **out) {
  POLMC_REQUIRE(result);
  POLMC_REQUIRE(out);
  return guard([&] {
    *out = dup_string(result->value.summary_json());
    return POLMC_OK;
  });
}

polmc_status polmc_result_coherent_reflectance(const polmc_result *result, double *mean,
                                               double *std_error) {
  POLMC_REQUIRE(result);
  return guard([&] {
    const auto e = result->value.coherent_reflectance();
    if (mean) *mean = e.mean;
    if (std_error) *std_error = e.stderr_;
    return POLMC_OK;
  });
}

void polmc_result_free(polmc_result *result) { delete result; }

polmc_status polmc_grid_read_file(const char *path, polmc_grid **out) {
  POLMC_REQUIRE(path);
  POLMC_REQUIRE(out);
  return guard([&] {
    *out = new polmc_grid{polmc::DetectorGrid::read_file(path)};
    return POLMC_OK;
  });
}

polmc_status polmc_grid_write_file(const polmc_grid *grid, const char *path) {
  POLMC_REQUIRE(grid);
  POLMC_REQUIRE(path);
  return guard([&] {
    grid->value.write_file(path);
    return POLMC_OK;
  });
}

polmc_status polmc_grid_write_csv(const polmc_grid *grid, const char *path) {
  POLMC_REQUIRE(grid);
  POLMC_REQUIRE(path);
  return guard([&] {
    polmc::io::atomic_write(
        path, [&](std::ostream &o) { grid->value.write_csv(o); }, false);
    return POLMC_OK;
  });
}

polmc_status polmc_grid_dims(const polmc_grid *grid, uint32_t *n_radius, uint32_t *n_depth,
                             double *radius_width, double *depth_width) {
  POLMC_REQUIRE(grid);
  const auto &g = grid->value.geometry();
  if (n_radius) *n_radius = g.n_radius;
  if (n_depth) *n_depth = g.n_depth;
  if (radius_width) *radius_width = g.radius_width;
  if (depth_width) *depth_width = g.depth_width;
  return POLMC_OK;
}

polmc_status polmc_grid_total_weight(const polmc_grid *grid, double *out) {
  POLMC_REQUIRE(grid);
  POLMC_REQUIRE(out);
  *out = grid->value.total_weight();
  return POLMC_OK;
}

polmc_status polmc_grid_checksum(const polmc_grid *grid, uint64_t *out) {
  POLMC_REQUIRE(grid);
  POLMC_REQUIRE(out);
  return guard([&] {
    std::ostringstream s;
    grid->value.write(s);
    *out = fnv1a(s.str());
    return POLMC_OK;
  });
}

polmc_status polmc_grid_image(const polmc_grid *grid, const char *channel, double *values,
                              size_t length) {
  POLMC_REQUIRE(grid);
  POLMC_REQUIRE(channel);
  POLMC_REQUIRE(values);
  return guard([&] {
    const auto img = polmc::bscan_image(grid->value, polmc::parse_channel(channel));
    if (length != img.values.size())
      return fail(POLMC_ERR_RANGE, "image buffer needs " + std::to_string(img.values.size()) +
                                       " values");
    std::copy(img.values.begin(), img.values.end(), values);
    return POLMC_OK;
  });
}

polmc_status polmc_grid_write_pgm(const polmc_grid *grid, const char *channel, const char *path,
                                  double *min, double *max) {
  POLMC_REQUIRE(grid);
  POLMC_REQUIRE(channel);
  POLMC_REQUIRE(path);
  return guard([&] {
    const auto img = polmc::bscan_image(grid->value, polmc::parse_channel(channel));
    polmc::GraymapScaling scale;
    polmc::io::atomic_write(path, [&](std::ostream &o) { scale = polmc::write_pgm(img, o); });
    if (min) *min = scale.min;
    if (max) *max = scale.max;
    return POLMC_OK;
  });
}

polmc_status polmc_grid_co_fraction(const polmc_grid *grid, uint32_t radius_bin, int circular,
                                    double *values, size_t length) {
  POLMC_REQUIRE(grid);
  POLMC_REQUIRE(values);
  if (radius_bin >= grid->value.n_radius()) return fail(POLMC_ERR_RANGE, "radius bin out of range");
  if (length != grid->value.n_depth())
    return fail(POLMC_ERR_RANGE, "buffer must hold one value per depth bin");
  return guard([&] {
    const auto f = polmc::co_polarized_fraction(grid->value, radius_bin, circular != 0);
    std::copy(f.begin(), f.end(), values);
    return POLMC_OK;
  });
}

void polmc_grid_free(polmc_grid *grid) { delete grid; }

polmc_status polmc_mie_table_build(const polmc_config *config, int n_theta,
                                   polmc_mie_table **out) {
  POLMC_REQUIRE(config);
  POLMC_REQUIRE(out);
  return guard([&] {
    config->value.medium.validate();
    *out = new polmc_mie_table{
        polmc::build_mie_table(config->value.medium, config->value.wavelength, n_theta)};
    return POLMC_OK;
  });
}

polmc_status polmc_mie_table_info(const polmc_mie_table *table, polmc_mie_info *out) {
  POLMC_REQUIRE(table);
  POLMC_REQUIRE(out);
  const auto &t = table->value;
  *out = {t.size_param(),
          t.rel_index().real(),
          t.rel_index().imag(),
          t.q_ext(),
          t.q_sca(),
          t.asymmetry(),
          t.phase_norm(),
          t.mu_s(),
          static_cast<uint32_t>(t.coefficients().n_max()),
          static_cast<uint32_t>(t.size())};
  return POLMC_OK;
}

polmc_status polmc_mie_table_row(const polmc_mie_table *table, size_t i, double row[7]) {
  POLMC_REQUIRE(table);
  POLMC_REQUIRE(row);
  const auto &t = table->value;
  if (i >= static_cast<size_t>(t.size())) return fail(POLMC_ERR_RANGE, "row index out of range");
  row[0] = t.theta()[i];
  row[1] = t.s11()[i];
  row[2] = t.s12()[i];
  row[3] = t.s1()[i].real();
  row[4] = t.s1()[i].imag();
  row[5] = t.s2()[i].real();
  row[6] = t.s2()[i].imag();
  return POLMC_OK;
}

void polmc_mie_table_free(polmc_mie_table *table) { delete table; }

polmc_status polmc_validate_reflectance(const polmc_config *base, const double *angles_deg,
                                        size_t n, polmc_reflectance_row *rows) {
  POLMC_REQUIRE(base);
  POLMC_REQUIRE(angles_deg);
  POLMC_REQUIRE(rows);
  return guard([&] {
    const std::vector<double> angles(angles_deg, angles_deg + n);
    const auto out = polmc::validate_reflectance(base->value, angles);
    for (size_t i = 0; i < out.size(); ++i)
      rows[i] = {out[i].theta_deg, out[i].r_theory, out[i].r_sim, out[i].sim_stderr};
    return POLMC_OK;
  });
}

polmc_status polmc_dataset_generate(const polmc_config *base, const char *ranges,
                                    uint32_t n_samples, uint64_t seed, uint32_t feature_rows,
                                    uint32_t feature_cols, polmc_dataset **out,
                                    uint32_t *failed) {
  POLMC_REQUIRE(base);
  POLMC_REQUIRE(ranges);
  POLMC_REQUIRE(out);
  return guard([&] {
    polmc::SweepSpec spec;
    spec.base = base->value;
    spec.ranges = parse_ranges(ranges);
    spec.n_samples = n_samples;
    spec.seed = seed;
    if (feature_rows) spec.features.rows = feature_rows;
    if (feature_cols) spec.features.cols = feature_cols;
    polmc::SweepReport report;
    auto data = polmc::sweep(spec, &report);
    if (failed) *failed = report.failed;
    if (data.size() == 0)
      throw polmc::RuntimeError("every sample failed" +
                                (report.failures.empty() ? std::string()
                                                         : ": " + report.failures.front()));
    *out = new polmc_dataset{std::move(data)};
    return POLMC_OK;
  });
}

polmc_status polmc_dataset_read_file(const char *path, polmc_dataset **out) {
  POLMC_REQUIRE(path);
  POLMC_REQUIRE(out);
  return guard([&] {
    *out = new polmc_dataset{polmc::Dataset::read_file(path)};
    return POLMC_OK;
  });
}

polmc_status polmc_dataset_write_file(const polmc_dataset *data, const char *path) {
  POLMC_REQUIRE(data);
  POLMC_REQUIRE(path);
  return guard([&] {
    data->value.write_file(path);
    return POLMC_OK;
  });
}

polmc_status polmc_dataset_write_csv(const polmc_dataset *data, const char *path) {
  POLMC_REQUIRE(data);
  POLMC_REQUIRE(path);
  return guard([&] {
    polmc::io::atomic_write(
        path, [&](std::ostream &o) { data->value.write_csv(o); }, false);
    return POLMC_OK;
  });
}

polmc_status polmc_dataset_size(const polmc_dataset *data, size_t *samples, size_t *features,
                                size_t *targets) {
  POLMC_REQUIRE(data);
  if (samples) *samples = data->value.size();
  if (features) *features = data->value.feature_length();
  if (targets) *targets = data->value.target_names.size();
  return POLMC_OK;
}

void polmc_dataset_free(polmc_dataset *data) { delete data; }

void polmc_train_options_default(polmc_train_options *out) {
  if (!out) return;
  const polmc::Architecture a;
  const polmc::TrainConfig t;
  *out = {t.epochs, t.steps, t.batch_size, t.seed, t.adam.base_lr, 0.7,
          a.width,  a.n_blocks, a.latent_dim, a.variational ? 1 : 0};
}

polmc_status polmc_train(const polmc_dataset *data, const polmc_train_options *options,
                         const char *loss_csv_path, polmc_model **out,
                         polmc_train_report *report) {
  POLMC_REQUIRE(data);
  POLMC_REQUIRE(options);
  POLMC_REQUIRE(out);
  return guard([&] {
    const auto &d = data->value;
    if (d.size() < 2) throw polmc::ValidationError("dataset needs at least two samples");
    auto [tr, te] = polmc::split(d, options->train_fraction, options->seed);
    if (te.size() == 0) throw polmc::ValidationError("split left no validation samples");
    polmc::Model m;
    m.features = polmc::fit_feature_normalization(tr);
    m.targets = polmc::fit_target_normalization(tr);
    m.feature_spec = d.feature_spec;
    m.grid_geometry = d.grid_geometry;
    m.target_names = d.target_names;
    m.reference_photons = d.photons_per_sample;
    polmc::Architecture arch;
    arch.input_dim = static_cast<std::uint32_t>(d.feature_length());
    arch.output_dim = static_cast<std::uint32_t>(d.target_names.size());
    arch.width = options->width;
    arch.n_blocks = options->n_blocks;
    arch.latent_dim = options->latent_dim;
    arch.variational = options->variational != 0;
    m.net = polmc::Network(arch, options->seed);
    polmc::TrainConfig tc;
    tc.steps = options->steps;
    tc.epochs = options->epochs;
    tc.batch_size = options->batch_size;
    tc.seed = options->seed;
    tc.adam.base_lr = options->learning_rate;
    const auto trb = polmc::make_batch(tr, m.features, m.targets);
    const auto teb = polmc::make_batch(te, m.features, m.targets);
    const auto curves = polmc::train(m.net, trb, teb, tc);
    if (loss_csv_path)
      polmc::io::atomic_write(
          loss_csv_path, [&](std::ostream &o) { curves.write_csv(o); }, false);
    if (report) {
      double mae = 0.0;
      for (const auto &s : te.samples)
        mae += std::abs(polmc::infer_features(m, s.features).values.front() - s.target.front());
      *report = {curves.validation.front(),
                 curves.validation.back(),
                 curves.best_validation,
                 curves.best_step,
                 curves.batch_loss.size(),
                 mae / static_cast<double>(te.size()),
                 tr.size(),
                 te.size()};
    }
    *out = new polmc_model{std::move(m)};
    return POLMC_OK;
  });
}

polmc_status polmc_model_read_file(const char *path, polmc_model **out) {
  POLMC_REQUIRE(path);
  POLMC_REQUIRE(out);
  return guard([&] {
    *out = new polmc_model{polmc::Model::read_file(path)};
    return POLMC_OK;
  });
}

polmc_status polmc_model_write_file(const polmc_model *model, const char *path) {
  POLMC_REQUIRE(model);
  POLMC_REQUIRE(path);
  return guard([&] {
    model->value.write_file(path);
    return POLMC_OK;
  });
}

polmc_status polmc_model_target_count(const polmc_model *model, size_t *out) {
  POLMC_REQUIRE(model);
  POLMC_REQUIRE(out);
  *out = model->value.target_names.size();
  return POLMC_OK;
}

polmc_status polmc_model_target_name(const polmc_model *model, size_t i, const char **out) {
  POLMC_REQUIRE(model);
  POLMC_REQUIRE(out);
  if (i >= model->value.target_names.size()) return fail(POLMC_ERR_RANGE, "target index out of range");
  *out = model->value.target_names[i].c_str();
  return POLMC_OK;
}

polmc_status polmc_infer(const polmc_model *model, const polmc_grid *grid, double launched,
                         double *values, size_t length) {
  POLMC_REQUIRE(model);
  POLMC_REQUIRE(grid);
  POLMC_REQUIRE(values);
  return guard([&] {
    const auto p = polmc::infer(model->value, grid->value, launched);
    if (length != p.values.size())
      return fail(POLMC_ERR_RANGE, "output buffer needs " + std::to_string(p.values.size()) +
                                       " values");
    std::copy(p.values.begin(), p.values.end(), values);
    return POLMC_OK;
  });
}

void polmc_model_free(polmc_model *model) { delete model; }

void polmc_pipeline_options_default(polmc_pipeline_options *out) {
  if (!out) return;
  const auto c = polmc::default_pipeline_config();
  *out = {c.sweep.n_samples,
          c.sweep.base.n_photons,
          c.training.steps,
          c.training.batch_size,
          c.seed,
          c.sweep.ranges.front().lo,
          c.sweep.ranges.front().hi,
          0,
          nullptr};
}

namespace {

polmc::PipelineConfig to_pipeline(const polmc_pipeline_options &o) {
  auto c = polmc::default_pipeline_config();
  c.sweep.n_samples = o.n_samples;
  c.sweep.base.n_photons = o.photons;
  c.sweep.base.n_workers = o.workers;
  c.sweep.seed = o.seed;
  c.sweep.ranges.front().lo = o.lo;
  c.sweep.ranges.front().hi = o.hi;
  c.training.steps = o.steps;
  c.training.batch_size = o.batch_size;
  c.training.seed = o.seed;
  c.seed = o.seed;
  c.probe_value = 0.5 * (o.lo + o.hi);
  if (o.out_dir) c.out_dir = o.out_dir;
  return c;
}

} // namespace

polmc_status polmc_pipeline_plan(const polmc_pipeline_options *options, char **out) {
  POLMC_REQUIRE(options);
  POLMC_REQUIRE(out);
  return guard([&] {
    std::string text;
    for (const auto &line : polmc::pipeline_plan(to_pipeline(*options))) text += line + "\n";
    *out = dup_string(text);
    return POLMC_OK;
  });
}

polmc_status polmc_pipeline_run(const polmc_pipeline_options *options,
                                void (*log)(const char *line, void *user), void *user,
                                polmc_pipeline_report *report) {
  POLMC_REQUIRE(options);
  return guard([&] {
    std::function<void(const std::string &)> sink;
    if (log) sink = [&](const std::string &s) { log(s.c_str(), user); };
    const auto r = polmc::end_to_end(to_pipeline(*options), sink);
    if (report) {
      double secs = 0.0;
      for (const auto &s : r.stage_seconds) secs += s.second;
      *report = {r.heldout_mae,  r.curves.validation.front(), r.curves.validation.back(),
                 r.probe_truth, r.probe_prediction,          secs};
    }
    return POLMC_OK;
  });
}

} // extern "C"
