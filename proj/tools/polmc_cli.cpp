// polmc command-line driver. Logs go to stderr, data goes to files.

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "polmc/polmc.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kValidation = 2, kRuntime = 3 };

struct Failure {
  int code;
  std::string message;
};

int exit_code_for(polmc_status s) {
  switch (s) {
  case POLMC_OK: return kOk;
  case POLMC_ERR_VALIDATION:
  case POLMC_ERR_FORMAT:
  case POLMC_ERR_NULL:
  case POLMC_ERR_RANGE: return kValidation;
  default: return kRuntime;
  }
}

void check(polmc_status s, const std::string &what) {
  if (s != POLMC_OK) throw Failure{exit_code_for(s), what + ": " + polmc_last_error()};
}

int verbosity = 1;

void log(const std::string &line) {
  if (verbosity > 0) std::cerr << line << '\n';
}

// Fails before any work if the file cannot be created in its directory.
void require_writable_file(const std::string &path) {
  fs::path dir = fs::path(path).parent_path();
  if (dir.empty()) dir = ".";
  if (!fs::is_directory(dir) || ::access(dir.c_str(), W_OK) != 0)
    throw Failure{kValidation, "output directory '" + dir.string() + "' is not writable"};
}

void require_writable_dir(const std::string &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir) || ::access(dir.c_str(), W_OK) != 0)
    throw Failure{kValidation, "output directory '" + dir + "' is not writable"};
}

void write_text(const std::string &path, const std::string &body) {
  const std::string tmp = path + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << body;
    if (!out) throw Failure{kRuntime, "cannot write '" + path + "'"};
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Failure{kRuntime, "cannot rename onto '" + path + "': " + ec.message()};
}

template <class T, void (*Free)(T *)> struct Handle {
  T *p = nullptr;
  Handle() = default;
  Handle(const Handle &) = delete;
  Handle &operator=(const Handle &) = delete;
  ~Handle() {
    if (p) Free(p);
  }
  T **out() { return &p; }
  T *get() const { return p; }
};

using Config = Handle<polmc_config, polmc_config_free>;
using Result = Handle<polmc_result, polmc_result_free>;
using Grid = Handle<polmc_grid, polmc_grid_free>;
using Table = Handle<polmc_mie_table, polmc_mie_table_free>;
using Data = Handle<polmc_dataset, polmc_dataset_free>;
using ModelHandle = Handle<polmc_model, polmc_model_free>;

std::string take_string(char *s) {
  std::string out = s ? s : "";
  polmc_string_free(s);
  return out;
}

// Shared config options: --config plus overrides.
struct ConfigArgs {
  std::string path;
  std::vector<std::string> sets;
  long long photons = -1;
  long long workers = -1;

  void add(CLI::App *app, bool required) {
    auto *o = app->add_option("-c,--config", path, "simulation config JSON");
    if (required) o->required();
    o->check(CLI::ExistingFile);
    app->add_option("--set", sets, "JSON object of config overrides (repeatable)");
    app->add_option("--photons", photons, "number of photons");
    app->add_option("--workers", workers, "worker threads (0 = all cores)");
  }

  void load(Config &c, bool have_seed, unsigned long long seed) const {
    if (path.empty())
      check(polmc_config_default(c.out()), "config");
    else
      check(polmc_config_from_file(path.c_str(), c.out()), "config '" + path + "'");
    for (const auto &s : sets) check(polmc_config_apply_json(c.get(), s.c_str()), "--set");
    if (photons >= 0) check(polmc_config_set_photons(c.get(), photons), "--photons");
    if (workers >= 0) check(polmc_config_set_workers(c.get(), workers), "--workers");
    if (have_seed) check(polmc_config_set_seed(c.get(), seed), "--seed");
    check(polmc_config_validate(c.get()), "config");
  }
};

int cmd_simulate(const ConfigArgs &ca, bool have_seed, unsigned long long seed,
                 const std::string &out_dir, bool csv) {
  if (ca.photons == 0) throw Failure{kValidation, "--photons must be at least 1"};
  Config cfg;
  ca.load(cfg, have_seed, seed);
  require_writable_dir(out_dir);
  log("simulating...");
  Result res;
  check(polmc_simulate(cfg.get(), res.out()), "simulate");
  Grid exit_grid, partial_grid;
  check(polmc_result_grid(res.get(), 0, exit_grid.out()), "grid");
  check(polmc_result_grid(res.get(), 1, partial_grid.out()), "grid");
  const std::string g0 = (fs::path(out_dir) / "grid.polg").string();
  const std::string g1 = (fs::path(out_dir) / "partial.polg").string();
  check(polmc_grid_write_file(exit_grid.get(), g0.c_str()), "write grid");
  check(polmc_grid_write_file(partial_grid.get(), g1.c_str()), "write grid");
  if (csv) {
    check(polmc_grid_write_csv(exit_grid.get(), (fs::path(out_dir) / "grid.csv").c_str()), "csv");
    check(polmc_grid_write_csv(partial_grid.get(), (fs::path(out_dir) / "partial.csv").c_str()),
          "csv");
  }
  char *summary = nullptr;
  check(polmc_result_summary_json(res.get(), &summary), "summary");
  json s = json::parse(take_string(summary));
  char *cfg_json = nullptr;
  check(polmc_config_to_json(cfg.get(), &cfg_json), "config");
  s["config"] = json::parse(take_string(cfg_json));
  uint64_t checksum = 0, hash = 0;
  check(polmc_grid_checksum(exit_grid.get(), &checksum), "checksum");
  check(polmc_config_hash(cfg.get(), &hash), "hash");
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(checksum));
  s["grid_checksum"] = hex;
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
  s["config_hash"] = hex;
  write_text((fs::path(out_dir) / "summary.json").string(), s.dump(2) + "\n");
  polmc_ledger l{};
  check(polmc_result_ledger(res.get(), &l), "ledger");
  std::ostringstream msg;
  msg << "launched " << l.launched << ", top " << l.detected_top << ", bottom "
      << l.detected_bottom << ", absorbed " << l.absorbed << ", terminated " << l.terminated
      << "; grid checksum " << s["grid_checksum"].get<std::string>();
  log(msg.str());
  return kOk;
}

int cmd_mietable(const ConfigArgs &ca, bool have_seed, unsigned long long seed, int n_theta,
                 const std::string &out) {
  Config cfg;
  ca.load(cfg, have_seed, seed);
  require_writable_file(out);
  Table t;
  check(polmc_mie_table_build(cfg.get(), n_theta, t.out()), "mietable");
  polmc_mie_info info{};
  check(polmc_mie_table_info(t.get(), &info), "mietable");
  json h = {{"x", info.size_param},
            {"m", {info.rel_index_re, info.rel_index_im}},
            {"q_sca", info.q_sca},
            {"q_ext", info.q_ext},
            {"g", info.asymmetry},
            {"phase_norm", info.phase_norm},
            {"mu_s", info.mu_s},
            {"n_terms", info.n_terms},
            {"n_theta", info.n_theta},
            {"columns", {"theta_deg", "re_s1", "im_s1", "re_s2", "im_s2", "s11", "s12"}}};
  std::ostringstream csv;
  csv.precision(17);
  csv << "theta_deg,re_s1,im_s1,re_s2,im_s2,s11,s12\n";
  double row[7];
  for (size_t i = 0; i < info.n_theta; ++i) {
    check(polmc_mie_table_row(t.get(), i, row), "mietable");
    csv << row[0] * 180.0 / M_PI << ',' << row[3] << ',' << row[4] << ',' << row[5] << ','
        << row[6] << ',' << row[1] << ',' << row[2] << '\n';
  }
  write_text(out, csv.str());
  write_text(out + ".json", h.dump(2) + "\n");
  log("wrote " + out + " and " + out + ".json");
  return kOk;
}

std::vector<double> parse_list(const std::string &text, const char *what) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char *end = nullptr;
    errno = 0;
    const double x = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0' || errno != 0 || !std::isfinite(x))
      throw Failure{kValidation, std::string(what) + ": '" + item + "' is not a number"};
    v.push_back(x);
  }
  if (v.empty()) throw Failure{kValidation, std::string(what) + " is empty"};
  return v;
}

int cmd_validate(const ConfigArgs &ca, bool have_seed, unsigned long long seed,
                 const std::string &angles, const std::string &out) {
  Config cfg;
  ca.load(cfg, have_seed, seed);
  const auto a = parse_list(angles, "--angles");
  require_writable_file(out);
  std::vector<polmc_reflectance_row> rows(a.size());
  log("running reflectance validation at " + std::to_string(a.size()) + " angle(s)...");
  check(polmc_validate_reflectance(cfg.get(), a.data(), a.size(), rows.data()), "validate");
  std::ostringstream csv;
  csv.precision(17);
  csv << "theta_deg,R_theory,R_sim,stderr\n";
  for (const auto &r : rows) {
    csv << r.theta_deg << ',' << r.r_theory << ',' << r.r_sim << ',' << r.std_error << '\n';
    std::ostringstream m;
    m << "theta " << r.theta_deg << " deg: theory " << r.r_theory << ", simulated " << r.r_sim
      << " +/- " << r.std_error;
    log(m.str());
  }
  write_text(out, csv.str());
  return kOk;
}

int cmd_dataset(const ConfigArgs &ca, bool have_seed, unsigned long long seed,
                const std::string &ranges, unsigned samples, unsigned rows, unsigned cols,
                const std::string &out, bool csv) {
  Config cfg;
  ca.load(cfg, false, 0);
  require_writable_file(out);
  log("generating " + std::to_string(samples) + " samples...");
  Data d;
  uint32_t failed = 0;
  check(polmc_dataset_generate(cfg.get(), ranges.c_str(), samples, have_seed ? seed : 1, rows,
                               cols, d.out(), &failed),
        "dataset");
  if (failed) log("warning: " + std::to_string(failed) + " sample(s) failed and were skipped");
  check(polmc_dataset_write_file(d.get(), out.c_str()), "write dataset");
  if (csv) check(polmc_dataset_write_csv(d.get(), (out + ".csv").c_str()), "write dataset csv");
  size_t n = 0, f = 0, t = 0;
  polmc_dataset_size(d.get(), &n, &f, &t);
  log("wrote " + out + ": " + std::to_string(n) + " samples, " + std::to_string(f) +
      " features, " + std::to_string(t) + " target(s)");
  return kOk;
}

struct TrainArgs {
  std::string dataset, out, loss;
  unsigned epochs = 0;
  unsigned long long steps = 0;
  unsigned batch = 32;
  double lr = 1e-3;
  unsigned width = 64, blocks = 3, latent = 16;
  bool variational = false;
};

int cmd_train(const TrainArgs &a, bool have_seed, unsigned long long seed) {
  if (a.epochs == 0 && a.steps == 0) throw Failure{kUsage, "give --epochs or --steps"};
  require_writable_file(a.out);
  const std::string loss = a.loss.empty() ? a.out + ".loss.csv" : a.loss;
  require_writable_file(loss);
  Data d;
  check(polmc_dataset_read_file(a.dataset.c_str(), d.out()), "dataset '" + a.dataset + "'");
  polmc_train_options o;
  polmc_train_options_default(&o);
  o.epochs = a.epochs;
  o.steps = a.steps;
  o.batch_size = a.batch;
  o.seed = have_seed ? seed : 0;
  o.learning_rate = a.lr;
  o.width = a.width;
  o.n_blocks = a.blocks;
  o.latent_dim = a.latent;
  o.variational = a.variational;
  ModelHandle m;
  polmc_train_report r{};
  log("training...");
  check(polmc_train(d.get(), &o, loss.c_str(), m.out(), &r), "train");
  check(polmc_model_write_file(m.get(), a.out.c_str()), "write model");
  std::ostringstream msg;
  msg << r.steps << " steps on " << r.train_samples << " samples; validation loss "
      << r.initial_validation << " -> " << r.final_validation << " (best " << r.best_validation
      << " at step " << r.best_step << "); held-out MAE " << r.heldout_mae;
  log(msg.str());
  return kOk;
}

int cmd_infer(const std::string &model, const std::string &grid, double launched,
              const std::string &out) {
  if (!out.empty()) require_writable_file(out);
  ModelHandle m;
  check(polmc_model_read_file(model.c_str(), m.out()), "model '" + model + "'");
  Grid g;
  check(polmc_grid_read_file(grid.c_str(), g.out()), "grid '" + grid + "'");
  size_t n = 0;
  check(polmc_model_target_count(m.get(), &n), "model");
  std::vector<double> v(n);
  check(polmc_infer(m.get(), g.get(), launched, v.data(), n), "infer");
  json j = json::object();
  for (size_t i = 0; i < n; ++i) {
    const char *name = nullptr;
    check(polmc_model_target_name(m.get(), i, &name), "model");
    j[name] = v[i];
    std::ostringstream line;
    line.precision(10);
    line << name << " = " << v[i];
    log(line.str());
  }
  if (!out.empty()) write_text(out, j.dump(2) + "\n");
  return kOk;
}

// Checks a numeric CSV with one header line; reports the byte offset of the
// first bad field.
std::vector<std::vector<double>> read_numeric_csv(const std::string &path,
                                                  std::vector<std::string> &header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kValidation, "cannot open '" + path + "'"};
  std::string text((std::istreambuf_iterator<char>(in)), {});
  std::vector<std::vector<double>> rows;
  size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first) {
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) header.push_back(cell);
      if (header.empty())
        throw Failure{kValidation, "'" + path + "': missing header (at byte offset 0)"};
      first = false;
    } else if (!line.empty()) {
      std::vector<double> row;
      size_t start = 0;
      while (true) {
        size_t comma = line.find(',', start);
        const std::string cell =
            line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        char *end = nullptr;
        const double x = std::strtod(cell.c_str(), &end);
        if (cell.empty() || *end != '\0')
          throw Failure{kValidation, "'" + path + "': bad number '" + cell +
                                         "' (at byte offset " + std::to_string(pos + start) + ")"};
        row.push_back(x);
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      if (row.size() != header.size())
        throw Failure{kValidation, "'" + path + "': row has " + std::to_string(row.size()) +
                                       " fields, header has " + std::to_string(header.size()) +
                                       " (at byte offset " + std::to_string(pos) + ")"};
      rows.push_back(std::move(row));
    }
    pos = eol + 1;
  }
  if (first) throw Failure{kValidation, "'" + path + "' is empty (at byte offset 0)"};
  return rows;
}

int cmd_plot(const std::string &grid_path, const std::string &csv_path,
             const std::vector<std::string> &channels, unsigned radius_bin,
             const std::string &out_dir) {
  if (grid_path.empty() == csv_path.empty())
    throw Failure{kUsage, "give exactly one of --grid or --csv"};
  require_writable_dir(out_dir);
  if (!csv_path.empty()) {
    std::vector<std::string> header;
    const auto rows = read_numeric_csv(csv_path, header);
    json side = {{"source", csv_path}, {"rows", rows.size()}, {"columns", json::array()}};
    std::ostringstream csv;
    csv.precision(17);
    for (size_t c = 0; c < header.size(); ++c) csv << header[c] << (c + 1 == header.size() ? '\n' : ',');
    for (const auto &r : rows)
      for (size_t c = 0; c < r.size(); ++c) csv << r[c] << (c + 1 == r.size() ? '\n' : ',');
    for (size_t c = 0; c < header.size(); ++c) {
      double lo = INFINITY, hi = -INFINITY;
      for (const auto &r : rows) {
        if (std::isfinite(r[c])) {
          lo = std::min(lo, r[c]);
          hi = std::max(hi, r[c]);
        }
      }
      side["columns"].push_back(
          {{"name", header[c]}, {"min", rows.empty() ? 0.0 : lo}, {"max", rows.empty() ? 0.0 : hi}});
    }
    const std::string stem = fs::path(csv_path).stem().string();
    write_text((fs::path(out_dir) / (stem + ".curve.csv")).string(), csv.str());
    write_text((fs::path(out_dir) / (stem + ".curve.json")).string(), side.dump(2) + "\n");
    log("wrote curve " + stem + ".curve.csv");
    return kOk;
  }

  Grid g;
  check(polmc_grid_read_file(grid_path.c_str(), g.out()), "grid '" + grid_path + "'");
  uint32_t nr = 0, nd = 0;
  double rw = 0, dw = 0;
  polmc_grid_dims(g.get(), &nr, &nd, &rw, &dw);
  if (radius_bin >= nr) throw Failure{kValidation, "--radius-bin out of range"};
  json side = {{"source", grid_path},
               {"rows", nd},
               {"cols", nr},
               {"row_axis", "depth"},
               {"col_axis", "radius"},
               {"depth_bin_width_um", dw},
               {"radius_bin_width_um", rw},
               {"format", "P5, 8-bit"},
               {"scaling", "pixel = round(255 (v - min) / (max - min)); all 0 when max == min"},
               {"images", json::array()}};
  for (const auto &ch : channels) {
    const std::string name = "bscan_" + ch + ".pgm";
    double lo = 0, hi = 0;
    check(polmc_grid_write_pgm(g.get(), ch.c_str(), (fs::path(out_dir) / name).c_str(), &lo, &hi),
          "plot channel '" + ch + "'");
    side["images"].push_back({{"file", name}, {"channel", ch}, {"min", lo}, {"max", hi}});
    log("wrote " + name);
  }
  std::vector<double> lin(nd), circ(nd);
  check(polmc_grid_co_fraction(g.get(), radius_bin, 0, lin.data(), nd), "co fraction");
  check(polmc_grid_co_fraction(g.get(), radius_bin, 1, circ.data(), nd), "co fraction");
  std::ostringstream csv;
  csv.precision(17);
  csv << "depth_um,co_linear_fraction,co_circular_fraction\n";
  for (uint32_t d = 0; d < nd; ++d)
    csv << (d + 0.5) * dw << ',' << lin[d] << ',' << circ[d] << '\n';
  write_text((fs::path(out_dir) / "co_fraction.csv").string(), csv.str());
  side["profile"] = {{"file", "co_fraction.csv"}, {"radius_bin", radius_bin}};
  write_text((fs::path(out_dir) / "plot.json").string(), side.dump(2) + "\n");
  return kOk;
}

struct PipelineArgs {
  unsigned samples = 64;
  unsigned long long photons = 20000;
  unsigned long long steps = 3000;
  unsigned batch = 32;
  double lo = 1.1, hi = 1.5;
  unsigned workers = 0;
  std::string out_dir;
  bool dry_run = false;
};

void pipeline_log(const char *line, void *) { log(line); }

int cmd_pipeline(const PipelineArgs &a, bool have_seed, unsigned long long seed) {
  polmc_pipeline_options o;
  polmc_pipeline_options_default(&o);
  o.n_samples = a.samples;
  o.photons = a.photons;
  o.steps = a.steps;
  o.batch_size = a.batch;
  if (have_seed) o.seed = seed;
  o.lo = a.lo;
  o.hi = a.hi;
  o.workers = a.workers;
  o.out_dir = a.out_dir.empty() ? nullptr : a.out_dir.c_str();
  if (a.dry_run) {
    char *plan = nullptr;
    check(polmc_pipeline_plan(&o, &plan), "plan");
    std::cerr << "dry run, nothing will be written:\n" << take_string(plan);
    return kOk;
  }
  if (!a.out_dir.empty()) require_writable_dir(a.out_dir);
  polmc_pipeline_report r{};
  check(polmc_pipeline_run(&o, pipeline_log, nullptr, &r), "pipeline");
  std::ostringstream msg;
  msg.precision(6);
  msg << "validation loss " << r.initial_validation << " -> " << r.final_validation
      << "; held-out MAE " << r.heldout_mae << "; probe " << r.probe_truth << " predicted "
      << r.probe_prediction << "; " << r.seconds << " s";
  log(msg.str());
  return kOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Polarized light Monte Carlo for PS-OCT and inverse property estimation"};
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress progress messages");

  unsigned long long seed = 0;
  auto add_seed = [&](CLI::App *c) { return c->add_option("--seed", seed, "random seed"); };

  ConfigArgs ca;

  auto *sim = app.add_subcommand("simulate", "run the photon transport and write grids");
  ca.add(sim, true);
  auto *sim_seed = add_seed(sim);
  std::string sim_out = ".";
  bool sim_csv = false;
  sim->add_option("-o,--out", sim_out, "output directory")->required();
  sim->add_flag("--csv", sim_csv, "also write grids as CSV");

  ConfigArgs ca_mie;
  auto *mie = app.add_subcommand("mietable", "dump the scattering table as CSV");
  ca_mie.add(mie, false);
  auto *mie_seed = add_seed(mie);
  int n_theta = 1801;
  std::string mie_out;
  mie->add_option("--n-theta", n_theta, "angular grid points (odd, >= 1801)");
  mie->add_option("-o,--out", mie_out, "CSV path")->required();

  ConfigArgs ca_val;
  auto *val = app.add_subcommand("validate", "simulated vs theoretical specular reflectance");
  ca_val.add(val, false);
  auto *val_seed = add_seed(val);
  std::string angles = "0", val_out;
  val->add_option("--angles", angles, "comma-separated incidence angles in degrees");
  val->add_option("-o,--out", val_out, "CSV path")->required();

  ConfigArgs ca_ds;
  auto *ds = app.add_subcommand("dataset", "sweep properties and write a training set");
  ca_ds.add(ds, true);
  auto *ds_seed = add_seed(ds);
  std::string ranges = "n_particle:1.1:1.5", ds_out;
  unsigned samples = 64, rows = 16, cols = 16;
  bool ds_csv = false;
  ds->add_option("--ranges", ranges, "name:lo:hi[,name:lo:hi...]");
  ds->add_option("--samples", samples, "number of samples");
  ds->add_option("--rows", rows, "feature rows (depth)");
  ds->add_option("--cols", cols, "feature columns (radius)");
  ds->add_option("-o,--out", ds_out, "dataset path")->required();
  ds->add_flag("--csv", ds_csv, "also write a CSV copy");

  TrainArgs ta;
  auto *tr = app.add_subcommand("train", "train the regression network");
  auto *tr_seed = add_seed(tr);
  tr->add_option("--dataset", ta.dataset, "dataset file")->required()->check(CLI::ExistingFile);
  tr->add_option("--epochs", ta.epochs, "epochs (used when --steps is 0)");
  tr->add_option("--steps", ta.steps, "optimizer steps");
  tr->add_option("--batch", ta.batch, "mini-batch size");
  tr->add_option("--lr", ta.lr, "base learning rate");
  tr->add_option("--width", ta.width, "hidden width");
  tr->add_option("--blocks", ta.blocks, "residual blocks");
  tr->add_option("--latent", ta.latent, "latent width");
  tr->add_flag("--variational", ta.variational, "variational latent layer");
  tr->add_option("-o,--out", ta.out, "model path")->required();
  tr->add_option("--loss", ta.loss, "loss-curve CSV (default <out>.loss.csv)");

  std::string inf_model, inf_grid, inf_out;
  double launched = 0.0;
  auto *inf = app.add_subcommand("infer", "predict properties from a detector grid");
  add_seed(inf);
  inf->add_option("--model", inf_model, "model file")->required()->check(CLI::ExistingFile);
  inf->add_option("--grid", inf_grid, "grid file")->required()->check(CLI::ExistingFile);
  inf->add_option("--launched", launched, "photons behind the grid (default: training count)");
  inf->add_option("-o,--out", inf_out, "JSON output path");

  std::string plot_grid, plot_csv, plot_out;
  std::vector<std::string> plot_channels{"pxx", "pxy", "ppp", "ppm"};
  unsigned radius_bin = 0;
  auto *plot = app.add_subcommand("plot", "write B-scan graymaps and curve CSVs");
  add_seed(plot);
  plot->add_option("--grid", plot_grid, "grid file")->check(CLI::ExistingFile);
  plot->add_option("--csv", plot_csv, "curve CSV to check and re-emit")->check(CLI::ExistingFile);
  plot->add_option("--channels", plot_channels, "channels to render");
  plot->add_option("--radius-bin", radius_bin, "column for the depth profile");
  plot->add_option("-o,--out", plot_out, "output directory")->required();

  PipelineArgs pa;
  auto *pipe = app.add_subcommand("pipeline", "simulate, build a dataset, train and infer");
  auto *pipe_seed = add_seed(pipe);
  pipe->add_option("--samples", pa.samples, "sweep size");
  pipe->add_option("--photons", pa.photons, "photons per sample");
  pipe->add_option("--steps", pa.steps, "training steps");
  pipe->add_option("--batch", pa.batch, "mini-batch size");
  pipe->add_option("--lo", pa.lo, "lowest particle index");
  pipe->add_option("--hi", pa.hi, "highest particle index");
  pipe->add_option("--workers", pa.workers, "worker threads (0 = all cores)");
  pipe->add_option("-o,--out", pa.out_dir, "output directory");
  pipe->add_flag("--dry-run", pa.dry_run, "print the plan and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kUsage;
  }
  verbosity = quiet ? 0 : 1;

  try {
    if (*sim) return cmd_simulate(ca, (sim_seed->count() > 0), seed, sim_out, sim_csv);
    if (*mie) return cmd_mietable(ca_mie, (mie_seed->count() > 0), seed, n_theta, mie_out);
    if (*val) return cmd_validate(ca_val, (val_seed->count() > 0), seed, angles, val_out);
    if (*ds) return cmd_dataset(ca_ds, (ds_seed->count() > 0), seed, ranges, samples, rows, cols, ds_out, ds_csv);
    if (*tr) return cmd_train(ta, (tr_seed->count() > 0), seed);
    if (*inf) return cmd_infer(inf_model, inf_grid, launched, inf_out);
    if (*plot) return cmd_plot(plot_grid, plot_csv, plot_channels, radius_bin, plot_out);
    if (*pipe) return cmd_pipeline(pa, (pipe_seed->count() > 0), seed);
  } catch (const Failure &f) {
    std::cerr << "error: " << f.message << '\n';
    return f.code;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
