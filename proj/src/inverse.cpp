#include "polmc/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <string_view>

#include "polmc/error.hpp"
#include "polmc/io.hpp"
#include "polmc/rng.hpp"

namespace polmc {

namespace nn {

void dense_forward(std::span<const double> w, std::span<const double> b,
                   std::span<const double> x, std::span<double> y) {
  const std::size_t in = x.size();
  const std::size_t out = y.size();
  if (w.size() != in * out || b.size() != out)
    throw ValidationError("dense layer shape mismatch");
  for (std::size_t o = 0; o < out; ++o) {
    const double *row = w.data() + o * in;
    double acc = b[o];
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void dense_backward(std::span<const double> w, std::span<const double> x,
                    std::span<const double> dy, std::span<double> dw, std::span<double> db,
                    std::span<double> dx) {
  const std::size_t in = x.size();
  const std::size_t out = dy.size();
  for (std::size_t o = 0; o < out; ++o) {
    const double g = dy[o];
    db[o] += g;
    if (g == 0.0) continue;
    double *row = dw.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) row[i] += g * x[i];
  }
  if (dx.empty()) return;
  std::fill(dx.begin(), dx.end(), 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    const double g = dy[o];
    if (g == 0.0) continue;
    const double *row = w.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) dx[i] += g * row[i];
  }
}

void residual_block_forward(std::span<const double> w1, std::span<const double> b1,
                            std::span<const double> w2, std::span<const double> b2,
                            std::span<const double> h, std::span<double> hidden,
                            std::span<double> y) {
  dense_forward(w1, b1, h, hidden);
  for (double &v : hidden) v = activation(v);
  dense_forward(w2, b2, hidden, y);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += h[i];
}

void residual_block_backward(std::span<const double> w1, std::span<const double> w2,
                             std::span<const double> h, std::span<const double> hidden,
                             std::span<const double> dy, std::span<double> dw1,
                             std::span<double> db1, std::span<double> dw2, std::span<double> db2,
                             std::span<double> dh) {
  std::vector<double> dhidden(hidden.size());
  dense_backward(w2, hidden, dy, dw2, db2, dhidden);
  for (std::size_t i = 0; i < hidden.size(); ++i)
    dhidden[i] *= activation_derivative(hidden[i]);
  std::vector<double> dskip(h.size());
  dense_backward(w1, h, dhidden, dw1, db1, dskip);
  for (std::size_t i = 0; i < h.size(); ++i) dh[i] = dskip[i] + dy[i];
}

} // namespace nn

double l2_loss(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw ValidationError("l2_loss: length mismatch");
  if (pred.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

void l2_loss_gradient(std::span<const double> pred, std::span<const double> truth,
                      std::span<double> grad) {
  if (pred.size() != truth.size() || grad.size() != pred.size())
    throw ValidationError("l2_loss_gradient: length mismatch");
  const double s = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) grad[i] = s * (pred[i] - truth[i]);
}

void Architecture::validate() const {
  if (input_dim == 0 || width == 0 || latent_dim == 0 || output_dim == 0)
    throw ValidationError("architecture dimensions must be positive");
  if (!(kl_weight >= 0.0) || !std::isfinite(kl_weight))
    throw ValidationError("kl_weight must be finite and non-negative");
}

Network::Network(const Architecture &arch, std::uint64_t seed) : arch_(arch) {
  arch_.validate();
  std::size_t offset = 0;
  auto layer = [&](std::uint32_t in, std::uint32_t out) {
    Dense d{offset, in, out};
    offset += d.size();
    return d;
  };
  input_ = layer(arch_.input_dim, arch_.width);
  for (std::uint32_t k = 0; k < arch_.n_blocks; ++k) {
    blocks_.push_back(layer(arch_.width, arch_.width));
    blocks_.push_back(layer(arch_.width, arch_.width));
  }
  latent_ = layer(arch_.width, arch_.variational ? 2 * arch_.latent_dim : arch_.latent_dim);
  head_ = layer(arch_.latent_dim, arch_.output_dim);
  params_.assign(offset, 0.0);

  // Glorot-uniform weights, zero biases.
  RandomStream rng(mix_seed(seed, 0x6e6574), 0);
  auto init = [&](const Dense &d, double gain) {
    const double a = gain * std::sqrt(6.0 / (d.in + d.out));
    for (double &w : weights(d)) w = a * (2.0 * rng.uniform_closed_open() - 1.0);
  };
  init(input_, 1.0);
  for (std::size_t k = 0; k < blocks_.size(); ++k) init(blocks_[k], k % 2 ? 0.5 : 1.0);
  init(latent_, 1.0);
  init(head_, 1.0);
}

namespace {

struct Trace {
  std::vector<double> h0;                  // after input activation
  std::vector<std::vector<double>> hs;     // block inputs then final block output
  std::vector<std::vector<double>> hidden; // per block tanh output
  std::vector<double> latent_out;          // tanh output, or (mu, logvar)
  std::vector<double> z;
  std::vector<double> y;
};

} // namespace

namespace {

template <class Net>
void run_forward(const Net &net, std::span<const double> x, const double *eps, Trace &t) {
  const auto &a = net.architecture();
  auto p = net.parameters();
  auto w = [&](const Network::Dense &d) {
    return std::span<const double>(p.data() + d.offset, d.weight_count());
  };
  auto b = [&](const Network::Dense &d) {
    return std::span<const double>(p.data() + d.offset + d.weight_count(), d.out);
  };
  if (x.size() != a.input_dim)
    throw ValidationError("network input has length " + std::to_string(x.size()) +
                          ", expected " + std::to_string(a.input_dim));

  t.h0.assign(a.width, 0.0);
  nn::dense_forward(w(net.input_layer()), b(net.input_layer()), x, t.h0);
  for (double &v : t.h0) v = nn::activation(v);

  const auto &blocks = net.block_layers();
  t.hs.assign(a.n_blocks + 1, {});
  t.hidden.assign(a.n_blocks, std::vector<double>(a.width));
  t.hs[0] = t.h0;
  for (std::uint32_t k = 0; k < a.n_blocks; ++k) {
    const auto &f1 = blocks[2 * k];
    const auto &f2 = blocks[2 * k + 1];
    t.hs[k + 1].assign(a.width, 0.0);
    nn::residual_block_forward(w(f1), b(f1), w(f2), b(f2), t.hs[k], t.hidden[k], t.hs[k + 1]);
  }

  const auto &lat = net.latent_layer();
  t.latent_out.assign(lat.out, 0.0);
  nn::dense_forward(w(lat), b(lat), t.hs[a.n_blocks], t.latent_out);
  t.z.assign(a.latent_dim, 0.0);
  if (a.variational) {
    for (std::uint32_t j = 0; j < a.latent_dim; ++j) {
      const double mu = t.latent_out[j];
      const double lv = t.latent_out[a.latent_dim + j];
      t.z[j] = mu + (eps ? std::exp(0.5 * lv) * eps[j] : 0.0);
    }
  } else {
    for (double &v : t.latent_out) v = nn::activation(v);
    t.z = t.latent_out;
  }

  const auto &head = net.head_layer();
  t.y.assign(a.output_dim, 0.0);
  nn::dense_forward(w(head), b(head), t.z, t.y);
}

} // namespace

std::vector<double> Network::forward(std::span<const double> x) const {
  Trace t;
  run_forward(*this, x, nullptr, t);
  return t.y;
}

double Network::loss_and_gradient(const Batch &batch, std::vector<double> &grad,
                                  const std::vector<std::vector<double>> *noise) const {
  if (batch.size() == 0 || batch.y.size() != batch.size())
    throw ValidationError("batch must be nonempty with one target per input");
  if (arch_.variational && noise && noise->size() != batch.size())
    throw ValidationError("one noise vector per sample required");
  grad.assign(params_.size(), 0.0);
  auto gw = [&](const Dense &d) { return std::span<double>(grad.data() + d.offset, d.weight_count()); };
  auto gb = [&](const Dense &d) {
    return std::span<double>(grad.data() + d.offset + d.weight_count(), d.out);
  };
  auto w = [&](const Dense &d) {
    return std::span<const double>(params_.data() + d.offset, d.weight_count());
  };

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  Trace t;
  std::vector<double> dy(arch_.output_dim), dz(arch_.latent_dim), dlat(latent_.out),
      dh(arch_.width), dprev(arch_.width), dx0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const double *eps = nullptr;
    if (arch_.variational && noise) {
      if ((*noise)[s].size() != arch_.latent_dim) throw ValidationError("noise length mismatch");
      eps = (*noise)[s].data();
    }
    run_forward(*this, batch.x[s], eps, t);
    if (batch.y[s].size() != arch_.output_dim)
      throw ValidationError("target length does not match network output");
    total += l2_loss(t.y, batch.y[s]);
    l2_loss_gradient(t.y, batch.y[s], dy);
    for (double &g : dy) g *= inv_b;

    nn::dense_backward(w(head_), t.z, dy, gw(head_), gb(head_), dz);

    if (arch_.variational) {
      const double kw = arch_.kl_weight * inv_b;
      for (std::uint32_t j = 0; j < arch_.latent_dim; ++j) {
        const double mu = t.latent_out[j];
        const double lv = t.latent_out[arch_.latent_dim + j];
        const double e = eps ? eps[j] : 0.0;
        const double ev = std::exp(lv);
        total += arch_.kl_weight * -0.5 * (1.0 + lv - mu * mu - ev);
        dlat[j] = dz[j] + kw * mu;
        dlat[arch_.latent_dim + j] = dz[j] * 0.5 * std::exp(0.5 * lv) * e + kw * 0.5 * (ev - 1.0);
      }
    } else {
      for (std::uint32_t j = 0; j < arch_.latent_dim; ++j)
        dlat[j] = dz[j] * nn::activation_derivative(t.latent_out[j]);
    }
    nn::dense_backward(w(latent_), t.hs[arch_.n_blocks], dlat, gw(latent_), gb(latent_), dh);

    for (std::uint32_t k = arch_.n_blocks; k-- > 0;) {
      const auto &f1 = blocks_[2 * k];
      const auto &f2 = blocks_[2 * k + 1];
      nn::residual_block_backward(w(f1), w(f2), t.hs[k], t.hidden[k], dh, gw(f1), gb(f1), gw(f2),
                                  gb(f2), dprev);
      dh.swap(dprev);
    }
    for (std::uint32_t i = 0; i < arch_.width; ++i)
      dh[i] *= nn::activation_derivative(t.h0[i]);
    nn::dense_backward(w(input_), batch.x[s], dh, gw(input_), gb(input_), dx0);
  }
  return total * inv_b;
}

double Network::loss(const Batch &batch, const std::vector<std::vector<double>> *noise) const {
  if (batch.size() == 0) throw ValidationError("batch must be nonempty");
  double total = 0.0;
  Trace t;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const double *eps = arch_.variational && noise ? (*noise)[s].data() : nullptr;
    run_forward(*this, batch.x[s], eps, t);
    total += l2_loss(t.y, batch.y[s]);
    if (arch_.variational) {
      for (std::uint32_t j = 0; j < arch_.latent_dim; ++j) {
        const double mu = t.latent_out[j];
        const double lv = t.latent_out[arch_.latent_dim + j];
        total += arch_.kl_weight * -0.5 * (1.0 + lv - mu * mu - std::exp(lv));
      }
    }
  }
  return total / static_cast<double>(batch.size());
}

double AdamState::learning_rate_at(std::uint64_t step) const {
  if (config.anneal_every == 0) return config.base_lr;
  return config.base_lr *
         std::pow(config.anneal_factor, static_cast<double>(step / config.anneal_every));
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState &state) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    throw ValidationError("adam_step: length mismatch");
  const auto &c = state.config;
  const double lr = state.learning_rate();
  const double t = static_cast<double>(state.step_count + 1);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + c.epsilon);
  }
  ++state.step_count;
}

void LossCurves::write_csv(std::ostream &out) const {
  out << "step,train_loss,validation_loss,learning_rate\n";
  out.precision(17);
  for (std::size_t i = 0; i < step.size(); ++i) {
    const std::uint64_t s = step[i];
    const double lr = s < learning_rate.size() ? learning_rate[s]
                      : learning_rate.empty()  ? 0.0
                                               : learning_rate.back();
    out << s << ',' << train[i] << ',' << validation[i] << ',' << lr << '\n';
  }
}

LossCurves train(Network &net, const Batch &train_set, const Batch &validation_set,
                 const TrainConfig &config) {
  if (train_set.size() == 0 || validation_set.size() == 0)
    throw ValidationError("training and validation sets must be nonempty");
  if (config.batch_size == 0) throw ValidationError("batch size must be positive");
  if (config.steps == 0 && config.epochs == 0)
    throw ValidationError("either steps or epochs must be positive");
  const auto &arch = net.architecture();

  const std::size_t n = train_set.size();
  const std::size_t per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::uint64_t total_steps =
      config.steps ? config.steps : static_cast<std::uint64_t>(config.epochs) * per_epoch;
  const std::uint64_t eval_every = std::max<std::uint64_t>(config.eval_every, 1);

  LossCurves curves;
  AdamState state(net.parameter_count(), config.adam);
  std::vector<double> best(net.parameters().begin(), net.parameters().end());

  auto check = [&](double loss, const char *what, std::uint64_t step) {
    if (!std::isfinite(loss) || loss > config.divergence_threshold)
      throw RuntimeError(std::string("training diverged: ") + what + " loss " +
                         std::to_string(loss) + " at step " + std::to_string(step));
  };
  auto evaluate = [&](std::uint64_t step) {
    const double tl = net.loss(train_set);
    const double vl = net.loss(validation_set);
    check(tl, "train", step);
    check(vl, "validation", step);
    curves.step.push_back(step);
    curves.train.push_back(tl);
    curves.validation.push_back(vl);
    if (curves.step.size() == 1 || vl < curves.best_validation) {
      curves.best_validation = vl;
      curves.best_step = step;
      std::copy(net.parameters().begin(), net.parameters().end(), best.begin());
    }
  };

  evaluate(0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RandomStream noise_rng(mix_seed(config.seed, 0x6e6f697365), 0);
  std::vector<double> grad;
  Batch mb;
  std::vector<std::vector<double>> noise;
  std::uint64_t step = 0;
  for (std::uint64_t epoch = 0; step < total_steps; ++epoch) {
    RandomStream rng(mix_seed(config.seed, 0x73687566), epoch);
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.next_u64() % i);
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < n && step < total_steps; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      mb.x.clear();
      mb.y.clear();
      for (std::size_t k = start; k < end; ++k) {
        mb.x.push_back(train_set.x[order[k]]);
        mb.y.push_back(train_set.y[order[k]]);
      }
      const std::vector<std::vector<double>> *np = nullptr;
      if (arch.variational) {
        noise.assign(mb.size(), std::vector<double>(arch.latent_dim));
        for (auto &v : noise)
          for (std::size_t j = 0; j < v.size(); j += 2) {
            // Box-Muller pair.
            const double r = std::sqrt(-2.0 * std::log(noise_rng.uniform()));
            const double a = 2.0 * M_PI * noise_rng.uniform_closed_open();
            v[j] = r * std::cos(a);
            if (j + 1 < v.size()) v[j + 1] = r * std::sin(a);
          }
        np = &noise;
      }
      curves.learning_rate.push_back(state.learning_rate());
      const double bl = net.loss_and_gradient(mb, grad, np);
      check(bl, "batch", step);
      curves.batch_loss.push_back(bl);
      adam_step(net.parameters(), grad, state);
      ++step;
      if (step % eval_every == 0 || step == total_steps) evaluate(step);
    }
  }
  std::copy(best.begin(), best.end(), net.parameters().begin());
  return curves;
}

namespace {

constexpr std::string_view kModelMagic = "POLN";
constexpr std::uint32_t kModelVersion = 1;
constexpr std::uint32_t kMaxNames = 64;

void write_norm(io::BinaryWriter &w, const Normalization &n) {
  w.u64(n.mean.size());
  w.f64s(n.mean);
  w.f64s(n.scale);
  w.u64(n.constant.size());
  for (auto c : n.constant) w.u32(c);
}

Normalization read_norm(io::BinaryReader &r, std::size_t expected) {
  Normalization n;
  const auto len = r.u64();
  if (len != expected) r.fail("normalization length " + std::to_string(len) + " does not match " +
                              std::to_string(expected));
  n.mean = r.f64s(len);
  n.scale = r.f64s(len);
  const auto nc = r.u64();
  if (nc > len) r.fail("too many constant-feature entries");
  for (std::uint64_t i = 0; i < nc; ++i) {
    const auto c = r.u32();
    if (c >= len) r.fail("constant-feature index out of range");
    n.constant.push_back(c);
  }
  return n;
}

} // namespace

void Model::write(std::ostream &out) const {
  io::BinaryWriter w(out);
  w.magic(kModelMagic);
  w.u32(kModelVersion);
  const auto &a = net.architecture();
  w.u32(a.input_dim);
  w.u32(a.width);
  w.u32(a.n_blocks);
  w.u32(a.latent_dim);
  w.u32(a.output_dim);
  w.u32(a.variational ? 1 : 0);
  w.f64(a.kl_weight);
  w.u32(feature_spec.rows);
  w.u32(feature_spec.cols);
  w.u32(feature_spec.use_partial_grid ? 1 : 0);
  w.u32(grid_geometry.n_radius);
  w.u32(grid_geometry.n_depth);
  w.f64(grid_geometry.radius_width);
  w.f64(grid_geometry.depth_width);
  w.u64(reference_photons);
  w.u32(static_cast<std::uint32_t>(target_names.size()));
  for (const auto &s : target_names) w.str(s);
  write_norm(w, features);
  write_norm(w, targets);
  w.u64(net.parameter_count());
  w.f64s({net.parameters().begin(), net.parameters().end()});
}

Model Model::read(std::istream &in) {
  io::BinaryReader r(in);
  r.expect_magic(kModelMagic);
  r.expect_version(kModelVersion);
  Architecture a;
  a.input_dim = r.u32();
  a.width = r.u32();
  a.n_blocks = r.u32();
  a.latent_dim = r.u32();
  a.output_dim = r.u32();
  const auto var = r.u32();
  if (var > 1) r.fail("bad variational flag");
  a.variational = var == 1;
  a.kl_weight = r.f64();
  if (a.input_dim == 0 || a.width == 0 || a.latent_dim == 0 || a.output_dim == 0 ||
      a.input_dim > (1u << 24) || a.width > 4096 || a.n_blocks > 256 || a.latent_dim > 4096 ||
      a.output_dim > 4096)
    r.fail("implausible architecture");
  Model m;
  m.feature_spec.rows = r.u32();
  m.feature_spec.cols = r.u32();
  const auto partial = r.u32();
  if (partial > 1) r.fail("bad partial-grid flag");
  m.feature_spec.use_partial_grid = partial == 1;
  if (m.feature_spec.length() != a.input_dim) r.fail("feature layout does not match input width");
  m.grid_geometry.n_radius = r.u32();
  m.grid_geometry.n_depth = r.u32();
  m.grid_geometry.radius_width = r.f64();
  m.grid_geometry.depth_width = r.f64();
  try {
    m.grid_geometry.validate();
  } catch (const ValidationError &e) {
    r.fail(e.what());
  }
  m.reference_photons = r.u64();
  const auto nn_ = r.u32();
  if (nn_ != a.output_dim) r.fail("target name count does not match output width");
  if (nn_ > kMaxNames) r.fail("too many target names");
  for (std::uint32_t i = 0; i < nn_; ++i) m.target_names.push_back(r.str(256));
  m.features = read_norm(r, a.input_dim);
  m.targets = read_norm(r, a.output_dim);
  m.net = Network(a);
  const auto np = r.u64();
  if (np != m.net.parameter_count()) r.fail("parameter count does not match architecture");
  const auto p = r.f64s(np);
  std::copy(p.begin(), p.end(), m.net.parameters().begin());
  if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes after model");
  return m;
}

void Model::write_file(const std::string &path) const {
  io::atomic_write(path, [this](std::ostream &out) { write(out); });
}

Model Model::read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file '" + path + "'");
  return read(in);
}

Batch make_batch(const Dataset &data, const Normalization &features,
                 const Normalization &targets) {
  Batch b;
  for (const auto &s : data.samples) {
    b.x.push_back(features.apply(s.features));
    b.y.push_back(targets.apply(s.target));
  }
  return b;
}

Prediction infer_features(const Model &model, const std::vector<double> &raw_features) {
  if (raw_features.size() != model.net.architecture().input_dim)
    throw ValidationError("feature vector has length " + std::to_string(raw_features.size()) +
                          ", model expects " +
                          std::to_string(model.net.architecture().input_dim));
  const auto y = model.net.forward(model.features.apply(raw_features));
  return {model.target_names, model.targets.invert(y)};
}

Prediction infer(const Model &model, const DetectorGrid &grid, double launched) {
  const auto &g = grid.geometry();
  if (!(g == model.grid_geometry))
    throw ValidationError("grid geometry " + std::to_string(g.n_radius) + "x" +
                          std::to_string(g.n_depth) + " does not match the model's " +
                          std::to_string(model.grid_geometry.n_radius) + "x" +
                          std::to_string(model.grid_geometry.n_depth));
  if (launched <= 0.0) launched = static_cast<double>(model.reference_photons);
  if (!(launched > 0.0)) throw ValidationError("launched photon count must be positive");
  return infer_features(model, extract_features(grid, model.feature_spec, launched));
}

} // namespace polmc
