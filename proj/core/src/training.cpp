#include "nolab/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace nolab::training {

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1)) throw ConfigError("adam betas must lie in (0, 1)");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (schedule != "cosine" && schedule != "constant") throw ConfigError("unknown lr schedule '" + schedule + "'");
}

storage::json TrainConfig::to_json() const {
  return {{"epochs", epochs},   {"batch_size", batch_size}, {"lr", lr},
          {"beta1", beta1},     {"beta2", beta2},           {"eps", eps},
          {"weight_decay", weight_decay}, {"clip_norm", clip_norm}, {"schedule", schedule},
          {"divergence_threshold", divergence_threshold},   {"seed", seed},
          {"dtype", dtype_name(dtype)},                     {"normalize_targets", normalize_targets}};
}

TrainConfig TrainConfig::from_json(const storage::json& j) {
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("epochs", c.epochs);
  get("batch_size", c.batch_size);
  get("lr", c.lr);
  get("beta1", c.beta1);
  get("beta2", c.beta2);
  get("eps", c.eps);
  get("weight_decay", c.weight_decay);
  get("clip_norm", c.clip_norm);
  get("schedule", c.schedule);
  get("divergence_threshold", c.divergence_threshold);
  get("seed", c.seed);
  get("normalize_targets", c.normalize_targets);
  if (j.contains("dtype")) c.dtype = j.at("dtype") == "float64" ? DType::f64 : DType::f32;
  return c;
}

Tensor relative_l2(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("relative_l2: shape mismatch " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  if (pred.dim() == 0 || pred.numel() == 0) throw ShapeError("relative_l2: need a [B, ...] batch");
  const std::size_t b = pred.extent(0), rest = pred.numel() / b;
  std::vector<double> inv(b);
  auto tv = target.values();
  for (std::size_t i = 0; i < b; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < rest; ++k) s += tv[i * rest + k] * tv[i * rest + k];
    inv[i] = 1.0 / std::max(std::sqrt(s), 1e-12);
  }
  Tensor diff = ops::reshape(ops::sub(pred, target.detach()), {b, rest});
  Tensor norms = ops::sqrt(ops::sum_axis(ops::mul(diff, diff), 1));
  return ops::mean(ops::mul(norms, Tensor::from({b}, std::move(inv), pred.dtype())));
}

std::vector<double> relative_l2_per_sample(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) throw ShapeError("relative_l2: shape mismatch");
  const std::size_t b = pred.extent(0), rest = pred.numel() / b;
  std::vector<double> out(b);
  auto pv = pred.values();
  auto tv = target.values();
  for (std::size_t i = 0; i < b; ++i) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < rest; ++k) {
      const double d = pv[i * rest + k] - tv[i * rest + k];
      num += d * d;
      den += tv[i * rest + k] * tv[i * rest + k];
    }
    out[i] = std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
  }
  return out;
}

double scheduled_lr(const TrainConfig& config, std::uint64_t step, std::uint64_t total_steps) {
  if (config.schedule == "constant" || total_steps == 0) return config.lr;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return config.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, OptimizerState& st,
               const TrainConfig& cfg, double lr) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient counts differ");
  if (st.m.empty()) {
    for (const auto& p : params) {
      st.m.emplace_back(p.numel(), 0.0);
      st.v.emplace_back(p.numel(), 0.0);
    }
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].numel() != params[i].numel()) throw ShapeError("adam_step: gradient shape differs from its parameter");
    for (double g : grads[i].values())
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in parameter block " + std::to_string(i));
  }
  ++st.step;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t), c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_values();
    auto g = grads[i].values();
    auto& m = st.m[i];
    auto& v = st.v[i];
    const bool f32 = params[i].dtype() == DType::f32;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k] + cfg.weight_decay * p[k];
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
      const double upd = lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
      p[k] -= upd;
      if (f32) p[k] = static_cast<float>(p[k]);
    }
  }
}

PreparedData prepare(const storage::DatasetContainer& c, const TrainConfig& config) {
  c.validate();
  PreparedData d;
  d.in_stats = datagen::input_stats(c);
  d.out_stats = config.normalize_targets ? datagen::target_stats(c) : datagen::NormStats{};
  std::vector<double> in(c.inputs.begin(), c.inputs.end());
  datagen::normalize(in, d.in_stats);
  const std::size_t n = c.n_samples(), g = c.grid();
  d.inputs = Tensor::from({n, g, g}, std::move(in), config.dtype);
  d.targets = Tensor::from({n, g, g}, std::vector<double>(c.targets.begin(), c.targets.end()), config.dtype);
  return d;
}

namespace {

Tensor gather(const Tensor& x, const std::vector<std::size_t>& idx, std::size_t from, std::size_t count) {
  const std::size_t plane = x.numel() / x.extent(0);
  std::vector<double> v;
  v.reserve(count * plane);
  auto xv = x.values();
  for (std::size_t i = from; i < from + count; ++i)
    v.insert(v.end(), xv.begin() + static_cast<std::ptrdiff_t>(idx[i] * plane),
             xv.begin() + static_cast<std::ptrdiff_t>((idx[i] + 1) * plane));
  Shape s = x.shape();
  s[0] = count;
  return Tensor::from(s, std::move(v), x.dtype());
}

Tensor decode(const Tensor& out, const datagen::NormStats& s) {
  return ops::add_scalar(ops::scale(out, s.std), s.mean);
}

}  // namespace

Tensor predict(const models::ModelState& state, const PreparedData& data, std::size_t batch) {
  NoGradGuard guard;
  const std::size_t n = data.inputs.extent(0);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> out;
  for (std::size_t i = 0; i < n; i += batch) {
    const std::size_t cnt = std::min(batch, n - i);
    auto y = decode(models::forward(state, gather(data.inputs, idx, i, cnt)), data.out_stats);
    out.insert(out.end(), y.values().begin(), y.values().end());
  }
  return Tensor::from(data.targets.shape(), std::move(out), state.config.dtype);
}

double evaluate(const models::ModelState& state, const storage::DatasetContainer& test, const TrainConfig& config) {
  auto d = prepare(test, config);
  auto per = relative_l2_per_sample(predict(state, d, config.batch_size), d.targets);
  return std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(per.size());
}

TrainResult train(const models::ModelState& initial, const storage::DatasetContainer& train_set,
                  const storage::DatasetContainer& test_set, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.n_samples() == 0) throw ConfigError("training set is empty");
  if (train_set.grid() != initial.config.grid)
    throw ShapeError("dataset grid " + std::to_string(train_set.grid()) + " does not match the model grid " +
                     std::to_string(initial.config.grid));
  TrainResult res;
  res.final_state = initial.clone();
  res.best_state = initial.clone();
  if (cfg.epochs == 0) return res;

  const auto train_data = prepare(train_set, cfg);
  const auto test_data = test_set.n_samples() > 0 ? prepare(test_set, cfg) : PreparedData{};
  const std::size_t n = train_set.n_samples();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::uint64_t total_steps = cfg.epochs * batches;

  auto& state = res.final_state;
  std::vector<Tensor> params = state.tensors();
  OptimizerState opt;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  Tape tape;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    double loss_sum = 0.0;
    double lr = cfg.lr;
    for (std::size_t bi = 0; bi < batches; ++bi) {
      const std::size_t from = bi * cfg.batch_size, cnt = std::min(cfg.batch_size, n - from);
      Tensor x = gather(train_data.inputs, perm, from, cnt);
      Tensor y = gather(train_data.targets, perm, from, cnt);
      tape.clear();
      GradientMap gm;
      double loss_value = 0.0;
      {
        Tape::Scope scope(tape);
        Tensor loss = relative_l2(decode(models::forward(state, x), train_data.out_stats), y);
        loss_value = loss.item();
        if (!std::isfinite(loss_value) || loss_value > cfg.divergence_threshold) {
          std::ostringstream os;
          os << "training diverged at epoch " << epoch << ", batch " << bi << ": loss " << loss_value;
          throw NumericError(os.str());
        }
        gm = backward(loss, tape);
      }
      std::vector<Tensor> grads;
      double sq = 0.0;
      for (const auto& p : params) {
        Tensor g = gm.contains(p) ? gm.of(p) : Tensor::zeros(p.shape(), DType::f64);
        for (double v : g.values()) sq += v * v;
        grads.push_back(g);
      }
      const double gnorm = std::sqrt(sq);
      if (cfg.clip_norm > 0 && gnorm > cfg.clip_norm) {
        const double f = cfg.clip_norm / gnorm;
        for (auto& g : grads) {
          std::vector<double> v(g.values().begin(), g.values().end());
          for (auto& e : v) e *= f;
          g = Tensor::from(g.shape(), std::move(v), DType::f64);
        }
      }
      lr = scheduled_lr(cfg, opt.step, total_steps);
      adam_step(params, grads, opt, cfg, lr);
      loss_sum += loss_value * static_cast<double>(cnt);
    }
    tape.clear();

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.lr = lr;
    if (test_set.n_samples() > 0) {
      auto per = relative_l2_per_sample(predict(state, test_data, cfg.batch_size), test_data.targets);
      rec.test_rel_l2 = std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(per.size());
    }
    const double score = test_set.n_samples() > 0 ? rec.test_rel_l2 : rec.train_loss;
    if (score < best) {
      best = score;
      res.best_state = state.clone();
      res.best_epoch = rec.epoch;
    }
    res.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return res;
}

storage::CsvTable history_table(const std::vector<EpochRecord>& history) {
  storage::CsvTable t;
  t.header = {"epoch", "train_rel_l2", "test_rel_l2", "lr"};
  for (const auto& r : history)
    t.rows.push_back({std::to_string(r.epoch), storage::format_number(r.train_loss), storage::format_number(r.test_rel_l2),
                      storage::format_number(r.lr)});
  return t;
}

std::string history_digest(const std::vector<EpochRecord>& history) {
  const auto text = storage::to_csv(history_table(history));
  return storage::digest(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace nolab::training
