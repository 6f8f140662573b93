#include "nolab/recipes.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "nolab/ops.hpp"

namespace nolab::recipes {

using storage::json;

namespace {

const json& shared_defaults() {
  static const json d = {{"pde", "darcy"},     {"grid", 64},        {"n_train", 200},   {"n_test", 50},
                         {"data_seed", 0},     {"t", 5.0},          {"c", 0.1},         {"K", 24},
                         {"nu", 1e-3},         {"ns_dt", 1e-3},     {"gen_grid", 0},    {"models", json::array()},
                         {"seeds", {0}},       {"width", 16},       {"depth", 4},       {"modes", 12},
                         {"proj_width", 32},   {"epochs", 20},      {"lr", 1e-3},       {"batch_size", 16}};
  return d;
}

void log(const Context& ctx, const std::string& msg) {
  if (ctx.log) ctx.log(msg);
}

// Writes an artifact below out_dir and records its relative path.
class Artifacts {
 public:
  explicit Artifacts(const Context& ctx) : root_(ctx.out_dir) {}
  bool enabled() const { return root_.has_value(); }

  std::filesystem::path prepare(const std::filesystem::path& rel) {
    auto p = *root_ / rel;
    std::filesystem::create_directories(p.parent_path());
    list_.push_back(rel);
    return p;
  }
  void text(const std::filesystem::path& rel, const std::string& s) {
    if (enabled()) storage::atomic_write_text(prepare(rel), s);
  }
  void csv(const std::filesystem::path& rel, const storage::CsvTable& t) {
    if (enabled()) storage::write_csv(prepare(rel), t);
  }
  void erf_map(const std::filesystem::path& stem, const erf::ERFMap& m) {
    if (!enabled()) return;
    erf::erf_export(m, prepare(stem.string() + ".csv"), erf::ExportFormat::csv);
    erf::erf_export(m, prepare(stem.string() + ".pgm"), erf::ExportFormat::pgm);
    list_.push_back(stem.string() + ".pgm.bounds.txt");
  }
  std::vector<std::filesystem::path> list() const { return list_; }

 private:
  std::optional<std::filesystem::path> root_;
  std::vector<std::filesystem::path> list_;
};

std::string fmt(double v) { return storage::format_number(v); }

struct Trained {
  models::ModelState state;
  std::vector<training::EpochRecord> history;
  double seconds = 0.0;
};

Trained train_one(const json& cfg, const std::string& model, std::uint64_t seed, const datagen::DatasetPair& data,
                  const Context& ctx) {
  auto mc = model_config(cfg, model, seed);
  auto tc = train_config(cfg, seed);
  const auto t0 = std::chrono::steady_clock::now();
  auto res = training::train(models::init_model(mc), data.train, data.test, tc);
  Trained t{std::move(res.final_state), std::move(res.history), 0.0};
  t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log(ctx, model + " seed " + std::to_string(seed) + ": test rel l2 " + fmt(100.0 * t.history.back().test_rel_l2) +
               "% in " + std::to_string(static_cast<long>(t.seconds)) + " s");
  return t;
}

std::vector<std::string> model_list(const json& cfg) { return cfg.at("models").get<std::vector<std::string>>(); }
std::vector<std::uint64_t> seed_list(const json& cfg) { return cfg.at("seeds").get<std::vector<std::uint64_t>>(); }

erf::GridIndex x0_of(const json& cfg, std::size_t n) {
  if (!cfg.contains("x0") || cfg.at("x0").is_null()) return erf::center_index(n);
  auto v = cfg.at("x0").get<std::vector<std::size_t>>();
  if (v.size() != 2) throw ConfigError("x0 must be a pair [ix, iy]");
  return {v[0], v[1]};
}

// Normalized test input `index` as a field (the coordinates the model sees).
Field2D probe_field(const datagen::DatasetPair& data, const json& cfg, std::size_t index, BoundaryKind boundary) {
  if (index >= data.test.n_samples())
    throw ConfigError("probe index " + std::to_string(index) + " exceeds the test split size " +
                      std::to_string(data.test.n_samples()));
  auto prepared = training::prepare(data.test, train_config(cfg, 0));
  const std::size_t n = data.test.grid(), cells = n * n;
  auto v = prepared.inputs.values().subspan(index * cells, cells);
  return Field2D(n, boundary, std::vector<double>(v.begin(), v.end()));
}

Outcome finish(json summary, Artifacts& art, const std::string& stem) {
  art.text(stem + "/summary.json", summary.dump(2) + "\n");
  return {std::move(summary), art.list()};
}

Outcome run_erf_recipe(Experiment e, const json& cfg, const Context& ctx) {
  Artifacts art(ctx);
  const std::string stem = experiment_name(e);
  auto spec = dataset_spec(cfg);
  log(ctx, "generating " + std::string(datagen::family_name(spec.family)) + " data");
  auto data = datagen::build_dataset(spec);
  const std::size_t n = spec.grid;
  const auto x0 = x0_of(cfg, n);
  const auto index = cfg.at("probe_index").get<std::size_t>();
  const auto boundary = spec.family == datagen::Family::navier_stokes ? BoundaryKind::periodic
                                                                      : BoundaryKind::dirichlet_zero;
  auto probe = probe_field(data, cfg, index, boundary);
  const std::string probe_id = "test[" + std::to_string(index) + "] seed " +
                               std::to_string(datagen::sample_seed(spec.seed, true, index));

  json summary = {{"experiment", stem}, {"config", cfg}, {"x0", {x0.ix, x0.iy}}, {"probe", probe_id}};
  std::optional<erf::ERFMap> reference;
  if (e == Experiment::wave_erf) {
    reference = erf::erf_analytical_wave(x0, spec.t, spec.c, spec.K, n);
    art.erf_map(stem + "/analytical", *reference);
  }
  storage::CsvTable table;
  table.header = {"model", "seed", "test_rel_l2_pct", "cosine_vs_analytical"};
  for (double r : erf::default_radii()) table.header.push_back("mass_r" + fmt(r));
  std::vector<erf::ERFMap> maps;
  for (auto seed : seed_list(cfg))
    for (const auto& model : model_list(cfg)) {
      auto t = train_one(cfg, model, seed, data, ctx);
      auto m = erf::erf_autodiff(t.state, probe, x0, probe_id);
      const std::string tag = model + "_seed" + std::to_string(seed);
      art.erf_map(stem + "/" + tag, m);
      json entry = {{"model", model}, {"seed", seed}, {"test_rel_l2_pct", 100.0 * t.history.back().test_rel_l2}};
      std::vector<std::string> row{model, std::to_string(seed), fmt(100.0 * t.history.back().test_rel_l2)};
      if (reference) {
        auto cmp = erf::erf_compare(m, *reference);
        entry["comparison"] = cmp.to_json();
        row.push_back(fmt(cmp.cosine));
      } else {
        row.push_back("");
      }
      for (double r : erf::default_radii()) row.push_back(fmt(erf::mass_in_disc(m, r)));
      entry["mass_in_disc"] = json::array();
      for (double r : erf::default_radii()) entry["mass_in_disc"].push_back(erf::mass_in_disc(m, r));
      summary["maps"].push_back(entry);
      table.rows.push_back(std::move(row));
      maps.push_back(std::move(m));
    }
  // Pairwise agreement between the learned maps.
  for (std::size_t i = 0; i < maps.size(); ++i)
    for (std::size_t j = i + 1; j < maps.size(); ++j)
      summary["pairwise_cosine"].push_back(
          {{"a", i}, {"b", j}, {"cosine", erf::cosine_similarity(maps[i].map, maps[j].map)}});
  art.csv(stem + "/erf_table.csv", table);
  return finish(std::move(summary), art, stem);
}

Outcome run_equivariance(const json& cfg, const Context& ctx) {
  Artifacts art(ctx);
  const auto n = cfg.at("grid").get<std::size_t>();
  const auto count = cfg.at("samples").get<std::size_t>();
  const auto sseed = cfg.at("sample_seed").get<std::uint64_t>();
  std::vector<Field2D> samples;
  for (std::size_t i = 0; i < count; ++i) {
    auto f = datagen::sample_grf(datagen::ns_initial_spec(), datagen::mix_seed(sseed, i), n);
    auto st = datagen::compute_stats(std::vector<float>(f.values().begin(), f.values().end()));
    for (auto& v : f.values()) v = (v - st.mean) / st.std;
    samples.push_back(std::move(f));
  }
  json summary = {{"experiment", "equivariance"}, {"config", cfg}};
  storage::CsvTable table;
  table.header = {"model", "seed", "c4_error"};
  auto record = [&](const std::string& name, std::uint64_t seed, double err) {
    summary["errors"].push_back({{"model", name}, {"seed", seed}, {"c4_error", err}});
    table.rows.push_back({name, std::to_string(seed), fmt(err)});
    log(ctx, name + ": C4 equivariance error " + fmt(err));
  };
  record("identity", 0, analysis::c4_equivariance_error([](const Tensor& a) { return a; }, samples));
  record("pointwise-gelu", 0, analysis::c4_equivariance_error([](const Tensor& a) { return ops::gelu(a); }, samples));
  for (auto seed : seed_list(cfg))
    for (const auto& model : model_list(cfg)) {
      auto mc = model_config(cfg, model, seed);
      mc.coord_features = false;
      record(model, seed, analysis::c4_equivariance_error(models::init_model(mc), samples));
    }
  art.csv("equivariance/c4_errors.csv", table);
  return finish(std::move(summary), art, "equivariance");
}

Outcome table1_outcome(Experiment e, const json& cfg, const Context& ctx) {
  auto res = run_table1(cfg, ctx);
  Artifacts art(ctx);
  const std::string stem = experiment_name(e);
  storage::CsvTable runs;
  runs.header = {"model", "seed", "test_rel_l2_pct", "low_band_energy", "params", "seconds"};
  for (const auto& r : res.runs) {
    const std::string tag = r.model + "_seed" + std::to_string(r.seed);
    runs.rows.push_back({r.model, std::to_string(r.seed), fmt(100.0 * r.test_rel_l2), fmt(r.low_band),
                         std::to_string(r.param_count), fmt(r.seconds)});
    art.csv(stem + "/" + tag + "_history.csv", training::history_table(r.history));
    art.csv(stem + "/" + tag + "_spectrum.csv", r.spectrum.table());
  }
  art.csv(stem + "/runs.csv", runs);
  storage::CsvTable table;
  table.header = {"model", "mean_rel_l2_pct", "std_rel_l2_pct"};
  for (const auto& m : res.models())
    table.rows.push_back({m, fmt(100.0 * res.mean(m)), fmt(100.0 * res.stddev(m))});
  art.csv(stem + "/table.csv", table);
  auto summary = res.summary();
  summary["experiment"] = stem;
  return finish(std::move(summary), art, stem);
}

}  // namespace

const char* experiment_name(Experiment e) {
  switch (e) {
    case Experiment::table1: return "table1";
    case Experiment::wave_erf: return "wave-erf";
    case Experiment::ns_erf: return "ns-erf";
    case Experiment::spectra: return "spectra";
    case Experiment::equivariance: return "equivariance";
  }
  return "?";
}

Experiment parse_experiment(const std::string& name) {
  for (auto e : {Experiment::table1, Experiment::wave_erf, Experiment::ns_erf, Experiment::spectra,
                 Experiment::equivariance})
    if (name == experiment_name(e)) return e;
  throw ConfigError("unknown experiment '" + name + "' (expected table1, wave-erf, ns-erf, spectra, equivariance)");
}

json default_config(Experiment e) {
  json c = shared_defaults();
  switch (e) {
    case Experiment::table1:
      c["models"] = {"fno", "fno3x3", "fno-full"};
      c["seeds"] = {0, 1, 2, 3, 4};
      break;
    case Experiment::spectra:
      c["models"] = {"fno", "fno3x3"};
      break;
    case Experiment::wave_erf:
      c.update({{"pde", "wave"}, {"grid", 32}, {"n_test", 20}, {"modes", 8}, {"epochs", 15},
                {"models", {"fno", "fno3x3", "cno", "t1"}}, {"probe_index", 0}, {"x0", nullptr}});
      break;
    case Experiment::ns_erf:
      c.update({{"pde", "ns"}, {"grid", 32}, {"gen_grid", 64}, {"n_train", 100}, {"n_test", 10}, {"t", 1.0},
                {"modes", 8}, {"epochs", 15}, {"models", {"fno", "cno"}}, {"probe_index", 0}, {"x0", nullptr}});
      break;
    case Experiment::equivariance:
      c.update({{"grid", 32}, {"width", 8}, {"depth", 2}, {"modes", 8}, {"samples", 4}, {"sample_seed", 0},
                {"models", {"fno", "fno3x3", "cno", "t1", "gt"}}});
      break;
  }
  return c;
}

json resolve_config(Experiment e, const json& overrides) {
  json c = default_config(e);
  if (overrides.is_null()) return c;
  if (!overrides.is_object()) throw ConfigError("recipe config must be a JSON object");
  for (const auto& [k, v] : overrides.items()) {
    if (!c.contains(k)) throw ConfigError("unknown key '" + k + "' for experiment " + experiment_name(e));
    c[k] = v;
  }
  return c;
}

datagen::DatasetSpec dataset_spec(const json& cfg) {
  datagen::DatasetSpec s;
  s.family = datagen::parse_family(cfg.at("pde").get<std::string>());
  s.grid = cfg.at("grid").get<std::size_t>();
  s.n_train = cfg.at("n_train").get<std::size_t>();
  s.n_test = cfg.at("n_test").get<std::size_t>();
  s.seed = cfg.at("data_seed").get<std::uint64_t>();
  s.t = cfg.at("t").get<double>();
  s.c = cfg.at("c").get<double>();
  s.K = cfg.at("K").get<int>();
  s.nu = cfg.at("nu").get<double>();
  s.ns_dt = cfg.at("ns_dt").get<double>();
  s.gen_grid = cfg.at("gen_grid").get<std::size_t>();
  return s;
}

models::ModelConfig model_config(const json& cfg, const std::string& model, std::uint64_t seed) {
  models::ModelConfig m;
  m.arch = models::parse_arch(model);
  m.grid = cfg.at("grid").get<std::size_t>();
  m.width = cfg.at("width").get<std::size_t>();
  m.depth = cfg.at("depth").get<std::size_t>();
  m.modes = std::min(cfg.at("modes").get<std::size_t>(), m.grid / 2);
  m.proj_width = cfg.at("proj_width").get<std::size_t>();
  m.seed = seed;
  return m.resolved();
}

training::TrainConfig train_config(const json& cfg, std::uint64_t seed) {
  training::TrainConfig t;
  t.epochs = cfg.at("epochs").get<std::size_t>();
  t.lr = cfg.at("lr").get<double>();
  t.batch_size = cfg.at("batch_size").get<std::size_t>();
  t.seed = seed;
  t.validate();
  return t;
}

const ModelRun& Table1Result::at(const std::string& model, std::uint64_t seed) const {
  for (const auto& r : runs)
    if (r.model == model && r.seed == seed) return r;
  throw ConfigError("no run for " + model + " seed " + std::to_string(seed));
}

std::vector<std::string> Table1Result::models() const {
  std::vector<std::string> out;
  for (const auto& r : runs)
    if (std::find(out.begin(), out.end(), r.model) == out.end()) out.push_back(r.model);
  return out;
}

std::vector<std::uint64_t> Table1Result::seeds() const {
  std::vector<std::uint64_t> out;
  for (const auto& r : runs)
    if (std::find(out.begin(), out.end(), r.seed) == out.end()) out.push_back(r.seed);
  return out;
}

double Table1Result::mean(const std::string& model) const {
  double s = 0.0;
  std::size_t k = 0;
  for (const auto& r : runs)
    if (r.model == model) {
      s += r.test_rel_l2;
      ++k;
    }
  return k ? s / static_cast<double>(k) : 0.0;
}

double Table1Result::stddev(const std::string& model) const {
  const double m = mean(model);
  double s = 0.0;
  std::size_t k = 0;
  for (const auto& r : runs)
    if (r.model == model) {
      s += (r.test_rel_l2 - m) * (r.test_rel_l2 - m);
      ++k;
    }
  return k > 1 ? std::sqrt(s / static_cast<double>(k - 1)) : 0.0;
}

json Table1Result::summary() const {
  json j = {{"config", config}, {"unit", "percent"}};
  for (const auto& m : models()) {
    json e = {{"mean", 100.0 * mean(m)}, {"std", 100.0 * stddev(m)}};
    for (const auto& r : runs)
      if (r.model == m) {
        e["per_seed"].push_back(100.0 * r.test_rel_l2);
        e["low_band"].push_back(r.low_band);
        e["params"] = r.param_count;
      }
    j["models"][m] = e;
  }
  auto has = [&](const std::string& m) {
    auto ms = models();
    return std::find(ms.begin(), ms.end(), m) != ms.end();
  };
  if (has("fno") && has("fno3x3")) {
    int err_wins = 0, band_wins = 0;
    for (auto s : seeds()) {
      err_wins += at("fno3x3", s).test_rel_l2 < at("fno", s).test_rel_l2;
      band_wins += at("fno3x3", s).low_band < at("fno", s).low_band;
    }
    j["fno3x3_below_fno_seeds"] = err_wins;
    j["fno3x3_low_band_below_fno_seeds"] = band_wins;
  }
  return j;
}

Table1Result run_table1(const json& config, const Context& ctx) {
  Table1Result res;
  res.config = config;
  auto spec = dataset_spec(config);
  log(ctx, "generating " + std::string(datagen::family_name(spec.family)) + " data (" + std::to_string(spec.n_train) +
               " train / " + std::to_string(spec.n_test) + " test, grid " + std::to_string(spec.grid) + ")");
  auto data = datagen::build_dataset(spec);
  const auto tc0 = train_config(config, 0);
  const auto test = training::prepare(data.test, tc0);
  const std::size_t n = spec.grid, cells = n * n;
  for (auto seed : seed_list(config))
    for (const auto& model : model_list(config)) {
      auto t = train_one(config, model, seed, data, ctx);
      ModelRun r;
      r.model = model;
      r.seed = seed;
      r.history = std::move(t.history);
      r.test_rel_l2 = r.history.back().test_rel_l2;
      r.param_count = t.state.param_count();
      r.seconds = t.seconds;
      auto pred = training::predict(t.state, test, tc0.batch_size);
      for (std::size_t k = 0; k < data.test.n_samples(); ++k)
        r.spectrum += analysis::radial_error_spectrum(pred.values().subspan(k * cells, cells),
                                                      test.targets.values().subspan(k * cells, cells), n);
      r.low_band = r.spectrum.low_band();
      res.runs.push_back(std::move(r));
    }
  return res;
}

Outcome run(Experiment e, const json& config, const Context& ctx) {
  const json cfg = resolve_config(e, config);
  switch (e) {
    case Experiment::table1:
    case Experiment::spectra: return table1_outcome(e, cfg, ctx);
    case Experiment::wave_erf:
    case Experiment::ns_erf: return run_erf_recipe(e, cfg, ctx);
    case Experiment::equivariance: return run_equivariance(cfg, ctx);
  }
  throw ConfigError("unknown experiment");
}

}  // namespace nolab::recipes
