#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nolab/datagen.hpp"
#include "nolab/erf.hpp"
#include "nolab/models.hpp"
#include "nolab/recipes.hpp"
#include "nolab/storage.hpp"
#include "nolab/training.hpp"

#ifndef NOLAB_VERSION
#define NOLAB_VERSION "dev"
#endif

namespace fs = std::filesystem;
using nolab::storage::json;

namespace {

fs::path out_dir_for(const std::string& flag, const std::string& sub) {
  if (!flag.empty()) return flag;
  const char* env = std::getenv("NOLAB_OUT");
  return fs::path(env && *env ? env : "nolab-out") / sub;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

// The run manifest is written before any artifact and rewritten with the
// artifact list once the run completes.
class Manifest {
 public:
  Manifest(fs::path dir, std::string sub, json config) : dir_(std::move(dir)) {
    doc_ = {{"tool", "nolab"},       {"version", NOLAB_VERSION}, {"subcommand", std::move(sub)},
            {"config", std::move(config)}, {"inputs", json::object()}, {"artifacts", json::array()},
            {"status", "running"}};
  }
  void input(const fs::path& p) { doc_["inputs"][p.string()] = nolab::storage::digest_file(p); }
  void begin() {
    fs::create_directories(dir_);
    save();
  }
  fs::path artifact(const fs::path& rel) {
    doc_["artifacts"].push_back(rel.generic_string());
    return dir_ / rel;
  }
  void complete(json results = {}) {
    doc_["status"] = "complete";
    if (!results.is_null()) doc_["results"] = std::move(results);
    save();
  }
  const fs::path& dir() const { return dir_; }

 private:
  void save() { nolab::storage::atomic_write_text(dir_ / "manifest.json", doc_.dump(2) + "\n"); }
  fs::path dir_;
  json doc_;
};

// ---------------------------------------------------------------- gen-data

struct GenArgs {
  std::string pde = "darcy";
  std::size_t n_train = 200, n_test = 50, grid = 64, gen_grid = 0;
  std::uint64_t seed = 0;
  std::optional<double> t;
  double c = 0.1, nu = 1e-3, ns_dt = 1e-3, eps = 220.0, ac_T = 2e-4;
  int K = 24;
  std::string ac_boundary = "periodic";
  std::string out;
};

int cmd_gen_data(const GenArgs& a) {
  nolab::datagen::DatasetSpec s;
  s.family = nolab::datagen::parse_family(a.pde);
  s.n_train = a.n_train;
  s.n_test = a.n_test;
  s.grid = a.grid;
  s.seed = a.seed;
  s.t = a.t.value_or(s.family == nolab::datagen::Family::navier_stokes ? 1.0 : 5.0);
  s.c = a.c;
  s.K = a.K;
  s.nu = a.nu;
  s.ns_dt = a.ns_dt;
  s.gen_grid = a.gen_grid;
  s.eps = a.eps;
  s.ac_T = a.ac_T;
  s.ac_boundary = nolab::parse_boundary(a.ac_boundary);

  json cfg = {{"pde", nolab::datagen::family_name(s.family)}, {"n_train", s.n_train}, {"n_test", s.n_test},
              {"grid", s.grid}, {"seed", s.seed}, {"params", s.params_json()}};
  Manifest m(out_dir_for(a.out, "gen-data"), "gen-data", cfg);
  m.begin();
  auto pair = nolab::datagen::build_dataset(s);
  nolab::storage::write_dataset(pair.train, m.artifact("train.nodf"));
  nolab::storage::write_dataset(pair.test, m.artifact("test.nodf"));
  nolab::storage::atomic_write_text(m.artifact("data_card.txt"), nolab::datagen::data_card(pair));
  m.complete();
  std::cout << "wrote " << pair.train.n_samples() << " train / " << pair.test.n_samples() << " test "
            << nolab::datagen::family_name(s.family) << " samples to " << m.dir().string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string model = "fno", data, out, schedule = "cosine";
  std::size_t epochs = 20, width = 16, modes = 12, depth = 4, batch = 16, grid = 0;
  double lr = 1e-3, weight_decay = 0.0;
  std::uint64_t seed = 0;
};

std::pair<nolab::storage::DatasetContainer, nolab::storage::DatasetContainer> load_split(const fs::path& dir,
                                                                                       Manifest* m) {
  const auto train = dir / "train.nodf", test = dir / "test.nodf";
  if (m) {
    m->input(train);
    m->input(test);
  }
  return {nolab::storage::read_dataset(train), nolab::storage::read_dataset(test)};
}

int cmd_train(const TrainArgs& a) {
  nolab::models::ModelConfig mc;
  mc.arch = nolab::models::parse_arch(a.model);
  mc.width = a.width;
  mc.depth = a.depth;
  mc.seed = a.seed;
  nolab::training::TrainConfig tc;
  tc.epochs = a.epochs;
  tc.lr = a.lr;
  tc.batch_size = a.batch;
  tc.weight_decay = a.weight_decay;
  tc.schedule = a.schedule;
  tc.seed = a.seed;
  tc.validate();

  json cfg = {{"model", a.model}, {"data", a.data}, {"train", tc.to_json()}};
  Manifest m(out_dir_for(a.out, "train"), "train", cfg);
  auto [train, test] = load_split(a.data, &m);
  mc.grid = train.grid();
  if (a.grid != 0 && a.grid != mc.grid)
    throw nolab::ShapeError("model grid " + std::to_string(a.grid) + " does not match the dataset grid " +
                            std::to_string(mc.grid));
  if (test.grid() != mc.grid) throw nolab::ShapeError("train and test splits have different grids");
  mc.modes = a.modes;
  mc = mc.resolved();
  m.begin();

  auto res = nolab::training::train(nolab::models::init_model(mc), train, test, tc,
                                    [](const nolab::training::EpochRecord& r) {
                                      std::cout << "epoch " << r.epoch << "  train " << pct(r.train_loss) << "  test "
                                                << pct(r.test_rel_l2) << "\n";
                                    });
  const std::string data_hash = nolab::storage::digest_file(fs::path(a.data) / "train.nodf") +
                                nolab::storage::digest_file(fs::path(a.data) / "test.nodf");
  auto meta = [&](std::size_t epoch) {
    return json{{"train", tc.to_json()},
                {"epoch", epoch},
                {"history_digest", nolab::training::history_digest(res.history)},
                {"dataset_hash", data_hash}};
  };
  nolab::models::save_checkpoint(res.final_state, m.artifact("checkpoint.nock"), meta(tc.epochs));
  nolab::models::save_checkpoint(res.best_state, m.artifact("best.nock"), meta(res.best_epoch));
  nolab::storage::write_csv(m.artifact("history.csv"), nolab::training::history_table(res.history));
  const double final_err = res.history.empty() ? nolab::training::evaluate(res.final_state, test, tc)
                                                : res.history.back().test_rel_l2;
  m.complete({{"final_test_rel_l2_pct", 100.0 * final_err}, {"best_epoch", res.best_epoch}});
  std::cout << a.model << " final test relative l2: " << pct(final_err) << " (" << res.final_state.param_count()
            << " parameters)\n";
  return 0;
}

// ---------------------------------------------------------------- erf

struct ErfArgs {
  std::string checkpoint, data, out, x0;
  std::vector<std::string> methods{"autodiff"};
  std::size_t probe_index = 0, grid = 0;
  double h = 0.0;
  std::optional<double> t, c;
  std::optional<int> K;
};

nolab::erf::GridIndex parse_x0(const std::string& s, std::size_t n) {
  if (s.empty()) return nolab::erf::center_index(n);
  std::istringstream is(s);
  long ix = -1, iy = -1;
  char comma = 0;
  if (!(is >> ix >> comma >> iy) || comma != ',' || !is.eof())
    throw nolab::ConfigError("--x0 expects ix,iy, got '" + s + "'");
  if (ix < 0 || iy < 0 || static_cast<std::size_t>(ix) >= n || static_cast<std::size_t>(iy) >= n)
    throw nolab::ConfigError("--x0 " + s + " lies outside the " + std::to_string(n) + "x" + std::to_string(n) +
                             " grid");
  return {static_cast<std::size_t>(ix), static_cast<std::size_t>(iy)};
}

int cmd_erf(const ErfArgs& a) {
  json cfg = {{"checkpoint", a.checkpoint}, {"data", a.data},  {"methods", a.methods},
              {"probe_index", a.probe_index}, {"x0", a.x0}, {"h", a.h}};
  Manifest m(out_dir_for(a.out, "erf"), "erf", cfg);

  std::optional<nolab::models::ModelState> state;
  if (!a.checkpoint.empty()) {
    m.input(a.checkpoint);
    state = nolab::models::load_checkpoint(a.checkpoint).state;
  }
  std::optional<std::pair<nolab::storage::DatasetContainer, nolab::storage::DatasetContainer>> split;
  if (!a.data.empty()) split = load_split(a.data, &m);

  std::size_t n = a.grid;
  if (state) n = state->config.grid;
  if (n == 0 && split) n = split->second.grid();
  if (n == 0) n = 64;
  const auto x0 = parse_x0(a.x0, n);

  bool learned = false;
  for (const auto& meth : a.methods) learned = learned || meth != "analytical";
  std::optional<nolab::Field2D> probe;
  std::string probe_id;
  if (learned) {
    if (!state) throw nolab::ConfigError("--checkpoint is required for learned ERF maps");
    if (!split) throw nolab::ConfigError("--data is required to draw the probe input");
    const auto& test = split->second;
    if (test.grid() != n) throw nolab::ShapeError("checkpoint and dataset grids differ");
    if (a.probe_index >= test.n_samples()) throw nolab::ConfigError("--probe-index exceeds the test split");
    nolab::training::TrainConfig tc;
    auto prepared = nolab::training::prepare(test, tc);
    auto v = prepared.inputs.values().subspan(a.probe_index * n * n, n * n);
    const bool periodic = test.metadata.at("family") == "navier-stokes";
    probe = nolab::Field2D(n, periodic ? nolab::BoundaryKind::periodic : nolab::BoundaryKind::dirichlet_zero,
                           std::vector<double>(v.begin(), v.end()));
    probe_id = "test[" + std::to_string(a.probe_index) + "] seed " +
               std::to_string(test.metadata.at("sample_seeds").at(a.probe_index).get<std::uint64_t>());
  }
  m.begin();

  std::vector<nolab::erf::ERFMap> maps;
  for (const auto& meth : a.methods) {
    if (meth == "autodiff") {
      maps.push_back(nolab::erf::erf_autodiff(*state, *probe, x0, probe_id));
    } else if (meth == "fd") {
      maps.push_back(nolab::erf::erf_finite_difference(*state, *probe, x0, a.h, probe_id));
    } else {
      double t = 5.0, c = 0.1;
      int K = 24;
      if (split) {
        const auto& meta = split->second.metadata;
        if (meta.at("family") != "wave")
          throw nolab::ConfigError("the analytical ERF exists only for wave data, not " +
                                   meta.at("family").get<std::string>());
        t = meta.at("params").at("t").get<double>();
        c = meta.at("params").at("c").get<double>();
        K = meta.at("params").at("K").get<int>();
      }
      maps.push_back(nolab::erf::erf_analytical_wave(x0, a.t.value_or(t), a.c.value_or(c), a.K.value_or(K), n));
    }
    const std::string stem = std::string("erf_") + (meth == "fd" ? "fd" : meth);
    nolab::erf::erf_export(maps.back(), m.artifact(stem + ".csv"), nolab::erf::ExportFormat::csv);
    nolab::erf::erf_export(maps.back(), m.artifact(stem + ".pgm"), nolab::erf::ExportFormat::pgm);
    m.artifact(stem + ".pgm.bounds.txt");
  }
  json results = json::object();
  if (maps.size() >= 2) {
    json report = json::array();
    for (std::size_t i = 0; i < maps.size(); ++i)
      for (std::size_t j = i + 1; j < maps.size(); ++j) {
        auto cmp = nolab::erf::erf_compare(maps[i], maps[j]);
        json e = cmp.to_json();
        e["a"] = nolab::erf::method_name(maps[i].method);
        e["b"] = nolab::erf::method_name(maps[j].method);
        report.push_back(e);
        std::cout << "cosine(" << e["a"].get<std::string>() << ", " << e["b"].get<std::string>()
                  << ") = " << cmp.cosine << "\n";
      }
    nolab::storage::atomic_write_text(m.artifact("erf_compare.json"), report.dump(2) + "\n");
    results["comparisons"] = report;
  }
  m.complete(results);
  std::cout << "wrote " << maps.size() << " ERF map(s) to " << m.dir().string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
  std::string experiment, config, out;
  std::vector<std::string> sets;
  std::optional<std::size_t> epochs;
};

int cmd_report(const ReportArgs& a) {
  const auto e = nolab::recipes::parse_experiment(a.experiment);
  json overrides = json::object();
  std::vector<fs::path> inputs;
  if (!a.config.empty()) {
    overrides = json::parse(nolab::storage::read_bytes(a.config));
    inputs.push_back(a.config);
  }
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw nolab::ConfigError("--set expects key=value, got '" + kv + "'");
    const auto key = kv.substr(0, eq), val = kv.substr(eq + 1);
    try {
      overrides[key] = json::parse(val);
    } catch (const json::parse_error&) {
      overrides[key] = val;
    }
  }
  if (a.epochs) overrides["epochs"] = *a.epochs;
  const json cfg = nolab::recipes::resolve_config(e, overrides);

  Manifest m(out_dir_for(a.out, "report"), "report", cfg);
  for (const auto& p : inputs) m.input(p);
  m.begin();
  nolab::recipes::Context ctx;
  ctx.out_dir = m.dir();
  ctx.log = [](const std::string& s) { std::cout << s << std::endl; };
  auto outcome = nolab::recipes::run(e, cfg, ctx);
  for (const auto& p : outcome.artifacts) m.artifact(p);
  m.complete();
  if (outcome.summary.contains("models")) {
    for (const auto& [name, entry] : outcome.summary["models"].items()) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%-10s %6.2f%% +- %.2f%%", name.c_str(), entry["mean"].get<double>(),
                    entry["std"].get<double>());
      std::cout << buf << "\n";
    }
  }
  std::cout << "wrote " << outcome.artifacts.size() << " artifacts to " << m.dir().string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nolab: neural-operator receptive-field lab"};
  app.set_version_flag("--version", NOLAB_VERSION);
  app.require_subcommand(1);

  auto arch_check = CLI::Validator(
      [](std::string& s) -> std::string {
        try {
          nolab::models::parse_arch(s);
          return {};
        } catch (const nolab::Error& e) {
          return e.what();
        }
      },
      "MODEL");

  GenArgs g;
  auto* gen = app.add_subcommand("gen-data", "generate a train/test dataset pair");
  gen->add_option("--pde", g.pde, "wave | ns | darcy | allen-cahn")->required();
  gen->add_option("--n-train", g.n_train);
  gen->add_option("--n-test", g.n_test);
  gen->add_option("--grid", g.grid);
  gen->add_option("--seed", g.seed);
  gen->add_option("--t", g.t, "wave/ns horizon (default 5 for wave, 1 for ns)");
  gen->add_option("--c", g.c, "wave speed");
  gen->add_option("--K", g.K, "wave sine-series truncation");
  gen->add_option("--nu", g.nu, "ns viscosity");
  gen->add_option("--ns-dt", g.ns_dt);
  gen->add_option("--gen-grid", g.gen_grid, "ns generation grid (0 = 2 x grid)");
  gen->add_option("--eps", g.eps, "allen-cahn interface parameter");
  gen->add_option("--ac-T", g.ac_T, "allen-cahn horizon");
  gen->add_option("--ac-boundary", g.ac_boundary);
  gen->add_option("--out", g.out, "output directory");

  TrainArgs t;
  auto* tr = app.add_subcommand("train", "train one model on a generated dataset");
  tr->add_option("--model", t.model)->required()->check(arch_check);
  tr->add_option("--data", t.data, "directory holding train.nodf and test.nodf")->required();
  tr->add_option("--epochs", t.epochs);
  tr->add_option("--lr", t.lr);
  tr->add_option("--width", t.width);
  tr->add_option("--modes", t.modes);
  tr->add_option("--depth", t.depth);
  tr->add_option("--batch-size", t.batch);
  tr->add_option("--weight-decay", t.weight_decay);
  tr->add_option("--schedule", t.schedule)->check(CLI::IsMember({"cosine", "constant"}));
  tr->add_option("--grid", t.grid, "expected grid (checked against the data)");
  tr->add_option("--seed", t.seed);
  tr->add_option("--out", t.out);

  ErfArgs e;
  auto* er = app.add_subcommand("erf", "effective receptive field maps");
  er->add_option("--checkpoint", e.checkpoint);
  er->add_option("--data", e.data);
  er->add_option("--probe-index", e.probe_index);
  er->add_option("--x0", e.x0, "output location ix,iy (default: grid center)");
  er->add_option("--method", e.methods, "autodiff | fd | analytical (repeatable)")
      ->check(CLI::IsMember({"autodiff", "fd", "analytical"}));
  er->add_option("--fd-step", e.h, "finite-difference step (0 = 1e-4 x probe std)");
  er->add_option("--grid", e.grid, "grid for analytical-only runs");
  er->add_option("--t", e.t);
  er->add_option("--c", e.c);
  er->add_option("--K", e.K);
  er->add_option("--out", e.out);

  ReportArgs r;
  auto* rep = app.add_subcommand("report", "run an experiment recipe end to end");
  rep->add_option("--experiment", r.experiment, "table1 | wave-erf | ns-erf | spectra | equivariance")->required();
  rep->add_option("--config", r.config, "flat JSON config; flags win");
  rep->add_option("--set", r.sets, "key=value override (value parsed as JSON when possible)");
  rep->add_option("--epochs", r.epochs);
  rep->add_option("--out", r.out);

  CLI11_PARSE(app, argc, argv);
  try {
    if (gen->parsed()) return cmd_gen_data(g);
    if (tr->parsed()) return cmd_train(t);
    if (er->parsed()) return cmd_erf(e);
    if (rep->parsed()) return cmd_report(r);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 2;
}
