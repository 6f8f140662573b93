#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "nolab/recipes.hpp"
#include "testkit.hpp"

using namespace nolab;
using namespace nolab::recipes;
namespace tk = nolab::testkit;
namespace fs = std::filesystem;
using storage::json;

namespace {

json tiny_table1() {
  return {{"grid", 16}, {"n_train", 8},        {"n_test", 4}, {"epochs", 2},          {"width", 4},
          {"depth", 1}, {"modes", 4},          {"proj_width", 8}, {"seeds", {0, 1}}, {"models", {"fno", "fno3x3"}},
          {"batch_size", 4}};
}

#ifdef NOLAB_CLI_PATH
int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + NOLAB_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}
#endif

}  // namespace

TEST_SUITE("recipes") {

TEST_CASE("config resolution") {
  for (auto e : {Experiment::table1, Experiment::wave_erf, Experiment::ns_erf, Experiment::spectra,
                 Experiment::equivariance}) {
    CHECK(parse_experiment(experiment_name(e)) == e);
    CHECK(resolve_config(e, json()) == default_config(e));
  }
  auto c = resolve_config(Experiment::table1, {{"epochs", 3}});
  CHECK(c.at("epochs") == 3);
  CHECK(c.at("pde") == "darcy");
  CHECK(c.at("seeds").size() == 5);
  CHECK_THROWS_AS(resolve_config(Experiment::table1, {{"epoch", 3}}), ConfigError);
  CHECK_THROWS_AS(resolve_config(Experiment::table1, json::array()), ConfigError);
  CHECK_THROWS_AS(parse_experiment("table2"), ConfigError);
  auto mc = model_config(c, "fno-full", 0);
  CHECK(mc.modes == 32);
  CHECK(model_config(c, "fno3x3", 0).local_kernel == 3);
}

TEST_CASE("shipped recipe files match the defaults") {
  for (auto e : {Experiment::table1, Experiment::wave_erf, Experiment::ns_erf, Experiment::spectra,
                 Experiment::equivariance}) {
    const fs::path p = fs::path(NOLAB_SOURCE_DIR) / "recipes" / (std::string(experiment_name(e)) + ".json");
    CAPTURE(p.string());
    REQUIRE(fs::exists(p));
    auto bytes = storage::read_bytes(p);
    CHECK(resolve_config(e, json::parse(bytes.begin(), bytes.end())) == default_config(e));
  }
}

TEST_CASE("small table1 run writes its artifacts") {
  tk::TempDir dir("table1");
  Context ctx;
  ctx.out_dir = dir.path();
  auto out = run(Experiment::table1, resolve_config(Experiment::table1, tiny_table1()), ctx);
  CHECK(out.summary.at("unit") == "percent");
  CHECK(out.summary.at("models").at("fno").at("per_seed").size() == 2);
  CHECK(out.summary.contains("fno3x3_below_fno_seeds"));
  REQUIRE(!out.artifacts.empty());
  for (const auto& a : out.artifacts) CHECK(fs::exists(dir.path() / a));
  auto runs = storage::read_csv(dir / "table1/runs.csv");
  CHECK(runs.rows.size() == 4);

  auto res = run_table1(resolve_config(Experiment::table1, tiny_table1()));
  CHECK(res.runs.size() == 4);
  CHECK(res.at("fno3x3", 1).history.size() == 2);
  CHECK(storage::format_number(res.at("fno", 0).test_rel_l2) ==
        storage::format_number(out.summary.at("models").at("fno").at("per_seed")[0].get<double>() / 100.0));
}

TEST_CASE("equivariance recipe") {
  auto cfg = resolve_config(Experiment::equivariance,
                            {{"grid", 16}, {"width", 4}, {"modes", 4}, {"samples", 2}, {"models", {"fno", "t1"}}});
  auto out = run(Experiment::equivariance, cfg);
  const auto& errs = out.summary.at("errors");
  REQUIRE(errs.size() == 4);
  CHECK(errs[0].at("c4_error") == 0.0);
  CHECK(errs[1].at("c4_error") == 0.0);
  CHECK(errs[2].at("c4_error").get<double>() > 0.0);
  CHECK(out.artifacts.empty());
}

#ifdef NOLAB_CLI_PATH
TEST_CASE("command line") {
  tk::TempDir dir("cli");
  const auto log = dir / "log.txt";
  const std::string data = (dir / "data").string();

  CHECK(cli("gen-data --pde helmholtz --out " + (dir / "h").string(), log) != 0);
  CHECK(slurp(log).find("helmholtz") != std::string::npos);

  REQUIRE(cli("gen-data --pde darcy --n-train 4 --n-test 2 --grid 16 --seed 3 --out " + data, log) == 0);
  CHECK(fs::exists(fs::path(data) / "manifest.json"));
  CHECK(json::parse(slurp(fs::path(data) / "manifest.json")).at("status") == "complete");

  CHECK(cli("train --model transformer --data " + data, log) == 105);

  const std::string train = "train --model fno3x3 --data " + data + " --epochs 2 --width 4 --depth 1 --modes 4 --out ";
  REQUIRE(cli(train + (dir / "r1").string(), log) == 0);
  REQUIRE(cli(train + (dir / "r2").string(), log) == 0);
  auto history = storage::read_csv(dir / "r1/history.csv");
  CHECK(history.header == std::vector<std::string>{"epoch", "train_rel_l2", "test_rel_l2", "lr"});
  CHECK(history.rows.size() == 2);
  CHECK(tk::files_equal(dir / "r1/checkpoint.nock", dir / "r2/checkpoint.nock"));
  CHECK(tk::files_equal(dir / "r1/history.csv", dir / "r2/history.csv"));

  CHECK(cli("train --model fno --data " + data + " --grid 32 --out " + (dir / "r3").string(), log) != 0);
  CHECK(cli("erf --checkpoint " + (dir / "r1/checkpoint.nock").string() + " --data " + data +
                " --x0 16,0 --out " + (dir / "e0").string(),
            log) != 0);
  REQUIRE(cli("erf --checkpoint " + (dir / "r1/checkpoint.nock").string() + " --data " + data +
                  " --method autodiff --method fd --out " + (dir / "e1").string(),
              log) == 0);
  CHECK(fs::exists(dir / "e1/erf_compare.json"));
  CHECK(slurp(log).find("cosine(autodiff, finite-difference)") != std::string::npos);

  REQUIRE(cli("erf --method analytical --grid 16 --out " + (dir / "a").string(), log) == 0);
  std::size_t n = 0;
  auto values = erf::read_erf_csv(dir / "a/erf_analytical.csv", n);
  auto direct = erf::erf_analytical_wave(erf::center_index(16), 5.0, 0.1, 24, 16);
  REQUIRE(n == 16);
  for (std::size_t p = 0; p < values.size(); ++p) CHECK(values[p] == direct.map.values()[p]);
}
#endif

}  // TEST_SUITE
