// Acceptance suite: one PASS/FAIL line per criterion.
//   nolab_acceptance            run all eight
//   nolab_acceptance --only 2,3 run a subset
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nolab/analysis.hpp"
#include "nolab/datagen.hpp"
#include "nolab/erf.hpp"
#include "nolab/models.hpp"
#include "nolab/recipes.hpp"
#include "nolab/storage.hpp"
#include "testkit.hpp"

using namespace nolab;
namespace tk = nolab::testkit;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

// Collects sub-check outcomes for one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failed_.push_back(what);
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return failed_.empty(); }
  std::string detail() const {
    std::string out;
    for (const auto& n : notes_) out += (out.empty() ? "" : "; ") + n;
    for (const auto& f : failed_) out += (out.empty() ? "" : "; ") + std::string("FAILED ") + f;
    return out;
  }

 private:
  std::vector<std::string> notes_, failed_;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void fill(models::ModelState& s, const std::string& name, double v) {
  for (auto& x : s.param(name).mutable_values()) x = v;
}

Tensor shift(const Tensor& a, std::size_t s1, std::size_t s2) {
  const std::size_t b = a.extent(0), n = a.extent(1);
  std::vector<double> v(a.numel());
  for (std::size_t k = 0; k < b; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) v[(k * n + (i + s1) % n) * n + (j + s2) % n] = a[(k * n + i) * n + j];
  return Tensor::from(a.shape(), std::move(v), a.dtype());
}

// ---------------------------------------------------------------- 1

void gradients(Checks& c) {
  double worst = 0.0;
  std::string worst_name;
  std::size_t cases = 0, entries = 0;
  auto run = [&](const std::string& name, const tk::Fn& f, const std::vector<Tensor>& in, std::size_t max_entries) {
    auto rep = tk::gradcheck(f, in, 1e-6, max_entries);
    ++cases;
    entries += rep.entries;
    if (rep.max_rel_err > worst) {
      worst = rep.max_rel_err;
      worst_name = name;
    }
    c.expect(rep.max_rel_err < 1e-5, name + " err " + sci(rep.max_rel_err) + " (" + rep.worst_input + ")");
  };
  for (const auto& g : tk::primitive_cases()) run(g.name, g.fn, tk::case_inputs(g, 1), 0);
  for (const auto& g : tk::pipeline_cases()) run(g.name, g.fn, tk::case_inputs(g, 2), 0);
  for (const auto& cfg : tk::zoo_configs(16)) {
    auto s = models::init_model(cfg);
    run(models::arch_name(cfg.arch), tk::model_fn(s), tk::model_inputs(s, 3), 0);
  }
  c.note(std::to_string(cases) + " cases, " + std::to_string(entries) + " coordinates, worst " + sci(worst) + " (" +
         worst_name + ")");
}

// ---------------------------------------------------------------- 2

void erf_oracles(Checks& c) {
  for (auto arch : {models::Arch::fno, models::Arch::fno3x3, models::Arch::cno, models::Arch::t1,
                    models::Arch::deeponet}) {
    models::ModelConfig cfg;
    cfg.arch = arch;
    cfg.grid = 16;
    cfg.width = 8;
    cfg.depth = 3;
    cfg.modes = 6;
    cfg.seed = 5;
    auto s = models::init_model(cfg.resolved());
    auto probe = tk::random_field(16, 17);
    const auto x0 = erf::center_index(16);
    auto ad = erf::erf_autodiff(s, probe, x0);
    auto fd = erf::erf_finite_difference(s, probe, x0);
    const double cos = erf::cosine_similarity(ad.map, fd.map);
    const double rel = tk::max_rel(fd.map.values(), ad.map.values());
    const std::string name = models::arch_name(arch);
    c.note(name + " cos " + std::to_string(cos) + " rel " + sci(rel));
    c.expect(cos > 0.999, name + " cosine");
    c.expect(rel < 1e-3, name + " max relative error");
  }
}

// ---------------------------------------------------------------- 3

// Perturb one grid value of u0, project onto the K x K sine basis by
// quadrature, propagate with the closed-form solution, read u(t, x0).
Field2D perturbation_oracle(erf::GridIndex x0, double t, double c, int K, std::size_t n) {
  const double h = 1.0 / static_cast<double>(n - 1);
  Field2D out(n, BoundaryKind::dirichlet_zero);
  datagen::SineCoeffs coeffs;
  coeffs.K = K;
  coeffs.c = c;
  coeffs.a.resize(static_cast<std::size_t>(K * K));
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = 0; q < n; ++q) {
      for (int i = 1; i <= K; ++i)
        for (int j = 1; j <= K; ++j) {
          const double proj = 4.0 * h * h * std::sin(kPi * i * static_cast<double>(p) * h) *
                              std::sin(kPi * j * static_cast<double>(q) * h);
          coeffs.a[static_cast<std::size_t>((i - 1) * K + (j - 1))] =
              proj * K * K * static_cast<double>(i * i + j * j) / kPi;
        }
      out(p, q) = datagen::wave_exact_solution(coeffs, t, n)(x0.ix, x0.iy) / (h * h);
    }
  return out;
}

void analytical_wave(Checks& c) {
  const std::size_t n = 64;
  const double t = 5.0, speed = 0.1;
  const int K = 24;
  for (auto x0 : {erf::center_index(n), erf::GridIndex{17, 40}}) {
    auto m = erf::erf_analytical_wave(x0, t, speed, K, n);
    auto oracle = perturbation_oracle(x0, t, speed, K, n);
    const double err = tk::rel_l2(m.map.values(), oracle.values());
    c.note("x0 (" + std::to_string(x0.ix) + "," + std::to_string(x0.iy) + ") rel l2 " + sci(err));
    c.expect(err < 1e-2, "oracle discrepancy");

    bool symmetric = true;
    for (std::size_t i = 0; i < n; i += 7)
      for (std::size_t j = 0; j < n; j += 5)
        symmetric = symmetric && erf::erf_analytical_wave({i, j}, t, speed, K, n).map(x0.ix, x0.iy) == m.map(i, j);
    c.expect(symmetric, "symmetry under x0 <-> x");
    c.expect(erf::erf_analytical_wave(x0, -t, speed, K, n).map.values() == m.map.values(), "t-parity");
  }
  c.note("symmetry and t-parity exact");
}

// ---------------------------------------------------------------- 4, 5

const recipes::Table1Result& table1() {
  static const recipes::Table1Result res = [] {
    const auto t0 = Clock::now();
    recipes::Context ctx;
    ctx.log = [t0](const std::string& s) { std::cout << "  [" << static_cast<int>(seconds_since(t0)) << "s] " << s << "\n" << std::flush; };
    return recipes::run_table1(recipes::default_config(recipes::Experiment::table1), ctx);
  }();
  return res;
}

void table1_direction(Checks& c) {
  const auto t0 = Clock::now();
  const auto& res = table1();
  int wins = 0;
  std::ostringstream per;
  for (auto s : res.seeds()) {
    const double a = res.at("fno", s).test_rel_l2, b = res.at("fno3x3", s).test_rel_l2;
    wins += b < a;
    per << (s ? " " : "") << s << ":" << sci(a) << "/" << sci(b);
  }
  const double mf = res.mean("fno"), m3 = res.mean("fno3x3"), mfull = res.mean("fno-full");
  c.note("mean fno " + sci(mf) + ", fno3x3 " + sci(m3) + ", fno-full " + sci(mfull));
  c.note("fno3x3 below fno in " + std::to_string(wins) + "/" + std::to_string(res.seeds().size()) + " seeds [" +
         per.str() + "]");
  c.expect(res.seeds().size() == 5, "five seeds");
  c.expect(wins >= 4, "fno3x3 below fno in >= 4 seeds");
  c.expect(!(mfull < m3), "fno-full does not beat fno3x3 on mean");
  const double took = seconds_since(t0);
  c.expect(took < 45 * 60, "runtime under 45 min");
}

void table1_low_band(Checks& c) {
  const auto& res = table1();
  int wins = 0;
  for (auto s : res.seeds()) wins += res.at("fno3x3", s).low_band < res.at("fno", s).low_band;
  c.note("low-band energy fno3x3 below fno in " + std::to_string(wins) + "/" + std::to_string(res.seeds().size()) +
         " seeds");
  c.expect(wins >= 4, "low band in >= 4 seeds");
}

// ---------------------------------------------------------------- 6

double field_mean(const Field2D& w) {
  double s = 0.0;
  for (double v : w.values()) s += v;
  return s / static_cast<double>(w.values().size());
}

double darcy_residual_oracle(const Field2D& a, const Field2D& u) {
  const std::size_t n = a.n();
  const double h = 1.0 / static_cast<double>(n - 1);
  auto face = [&](std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return 2.0 * a(i, j) * a(k, l) / (a(i, j) + a(k, l));
  };
  double rr = 0.0, ff = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i)
    for (std::size_t j = 1; j + 1 < n; ++j) {
      const double flux = face(i, j, i + 1, j) * (u(i, j) - u(i + 1, j)) + face(i, j, i - 1, j) * (u(i, j) - u(i - 1, j)) +
                          face(i, j, i, j + 1) * (u(i, j) - u(i, j + 1)) + face(i, j, i, j - 1) * (u(i, j) - u(i, j - 1));
      rr += std::pow(flux / (h * h) - 1.0, 2);
      ff += 1.0;
    }
  return std::sqrt(rr / ff);
}

void solvers(Checks& c) {
  using namespace datagen;
  {
    const std::size_t n = 64;
    auto w0 = sample_grf(ns_initial_spec(), 9, n);
    NSConfig cfg;
    cfg.snapshot_times = {0.5};
    double prev = field_mean(w0), drift = 0.0;
    cfg.observer = [&](std::size_t, double, const Field2D& w) {
      const double m = field_mean(w);
      drift = std::max(drift, std::abs(m - prev));
      prev = m;
    };
    ns_solve(w0, ns_forcing(n), cfg);
    c.note("ns drift " + sci(drift));
    c.expect(drift < 1e-10, "ns mean drift");

    std::vector<double> ens;
    cfg.observer = [&](std::size_t, double, const Field2D& w) {
      double e = 0.0;
      for (double v : w.values()) e += v * v;
      ens.push_back(e);
    };
    ns_solve(w0, ns_zero_forcing(n), cfg);
    bool mono = true;
    for (std::size_t k = 1; k < ens.size(); ++k) mono = mono && ens[k] <= ens[k - 1];
    c.expect(mono, "enstrophy monotone");
  }
  {
    const std::size_t n = 32;
    Field2D w0(n, BoundaryKind::periodic);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) w0(i, j) = std::sin(2 * kPi * w0.coord(i)) + std::cos(2 * kPi * w0.coord(j));
    NSConfig cfg;
    cfg.nu = 1e-2;
    cfg.snapshot_times = {1.0};
    auto w = ns_solve(w0, ns_zero_forcing(n), cfg).snapshots[0];
    const double decay = std::exp(-4 * kPi * kPi * cfg.nu);
    std::vector<double> ref(w0.values());
    for (auto& v : ref) v *= decay;
    const double err = tk::max_rel(w.values(), ref);
    c.note("ns single-mode decay error " + sci(err));
    c.expect(err < 1e-3, "ns analytic decay");
  }
  {
    auto err = [](std::size_t n) {
      Field2D a(n, BoundaryKind::dirichlet_zero, std::vector<double>(n * n, 1.0));
      Field2D f(n, BoundaryKind::dirichlet_zero);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          f(i, j) = 2 * kPi * kPi * std::sin(kPi * f.coord(i)) * std::sin(kPi * f.coord(j));
      auto res = darcy_solve(a, f);
      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          worst = std::max(worst, std::abs(res.u(i, j) - std::sin(kPi * f.coord(i)) * std::sin(kPi * f.coord(j))));
      return worst;
    };
    const double r1 = err(33) / err(65), r2 = err(65) / err(129);
    c.note("darcy ratios " + std::to_string(r1) + ", " + std::to_string(r2));
    c.expect(r1 >= 3.5 && r1 <= 4.5 && r2 >= 3.5 && r2 <= 4.5, "darcy convergence ratio");
  }
  {
    // Every sample the table1 dataset emits.
    DatasetSpec spec = recipes::dataset_spec(recipes::default_config(recipes::Experiment::table1));
    double worst = 0.0;
    for (bool test : {false, true})
      for (std::size_t i = 0; i < (test ? spec.n_test : spec.n_train); ++i) {
        auto [a, u] = generate_sample(spec, sample_seed(spec.seed, test, i));
        worst = std::max(worst, darcy_residual_oracle(a, u));
      }
    c.note("darcy worst residual " + sci(worst));
    c.expect(worst < 1e-8, "darcy residual");
  }
  {
    const std::size_t n = 64;
    AllenCahnConfig cfg;
    // Constant states are equilibria only without a pinned boundary.
    for (double level : {0.0, 1.0}) {
      Field2D u0(n, BoundaryKind::periodic, std::vector<double>(n * n, level));
      bool fixed = true;
      for (double v : tk::owned(allen_cahn_solve(u0, cfg))) fixed = fixed && v == level;
      c.expect(fixed, "allen-cahn equilibrium " + std::to_string(level));
    }
    auto u0 = sample_wave_initial(21, 24, n).second;
    Field2D start(n, BoundaryKind::periodic, u0.values());
    cfg.dt = allen_cahn_auto_dt(n, cfg.eps, cfg.boundary);
    auto u1 = allen_cahn_solve(start, cfg);
    cfg.dt /= 2;
    auto u2 = allen_cahn_solve(start, cfg);
    const double change = tk::rel_l2(u1.values(), u2.values());
    c.note("allen-cahn dt-halving " + sci(change));
    c.expect(change < 1e-4, "allen-cahn dt halving");
  }
}

// ---------------------------------------------------------------- 7

void structure(Checks& c) {
  using namespace models;
  ModelConfig base;
  base.grid = 16;
  base.width = 8;
  base.depth = 3;
  base.modes = 5;
  base.seed = 2;
  {
    auto fno = init_model(base);
    auto cfg = base;
    cfg.arch = Arch::fno3x3;
    auto fno3 = init_model(cfg.resolved());
    for (std::size_t l = 0; l < base.depth; ++l) fill(fno3, "layer" + std::to_string(l) + ".local.w", 0.0);
    auto a = tk::random_tensor({4, 16, 16}, 1).to(DType::f32);
    auto y0 = forward(fno, a), y1 = forward(fno3, a);
    bool same = true;
    for (std::size_t i = 0; i < y0.numel(); ++i) same = same && y0[i] == y1[i];
    c.expect(same, "fno3x3 with zero local kernels bit-equals fno");
  }
  {
    auto cfg = base;
    cfg.depth = 1;
    cfg.coord_features = false;
    auto s = init_model(cfg);
    fill(s, "layer0.pw.w", 0.0);
    auto a = tk::random_tensor({2, 16, 16}, 2).to(DType::f32);
    double worst = 0.0;
    for (auto [s1, s2] : {std::pair<std::size_t, std::size_t>{3, 5}, {1, 0}, {8, 13}})
      worst = std::max(worst, tk::max_rel(forward(s, shift(a, s1, s2)).values(), shift(forward(s, a), s1, s2).values()));
    c.note("shift equivariance " + sci(worst));
    c.expect(worst < 1e-6, "spectral shift equivariance");
  }
  {
    // Rank-p span: outputs over (inputs x points) form a rank <= p matrix.
    ModelConfig cfg = base;
    cfg.arch = Arch::deeponet;
    cfg.dtype = DType::f64;
    cfg.basis = 3;
    auto s = init_model(cfg.resolved());
    const std::size_t B = 6, P = 10;
    auto y = deeponet_forward(s, tk::random_tensor({B, 256}, 3), tk::random_tensor({P, 2}, 4, 0.0, 1.0));
    Eigen::MatrixXd m(B, P);
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < P; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = y[i * P + j];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    const double ratio = sv(3) / sv(0);
    c.note("deeponet sigma_4/sigma_1 " + sci(ratio));
    c.expect(sv(2) / sv(0) > 1e-8 && ratio < 1e-10, "deeponet rank p");
  }
  {
    auto cfg = base;
    cfg.arch = Arch::t1;
    auto s = init_model(cfg.resolved());
    ops::reset_transform_counts();
    forward(s, tk::random_tensor({3, 16, 16}, 5).to(DType::f32));
    auto counts = ops::transform_counts();
    c.note("t1 transforms (" + std::to_string(counts.forward) + "," + std::to_string(counts.inverse) + ")");
    c.expect(counts.forward == 1 && counts.inverse == 1, "t1 transform count");
  }
  {
    auto q = tk::random_tensor({2, 32, 6}, 6), k = tk::random_tensor({2, 32, 6}, 7), v = tk::random_tensor({2, 32, 6}, 8);
    double worst = 0.0;
    for (auto norm : {AttnNorm::none, AttnNorm::standardize}) {
      auto out = galerkin_attention(q, k, v, norm);
      // (q k^T) v association with the same normalization
      Tensor kk = k, vv = v;
      if (norm == AttnNorm::standardize) {
        auto standardize = [](const Tensor& t) {
          std::vector<double> r(t.numel());
          for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t d = 0; d < 6; ++d) {
              double m = 0.0, var = 0.0;
              for (std::size_t i = 0; i < 32; ++i) m += t[(b * 32 + i) * 6 + d] / 32.0;
              for (std::size_t i = 0; i < 32; ++i) var += std::pow(t[(b * 32 + i) * 6 + d] - m, 2) / 32.0;
              for (std::size_t i = 0; i < 32; ++i) r[(b * 32 + i) * 6 + d] = (t[(b * 32 + i) * 6 + d] - m) / std::sqrt(var + 1e-5);
            }
          return Tensor::from(t.shape(), std::move(r));
        };
        kk = standardize(k);
        vv = standardize(v);
      }
      auto scores = ops::matmul(q, ops::permute(kk, {0, 2, 1}));  // [2, 32, 32]
      auto alt = ops::scale(ops::matmul(scores, vv), 1.0 / 32.0);
      worst = std::max(worst, tk::max_rel(out.values(), alt.values()));
    }
    c.note("galerkin association " + sci(worst));
    c.expect(worst < 1e-12, "galerkin association order");
  }
  {
    std::vector<Field2D> xs;
    for (std::uint64_t s = 0; s < 3; ++s) xs.push_back(tk::random_field(16, 40 + s));
    const double id = analysis::c4_equivariance_error([](const Tensor& a) { return a; }, xs);
    const double pw = analysis::c4_equivariance_error([](const Tensor& a) { return ops::gelu(ops::mul(a, a)); }, xs);
    c.note("c4 identity " + sci(id) + ", pointwise " + sci(pw));
    c.expect(id == 0.0 && pw == 0.0, "c4 audit zero");
  }
}

// ---------------------------------------------------------------- 8

#ifdef NOLAB_CLI_PATH
int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + NOLAB_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
#endif

template <class Fn>
bool rejects(Fn&& fn) {
  try {
    fn();
  } catch (const FormatError&) {
    return true;
  } catch (const Error&) {
    return true;
  }
  return false;
}

void reproducibility(Checks& c) {
  tk::TempDir dir("acceptance");
#ifdef NOLAB_CLI_PATH
  std::size_t compared = 0;
  auto same = [&](const fs::path& a, const fs::path& b) {
    ++compared;
    c.expect(tk::files_equal(a, b), "byte-identical " + a.filename().string());
  };
  for (const std::string pde : {"darcy", "wave", "ns"}) {
    std::string gen = "gen-data --pde " + pde + " --n-train 6 --n-test 3 --grid 16 --seed 4 --out ";
    const auto d1 = dir / (pde + "1"), d2 = dir / (pde + "2");
    c.expect(cli(gen + d1.string()) == 0 && cli(gen + d2.string()) == 0, "gen-data " + pde + " runs");
    for (const char* f : {"train.nodf", "test.nodf", "data_card.txt"}) same(d1 / f, d2 / f);
  }
  for (const std::string model : {"fno3x3", "cno"}) {
    std::string train = "train --model " + model + " --data " + (dir / "darcy1").string() +
                        " --epochs 3 --width 4 --depth 2 --modes 4 --batch-size 2 --seed 7 --out ";
    const auto r1 = dir / (model + "_r1"), r2 = dir / (model + "_r2");
    c.expect(cli(train + r1.string()) == 0 && cli(train + r2.string()) == 0, "train " + model + " runs");
    for (const char* f : {"checkpoint.nock", "best.nock", "history.csv"}) same(r1 / f, r2 / f);
  }
  c.note(std::to_string(compared) + " repeated artifacts byte-identical");
#else
  c.expect(false, "command-line tool not built");
#endif

  {
    datagen::DatasetSpec spec;
    spec.family = datagen::Family::darcy;
    spec.grid = 16;
    spec.n_train = 5;
    spec.n_test = 2;
    auto pair = datagen::build_dataset(spec);
    const auto p = dir / "rt.nodf";
    storage::write_dataset(pair.train, p);
    auto back = storage::read_dataset(p);
    auto bits_equal = [](const std::vector<float>& a, const std::vector<float>& b) {
      return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
    };
    c.expect(bits_equal(back.inputs, pair.train.inputs) && bits_equal(back.targets, pair.train.targets) &&
                 back.metadata == pair.train.metadata,
             "dataset roundtrip");
    c.expect(storage::serialize_dataset(back) == storage::read_bytes(p), "dataset reserialization");

    auto bytes = storage::read_bytes(p);
    auto corrupt = [&](std::function<void(std::vector<std::uint8_t>&)> f) {
      auto b = bytes;
      f(b);
      return rejects([&] { storage::deserialize_dataset(b); });
    };
    c.expect(corrupt([](auto& b) { b[0] ^= 0xff; }), "dataset bad magic rejected");
    c.expect(corrupt([](auto& b) { b[4] = 99; }), "dataset bad version rejected");
    c.expect(corrupt([](auto& b) { b.resize(b.size() - 4); }), "dataset truncation rejected");
    c.expect(corrupt([](auto& b) { b.push_back(0); }), "dataset trailing byte rejected");
    c.expect(corrupt([](auto& b) { b[16] = '#'; }), "dataset metadata damage rejected");
  }
  {
    models::ModelConfig cfg;
    cfg.arch = models::Arch::fno3x3;
    cfg.grid = 16;
    cfg.width = 4;
    cfg.depth = 2;
    cfg.modes = 4;
    auto s = models::init_model(cfg.resolved());
    const auto p = dir / "m.nock";
    models::save_checkpoint(s, p);
    auto back = models::load_checkpoint(p).state;
    auto a = tk::random_tensor({2, 16, 16}, 9).to(DType::f32);
    auto y0 = models::forward(s, a), y1 = models::forward(back, a);
    bool same_out = true;
    for (std::size_t i = 0; i < y0.numel(); ++i) same_out = same_out && y0[i] == y1[i];
    c.expect(same_out, "checkpoint roundtrip");

    auto bytes = storage::read_bytes(p);
    auto corrupt = [&](std::function<void(std::vector<std::uint8_t>&)> f) {
      auto b = bytes;
      f(b);
      return rejects([&] {
        storage::atomic_write(dir / "bad.nock", b);
        models::load_checkpoint(dir / "bad.nock");
      });
    };
    c.expect(corrupt([](auto& b) { b[1] ^= 0xff; }), "checkpoint bad magic rejected");
    c.expect(corrupt([](auto& b) { b.resize(b.size() / 2); }), "checkpoint truncation rejected");
    c.expect(corrupt([](auto& b) { b.push_back(1); }), "checkpoint trailing byte rejected");
  }
  c.note("roundtrips bit-exact, corrupted files rejected");
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0 = no runtime bound
  std::function<void(Checks&)> run;
};

std::set<int> parse_only(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const int v = std::atoi(item.c_str());
    if (v < 1 || v > 8) throw ConfigError("--only expects criteria 1..8, got '" + item + "'");
    out.insert(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  try {
    for (int i = 1; i < argc; ++i) {
      const std::string arg = argv[i];
      if (arg == "--only" && i + 1 < argc)
        only = parse_only(argv[++i]);
      else
        throw ConfigError("usage: nolab_acceptance [--only 1,2,...]");
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  const std::vector<Criterion> criteria = {
      {1, "gradient suite", 5 * 60, gradients},
      {2, "ERF autodiff vs finite differences", 10 * 60, erf_oracles},
      {3, "analytical wave ERF vs perturbation oracle", 0, analytical_wave},
      {4, "table1 direction on darcy", 45 * 60, table1_direction},
      {5, "table1 low-band error", 0, table1_low_band},
      {6, "solver property suite", 10 * 60, solvers},
      {7, "structure invariants", 0, structure},
      {8, "reproducibility and storage integrity", 0, reproducibility},
  };

  int failed = 0;
  for (const auto& cr : criteria) {
    if (!only.empty() && !only.count(cr.id)) continue;
    Checks checks;
    const auto t0 = Clock::now();
    try {
      cr.run(checks);
    } catch (const std::exception& e) {
      checks.expect(false, std::string("exception: ") + e.what());
    }
    const double took = seconds_since(t0);
    if (cr.budget_seconds > 0) checks.expect(took < cr.budget_seconds, "runtime budget");
    const bool ok = checks.ok();
    failed += !ok;
    std::printf("%s [%d] %s (%.1fs): %s\n", ok ? "PASS" : "FAIL", cr.id, cr.name, took, checks.detail().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
