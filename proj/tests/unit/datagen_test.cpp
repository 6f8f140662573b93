#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <set>

#include "doctest.h"
#include "nolab/datagen.hpp"
#include "testkit.hpp"

using namespace nolab;
using namespace nolab::datagen;
namespace tk = nolab::testkit;

namespace {

constexpr double kPi = std::numbers::pi;

// ||A u - f|| / ||f|| over interior nodes for -div(a grad u) = f, harmonic
// face means, written out independently of the solver.
double residual_oracle(const Field2D& a, const Field2D& u, const std::function<double(double, double)>& f) {
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
      const double fv = f(static_cast<double>(i) * h, static_cast<double>(j) * h);
      rr += std::pow(flux / (h * h) - fv, 2);
      ff += fv * fv;
    }
  return std::sqrt(rr / ff);
}

SineCoeffs single_mode(double value = 1.0) {
  SineCoeffs c;
  c.K = 1;
  c.a = {value};
  return c;
}

double enstrophy(const Field2D& w) {
  double s = 0.0;
  for (double v : w.values()) s += v * v;
  return s;
}

double field_mean(const Field2D& w) {
  double s = 0.0;
  for (double v : w.values()) s += v;
  return s / static_cast<double>(w.values().size());
}

}  // namespace

TEST_SUITE("datagen") {

TEST_CASE("wave closed form examples") {
  auto f = wave_field(single_mode(), 65, 0.0);
  CHECK(f(32, 32) == doctest::Approx(kPi / 2).epsilon(1e-14));
  SineCoeffs zero;
  zero.K = 3;
  zero.a.assign(9, 0.0);
  for (double v : tk::owned(wave_field(zero, 16, 0.0))) CHECK(v == 0.0);
  CHECK_THROWS_AS(sample_wave_coeffs(1, 0), ConfigError);

  auto [c1, u1] = sample_wave_initial(42, 24, 32);
  auto [c2, u2] = sample_wave_initial(42, 24, 32);
  CHECK(c1.a == c2.a);
  CHECK(u1.values() == u2.values());
  for (double a : c1.a) CHECK(std::abs(a) <= 1.0);
  CHECK(u1.boundary() == BoundaryKind::dirichlet_zero);
}

TEST_CASE("wave exact solution") {
  auto [c, u0] = sample_wave_initial(3, 24, 32);
  auto at0 = wave_exact_solution(c, 0.0, 32);
  CHECK(tk::max_rel(at0.values(), u0.values()) < 1e-15);

  auto s0 = wave_field(single_mode(), 33, 0.0);
  auto s5 = wave_exact_solution(single_mode(), 5.0, 33);
  const double factor = std::cos(0.5 * kPi * std::sqrt(2.0));
  CHECK(factor == doctest::Approx(-0.60570).epsilon(1e-4));
  for (std::size_t p = 0; p < s0.values().size(); ++p)
    CHECK(s5.values()[p] == doctest::Approx(factor * s0.values()[p]).epsilon(1e-12));
  CHECK_THROWS_AS(wave_exact_solution(c, -1.0, 16), ConfigError);
}

TEST_CASE("wave solution is linear in the coefficients") {
  auto c1 = sample_wave_coeffs(5, 24), c2 = sample_wave_coeffs(6, 24);
  const double alpha = 0.3, beta = -1.7;
  SineCoeffs mix = c1;
  for (std::size_t k = 0; k < mix.a.size(); ++k) mix.a[k] = alpha * c1.a[k] + beta * c2.a[k];
  auto lhs = wave_exact_solution(mix, 5.0, 32);
  auto u1 = wave_exact_solution(c1, 5.0, 32), u2 = wave_exact_solution(c2, 5.0, 32);
  std::vector<double> rhs(u1.values().size());
  for (std::size_t p = 0; p < rhs.size(); ++p) rhs[p] = alpha * u1.values()[p] + beta * u2.values()[p];
  CHECK(tk::max_rel(lhs.values(), rhs) < 1e-13);
}

TEST_CASE("discrete wave residual converges at second order") {
  auto coeffs = sample_wave_coeffs(8, 4);
  const double t = 2.0, c = coeffs.c;
  auto residual = [&](std::size_t n) {
    const double h = 1.0 / static_cast<double>(n - 1), dt = h;
    auto um = wave_field(coeffs, n, t - dt), u = wave_field(coeffs, n, t), up = wave_field(coeffs, n, t + dt);
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i)
      for (std::size_t j = 1; j + 1 < n; ++j) {
        const double utt = (up(i, j) - 2 * u(i, j) + um(i, j)) / (dt * dt);
        const double lap = (u(i + 1, j) + u(i - 1, j) + u(i, j + 1) + u(i, j - 1) - 4 * u(i, j)) / (h * h);
        worst = std::max(worst, std::abs(utt - c * c * lap));
      }
    return worst;
  };
  const double ratio = residual(33) / residual(65);
  CHECK(ratio > 3.3);
  CHECK(ratio < 4.7);
}

TEST_CASE("GRF sampler") {
  GRFSpec zero = ns_initial_spec();
  zero.sigma = 0.0;
  for (double v : tk::owned(sample_grf(zero, 1, 16))) CHECK(v == 0.0);
  GRFSpec bad;
  bad.tau = -1.0;
  CHECK_THROWS_AS(sample_grf(bad, 1, 16), ConfigError);

  // pointwise Monte-Carlo mean within 4 standard errors of zero
  for (const auto& spec : {ns_initial_spec(), darcy_coefficient_spec()}) {
    const std::size_t n = 32, samples = 500;
    double sum = 0.0, sq = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      const double v = sample_grf(spec, 1000 + s, n)(5, 9);
      sum += v;
      sq += v * v;
    }
    const double mean = sum / samples, var = sq / samples - mean * mean;
    CHECK(std::abs(mean) < 4.0 * std::sqrt(var / samples));
  }
}

TEST_CASE("GRF single-mode variance") {
  const GRFSpec spec = ns_initial_spec();
  const std::size_t n = 32, samples = 2000;
  const long k1 = 1, k2 = 2;
  double acc = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    auto u = sample_grf(spec, 5000 + s, n);
    std::complex<double> c = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        c += u(i, j) * std::polar(1.0, -2 * kPi * static_cast<double>(k1 * static_cast<long>(i) + k2 * static_cast<long>(j)) /
                                           static_cast<double>(n));
    acc += std::norm(c / static_cast<double>(n * n));
  }
  const double lambda = 4 * kPi * kPi * (k1 * k1 + k2 * k2);
  const double expected = spec.sigma * spec.sigma * std::pow(lambda + spec.tau * spec.tau, -spec.exponent);
  CHECK(std::abs(acc / samples / expected - 1.0) < 0.15);
}

TEST_CASE("navier-stokes single-mode decay") {
  const std::size_t n = 32;
  Field2D w0(n, BoundaryKind::periodic);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) w0(i, j) = std::sin(2 * kPi * w0.coord(i));
  NSConfig cfg;
  cfg.nu = 1e-2;
  cfg.dt = 1e-3;
  cfg.snapshot_times = {1.0};
  auto traj = ns_solve(w0, ns_zero_forcing(n), cfg);
  const double expected = std::exp(-4 * kPi * kPi * 1e-2);
  CHECK(expected == doctest::Approx(0.6738).epsilon(1e-3));
  for (std::size_t p = 0; p < n * n; ++p) {
    const double ref = expected * w0.values()[p];
    CHECK(std::abs(traj.snapshots[0].values()[p] - ref) <= 1e-3 * expected + 1e-12);
  }
}

TEST_CASE("navier-stokes conservation and enstrophy decay") {
  const std::size_t n = 32;
  auto w0 = sample_grf(ns_initial_spec(), 9, n);
  std::vector<double> means, ens;
  NSConfig cfg;
  cfg.dt = 1e-3;
  cfg.snapshot_times = {0.2};
  cfg.observer = [&](std::size_t, double, const Field2D& w) { means.push_back(field_mean(w)); };
  ns_solve(w0, ns_forcing(n), cfg);
  REQUIRE(means.size() == 200);
  double prev = field_mean(w0), worst = 0.0;
  for (double m : means) {
    worst = std::max(worst, std::abs(m - prev));
    prev = m;
  }
  CHECK(worst < 1e-10);

  cfg.observer = [&](std::size_t, double, const Field2D& w) { ens.push_back(enstrophy(w)); };
  ns_solve(w0, ns_zero_forcing(n), cfg);
  for (std::size_t k = 1; k < ens.size(); ++k) CHECK(ens[k] <= ens[k - 1] * (1 + 1e-14));

  cfg.snapshot_times = {0.0105};
  CHECK_THROWS_AS(ns_solve(w0, ns_forcing(n), cfg), ConfigError);
}

TEST_CASE("navier-stokes CFL violation aborts") {
  const std::size_t n = 32;
  auto w0 = sample_grf(ns_initial_spec(), 9, n);
  for (auto& v : w0.values()) v *= 1e4;
  NSConfig cfg;
  cfg.dt = 1e-2;
  cfg.snapshot_times = {0.1};
  CHECK_THROWS_AS(ns_solve(w0, ns_zero_forcing(n), cfg), SolverError);
}

TEST_CASE("darcy coefficient") {
  auto a = darcy_sample_coefficient(4, 32);
  for (double v : a.values()) CHECK((v == 3.0 || v == 12.0));
  CHECK(a.values() == darcy_sample_coefficient(4, 32).values());
  double high = 0.0, total = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s)
    for (double v : tk::owned(darcy_sample_coefficient(100 + s, 32))) {
      high += v == 12.0;
      total += 1.0;
    }
  CHECK(std::abs(high / total - 0.5) < 0.05);
}

TEST_CASE("darcy manufactured solution converges at second order") {
  auto err = [](std::size_t n) {
    Field2D a(n, BoundaryKind::dirichlet_zero, std::vector<double>(n * n, 1.0));
    Field2D f(n, BoundaryKind::dirichlet_zero);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) f(i, j) = 2 * kPi * kPi * std::sin(kPi * f.coord(i)) * std::sin(kPi * f.coord(j));
    auto res = darcy_solve(a, f);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        worst = std::max(worst, std::abs(res.u(i, j) - std::sin(kPi * f.coord(i)) * std::sin(kPi * f.coord(j))));
    return worst;
  };
  const double ratio = err(33) / err(65);
  CHECK(ratio >= 3.5);
  CHECK(ratio <= 4.5);
}

TEST_CASE("darcy solver contract and symmetry") {
  const std::size_t n = 33;
  auto c = darcy_sample_coefficient(12, n);
  Field2D a = c;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) a(i, j) = c(j, i);
  auto res = darcy_solve(a);
  CHECK(res.residual < 1e-8);
  CHECK(residual_oracle(a, res.u, [](double, double) { return 1.0; }) < 1e-8);
  double umax = 0.0, asym = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      umax = std::max(umax, std::abs(res.u(i, j)));
      asym = std::max(asym, std::abs(res.u(i, j) - res.u(j, i)));
    }
  CHECK(asym < 1e-8 * umax);
  for (std::size_t m = 0; m < n; ++m) CHECK(res.u(0, m) == 0.0);

  Field2D bad = a;
  bad(3, 3) = 0.0;
  CHECK_THROWS_AS(darcy_solve(bad), ConfigError);
  CHECK_THROWS_AS(darcy_solve(a, std::nullopt, 1e-10, 2), SolverError);
}

TEST_CASE("allen-cahn equilibria and step refinement") {
  const std::size_t n = 32;
  AllenCahnConfig cfg;
  for (double level : {0.0, 1.0}) {
    Field2D u0(n, BoundaryKind::periodic, std::vector<double>(n * n, level));
    for (double v : tk::owned(allen_cahn_solve(u0, cfg))) CHECK(v == level);
  }
  auto [coeffs, u0] = sample_wave_initial(21, 24, n);
  Field2D start(n, BoundaryKind::periodic, u0.values());
  cfg.dt = allen_cahn_auto_dt(n, cfg.eps, cfg.boundary);
  auto u1 = allen_cahn_solve(start, cfg);
  cfg.dt /= 2;
  auto u2 = allen_cahn_solve(start, cfg);
  CHECK(tk::rel_l2(u1.values(), u2.values()) < 1e-4);

  cfg.dt = 2 * allen_cahn_stable_dt(n, cfg.eps, cfg.boundary);
  CHECK_THROWS_AS(allen_cahn_solve(start, cfg), ConfigError);
}

TEST_CASE("wave dataset targets follow the closed form") {
  DatasetSpec spec;
  spec.family = Family::wave;
  spec.n_train = 2;
  spec.n_test = 1;
  spec.grid = 16;
  spec.seed = 7;
  auto pair = build_dataset(spec);
  CHECK(pair.train.n_samples() == 2);
  CHECK(pair.train.metadata.at("grid") == 16);
  for (std::size_t s = 0; s < 2; ++s) {
    auto coeffs = sample_wave_coeffs(sample_seed(7, false, s), 24, 0.1);
    auto u = wave_exact_solution(coeffs, 5.0, 16);
    auto f = wave_field(coeffs, 16, 0.0);
    for (std::size_t p = 0; p < 256; ++p) {
      CHECK(pair.train.targets[s * 256 + p] == static_cast<float>(u.values()[p]));
      CHECK(pair.train.inputs[s * 256 + p] == static_cast<float>(f.values()[p]));
    }
  }
}

TEST_CASE("dataset determinism, disjoint splits and train-only statistics") {
  DatasetSpec spec;
  spec.family = Family::darcy;
  spec.n_train = 6;
  spec.n_test = 4;
  spec.grid = 16;
  spec.seed = 3;
  auto a = build_dataset(spec), b = build_dataset(spec);
  CHECK(storage::serialize_dataset(a.train) == storage::serialize_dataset(b.train));
  CHECK(storage::serialize_dataset(a.test) == storage::serialize_dataset(b.test));

  std::set<std::string> seen;
  for (const auto* c : {&a.train, &a.test})
    for (std::size_t s = 0; s < c->n_samples(); ++s)
      seen.insert(storage::digest_of(std::span<const float>(c->inputs).subspan(s * 256, 256)));
  CHECK(seen.size() == 10);

  auto train_stats = target_stats(a.train);
  auto recomputed = compute_stats(a.train.targets);
  CHECK(train_stats.mean == recomputed.mean);
  CHECK(train_stats.std == recomputed.std);
  CHECK(target_stats(a.test).mean == recomputed.mean);

  std::vector<double> v(a.train.targets.begin(), a.train.targets.end()), orig = v;
  normalize(v, train_stats);
  denormalize(v, train_stats);
  CHECK(tk::max_rel(v, orig) < 1e-6);

  spec.seed = 4;
  CHECK(storage::serialize_dataset(build_dataset(spec).train) != storage::serialize_dataset(a.train));
}

TEST_CASE("family names") {
  CHECK(parse_family("ns") == Family::navier_stokes);
  CHECK(parse_family("navier-stokes") == Family::navier_stokes);
  CHECK(parse_family("allen-cahn") == Family::allen_cahn);
  CHECK_THROWS_AS(parse_family("helmholtz"), ConfigError);
  CHECK_THROWS_AS(parse_family("heat"), ConfigError);
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(sample_seed(0, false, 0) != sample_seed(0, true, 0));
}

}  // TEST_SUITE
