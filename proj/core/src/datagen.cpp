#include "nolab/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "nolab/fft.hpp"
#include "nolab/ops.hpp"

namespace nolab::datagen {

namespace {

using cplx = std::complex<double>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
constexpr double kPi = std::numbers::pi;

// basis(m, i) evaluated at the n grid coordinates for i in [0, modes).
RowMat basis_matrix(std::size_t n, std::size_t modes, BoundaryKind bk, const std::function<double(double, std::size_t)>& f) {
  RowMat B(n, modes);
  for (std::size_t m = 0; m < n; ++m) {
    const double x = grid_coord(m, n, bk);
    for (std::size_t i = 0; i < modes; ++i) B(m, i) = f(x, i);
  }
  return B;
}

Field2D from_matrix(const RowMat& M, BoundaryKind bk) {
  const auto n = static_cast<std::size_t>(M.rows());
  return Field2D(n, bk, std::vector<double>(M.data(), M.data() + M.size()));
}

// Fourier truncation/padding to a new periodic size (values preserved).
Field2D resample(const Field2D& f, std::size_t n) {
  if (f.n() == n) return f;
  NoGradGuard guard;
  auto t = ops::spectral_resample(Tensor::from({f.n(), f.n()}, f.values()), n, n);
  return Field2D(n, f.boundary(), std::vector<double>(t.values().begin(), t.values().end()));
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------- wave

SineCoeffs sample_wave_coeffs(std::uint64_t seed, int K, double c) {
  if (K < 1) throw ConfigError("wave truncation K must be >= 1");
  SineCoeffs s;
  s.K = K;
  s.c = c;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  s.a.resize(static_cast<std::size_t>(K) * static_cast<std::size_t>(K));
  for (auto& v : s.a) v = u(rng);
  return s;
}

std::pair<SineCoeffs, Field2D> sample_wave_initial(std::uint64_t seed, int K, std::size_t n, double c) {
  auto coeffs = sample_wave_coeffs(seed, K, c);
  auto f = wave_field(coeffs, n, 0.0);
  return {std::move(coeffs), std::move(f)};
}

Field2D wave_field(const SineCoeffs& coeffs, std::size_t n, double t, BoundaryKind boundary) {
  if (coeffs.K < 1) throw ConfigError("wave truncation K must be >= 1");
  const auto K = static_cast<std::size_t>(coeffs.K);
  if (coeffs.a.size() != K * K) throw ShapeError("wave coefficients must hold K*K values");
  const RowMat S = basis_matrix(n, K, boundary, [](double x, std::size_t i) {
    return std::sin(kPi * static_cast<double>(i + 1) * x);
  });
  RowMat A(K, K);
  const double pre = kPi / static_cast<double>(K * K);
  for (std::size_t i = 1; i <= K; ++i)
    for (std::size_t j = 1; j <= K; ++j) {
      const double r2 = static_cast<double>(i * i + j * j);
      A(i - 1, j - 1) = pre * coeffs(static_cast<int>(i), static_cast<int>(j)) / r2 *
                        std::cos(coeffs.c * kPi * t * std::sqrt(r2));
    }
  return from_matrix(S * A * S.transpose(), boundary);
}

Field2D wave_exact_solution(const SineCoeffs& coeffs, double t, std::size_t n) {
  if (t < 0) throw ConfigError("wave time must be non-negative");
  return wave_field(coeffs, n, t);
}

// ---------------------------------------------------------------- GRF

void GRFSpec::validate() const {
  if (!(exponent > 0) || !(tau > 0) || !(sigma >= 0) || !std::isfinite(sigma))
    throw ConfigError("GRF spec needs exponent > 0, tau > 0, sigma >= 0");
}

double grf_eigenvalue(BoundaryKind boundary, long i, long j) {
  const double k2 = static_cast<double>(i * i + j * j);
  return boundary == BoundaryKind::periodic ? 4.0 * kPi * kPi * k2 : kPi * kPi * k2;
}

GRFSpec ns_initial_spec() { return {2.5, 7.0, std::pow(7.0, 1.5), BoundaryKind::periodic}; }
GRFSpec darcy_coefficient_spec() { return {2.0, 3.0, 1.0, BoundaryKind::neumann}; }

Field2D sample_grf(const GRFSpec& spec, std::uint64_t seed, std::size_t n) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto amplitude = [&](long i, long j) {
    return spec.sigma * std::pow(grf_eigenvalue(spec.boundary, i, j) + spec.tau * spec.tau, -spec.exponent / 2);
  };

  if (spec.boundary == BoundaryKind::periodic) {
    // Filtering real white noise keeps Hermitian symmetry for free:
    // E|fft2(u)_k / n^2|^2 = sigma^2 (lambda_k + tau^2)^{-exponent}.
    std::vector<cplx> noise(n * n), spec_k(n * n), out(n * n);
    for (auto& v : noise) v = normal(rng);
    fft::forward(noise, spec_k, n, n);
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const long ki = fft::signed_freq(i, n), kj = fft::signed_freq(j, n);
        spec_k[i * n + j] *= (ki == 0 && kj == 0) ? 0.0 : nn * amplitude(ki, kj);
      }
    fft::inverse(spec_k, out, n, n);
    std::vector<double> v(n * n);
    for (std::size_t p = 0; p < n * n; ++p) v[p] = out[p].real() / (nn * nn);
    return Field2D(n, spec.boundary, std::move(v));
  }

  // Orthonormal sine (Dirichlet) or cosine (Neumann) eigenbasis on [0,1].
  const bool dir = spec.boundary == BoundaryKind::dirichlet_zero;
  const std::size_t modes = dir ? n - 2 : n;
  const RowMat B = basis_matrix(n, modes, spec.boundary, [dir](double x, std::size_t i) {
    if (dir) return std::sqrt(2.0) * std::sin(kPi * static_cast<double>(i + 1) * x);
    return i == 0 ? 1.0 : std::sqrt(2.0) * std::cos(kPi * static_cast<double>(i) * x);
  });
  RowMat C(modes, modes);
  for (std::size_t i = 0; i < modes; ++i)
    for (std::size_t j = 0; j < modes; ++j) {
      const double xi = normal(rng);
      const long li = static_cast<long>(dir ? i + 1 : i), lj = static_cast<long>(dir ? j + 1 : j);
      C(i, j) = (!dir && i == 0 && j == 0) ? 0.0 : xi * amplitude(li, lj);
    }
  return from_matrix(B * C * B.transpose(), spec.boundary);
}

// ---------------------------------------------------------------- Navier-Stokes

Field2D ns_forcing(std::size_t n) {
  Field2D f(n, BoundaryKind::periodic);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double s = 2.0 * kPi * (f.coord(i) + f.coord(j));
      f(i, j) = 0.1 * (std::sin(s) + std::cos(s));
    }
  return f;
}

Field2D ns_zero_forcing(std::size_t n) { return Field2D(n, BoundaryKind::periodic); }

NSTrajectory ns_solve(const Field2D& w0, const Field2D& forcing, const NSConfig& cfg) {
  const std::size_t n = w0.n();
  if (w0.boundary() != BoundaryKind::periodic) throw ConfigError("ns_solve needs a periodic field");
  if (forcing.n() != n) throw ShapeError("forcing grid does not match the vorticity grid");
  if (!(cfg.dt > 0) || !(cfg.nu >= 0)) throw ConfigError("ns_solve needs dt > 0 and nu >= 0");

  std::vector<std::size_t> snap_steps;
  for (double t : cfg.snapshot_times) {
    const double q = t / cfg.dt;
    const double r = std::round(q);
    if (t < 0 || std::abs(q - r) > 1e-6 * std::max(1.0, q))
      throw ConfigError("snapshot time " + std::to_string(t) + " is not a multiple of dt");
    snap_steps.push_back(static_cast<std::size_t>(r));
  }
  const std::size_t total = snap_steps.empty() ? 0 : *std::max_element(snap_steps.begin(), snap_steps.end());

  const std::size_t nn = n * n;
  const double h = 1.0 / static_cast<double>(n);
  std::vector<double> kx(nn), ky(nn), lap(nn), keep(nn);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const long a = fft::signed_freq(i, n), b = fft::signed_freq(j, n);
      const std::size_t p = i * n + j;
      kx[p] = 2.0 * kPi * static_cast<double>(a);
      ky[p] = 2.0 * kPi * static_cast<double>(b);
      lap[p] = kx[p] * kx[p] + ky[p] * ky[p];
      keep[p] = (3 * static_cast<std::size_t>(std::abs(a)) <= n && 3 * static_cast<std::size_t>(std::abs(b)) <= n) ? 1.0 : 0.0;
    }

  auto to_spec = [&](const std::vector<double>& v) {
    std::vector<cplx> in(v.begin(), v.end()), out(nn);
    fft::forward(in, out, n, n);
    return out;
  };
  auto to_phys = [&](const std::vector<cplx>& s, std::vector<double>& v) {
    std::vector<cplx> out(nn);
    fft::inverse(s, out, n, n);
    v.resize(nn);
    for (std::size_t p = 0; p < nn; ++p) v[p] = out[p].real() / static_cast<double>(nn);
  };

  std::vector<cplx> w = to_spec(w0.values());
  for (std::size_t p = 0; p < nn; ++p) w[p] *= keep[p];
  const std::vector<cplx> fh = to_spec(forcing.values());

  NSTrajectory traj;
  std::vector<cplx> nl_prev(nn), work(nn);
  std::vector<double> u, v, wx, wy;
  const cplx I(0.0, 1.0);

  auto physical = [&]() {
    std::vector<double> phys;
    to_phys(w, phys);
    return Field2D(n, BoundaryKind::periodic, std::move(phys));
  };
  auto record = [&](std::size_t step) {
    for (std::size_t s = 0; s < snap_steps.size(); ++s)
      if (snap_steps[s] == step) {
        traj.times.push_back(cfg.snapshot_times[s]);
        traj.snapshots.push_back(physical());
      }
  };
  record(0);

  for (std::size_t step = 0; step < total; ++step) {
    // psi = w / |k|^2, velocity (d psi/dy, -d psi/dx).
    for (std::size_t p = 0; p < nn; ++p) work[p] = lap[p] > 0 ? I * ky[p] * w[p] / lap[p] : 0.0;
    to_phys(work, u);
    for (std::size_t p = 0; p < nn; ++p) work[p] = lap[p] > 0 ? -I * kx[p] * w[p] / lap[p] : 0.0;
    to_phys(work, v);
    for (std::size_t p = 0; p < nn; ++p) work[p] = I * kx[p] * w[p];
    to_phys(work, wx);
    for (std::size_t p = 0; p < nn; ++p) work[p] = I * ky[p] * w[p];
    to_phys(work, wy);

    double umax = 0.0;
    std::vector<double> adv(nn);
    for (std::size_t p = 0; p < nn; ++p) {
      adv[p] = u[p] * wx[p] + v[p] * wy[p];
      umax = std::max(umax, std::hypot(u[p], v[p]));
    }
    const double cfl = umax * cfg.dt / h;
    traj.max_cfl = std::max(traj.max_cfl, cfl);
    if (cfl > cfg.cfl_limit) {
      std::ostringstream os;
      os << "CFL violation at step " << step << ": max|u| dt / h = " << cfl << " > " << cfg.cfl_limit;
      throw SolverError(os.str());
    }
    std::vector<cplx> nl = to_spec(adv);
    for (std::size_t p = 0; p < nn; ++p) nl[p] *= keep[p];
    nl[0] = 0.0;
    if (step == 0) nl_prev = nl;

    for (std::size_t p = 0; p < nn; ++p) {
      const double a = 0.5 * cfg.nu * cfg.dt * lap[p];
      const cplx rhs = (1.0 - a) * w[p] + cfg.dt * (fh[p] - (1.5 * nl[p] - 0.5 * nl_prev[p]));
      w[p] = keep[p] * rhs / (1.0 + a);
    }
    nl_prev = std::move(nl);
    ++traj.steps;

    if (cfg.observer) cfg.observer(step + 1, static_cast<double>(step + 1) * cfg.dt, physical());
    record(step + 1);
  }
  return traj;
}

// ---------------------------------------------------------------- Darcy

Field2D darcy_sample_coefficient(std::uint64_t seed, std::size_t n) {
  auto g = sample_grf(darcy_coefficient_spec(), seed, n);
  Field2D a(n, BoundaryKind::dirichlet_zero);
  for (std::size_t p = 0; p < n * n; ++p) a.values()[p] = g.values()[p] >= 0.0 ? 12.0 : 3.0;
  return a;
}

namespace {

struct DarcyOperator {
  std::size_t n;
  std::vector<double> east, north;  // face coefficient to (i+1,j) and (i,j+1)
  std::vector<double> diag;

  explicit DarcyOperator(const Field2D& a) : n(a.n()), east(n * n, 0.0), north(n * n, 0.0), diag(n * n, 0.0) {
    for (double v : a.values())
      if (!(v > 0)) throw ConfigError("darcy coefficient must be positive everywhere");
    auto hm = [](double x, double y) { return 2.0 * x * y / (x + y); };
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (std::size_t j = 0; j < n; ++j) east[i * n + j] = hm(a(i, j), a(i + 1, j));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j + 1 < n; ++j) north[i * n + j] = hm(a(i, j), a(i, j + 1));
    for (std::size_t i = 1; i + 1 < n; ++i)
      for (std::size_t j = 1; j + 1 < n; ++j) {
        const std::size_t p = i * n + j;
        diag[p] = east[p] + east[p - n] + north[p] + north[p - 1];
      }
  }

  // h^2 (A u) on interior nodes, boundary values of u treated as zero.
  void apply(const std::vector<double>& u, std::vector<double>& out) const {
    out.assign(n * n, 0.0);
    auto at = [&](std::size_t i, std::size_t j) {
      return (i == 0 || j == 0 || i + 1 == n || j + 1 == n) ? 0.0 : u[i * n + j];
    };
    for (std::size_t i = 1; i + 1 < n; ++i)
      for (std::size_t j = 1; j + 1 < n; ++j) {
        const std::size_t p = i * n + j;
        out[p] = diag[p] * u[p] - east[p] * at(i + 1, j) - east[p - n] * at(i - 1, j) - north[p] * at(i, j + 1) -
                 north[p - 1] * at(i, j - 1);
      }
  }
};

double interior_dot(const std::vector<double>& a, const std::vector<double>& b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i)
    for (std::size_t j = 1; j + 1 < n; ++j) s += a[i * n + j] * b[i * n + j];
  return s;
}

Field2D unit_source(std::size_t n) {
  return Field2D(n, BoundaryKind::dirichlet_zero, std::vector<double>(n * n, 1.0));
}

}  // namespace

double darcy_residual(const Field2D& a, const Field2D& u, const Field2D& f) {
  const std::size_t n = a.n();
  if (u.n() != n || f.n() != n) throw ShapeError("darcy_residual: grid mismatch");
  DarcyOperator op(a);
  const double h2 = std::pow(1.0 / static_cast<double>(n - 1), 2);
  std::vector<double> Au;
  op.apply(u.values(), Au);
  std::vector<double> r(n * n), hf(n * n);
  for (std::size_t p = 0; p < n * n; ++p) {
    hf[p] = h2 * f.values()[p];
    r[p] = hf[p] - Au[p];
  }
  return std::sqrt(interior_dot(r, r, n)) / std::max(std::sqrt(interior_dot(hf, hf, n)), 1e-300);
}

DarcyResult darcy_solve(const Field2D& a, const std::optional<Field2D>& source, double tol, std::size_t max_iter) {
  const std::size_t n = a.n();
  const Field2D f = source ? *source : unit_source(n);
  if (f.n() != n) throw ShapeError("darcy source grid does not match the coefficient grid");
  DarcyOperator op(a);
  const double h2 = std::pow(1.0 / static_cast<double>(n - 1), 2);
  if (max_iter == 0) max_iter = 20 * n * n;

  std::vector<double> b(n * n, 0.0), x(n * n, 0.0), r(n * n, 0.0), z(n * n, 0.0), p(n * n, 0.0), Ap;
  for (std::size_t i = 1; i + 1 < n; ++i)
    for (std::size_t j = 1; j + 1 < n; ++j) b[i * n + j] = h2 * f(i, j);
  r = b;
  const double bnorm = std::sqrt(interior_dot(b, b, n));
  DarcyResult res;
  if (bnorm == 0.0) {
    res.u = Field2D(n, BoundaryKind::dirichlet_zero);
    return res;
  }
  auto precondition = [&]() {
    for (std::size_t q = 0; q < n * n; ++q) z[q] = op.diag[q] > 0 ? r[q] / op.diag[q] : 0.0;
  };
  precondition();
  p = z;
  double rz = interior_dot(r, z, n);
  std::size_t it = 0;
  double rel = 1.0;
  for (; it < max_iter; ++it) {
    rel = std::sqrt(interior_dot(r, r, n)) / bnorm;
    if (rel < tol) break;
    op.apply(p, Ap);
    const double alpha = rz / interior_dot(p, Ap, n);
    for (std::size_t q = 0; q < n * n; ++q) {
      x[q] += alpha * p[q];
      r[q] -= alpha * Ap[q];
    }
    precondition();
    const double rz_new = interior_dot(r, z, n);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t q = 0; q < n * n; ++q) p[q] = z[q] + beta * p[q];
  }
  if (rel >= tol) throw SolverError("darcy CG did not converge in " + std::to_string(max_iter) + " iterations");
  res.u = Field2D(n, BoundaryKind::dirichlet_zero, std::move(x));
  res.iterations = it;
  res.residual = darcy_residual(a, res.u, f);
  return res;
}

// ---------------------------------------------------------------- Allen-Cahn

double allen_cahn_stable_dt(std::size_t n, double eps, BoundaryKind boundary) {
  const double h = boundary == BoundaryKind::periodic ? 1.0 / static_cast<double>(n) : 1.0 / static_cast<double>(n - 1);
  return std::min(h * h / 8.0, 0.5 / (eps * eps));
}

double allen_cahn_auto_dt(std::size_t n, double eps, BoundaryKind boundary) {
  // Explicit Euler is first order; at the stability bound itself the
  // step-halving change is O(0.1) for eps = 220, so the default step sits
  // well inside it.
  return allen_cahn_stable_dt(n, eps, boundary) / 4096.0;
}

Field2D allen_cahn_solve(const Field2D& u0, const AllenCahnConfig& cfg) {
  const std::size_t n = u0.n();
  if (cfg.boundary == BoundaryKind::neumann) throw ConfigError("allen-cahn supports periodic or dirichlet-zero");
  if (!(cfg.T >= 0)) throw ConfigError("allen-cahn horizon must be non-negative");
  const double bound = allen_cahn_stable_dt(n, cfg.eps, cfg.boundary);
  double dt = cfg.dt == 0.0 ? allen_cahn_auto_dt(n, cfg.eps, cfg.boundary) : cfg.dt;
  if (!(dt > 0) || dt > bound * (1 + 1e-12))
    throw ConfigError("allen-cahn dt " + std::to_string(dt) + " violates the stability bound " + std::to_string(bound));
  const auto steps = static_cast<std::size_t>(std::ceil(cfg.T / dt - 1e-9));
  if (steps == 0) return Field2D(n, cfg.boundary, u0.values());
  dt = cfg.T / static_cast<double>(steps);

  const bool periodic = cfg.boundary == BoundaryKind::periodic;
  const double h = periodic ? 1.0 / static_cast<double>(n) : 1.0 / static_cast<double>(n - 1);
  const double inv_h2 = 1.0 / (h * h), e2 = cfg.eps * cfg.eps;
  std::vector<double> u = u0.values(), next(n * n);
  if (!periodic)
    for (std::size_t m = 0; m < n; ++m) u[m] = u[(n - 1) * n + m] = u[m * n] = u[m * n + n - 1] = 0.0;

  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t p = i * n + j;
        if (!periodic && (i == 0 || j == 0 || i + 1 == n || j + 1 == n)) {
          next[p] = 0.0;
          continue;
        }
        const std::size_t ip = (i + 1) % n, im = (i + n - 1) % n, jp = (j + 1) % n, jm = (j + n - 1) % n;
        const double lap = (u[ip * n + j] + u[im * n + j] + u[i * n + jp] + u[i * n + jm] - 4.0 * u[p]) * inv_h2;
        next[p] = u[p] + dt * (lap - e2 * u[p] * (u[p] * u[p] - 1.0));
      }
    u.swap(next);
  }
  for (double v : u)
    if (!std::isfinite(v)) throw NumericError("allen-cahn produced a non-finite value");
  return Field2D(n, cfg.boundary, std::move(u));
}

// ---------------------------------------------------------------- datasets

const char* family_name(Family family) {
  switch (family) {
    case Family::wave: return "wave";
    case Family::navier_stokes: return "navier-stokes";
    case Family::darcy: return "darcy";
    case Family::allen_cahn: return "allen-cahn";
  }
  return "?";
}

Family parse_family(const std::string& name) {
  if (name == "wave") return Family::wave;
  if (name == "ns" || name == "navier-stokes") return Family::navier_stokes;
  if (name == "darcy") return Family::darcy;
  if (name == "allen-cahn") return Family::allen_cahn;
  if (name == "helmholtz") throw ConfigError("pde 'helmholtz' is out of scope for this tool (external FEM data)");
  throw ConfigError("unknown pde family '" + name + "'");
}

storage::json DatasetSpec::params_json() const {
  storage::json p;
  switch (family) {
    case Family::wave:
      p = {{"t", t}, {"c", c}, {"K", K}, {"boundary", "dirichlet-zero"}};
      break;
    case Family::navier_stokes:
      p = {{"t", t},
           {"nu", nu},
           {"dt", ns_dt},
           {"gen_grid", gen_grid == 0 ? 2 * grid : gen_grid},
           {"forcing", "0.1(sin(2pi(x1+x2))+cos(2pi(x1+x2)))"},
           {"grf", {{"sigma", ns_initial_spec().sigma}, {"tau", 7.0}, {"exponent", 2.5}}},
           {"boundary", "periodic"}};
      break;
    case Family::darcy:
      p = {{"source", 1.0}, {"values", {3.0, 12.0}}, {"grf", {{"sigma", 1.0}, {"tau", 3.0}, {"exponent", 2.0}, {"basis", "neumann"}}},
           {"boundary", "dirichlet-zero"}, {"cg_tol", 1e-10}};
      break;
    case Family::allen_cahn:
      p = {{"eps", eps}, {"T", ac_T}, {"K", K}, {"boundary", boundary_name(ac_boundary)}, {"scheme", "explicit-euler"},
           {"dt", allen_cahn_auto_dt(grid, eps, ac_boundary)}};
      break;
  }
  return p;
}

std::uint64_t sample_seed(std::uint64_t seed, bool test_split, std::size_t index) {
  return mix_seed(mix_seed(seed, test_split ? 0x7e57 : 0x7a19), index);
}

std::pair<Field2D, Field2D> generate_sample(const DatasetSpec& spec, std::uint64_t s) {
  const std::size_t n = spec.grid;
  switch (spec.family) {
    case Family::wave: {
      auto coeffs = sample_wave_coeffs(s, spec.K, spec.c);
      return {wave_field(coeffs, n, 0.0), wave_exact_solution(coeffs, spec.t, n)};
    }
    case Family::navier_stokes: {
      const std::size_t g = spec.gen_grid == 0 ? 2 * n : spec.gen_grid;
      auto w0 = sample_grf(ns_initial_spec(), s, g);
      NSConfig cfg;
      cfg.nu = spec.nu;
      cfg.dt = spec.ns_dt;
      cfg.snapshot_times = {spec.t};
      auto traj = ns_solve(w0, ns_forcing(g), cfg);
      return {resample(w0, n), resample(traj.snapshots.back(), n)};
    }
    case Family::darcy: {
      auto a = darcy_sample_coefficient(s, n);
      auto res = darcy_solve(a);
      if (!(res.residual < 1e-8))
        throw SolverError("darcy sample residual " + std::to_string(res.residual) + " exceeds 1e-8");
      return {a, res.u};
    }
    case Family::allen_cahn: {
      auto coeffs = sample_wave_coeffs(s, spec.K, spec.c);
      auto u0 = wave_field(coeffs, n, 0.0, spec.ac_boundary);
      AllenCahnConfig cfg;
      cfg.eps = spec.eps;
      cfg.T = spec.ac_T;
      cfg.boundary = spec.ac_boundary;
      return {u0, allen_cahn_solve(u0, cfg)};
    }
  }
  throw ConfigError("unknown pde family");
}

NormStats compute_stats(std::span<const float> values) {
  NormStats s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (float v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (float v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(values.size()));
  if (!(s.std > 1e-12)) s.std = 1.0;
  return s;
}

NormStats input_stats(const storage::DatasetContainer& c) {
  const auto& m = c.metadata.at("normalization").at("input");
  return {m.at("mean").get<double>(), m.at("std").get<double>()};
}

NormStats target_stats(const storage::DatasetContainer& c) {
  const auto& m = c.metadata.at("normalization").at("target");
  return {m.at("mean").get<double>(), m.at("std").get<double>()};
}

void normalize(std::vector<double>& values, const NormStats& s) {
  for (auto& v : values) v = (v - s.mean) / s.std;
}

void denormalize(std::vector<double>& values, const NormStats& s) {
  for (auto& v : values) v = v * s.std + s.mean;
}

DatasetPair build_dataset(const DatasetSpec& spec) {
  if (spec.grid < 8) throw ConfigError("grid must be >= 8");
  if (spec.family == Family::navier_stokes && spec.grid % 2 != 0) throw ConfigError("navier-stokes grid must be even");
  const std::size_t nn = spec.grid * spec.grid;

  auto make = [&](bool test, std::size_t count) {
    storage::DatasetContainer c;
    c.inputs.reserve(count * nn);
    c.targets.reserve(count * nn);
    std::vector<std::uint64_t> seeds;
    std::vector<double> in64, out64;
    for (std::size_t i = 0; i < count; ++i) {
      const auto s = sample_seed(spec.seed, test, i);
      seeds.push_back(s);
      auto [a, u] = generate_sample(spec, s);
      in64.insert(in64.end(), a.values().begin(), a.values().end());
      out64.insert(out64.end(), u.values().begin(), u.values().end());
    }
    for (double v : in64) c.inputs.push_back(static_cast<float>(v));
    for (double v : out64) c.targets.push_back(static_cast<float>(v));
    c.metadata = {{"format", "nolab-dataset"},
                  {"family", family_name(spec.family)},
                  {"grid", spec.grid},
                  {"n_samples", count},
                  {"split", test ? "test" : "train"},
                  {"seed", spec.seed},
                  {"sample_seeds", seeds},
                  {"params", spec.params_json()},
                  {"float64_digest",
                   {{"inputs", storage::digest_of<double>(in64)}, {"targets", storage::digest_of<double>(out64)}}}};
    return c;
  };

  DatasetPair pair{make(false, spec.n_train), make(true, spec.n_test)};
  const auto si = compute_stats(pair.train.inputs);
  const auto st = compute_stats(pair.train.targets);
  const storage::json norm = {{"source", "train"},
                              {"input", {{"mean", si.mean}, {"std", si.std}}},
                              {"target", {{"mean", st.mean}, {"std", st.std}}}};
  pair.train.metadata["normalization"] = norm;
  pair.test.metadata["normalization"] = norm;
  return pair;
}

std::string data_card(const DatasetPair& pair) {
  const auto& m = pair.train.metadata;
  std::ostringstream os;
  os << "dataset: " << m.at("family").get<std::string>() << "\n";
  os << "grid: " << m.at("grid").get<std::size_t>() << " x " << m.at("grid").get<std::size_t>() << "\n";
  os << "train samples: " << pair.train.n_samples() << "\n";
  os << "test samples: " << pair.test.n_samples() << "\n";
  os << "seed: " << m.at("seed").get<std::uint64_t>() << "\n";
  os << "parameters: " << m.at("params").dump() << "\n";
  os << "normalization (train split only): " << m.at("normalization").dump() << "\n";
  os << "payload: float32 little-endian, sample-major, row-major\n";
  if (m.at("family") == "allen-cahn")
    os << "note: boundary condition for this family is a modelling choice, not confirmed by the source data\n";
  return os.str();
}

}  // namespace nolab::datagen
