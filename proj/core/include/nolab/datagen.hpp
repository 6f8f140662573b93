#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nolab/field.hpp"
#include "nolab/storage.hpp"

namespace nolab::datagen {

// Seed mixing shared by every sampler: splitmix64 finalizer.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

// ---------------------------------------------------------------- wave

/// u_t(x,y) = (pi/K^2) sum_{i,j=1}^K a_ij (i^2+j^2)^{-1} sin(pi i x) sin(pi j y)
///            cos(c pi t sqrt(i^2+j^2))
struct SineCoeffs {
  int K = 24;
  double c = 0.1;
  std::vector<double> a;  // K x K, row-major, a[(i-1)*K + (j-1)]

  double operator()(int i, int j) const { return a[static_cast<std::size_t>((i - 1) * K + (j - 1))]; }
};

SineCoeffs sample_wave_coeffs(std::uint64_t seed, int K = 24, double c = 0.1);
// Samples on the Dirichlet vertex grid x_m = m/(n-1).
std::pair<SineCoeffs, Field2D> sample_wave_initial(std::uint64_t seed, int K, std::size_t n, double c = 0.1);
Field2D wave_field(const SineCoeffs& coeffs, std::size_t n, double t,
                   BoundaryKind boundary = BoundaryKind::dirichlet_zero);
Field2D wave_exact_solution(const SineCoeffs& coeffs, double t, std::size_t n);

// ---------------------------------------------------------------- GRF

/// Gaussian measure N(0, sigma^2 (-Lap + tau^2)^{-exponent}). Each eigenmode
/// of -Lap (for the declared boundary) gets an independent standard normal
/// coefficient scaled by sigma (lambda + tau^2)^{-exponent/2}. The constant
/// mode is dropped, so samples have zero mean.
struct GRFSpec {
  double exponent = 2.0;
  double tau = 3.0;
  double sigma = 1.0;
  BoundaryKind boundary = BoundaryKind::periodic;

  void validate() const;
};

Field2D sample_grf(const GRFSpec& spec, std::uint64_t seed, std::size_t n);
// -Lap eigenvalue attached to mode (i, j) for the given boundary kind;
// for periodic grids i, j are signed frequencies.
double grf_eigenvalue(BoundaryKind boundary, long i, long j);

GRFSpec ns_initial_spec();     // sigma 7^{3/2}, tau 7, exponent 2.5, periodic
GRFSpec darcy_coefficient_spec();  // sigma 1, tau 3, exponent 2, neumann

// ---------------------------------------------------------------- Navier-Stokes

struct NSConfig {
  double nu = 1e-3;
  double dt = 1e-3;
  std::vector<double> snapshot_times;  // each a multiple of dt
  double cfl_limit = 1.0;
  // Called after every step with the physical vorticity (only evaluated
  // when set, it costs an inverse transform per step).
  std::function<void(std::size_t step, double t, const Field2D& w)> observer;
};

struct NSTrajectory {
  std::vector<double> times;
  std::vector<Field2D> snapshots;
  std::size_t steps = 0;
  double max_cfl = 0.0;
};

Field2D ns_forcing(std::size_t n);
Field2D ns_zero_forcing(std::size_t n);
/// Vorticity form on the periodic unit torus: Crank-Nicolson diffusion,
/// Adams-Bashforth 2 advection (Euler first step), 2/3-rule dealiasing.
NSTrajectory ns_solve(const Field2D& w0, const Field2D& forcing, const NSConfig& config);

// ---------------------------------------------------------------- Darcy

Field2D darcy_sample_coefficient(std::uint64_t seed, std::size_t n);

struct DarcyResult {
  Field2D u;
  std::size_t iterations = 0;
  double residual = 0.0;  // ||A u - f|| / ||f|| over interior nodes
};

/// -div(a grad u) = f on the vertex grid, u = 0 on the boundary. Five-point
/// flux form with harmonic-mean face coefficients, Jacobi-preconditioned CG.
/// f defaults to 1.
DarcyResult darcy_solve(const Field2D& a, const std::optional<Field2D>& source = std::nullopt,
                        double tol = 1e-10, std::size_t max_iter = 0);
double darcy_residual(const Field2D& a, const Field2D& u, const Field2D& f);

// ---------------------------------------------------------------- Allen-Cahn

struct AllenCahnConfig {
  double eps = 220.0;
  double T = 2e-4;
  double dt = 0.0;  // 0 selects the automatic step
  BoundaryKind boundary = BoundaryKind::periodic;
};

// Largest step allowed by the explicit-Euler stability bound.
double allen_cahn_stable_dt(std::size_t n, double eps, BoundaryKind boundary);
// Step used when AllenCahnConfig::dt == 0.
double allen_cahn_auto_dt(std::size_t n, double eps, BoundaryKind boundary);

/// u_t = Lap u - eps^2 u (u^2 - 1), explicit Euler. The horizon is split into
/// ceil(T/dt) equal steps.
Field2D allen_cahn_solve(const Field2D& u0, const AllenCahnConfig& config);

// ---------------------------------------------------------------- datasets

enum class Family { wave, navier_stokes, darcy, allen_cahn };

const char* family_name(Family family);
// Accepts "wave", "ns", "navier-stokes", "darcy", "allen-cahn".
Family parse_family(const std::string& name);

struct DatasetSpec {
  Family family = Family::darcy;
  std::size_t n_train = 200;
  std::size_t n_test = 50;
  std::size_t grid = 64;
  std::uint64_t seed = 0;
  // wave
  double t = 5.0;
  double c = 0.1;
  int K = 24;
  // navier-stokes
  double nu = 1e-3;
  double ns_dt = 1e-3;
  std::size_t gen_grid = 0;  // 0 = 2 x grid
  // allen-cahn
  double eps = 220.0;
  double ac_T = 2e-4;
  BoundaryKind ac_boundary = BoundaryKind::periodic;

  storage::json params_json() const;
};

struct NormStats {
  double mean = 0.0;
  double std = 1.0;
};

struct DatasetPair {
  storage::DatasetContainer train;
  storage::DatasetContainer test;
};

std::uint64_t sample_seed(std::uint64_t seed, bool test_split, std::size_t index);

/// Generates one (input, target) pair for the given per-sample seed.
std::pair<Field2D, Field2D> generate_sample(const DatasetSpec& spec, std::uint64_t sample_seed);

/// Deterministic train/test containers. Normalization statistics come from
/// the train split only and are copied into both metadata blocks.
DatasetPair build_dataset(const DatasetSpec& spec);

NormStats input_stats(const storage::DatasetContainer& c);
NormStats target_stats(const storage::DatasetContainer& c);
NormStats compute_stats(std::span<const float> values);
void normalize(std::vector<double>& values, const NormStats& s);
void denormalize(std::vector<double>& values, const NormStats& s);

std::string data_card(const DatasetPair& pair);

}  // namespace nolab::datagen
