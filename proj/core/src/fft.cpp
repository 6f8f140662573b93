#include "nolab/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <memory>
#include <tuple>

namespace nolab::fft {

namespace {

enum class Kind { c2c_forward, c2c_inverse, r2c, c2r };

// A plan bound to its own SIMD-aligned buffers. Callers copy in and out,
// which keeps every execution on the exact code path chosen at planning
// time (FFTW_ESTIMATE, so planning is deterministic and never reads data).
struct Plan {
  fftw_plan plan = nullptr;
  double* in = nullptr;
  double* out = nullptr;
  ~Plan() {
    if (plan) fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
};

Plan& plan_for(Kind kind, std::size_t rows, std::size_t cols) {
  thread_local std::map<std::tuple<Kind, std::size_t, std::size_t>, std::unique_ptr<Plan>> cache;
  auto key = std::make_tuple(kind, rows, cols);
  auto it = cache.find(key);
  if (it != cache.end()) return *it->second;

  auto p = std::make_unique<Plan>();
  const std::size_t full = 2 * rows * cols, half = 2 * rows * (cols / 2 + 1);
  const int r = static_cast<int>(rows), c = static_cast<int>(cols);
  const unsigned flags = FFTW_ESTIMATE;
  switch (kind) {
    case Kind::c2c_forward:
    case Kind::c2c_inverse: {
      p->in = fftw_alloc_real(full);
      p->out = fftw_alloc_real(full);
      auto* i = reinterpret_cast<fftw_complex*>(p->in);
      auto* o = reinterpret_cast<fftw_complex*>(p->out);
      const int sign = kind == Kind::c2c_forward ? FFTW_FORWARD : FFTW_BACKWARD;
      p->plan = rows == 1 ? fftw_plan_dft_1d(c, i, o, sign, flags) : fftw_plan_dft_2d(r, c, i, o, sign, flags);
      break;
    }
    case Kind::r2c: {
      p->in = fftw_alloc_real(rows * cols);
      p->out = fftw_alloc_real(half);
      auto* o = reinterpret_cast<fftw_complex*>(p->out);
      p->plan = rows == 1 ? fftw_plan_dft_r2c_1d(c, p->in, o, flags) : fftw_plan_dft_r2c_2d(r, c, p->in, o, flags);
      break;
    }
    case Kind::c2r: {
      p->in = fftw_alloc_real(half);
      p->out = fftw_alloc_real(rows * cols);
      auto* i = reinterpret_cast<fftw_complex*>(p->in);
      p->plan = rows == 1 ? fftw_plan_dft_c2r_1d(c, i, p->out, flags) : fftw_plan_dft_c2r_2d(r, c, i, p->out, flags);
      break;
    }
  }
  auto [pos, _] = cache.emplace(key, std::move(p));
  return *pos->second;
}

void run(Kind kind, const void* in, std::size_t in_bytes, void* out, std::size_t out_bytes, std::size_t rows,
         std::size_t cols) {
  Plan& p = plan_for(kind, rows, cols);
  std::memcpy(p.in, in, in_bytes);
  fftw_execute(p.plan);
  std::memcpy(out, p.out, out_bytes);
}

}  // namespace

void forward(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols) {
  run(Kind::c2c_forward, in.data(), rows * cols * sizeof(cplx), out.data(), rows * cols * sizeof(cplx), rows, cols);
}

void inverse(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols) {
  run(Kind::c2c_inverse, in.data(), rows * cols * sizeof(cplx), out.data(), rows * cols * sizeof(cplx), rows, cols);
}

void forward_real(std::span<const double> in, std::span<cplx> out, std::size_t rows, std::size_t cols) {
  run(Kind::r2c, in.data(), rows * cols * sizeof(double), out.data(), rows * (cols / 2 + 1) * sizeof(cplx), rows,
      cols);
}

void inverse_real(std::span<const cplx> in, std::span<double> out, std::size_t rows, std::size_t cols) {
  run(Kind::c2r, in.data(), rows * (cols / 2 + 1) * sizeof(cplx), out.data(), rows * cols * sizeof(double), rows,
      cols);
}

void forward_1d(std::span<const cplx> in, std::span<cplx> out) { forward(in, out, 1, in.size()); }

void inverse_1d(std::span<const cplx> in, std::span<cplx> out) { inverse(in, out, 1, in.size()); }

}  // namespace nolab::fft
