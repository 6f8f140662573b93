#include "nolab/analysis.hpp"

#include <cmath>

#include "nolab/fft.hpp"

namespace nolab::analysis {

double SpectrumBins::total() const {
  double s = 0.0;
  for (double e : energy) s += e;
  return s;
}

double SpectrumBins::band(std::size_t k_max) const {
  double s = 0.0;
  for (std::size_t r = 0; r < energy.size() && r <= k_max; ++r) s += energy[r];
  return s;
}

SpectrumBins& SpectrumBins::operator+=(const SpectrumBins& other) {
  if (energy.empty()) return *this = other;
  if (other.energy.size() != energy.size()) throw ShapeError("spectrum: bin layouts differ");
  for (std::size_t r = 0; r < energy.size(); ++r) {
    energy[r] += other.energy[r];
    count[r] += other.count[r];
  }
  return *this;
}

storage::CsvTable SpectrumBins::table() const {
  storage::CsvTable t;
  t.header = {"bin", "count", "error_energy"};
  for (std::size_t r = 0; r < energy.size(); ++r)
    t.rows.push_back({std::to_string(r), std::to_string(count[r]), storage::format_number(energy[r])});
  return t;
}

SpectrumBins radial_error_spectrum(std::span<const double> pred, std::span<const double> target, std::size_t n) {
  if (pred.size() != n * n || target.size() != n * n)
    throw ShapeError("spectrum: prediction and target must both be " + std::to_string(n) + "x" + std::to_string(n));
  std::vector<fft::cplx> e(n * n), spec(n * n);
  for (std::size_t k = 0; k < n * n; ++k) e[k] = pred[k] - target[k];
  fft::forward(e, spec, n, n);
  const double half = static_cast<double>(n / 2);
  const auto max_bin = static_cast<std::size_t>(std::lround(std::sqrt(2.0) * half));
  SpectrumBins b;
  b.count.assign(max_bin + 1, 0);
  b.energy.assign(max_bin + 1, 0.0);
  const double norm = 1.0 / static_cast<double>(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const auto ki = static_cast<double>(fft::signed_freq(i, n)), kj = static_cast<double>(fft::signed_freq(j, n));
      const auto r = static_cast<std::size_t>(std::lround(std::hypot(ki, kj)));
      b.count[r] += 1;
      b.energy[r] += std::norm(spec[i * n + j]) * norm;
    }
  return b;
}

SpectrumBins radial_error_spectrum(const Field2D& pred, const Field2D& target) {
  if (pred.n() != target.n())
    throw ShapeError("spectrum: grid mismatch " + std::to_string(pred.n()) + " vs " + std::to_string(target.n()));
  return radial_error_spectrum(pred.values(), target.values(), pred.n());
}

std::vector<double> c4_rotate(std::span<const double> values, std::size_t n, int quarter_turns) {
  if (values.size() != n * n) throw ShapeError("c4_rotate: the grid must be square");
  const int turns = ((quarter_turns % 4) + 4) % 4;
  std::vector<double> cur(values.begin(), values.end()), next(n * n);
  for (int t = 0; t < turns; ++t) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) next[(n - 1 - j) * n + i] = cur[i * n + j];
    cur.swap(next);
  }
  return cur;
}

Field2D c4_rotate(const Field2D& field, int quarter_turns) {
  return Field2D(field.n(), field.boundary(), c4_rotate(field.values(), field.n(), quarter_turns));
}

double c4_equivariance_error(const models::FieldOperator& op, const std::vector<Field2D>& samples) {
  if (samples.empty()) throw ConfigError("equivariance audit needs at least one sample");
  const std::size_t n = samples.front().n(), cells = n * n;
  // One batch: each sample followed by its three rotations.
  std::vector<double> in;
  for (const auto& s : samples) {
    if (s.n() != n) throw ShapeError("equivariance audit: samples must share one grid");
    for (int g = 0; g < 4; ++g) {
      auto r = c4_rotate(s.values(), n, g);
      in.insert(in.end(), r.begin(), r.end());
    }
  }
  NoGradGuard no_grad;
  const std::size_t batch = 4 * samples.size();
  Tensor u = op(Tensor::from({batch, n, n}, std::move(in), DType::f64));
  if (u.shape() != Shape{batch, n, n}) throw ShapeError("equivariance audit: operator returned " + shape_str(u.shape()));
  double sum = 0.0;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    auto base = u.values().subspan(4 * s * cells, cells);
    for (int g = 1; g < 4; ++g) {
      auto expect = c4_rotate(base, n, g);
      auto got = u.values().subspan((4 * s + static_cast<std::size_t>(g)) * cells, cells);
      double num = 0.0, den = 0.0;
      for (std::size_t k = 0; k < cells; ++k) {
        num += (got[k] - expect[k]) * (got[k] - expect[k]);
        den += expect[k] * expect[k];
      }
      sum += std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
    }
  }
  return sum / static_cast<double>(3 * samples.size());
}

double c4_equivariance_error(const models::ModelState& state, const std::vector<Field2D>& samples) {
  if (state.config.coord_features)
    throw ConfigError("equivariance audit requires a model built with coordinate features disabled");
  auto s = models::with_dtype(state, DType::f64);
  return c4_equivariance_error(models::as_operator(s), samples);
}

}  // namespace nolab::analysis
