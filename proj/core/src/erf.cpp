#include "nolab/erf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nolab/ops.hpp"

namespace nolab::erf {

namespace {

void check_x0(GridIndex x0, std::size_t n) {
  if (x0.ix >= n || x0.iy >= n)
    throw ConfigError("erf: output location (" + std::to_string(x0.ix) + "," + std::to_string(x0.iy) +
                      ") is outside the " + std::to_string(n) + "x" + std::to_string(n) + " grid");
}

Tensor check_output(const Tensor& u, std::size_t batch, std::size_t n) {
  if (u.shape() != Shape{batch, n, n})
    throw ShapeError("erf: operator returned " + shape_str(u.shape()) + " for a " + std::to_string(n) + "-grid input");
  return u;
}

// Float64 copy of the model with parameter tracking switched off, so the
// reverse sweep only accumulates into the probe input.
models::ModelState probe_model(const models::ModelState& state) {
  auto s = models::with_dtype(state, DType::f64);
  for (auto& p : s.params) p.value.set_requires_grad(false);
  return s;
}

double stddev(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(v.size()));
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::autodiff: return "autodiff";
    case Method::finite_difference: return "finite-difference";
    case Method::analytical: return "analytical";
  }
  return "?";
}

GridIndex center_index(std::size_t n) { return {n / 2, n / 2}; }

ERFMap erf_autodiff(const models::FieldOperator& op, const Field2D& a, GridIndex x0, std::string probe) {
  const std::size_t n = a.n();
  check_x0(x0, n);
  Tape tape;
  Tape::Scope scope(tape);
  Tensor in = Tensor::from({1, n, n}, a.values(), DType::f64);
  in.set_requires_grad(true);
  Tensor u = check_output(op(in), 1, n);
  Tensor ux0 = ops::sum(ops::slice(ops::reshape(u, {n * n}), 0, x0.ix * n + x0.iy, 1));
  auto grads = backward(ux0, tape);
  std::vector<double> g(n * n, 0.0);
  if (grads.contains(in)) {
    auto gv = grads.of(in).values();
    std::copy(gv.begin(), gv.end(), g.begin());
  }
  return {Field2D(n, a.boundary(), std::move(g)), x0, std::move(probe), Method::autodiff};
}

ERFMap erf_autodiff(const models::ModelState& state, const Field2D& a, GridIndex x0, std::string probe) {
  auto s = probe_model(state);
  return erf_autodiff(models::as_operator(s), a, x0, std::move(probe));
}

ERFMap erf_finite_difference(const models::FieldOperator& op, const Field2D& a, GridIndex x0, double h,
                             std::string probe, std::size_t batch) {
  const std::size_t n = a.n(), cells = n * n;
  check_x0(x0, n);
  if (h <= 0.0) {
    const double sd = stddev(a.values());
    h = 1e-4 * (sd > 0.0 ? sd : 1.0);
  }
  batch = std::max<std::size_t>(batch, 1);
  NoGradGuard no_grad;
  const std::size_t out_index = x0.ix * n + x0.iy;
  std::vector<double> g(cells);
  for (std::size_t start = 0; start < cells; start += batch) {
    const std::size_t m = std::min(batch, cells - start);
    std::vector<double> inputs;
    inputs.reserve(2 * m * cells);
    for (std::size_t k = 0; k < m; ++k)
      for (double sign : {1.0, -1.0}) {
        inputs.insert(inputs.end(), a.values().begin(), a.values().end());
        inputs[inputs.size() - cells + start + k] += sign * h;
      }
    Tensor u = check_output(op(Tensor::from({2 * m, n, n}, std::move(inputs), DType::f64)), 2 * m, n);
    for (std::size_t k = 0; k < m; ++k)
      g[start + k] = (u[(2 * k) * cells + out_index] - u[(2 * k + 1) * cells + out_index]) / (2.0 * h);
  }
  return {Field2D(n, a.boundary(), std::move(g)), x0, std::move(probe), Method::finite_difference};
}

ERFMap erf_finite_difference(const models::ModelState& state, const Field2D& a, GridIndex x0, double h,
                             std::string probe, std::size_t batch) {
  auto s = probe_model(state);
  return erf_finite_difference(models::as_operator(s), a, x0, h, std::move(probe), batch);
}

ERFMap erf_analytical_wave(GridIndex x0, double t, double c, int K, std::size_t n, bool drop_projection_factor) {
  if (K < 1) throw ConfigError("erf: truncation K must be >= 1, got " + std::to_string(K));
  Field2D out(n, BoundaryKind::dirichlet_zero);
  check_x0(x0, n);
  const double pi = std::numbers::pi;
  const auto kk = static_cast<std::size_t>(K);
  // Products are formed as p_i = sin(pi i x0) sin(pi i x) and likewise along y,
  // so swapping x0 and x reproduces every rounding step and the map is
  // symmetric bit for bit.
  std::vector<double> s(kk * n);  // s[i n + m] = sin(pi (i+1) x_m)
  for (std::size_t i = 0; i < kk; ++i)
    for (std::size_t m = 0; m < n; ++m) s[i * n + m] = std::sin(pi * static_cast<double>(i + 1) * out.coord(m));
  std::vector<double> cosines(kk * kk);
  for (std::size_t i = 0; i < kk; ++i)
    for (std::size_t j = 0; j < kk; ++j) {
      const double r = std::sqrt(static_cast<double>((i + 1) * (i + 1) + (j + 1) * (j + 1)));
      cosines[i * kk + j] = std::cos(c * pi * t * r);
    }
  const double scale = drop_projection_factor ? 1.0 : 4.0;
  std::vector<double> q(kk), r(kk * n);  // r[i n + y] = sum_j cos_ij q_j(y)
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t j = 0; j < kk; ++j) q[j] = s[j * n + x0.iy] * s[j * n + y];
    for (std::size_t i = 0; i < kk; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < kk; ++j) acc += cosines[i * kk + j] * q[j];
      r[i * n + y] = acc;
    }
  }
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t i = 0; i < kk; ++i) {
      const double p = s[i * n + x0.ix] * s[i * n + x];
      for (std::size_t y = 0; y < n; ++y) out(x, y) += p * r[i * n + y];
    }
  for (double& v : out.values()) v *= scale;
  return {std::move(out), x0, "analytical t=" + storage::format_number(t), Method::analytical};
}

double mass_in_disc(const ERFMap& m, double radius) {
  const Field2D& f = m.map;
  const std::size_t n = f.n();
  const bool periodic = f.boundary() == BoundaryKind::periodic;
  const double cx = f.coord(m.x0.ix), cy = f.coord(m.x0.iy);
  auto axis_dist = [periodic](double d) {
    d = std::abs(d);
    return periodic ? std::min(d, 1.0 - d) : d;
  };
  double inside = 0.0, total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double v = std::abs(f(i, j));
      total += v;
      if (std::hypot(axis_dist(f.coord(i) - cx), axis_dist(f.coord(j) - cy)) <= radius) inside += v;
    }
  return total > 0.0 ? inside / total : 0.0;
}

double cosine_similarity(const Field2D& a, const Field2D& b) {
  if (a.n() != b.n())
    throw ShapeError("erf: cannot compare a " + std::to_string(a.n()) + "-grid map with a " + std::to_string(b.n()) +
                     "-grid map");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    ab += a.values()[i] * b.values()[i];
    aa += a.values()[i] * a.values()[i];
    bb += b.values()[i] * b.values()[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

std::vector<double> default_radii() {
  std::vector<double> r;
  for (int k = 1; k <= 14; ++k) r.push_back(0.05 * k);
  return r;
}

Comparison erf_compare(const ERFMap& a, const ERFMap& b, const std::vector<double>& radii) {
  Comparison c;
  c.cosine = cosine_similarity(a.map, b.map);
  c.radii = radii;
  for (double r : radii) {
    c.mass_a.push_back(mass_in_disc(a, r));
    c.mass_b.push_back(mass_in_disc(b, r));
  }
  return c;
}

storage::json Comparison::to_json() const {
  return {{"cosine", cosine}, {"radii", radii}, {"mass_a", mass_a}, {"mass_b", mass_b}};
}

void erf_export(const ERFMap& m, const std::filesystem::path& path, ExportFormat format) {
  const Field2D& f = m.map;
  const std::size_t n = f.n();
  if (format == ExportFormat::csv) {
    storage::CsvTable t;
    t.header = {"ix", "iy", "value"};
    t.rows.reserve(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        t.rows.push_back({std::to_string(i), std::to_string(j), storage::format_number(f(i, j))});
    storage::write_csv(path, t);
    return;
  }
  const auto [lo_it, hi_it] = std::minmax_element(f.values().begin(), f.values().end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<std::uint8_t> px(n * n);
  for (std::size_t k = 0; k < n * n; ++k)
    px[k] = hi > lo ? static_cast<std::uint8_t>(std::lround(255.0 * (f.values()[k] - lo) / (hi - lo))) : 128;
  storage::write_pgm(path, n, n, px);
  storage::atomic_write_text(path.string() + ".bounds.txt",
                             "min " + storage::format_number(lo) + "\nmax " + storage::format_number(hi) + "\n");
}

std::vector<double> read_erf_csv(const std::filesystem::path& path, std::size_t& n) {
  auto t = storage::read_csv(path);
  n = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(t.rows.size()))));
  if (n * n != t.rows.size() || t.header != std::vector<std::string>{"ix", "iy", "value"})
    throw FormatError("erf csv: " + path.string() + " is not a square ix,iy,value table");
  std::vector<double> v(n * n);
  for (const auto& r : t.rows) {
    const auto i = std::stoul(r.at(0)), j = std::stoul(r.at(1));
    if (i >= n || j >= n) throw FormatError("erf csv: index out of range in " + path.string());
    v[i * n + j] = std::stod(r.at(2));
  }
  return v;
}

}  // namespace nolab::erf
