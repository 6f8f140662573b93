#include "nolab/ops.hpp"

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <numeric>
#include <tuple>

#include "nolab/fft.hpp"

namespace nolab {

using detail::make_result;
using cplx = std::complex<double>;

ComplexTensor::ComplexTensor(Tensor interleaved) : data_(std::move(interleaved)) {
  if (data_.dim() == 0 || data_.shape().back() != 2)
    throw ShapeError("complex tensor: trailing extent must be 2, got " + shape_str(data_.shape()));
}

Shape ComplexTensor::shape() const {
  Shape s = data_.shape();
  s.pop_back();
  return s;
}

namespace ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

thread_local TransformCounts counts;

void require_same(const Tensor& a, const Tensor& b, const char* kind) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(kind) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

std::size_t prod(const Shape& s, std::size_t from, std::size_t to) {
  std::size_t n = 1;
  for (std::size_t i = from; i < to; ++i) n *= s[i];
  return n;
}

void require_axis(const Tensor& x, std::size_t axis, const char* kind) {
  if (axis >= x.dim())
    throw ShapeError(std::string(kind) + ": axis " + std::to_string(axis) + " out of range for " +
                     shape_str(x.shape()));
}

template <typename F, typename D>
Tensor unary(const char* kind, const Tensor& x, F f, D df) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_result(kind, x.shape(), std::move(out), {&x},
                     [x, df](std::span<const double> g, GradSlots& gin) {
                       auto xv = x.values();
                       for (std::size_t i = 0; i < xv.size(); ++i) gin[0][i] += g[i] * df(xv[i]);
                     });
}

// acc[k] += a[k] * (conj_b ? conj(b[k]) : b[k]) over m interleaved values,
// spelled out so no library complex multiply (with its inf/nan fixups) runs.
inline void cmul_acc(double* acc, const double* a, const double* b, std::size_t m, bool conj_b) {
  const double sgn = conj_b ? -1.0 : 1.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double ar = a[2 * k], ai = a[2 * k + 1], br = b[2 * k], bi = sgn * b[2 * k + 1];
    acc[2 * k] += ar * br - ai * bi;
    acc[2 * k + 1] += ar * bi + ai * br;
  }
}

cplx* as_cplx(std::span<double> s) { return reinterpret_cast<cplx*>(s.data()); }
const cplx* as_cplx(std::span<const double> s) { return reinterpret_cast<const cplx*>(s.data()); }

// Last-two-axes geometry of a real tensor.
struct Planes {
  std::size_t count, rows, cols;
};

Planes planes_of(const Shape& s, const char* kind) {
  if (s.size() < 2) throw ShapeError(std::string(kind) + ": need at least 2 axes, got " + shape_str(s));
  std::size_t rows = s[s.size() - 2], cols = s[s.size() - 1];
  if (rows == 0 || cols == 0) throw ShapeError(std::string(kind) + ": empty plane");
  return {prod(s, 0, s.size() - 2), rows, cols};
}

// Index lists for the retained-mode layout shared by rfft2_modes/irfft2_modes.
std::vector<std::size_t> kept_rows(std::size_t rows, std::size_t m) {
  std::vector<std::size_t> r;
  if (2 * m >= rows) {
    r.resize(rows);
    std::iota(r.begin(), r.end(), 0);
    return r;
  }
  for (std::size_t k = 0; k < m; ++k) r.push_back(k);
  for (std::size_t k = rows - m; k < rows; ++k) r.push_back(k);
  return r;
}

std::size_t kept_cols(std::size_t cols, std::size_t m) { return m >= cols / 2 ? cols / 2 + 1 : m; }

double column_weight(std::size_t c, std::size_t cols) {
  if (c == 0) return 1.0;
  if (cols % 2 == 0 && c == cols / 2) return 1.0;
  return 2.0;
}

struct AxisLink {
  std::size_t src, dst;
  double w;
};

// Spectral index map for one axis of length n resampled to m (both even).
std::vector<AxisLink> resample_links(std::size_t n, std::size_t m) {
  std::vector<AxisLink> links;
  const std::size_t half = std::min(n, m) / 2;
  for (std::size_t k = 0; k < half; ++k) links.push_back({k, k, 1.0});
  for (std::size_t k = 1; k < half; ++k) links.push_back({n - k, m - k, 1.0});
  if (m == n) {
    links.push_back({n / 2, m / 2, 1.0});
  } else if (m > n) {
    links.push_back({n / 2, n / 2, 0.5});
    links.push_back({n / 2, m - n / 2, 0.5});
  } else {
    links.push_back({m / 2, m / 2, 1.0});
    links.push_back({n - m / 2, m / 2, 1.0});
  }
  return links;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  return make_result("add", a.shape(), std::move(out), {&a, &b}, [](std::span<const double> g, GradSlots& gin) {
    for (auto& s : gin)
      if (!s.empty())
        for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  return make_result("sub", a.shape(), std::move(out), {&a, &b}, [](std::span<const double> g, GradSlots& gin) {
    if (!gin[0].empty())
      for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
    if (!gin[1].empty())
      for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] -= g[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return make_result("mul", a.shape(), std::move(out), {&a, &b},
                     [a, b](std::span<const double> g, GradSlots& gin) {
                       auto av = a.values(), bv = b.values();
                       if (!gin[0].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * bv[i];
                       if (!gin[1].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] += g[i] * av[i];
                     });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same(a, b, "div");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] / bv[i];
  return make_result("div", a.shape(), std::move(out), {&a, &b},
                     [a, b](std::span<const double> g, GradSlots& gin) {
                       auto av = a.values(), bv = b.values();
                       if (!gin[0].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] / bv[i];
                       if (!gin[1].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] -= g[i] * av[i] / (bv[i] * bv[i]);
                     });
}

Tensor scale(const Tensor& a, double s) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = s * av[i];
  return make_result("scalar-mul", a.shape(), std::move(out), {&a}, [s](std::span<const double> g, GradSlots& gin) {
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += s * g[i];
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + s;
  return make_result("add-scalar", a.shape(), std::move(out), {&a}, [](std::span<const double> g, GradSlots& gin) {
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
  });
}

Tensor zeros_like(const Tensor& a) { return Tensor::zeros(a.shape(), a.dtype()); }

Tensor gelu(const Tensor& x) {
  constexpr double c = 0.7978845608;
  constexpr double k = 0.044715;
  auto xv = x.values();
  std::vector<double> out(xv.size());
  auto th = std::make_shared<std::vector<double>>(xv.size());
  if (x.dtype() == DType::f32) {
    // Single precision result: Eigen's vectorized float tanh is exact enough.
    Eigen::ArrayXf u(static_cast<Eigen::Index>(xv.size()));
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double v = xv[i];
      u[static_cast<Eigen::Index>(i)] = static_cast<float>(c * (v + k * v * v * v));
    }
    u = u.tanh();
    for (std::size_t i = 0; i < xv.size(); ++i) (*th)[i] = u[static_cast<Eigen::Index>(i)];
  } else {
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double v = xv[i];
      (*th)[i] = std::tanh(c * (v + k * v * v * v));
    }
  }
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = 0.5 * xv[i] * (1.0 + (*th)[i]);
  return make_result("gelu", x.shape(), std::move(out), {&x}, [x, th](std::span<const double> g, GradSlots& gin) {
    auto xv = x.values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double v = xv[i], t = (*th)[i];
      gin[0][i] += g[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * c * (1.0 + 3.0 * k * v * v));
    }
  });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double v) {
        double t = std::tanh(v);
        return 1.0 - t * t;
      });
}

Tensor abs(const Tensor& x) {
  return unary(
      "abs", x, [](double v) { return std::fabs(v); },
      [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor pow(const Tensor& x, double p) {
  return unary(
      "pow", x, [p](double v) { return std::pow(v, p); }, [p](double v) { return p * std::pow(v, p - 1.0); });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      "sqrt", x,
      [](double v) {
        if (v < 0.0) throw NumericError("sqrt of a negative value");
        return std::sqrt(v);
      },
      [](double v) { return v > 0.0 ? 0.5 / std::sqrt(v) : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const bool batched = a.dim() == 3;
  if (!((a.dim() == 2 && b.dim() == 2) || (a.dim() == 3 && b.dim() == 3)))
    throw ShapeError("matmul: expected 2-D or batched 3-D operands, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  const std::size_t nb = batched ? a.extent(0) : 1;
  const std::size_t m = a.shape()[a.dim() - 2], k = a.shape()[a.dim() - 1];
  const std::size_t k2 = b.shape()[b.dim() - 2], n = b.shape()[b.dim() - 1];
  if (k != k2 || (batched && b.extent(0) != nb))
    throw ShapeError("matmul: shape mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));

  std::vector<double> out(nb * m * n);
  for (std::size_t t = 0; t < nb; ++t) {
    MapC A(a.values().data() + t * m * k, m, k);
    MapC B(b.values().data() + t * k * n, k, n);
    Map C(out.data() + t * m * n, m, n);
    C.noalias() = A * B;
  }
  Shape shape = batched ? Shape{nb, m, n} : Shape{m, n};
  return make_result("matmul", shape, std::move(out), {&a, &b},
                     [a, b, nb, m, k, n](std::span<const double> g, GradSlots& gin) {
                       for (std::size_t t = 0; t < nb; ++t) {
                         MapC G(g.data() + t * m * n, m, n);
                         if (!gin[0].empty()) {
                           MapC B(b.values().data() + t * k * n, k, n);
                           Map GA(gin[0].data() + t * m * k, m, k);
                           GA.noalias() += G * B.transpose();
                         }
                         if (!gin[1].empty()) {
                           MapC A(a.values().data() + t * m * k, m, k);
                           Map GB(gin[1].data() + t * k * n, k, n);
                           GB.noalias() += A.transpose() * G;
                         }
                       }
                     });
}

Tensor sum(const Tensor& x) {
  auto xv = x.values();
  double s = 0.0;
  for (double v : xv) s += v;
  return make_result("sum", {}, {s}, {&x}, [](std::span<const double> g, GradSlots& gin) {
    for (auto& v : gin[0]) v += g[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean: empty tensor");
  auto xv = x.values();
  double s = 0.0;
  for (double v : xv) s += v;
  const double inv = 1.0 / static_cast<double>(xv.size());
  return make_result("mean", {}, {s * inv}, {&x}, [inv](std::span<const double> g, GradSlots& gin) {
    for (auto& v : gin[0]) v += g[0] * inv;
  });
}

Tensor sum_axis(const Tensor& x, std::size_t axis) {
  require_axis(x, axis, "sum_axis");
  const auto& s = x.shape();
  const std::size_t outer = prod(s, 0, axis), n = s[axis], inner = prod(s, axis + 1, s.size());
  std::vector<double> out(outer * inner, 0.0);
  auto xv = x.values();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += xv[(o * n + a) * inner + i];
  Shape shape = s;
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  return make_result("sum-axis", shape, std::move(out), {&x},
                     [outer, n, inner](std::span<const double> g, GradSlots& gin) {
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t a = 0; a < n; ++a)
                           for (std::size_t i = 0; i < inner; ++i) gin[0][(o * n + a) * inner + i] += g[o * inner + i];
                     });
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  require_axis(x, axis, "mean_axis");
  return scale(sum_axis(x, axis), 1.0 / static_cast<double>(x.extent(axis)));
}

Tensor expand_axis(const Tensor& x, std::size_t axis, std::size_t extent) {
  if (axis > x.dim()) throw ShapeError("expand_axis: axis out of range for " + shape_str(x.shape()));
  const auto& s = x.shape();
  const std::size_t outer = prod(s, 0, axis), inner = prod(s, axis, s.size());
  std::vector<double> out(outer * extent * inner);
  auto xv = x.values();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t a = 0; a < extent; ++a)
      for (std::size_t i = 0; i < inner; ++i) out[(o * extent + a) * inner + i] = xv[o * inner + i];
  Shape shape = s;
  shape.insert(shape.begin() + static_cast<std::ptrdiff_t>(axis), extent);
  return make_result("expand-axis", shape, std::move(out), {&x},
                     [outer, extent, inner](std::span<const double> g, GradSlots& gin) {
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t a = 0; a < extent; ++a)
                           for (std::size_t i = 0; i < inner; ++i) gin[0][o * inner + i] += g[(o * extent + a) * inner + i];
                     });
}

Tensor bias_add(const Tensor& x, const Tensor& b, std::size_t axis) {
  require_axis(x, axis, "bias_add");
  if (b.dim() != 1 || b.extent(0) != x.extent(axis))
    throw ShapeError("bias_add: bias " + shape_str(b.shape()) + " does not match axis " + std::to_string(axis) +
                     " of " + shape_str(x.shape()));
  const auto& s = x.shape();
  const std::size_t outer = prod(s, 0, axis), n = s[axis], inner = prod(s, axis + 1, s.size());
  auto xv = x.values();
  auto bv = b.values();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t i = 0; i < inner; ++i) {
        std::size_t idx = (o * n + a) * inner + i;
        out[idx] = xv[idx] + bv[a];
      }
  return make_result("bias-add", s, std::move(out), {&x, &b},
                     [outer, n, inner](std::span<const double> g, GradSlots& gin) {
                       if (!gin[0].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                       if (!gin[1].empty())
                         for (std::size_t o = 0; o < outer; ++o)
                           for (std::size_t a = 0; a < n; ++a) {
                             double acc = 0.0;
                             for (std::size_t i = 0; i < inner; ++i) acc += g[(o * n + a) * inner + i];
                             gin[1][a] += acc;
                           }
                     });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  require_axis(x, axis, "slice");
  const auto& s = x.shape();
  if (start + length > s[axis])
    throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(start + length) +
                     ") exceeds axis extent " + std::to_string(s[axis]));
  const std::size_t outer = prod(s, 0, axis), n = s[axis], inner = prod(s, axis + 1, s.size());
  auto xv = x.values();
  std::vector<double> out(outer * length * inner);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>((o * n + start) * inner), length * inner,
                out.begin() + static_cast<std::ptrdiff_t>(o * length * inner));
  Shape shape = s;
  shape[axis] = length;
  return make_result("slice", shape, std::move(out), {&x},
                     [outer, n, inner, start, length](std::span<const double> g, GradSlots& gin) {
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t i = 0; i < length * inner; ++i)
                           gin[0][(o * n + start) * inner + i] += g[o * length * inner + i];
                     });
}

Tensor pad(const Tensor& x, std::size_t axis, std::size_t before, std::size_t after) {
  require_axis(x, axis, "pad");
  const auto& s = x.shape();
  const std::size_t outer = prod(s, 0, axis), n = s[axis], inner = prod(s, axis + 1, s.size());
  const std::size_t m = n + before + after;
  auto xv = x.values();
  std::vector<double> out(outer * m * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(o * n * inner), n * inner,
                out.begin() + static_cast<std::ptrdiff_t>((o * m + before) * inner));
  Shape shape = s;
  shape[axis] = m;
  return make_result("pad", shape, std::move(out), {&x},
                     [outer, n, m, inner, before](std::span<const double> g, GradSlots& gin) {
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t i = 0; i < n * inner; ++i)
                           gin[0][o * n * inner + i] += g[(o * m + before) * inner + i];
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_result("reshape", std::move(shape), std::move(out), {&x}, [](std::span<const double> g, GradSlots& gin) {
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
  });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
  const auto& s = x.shape();
  const std::size_t d = s.size();
  if (perm.size() != d) throw ShapeError("permute: permutation rank mismatch for " + shape_str(s));
  std::vector<bool> seen(d, false);
  for (auto p : perm) {
    if (p >= d || seen[p]) throw ShapeError("permute: invalid permutation");
    seen[p] = true;
  }
  Shape out_shape(d);
  for (std::size_t i = 0; i < d; ++i) out_shape[i] = s[perm[i]];
  std::vector<std::size_t> in_strides(d, 1);
  for (std::size_t i = d; i-- > 1;) in_strides[i - 1] = in_strides[i] * s[i];
  // src_index[flat_out] computed once; reused in backward.
  const std::size_t n = x.numel();
  auto src = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t f = 0; f < n; ++f) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < d; ++i) off += idx[i] * in_strides[perm[i]];
    (*src)[f] = off;
    for (std::size_t i = d; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  auto xv = x.values();
  std::vector<double> out(n);
  for (std::size_t f = 0; f < n; ++f) out[f] = xv[(*src)[f]];
  return make_result("permute", out_shape, std::move(out), {&x}, [src](std::span<const double> g, GradSlots& gin) {
    for (std::size_t f = 0; f < g.size(); ++f) gin[0][(*src)[f]] += g[f];
  });
}

Tensor concat(const std::vector<Tensor>& xs, std::size_t axis) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  const auto& s0 = xs[0].shape();
  if (axis >= s0.size()) throw ShapeError("concat: axis out of range");
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& x : xs) {
    const auto& s = x.shape();
    if (s.size() != s0.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != s0[i])
        throw ShapeError("concat: shape mismatch " + shape_str(s) + " vs " + shape_str(s0));
    widths.push_back(s[axis]);
    total += s[axis];
  }
  const std::size_t outer = prod(s0, 0, axis), inner = prod(s0, axis + 1, s0.size());
  std::vector<double> out(outer * total * inner);
  std::size_t offset = 0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    auto xv = xs[t].values();
    const std::size_t w = widths[t];
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(o * w * inner), w * inner,
                  out.begin() + static_cast<std::ptrdiff_t>((o * total + offset) * inner));
    offset += w;
  }
  Shape shape = s0;
  shape[axis] = total;
  std::vector<const Tensor*> inputs;
  for (const auto& x : xs) inputs.push_back(&x);
  return make_result("concat", shape, std::move(out), inputs,
                     [widths, outer, total, inner](std::span<const double> g, GradSlots& gin) {
                       std::size_t offset = 0;
                       for (std::size_t t = 0; t < widths.size(); ++t) {
                         const std::size_t w = widths[t];
                         if (!gin[t].empty())
                           for (std::size_t o = 0; o < outer; ++o)
                             for (std::size_t i = 0; i < w * inner; ++i)
                               gin[t][o * w * inner + i] += g[(o * total + offset) * inner + i];
                         offset += w;
                       }
                     });
}

namespace {

// cols[(c*kh + dy)*kw + dx][y*W + x] = in[c][y+dy-ph][x+dx-pw]
// Source column for output column x at kernel offset d (radius p), or -1
// when it falls into zero padding.
inline long source_index(long x, long d, long p, long n, Padding padding) {
  long s = x + d - p;
  if (s >= 0 && s < n) return s;
  if (padding == Padding::circular) return ((s % n) + n) % n;
  return -1;
}

template <typename S, typename D>
void im2col(const S* in, std::size_t cin, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
            Padding padding, D* cols) {
  const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  for (std::size_t c = 0; c < cin; ++c)
    for (std::size_t dy = 0; dy < kh; ++dy)
      for (std::size_t dx = 0; dx < kw; ++dx) {
        D* row = cols + ((c * kh + dy) * kw + dx) * h * w;
        const S* plane = in + c * h * w;
        const long ox = static_cast<long>(dx) - pw;
        const long x0 = std::max(0L, -ox), x1 = std::min(W, W - ox);
        for (long y = 0; y < H; ++y) {
          const long sy = source_index(y, static_cast<long>(dy), ph, H, padding);
          D* dst = row + y * W;
          if (sy < 0) {
            std::fill(dst, dst + W, D{0});
            continue;
          }
          const S* src = plane + sy * W;
          for (long x = 0; x < x0; ++x) {
            const long sx = source_index(x, static_cast<long>(dx), pw, W, padding);
            dst[x] = sx < 0 ? D{0} : static_cast<D>(src[sx]);
          }
          std::copy(src + x0 + ox, src + x1 + ox, dst + x0);
          for (long x = x1; x < W; ++x) {
            const long sx = source_index(x, static_cast<long>(dx), pw, W, padding);
            dst[x] = sx < 0 ? D{0} : static_cast<D>(src[sx]);
          }
        }
      }
}

template <typename S>
void col2im(const S* cols, std::size_t cin, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
            Padding padding, double* out) {
  const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  for (std::size_t c = 0; c < cin; ++c)
    for (std::size_t dy = 0; dy < kh; ++dy)
      for (std::size_t dx = 0; dx < kw; ++dx) {
        const S* row = cols + ((c * kh + dy) * kw + dx) * h * w;
        double* plane = out + c * h * w;
        const long ox = static_cast<long>(dx) - pw;
        const long x0 = std::max(0L, -ox), x1 = std::min(W, W - ox);
        for (long y = 0; y < H; ++y) {
          const long sy = source_index(y, static_cast<long>(dy), ph, H, padding);
          if (sy < 0) continue;
          const S* src = row + y * W;
          double* dst = plane + sy * W;
          for (long x = 0; x < x0; ++x) {
            const long sx = source_index(x, static_cast<long>(dx), pw, W, padding);
            if (sx >= 0) dst[sx] += src[x];
          }
          for (long x = x0; x < x1; ++x) dst[x + ox] += src[x];
          for (long x = x1; x < W; ++x) {
            const long sx = source_index(x, static_cast<long>(dx), pw, W, padding);
            if (sx >= 0) dst[sx] += src[x];
          }
        }
      }
}

}  // namespace

namespace {

// Matrix form of one convolution: out[b] = K * cols(in[b]) with K
// [Cout, Cin*kh*kw]. T is the arithmetic type; single-precision tensors use
// float GEMMs (their values are float anyway), double tensors stay exact.
template <typename T>
struct ConvGemm {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  std::size_t nb, cin, cout, h, w, kh, kw, hw, kdim;
  Padding padding;

  bool pointwise() const { return kh == 1 && kw == 1; }

  // Column matrix [kdim, hw] of batch element b.
  void columns(const double* in, Mat& cols) const {
    cols.resize(static_cast<Eigen::Index>(kdim), static_cast<Eigen::Index>(hw));
    if (pointwise())
      std::copy(in, in + kdim * hw, cols.data());
    else
      im2col(in, cin, h, w, kh, kw, padding, cols.data());
  }

  Mat kernel(const Tensor& k) const {
    Mat K(static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(kdim));
    std::copy(k.values().begin(), k.values().end(), K.data());
    return K;
  }

  void forward(const Tensor& input, const Tensor& kernel_t, const Tensor* bias, double* out) const {
    const Mat K = kernel(kernel_t);
    Mat cols, y;
    for (std::size_t b = 0; b < nb; ++b) {
      columns(input.values().data() + b * cin * hw, cols);
      y.noalias() = K * cols;
      Map Y(out + b * cout * hw, cout, hw);
      Y = y.template cast<double>();
      if (bias) Y.colwise() += Eigen::Map<const Eigen::VectorXd>(bias->values().data(), static_cast<Eigen::Index>(cout));
    }
  }

  void backward(const Tensor& input, const Tensor& kernel_t, std::span<const double> g, GradSlots& gin) const {
    const Mat K = kernel(kernel_t);
    Mat cols, gb, gk, gc;
    RowMat gk_sum;
    if (!gin[1].empty()) gk_sum = RowMat::Zero(static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(kdim));
    for (std::size_t b = 0; b < nb; ++b) {
      MapC G(g.data() + b * cout * hw, cout, hw);
      if (gin.size() > 2 && !gin[2].empty())
        Eigen::Map<Eigen::VectorXd>(gin[2].data(), static_cast<Eigen::Index>(cout)) += G.rowwise().sum();
      gb = G.template cast<T>();
      if (!gin[1].empty()) {
        columns(input.values().data() + b * cin * hw, cols);
        gk.noalias() = gb * cols.transpose();
        gk_sum += gk.template cast<double>();
      }
      if (!gin[0].empty()) {
        gc.noalias() = K.transpose() * gb;
        double* dst = gin[0].data() + b * cin * hw;
        if (pointwise()) {
          Map(dst, kdim, hw) += gc.template cast<double>();
        } else {
          col2im(gc.data(), cin, h, w, kh, kw, padding, dst);
        }
      }
    }
    if (!gin[1].empty()) Map(gin[1].data(), cout, kdim) += gk_sum;
  }
};

Tensor conv2d_impl(const Tensor& input, const Tensor& kernel, const Tensor* bias, Padding padding) {
  if (input.dim() != 4 || kernel.dim() != 4)
    throw ShapeError("conv2d: expected input [B,C,H,W] and kernel [Co,Ci,kh,kw], got " + shape_str(input.shape()) +
                     " and " + shape_str(kernel.shape()));
  const std::size_t nb = input.extent(0), cin = input.extent(1), h = input.extent(2), w = input.extent(3);
  const std::size_t cout = kernel.extent(0), kh = kernel.extent(2), kw = kernel.extent(3);
  if (kernel.extent(1) != cin)
    throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.extent(1)) + " input channels, got " +
                     std::to_string(cin));
  if (kh % 2 == 0 || kw % 2 == 0) throw ShapeError("conv2d: kernel extents must be odd, got " + shape_str(kernel.shape()));
  if (bias && (bias->dim() != 1 || bias->extent(0) != cout))
    throw ShapeError("conv2d: bias " + shape_str(bias->shape()) + " does not match " + std::to_string(cout) +
                     " output channels");

  std::vector<const Tensor*> inputs{&input, &kernel};
  if (bias) inputs.push_back(bias);
  bool single = true;
  for (const auto* t : inputs) single = single && t->dtype() == DType::f32;

  const std::size_t hw = h * w;
  std::vector<double> out(nb * cout * hw);
  auto run = [&](auto gemm) {
    gemm.forward(input, kernel, bias, out.data());
    return make_result("conv2d", {nb, cout, h, w}, std::move(out), inputs,
                       [input, kernel, gemm](std::span<const double> g, GradSlots& gin) {
                         gemm.backward(input, kernel, g, gin);
                       });
  };
  const std::size_t kdim = cin * kh * kw;
  if (single) return run(ConvGemm<float>{nb, cin, cout, h, w, kh, kw, hw, kdim, padding});
  return run(ConvGemm<double>{nb, cin, cout, h, w, kh, kw, hw, kdim, padding});
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, Padding padding) {
  return conv2d_impl(input, kernel, nullptr, padding);
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, Padding padding) {
  return conv2d_impl(input, kernel, &bias, padding);
}

ComplexTensor fft2(const Tensor& x) {
  auto [count, rows, cols] = planes_of(x.shape(), "fft2");
  ++counts.forward;
  const std::size_t plane = rows * cols;
  std::vector<double> out(2 * count * plane);
  std::vector<cplx> buf(plane);
  auto xv = x.values();
  for (std::size_t p = 0; p < count; ++p) {
    for (std::size_t i = 0; i < plane; ++i) buf[i] = cplx(xv[p * plane + i], 0.0);
    fft::forward(buf, std::span<cplx>(reinterpret_cast<cplx*>(out.data()) + p * plane, plane), rows, cols);
  }
  Shape shape = x.shape();
  shape.push_back(2);
  return ComplexTensor(make_result("fft2", shape, std::move(out), {&x},
                                   [count, rows, cols, plane](std::span<const double> g, GradSlots& gin) {
                                     // adjoint of a real-input DFT: Re(F^H g)
                                     std::vector<cplx> tmp(plane);
                                     const cplx* gc = as_cplx(g);
                                     for (std::size_t p = 0; p < count; ++p) {
                                       fft::inverse(std::span<const cplx>(gc + p * plane, plane), tmp, rows, cols);
                                       for (std::size_t i = 0; i < plane; ++i) gin[0][p * plane + i] += tmp[i].real();
                                     }
                                   }));
}

ComplexTensor ifft2(const ComplexTensor& z) {
  const Tensor& zi = z.interleaved();
  auto [count, rows, cols] = planes_of(z.shape(), "ifft2");
  ++counts.inverse;
  const std::size_t plane = rows * cols;
  const double inv = 1.0 / static_cast<double>(plane);
  std::vector<double> out(2 * count * plane);
  const cplx* zc = as_cplx(zi.values());
  cplx* oc = reinterpret_cast<cplx*>(out.data());
  for (std::size_t p = 0; p < count; ++p) {
    fft::inverse(std::span<const cplx>(zc + p * plane, plane), std::span<cplx>(oc + p * plane, plane), rows, cols);
  }
  for (auto& v : out) v *= inv;
  return ComplexTensor(make_result("ifft2", zi.shape(), std::move(out), {&zi},
                                   [count, rows, cols, plane, inv](std::span<const double> g, GradSlots& gin) {
                                     std::vector<cplx> tmp(plane);
                                     const cplx* gc = as_cplx(g);
                                     for (std::size_t p = 0; p < count; ++p) {
                                       fft::forward(std::span<const cplx>(gc + p * plane, plane), tmp, rows, cols);
                                       for (std::size_t i = 0; i < plane; ++i) {
                                         gin[0][2 * (p * plane + i)] += inv * tmp[i].real();
                                         gin[0][2 * (p * plane + i) + 1] += inv * tmp[i].imag();
                                       }
                                     }
                                   }));
}

Tensor real(const ComplexTensor& z) {
  const Tensor& zi = z.interleaved();
  const std::size_t n = z.numel();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = zi[2 * i];
  return make_result("real", z.shape(), std::move(out), {&zi}, [n](std::span<const double> g, GradSlots& gin) {
    for (std::size_t i = 0; i < n; ++i) gin[0][2 * i] += g[i];
  });
}

ComplexTensor complex_mul(const ComplexTensor& a, const ComplexTensor& b) {
  const Tensor& ai = a.interleaved();
  const Tensor& bi = b.interleaved();
  require_same(ai, bi, "complex_mul");
  const std::size_t n = a.numel();
  std::vector<double> out(2 * n);
  const cplx* ac = as_cplx(ai.values());
  const cplx* bc = as_cplx(bi.values());
  cplx* oc = reinterpret_cast<cplx*>(out.data());
  for (std::size_t i = 0; i < n; ++i) oc[i] = ac[i] * bc[i];
  return ComplexTensor(make_result("complex-mul", ai.shape(), std::move(out), {&ai, &bi},
                                   [ai, bi, n](std::span<const double> g, GradSlots& gin) {
                                     const cplx* gc = as_cplx(g);
                                     const cplx* ac = as_cplx(ai.values());
                                     const cplx* bc = as_cplx(bi.values());
                                     if (!gin[0].empty()) {
                                       cplx* ga = as_cplx(gin[0]);
                                       for (std::size_t i = 0; i < n; ++i) ga[i] += gc[i] * std::conj(bc[i]);
                                     }
                                     if (!gin[1].empty()) {
                                       cplx* gb = as_cplx(gin[1]);
                                       for (std::size_t i = 0; i < n; ++i) gb[i] += gc[i] * std::conj(ac[i]);
                                     }
                                   }));
}

ComplexTensor rfft2_modes(const Tensor& x, std::size_t m_rows, std::size_t m_cols) {
  auto [count, rows, cols] = planes_of(x.shape(), "rfft2_modes");
  if (m_rows == 0 || m_cols == 0 || m_rows > rows / 2 + rows % 2 || m_cols > cols / 2 + cols % 2)
    throw ShapeError("rfft2_modes: retained modes (" + std::to_string(m_rows) + "," + std::to_string(m_cols) +
                     ") exceed the Nyquist limit of a " + std::to_string(rows) + "x" + std::to_string(cols) + " grid");
  ++counts.forward;
  const auto keep_r = kept_rows(rows, m_rows);
  const std::size_t kc = kept_cols(cols, m_cols);
  const std::size_t half = cols / 2 + 1, plane = rows * cols, kr = keep_r.size();
  std::vector<double> out(2 * count * kr * kc);
  cplx* oc = reinterpret_cast<cplx*>(out.data());
  std::vector<cplx> spec(rows * half);
  auto xv = x.values();
  for (std::size_t p = 0; p < count; ++p) {
    fft::forward_real(xv.subspan(p * plane, plane), spec, rows, cols);
    for (std::size_t r = 0; r < kr; ++r)
      for (std::size_t c = 0; c < kc; ++c) oc[(p * kr + r) * kc + c] = spec[keep_r[r] * half + c];
  }
  Shape shape(x.shape().begin(), x.shape().end() - 2);
  shape.insert(shape.end(), {kr, kc, 2});
  return ComplexTensor(make_result("rfft2-modes", shape, std::move(out), {&x},
                                   [keep_r, kc, count, rows, cols, plane](std::span<const double> g, GradSlots& gin) {
                                     const std::size_t kr = keep_r.size();
                                     const cplx* gc = as_cplx(g);
                                     std::vector<cplx> full(plane), tmp(plane);
                                     for (std::size_t p = 0; p < count; ++p) {
                                       std::fill(full.begin(), full.end(), cplx{});
                                       for (std::size_t r = 0; r < kr; ++r)
                                         for (std::size_t c = 0; c < kc; ++c)
                                           full[keep_r[r] * cols + c] = gc[(p * kr + r) * kc + c];
                                       fft::inverse(full, tmp, rows, cols);
                                       for (std::size_t i = 0; i < plane; ++i) gin[0][p * plane + i] += tmp[i].real();
                                     }
                                   }));
}

Tensor irfft2_modes(const ComplexTensor& y, std::size_t rows, std::size_t cols) {
  const Tensor& yi = y.interleaved();
  const Shape ys = y.shape();
  if (ys.size() < 2) throw ShapeError("irfft2_modes: need at least 2 axes");
  const std::size_t kr = ys[ys.size() - 2], kc = ys[ys.size() - 1];
  const bool full_rows = kr == rows;
  if ((!full_rows && (kr % 2 != 0 || kr > rows)) || kc > cols / 2 + 1)
    throw ShapeError("irfft2_modes: retained layout " + shape_str(ys) + " incompatible with a " + std::to_string(rows) +
                     "x" + std::to_string(cols) + " grid");
  ++counts.inverse;
  const auto keep_r = kept_rows(rows, full_rows ? rows : kr / 2);
  const std::size_t count = prod(ys, 0, ys.size() - 2), plane = rows * cols, half = cols / 2 + 1;
  const double inv = 1.0 / static_cast<double>(plane);
  std::vector<double> out(count * plane);
  const cplx* yc = as_cplx(yi.values());
  // Re(inverse of the column-weighted spectrum) is the c2r transform of the
  // half spectrum once its self-conjugate columns are made Hermitian.
  std::vector<cplx> spec(rows * half), column(rows);
  std::vector<std::size_t> self_conj{0};
  if (cols % 2 == 0 && kc > cols / 2) self_conj.push_back(cols / 2);
  for (std::size_t p = 0; p < count; ++p) {
    std::fill(spec.begin(), spec.end(), cplx{});
    for (std::size_t r = 0; r < kr; ++r)
      std::copy_n(yc + (p * kr + r) * kc, kc, spec.begin() + static_cast<std::ptrdiff_t>(keep_r[r] * half));
    for (std::size_t c : self_conj) {
      for (std::size_t r = 0; r < rows; ++r) column[r] = spec[r * half + c];
      for (std::size_t r = 0; r < rows; ++r)
        spec[r * half + c] = 0.5 * (column[r] + std::conj(column[(rows - r) % rows]));
    }
    fft::inverse_real(spec, std::span<double>(out.data() + p * plane, plane), rows, cols);
  }
  for (auto& v : out) v *= inv;
  Shape shape(ys.begin(), ys.end() - 2);
  shape.insert(shape.end(), {rows, cols});
  return make_result("irfft2-modes", shape, std::move(out), {&yi},
                     [keep_r, kc, count, rows, cols, plane, half, inv](std::span<const double> g, GradSlots& gin) {
                       const std::size_t kr = keep_r.size();
                       std::vector<cplx> spec(rows * half);
                       cplx* gy = as_cplx(gin[0]);
                       for (std::size_t p = 0; p < count; ++p) {
                         fft::forward_real(g.subspan(p * plane, plane), spec, rows, cols);
                         for (std::size_t r = 0; r < kr; ++r)
                           for (std::size_t c = 0; c < kc; ++c)
                             gy[(p * kr + r) * kc + c] += inv * column_weight(c, cols) * spec[keep_r[r] * half + c];
                       }
                     });
}

ComplexTensor mode_mix(const ComplexTensor& x, const ComplexTensor& w) {
  const Tensor& xi = x.interleaved();
  const Tensor& wi = w.interleaved();
  const Shape xs = x.shape(), ws = w.shape();
  if (xs.size() < 2 || ws.size() != xs.size() || ws[0] != xs[1] ||
      !std::equal(xs.begin() + 2, xs.end(), ws.begin() + 2))
    throw ShapeError("mode_mix: x " + shape_str(xs) + " and weights " + shape_str(ws) + " are incompatible");
  const std::size_t nb = xs[0], ci = xs[1], co = ws[1], m = prod(xs, 2, xs.size());
  std::vector<double> out(2 * nb * co * m, 0.0);
  const double* xd = xi.values().data();
  const double* wd = wi.values().data();
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t i = 0; i < ci; ++i) {
      const double* xr = xd + 2 * (b * ci + i) * m;
      for (std::size_t o = 0; o < co; ++o)
        cmul_acc(out.data() + 2 * (b * co + o) * m, xr, wd + 2 * (i * co + o) * m, m, false);
    }
  Shape shape = xs;
  shape[1] = co;
  shape.push_back(2);
  return ComplexTensor(make_result("mode-mix", shape, std::move(out), {&xi, &wi},
                                   [xi, wi, nb, ci, co, m](std::span<const double> g, GradSlots& gin) {
                                     const double* xd = xi.values().data();
                                     const double* wd = wi.values().data();
                                     double* gx = gin[0].empty() ? nullptr : gin[0].data();
                                     double* gw = gin[1].empty() ? nullptr : gin[1].data();
                                     for (std::size_t b = 0; b < nb; ++b)
                                       for (std::size_t i = 0; i < ci; ++i)
                                         for (std::size_t o = 0; o < co; ++o) {
                                           const double* grow = g.data() + 2 * (b * co + o) * m;
                                           if (gx) cmul_acc(gx + 2 * (b * ci + i) * m, grow, wd + 2 * (i * co + o) * m, m, true);
                                           if (gw) cmul_acc(gw + 2 * (i * co + o) * m, grow, xd + 2 * (b * ci + i) * m, m, true);
                                         }
                                   }));
}

Tensor spectral_resample(const Tensor& x, std::size_t rows, std::size_t cols) {
  auto [count, h, w] = planes_of(x.shape(), "spectral_resample");
  if (h % 2 || w % 2 || rows % 2 || cols % 2 || rows == 0 || cols == 0)
    throw ShapeError("spectral_resample: extents must be even, got " + std::to_string(h) + "x" + std::to_string(w) +
                     " -> " + std::to_string(rows) + "x" + std::to_string(cols));
  const auto lr = resample_links(h, rows);
  const auto lc = resample_links(w, cols);
  const std::size_t src_plane = h * w, dst_plane = rows * cols;
  const double inv = 1.0 / static_cast<double>(src_plane);
  std::vector<double> out(count * dst_plane);
  std::vector<cplx> buf(src_plane), spec(src_plane), dst(dst_plane), tmp(dst_plane);
  auto xv = x.values();
  for (std::size_t p = 0; p < count; ++p) {
    for (std::size_t i = 0; i < src_plane; ++i) buf[i] = cplx(xv[p * src_plane + i], 0.0);
    fft::forward(buf, spec, h, w);
    std::fill(dst.begin(), dst.end(), cplx{});
    for (const auto& a : lr)
      for (const auto& b : lc) dst[a.dst * cols + b.dst] += a.w * b.w * spec[a.src * w + b.src];
    fft::inverse(dst, tmp, rows, cols);
    for (std::size_t i = 0; i < dst_plane; ++i) out[p * dst_plane + i] = inv * tmp[i].real();
  }
  Shape shape = x.shape();
  shape[shape.size() - 2] = rows;
  shape[shape.size() - 1] = cols;
  return make_result("spectral-resample", shape, std::move(out), {&x},
                     [lr, lc, count, h, w, rows, cols, inv](std::span<const double> g, GradSlots& gin) {
                       const std::size_t src_plane = h * w, dst_plane = rows * cols;
                       std::vector<cplx> gb(dst_plane), gs(dst_plane), back(src_plane), tmp(src_plane);
                       for (std::size_t p = 0; p < count; ++p) {
                         for (std::size_t i = 0; i < dst_plane; ++i) gb[i] = cplx(g[p * dst_plane + i], 0.0);
                         fft::forward(gb, gs, rows, cols);
                         std::fill(back.begin(), back.end(), cplx{});
                         for (const auto& a : lr)
                           for (const auto& b : lc) back[a.src * w + b.src] += a.w * b.w * gs[a.dst * cols + b.dst];
                         fft::inverse(back, tmp, h, w);
                         for (std::size_t i = 0; i < src_plane; ++i) gin[0][p * src_plane + i] += inv * tmp[i].real();
                       }
                     });
}

TransformCounts transform_counts() { return counts; }
void reset_transform_counts() { counts = {}; }

namespace {

const Attr& attr(const AttrMap& attrs, const std::string& key, const std::string& kind) {
  auto it = attrs.find(key);
  if (it == attrs.end()) throw ConfigError(kind + ": missing attribute '" + key + "'");
  return it->second;
}

std::size_t attr_size(const AttrMap& attrs, const std::string& key, const std::string& kind) {
  const auto& a = attr(attrs, key, kind);
  if (const auto* v = std::get_if<std::int64_t>(&a); v && *v >= 0) return static_cast<std::size_t>(*v);
  throw ConfigError(kind + ": attribute '" + key + "' must be a non-negative integer");
}

std::vector<std::size_t> attr_list(const AttrMap& attrs, const std::string& key, const std::string& kind) {
  const auto* v = std::get_if<std::vector<std::int64_t>>(&attr(attrs, key, kind));
  if (!v) throw ConfigError(kind + ": attribute '" + key + "' must be an integer list");
  std::vector<std::size_t> out;
  for (auto e : *v) {
    if (e < 0) throw ConfigError(kind + ": negative entry in '" + key + "'");
    out.push_back(static_cast<std::size_t>(e));
  }
  return out;
}

void arity(const std::vector<Tensor>& inputs, std::size_t n, const std::string& kind) {
  if (inputs.size() != n)
    throw ShapeError(kind + ": expected " + std::to_string(n) + " inputs, got " + std::to_string(inputs.size()));
}

}  // namespace

Tensor apply_primitive(const std::string& kind, const std::vector<Tensor>& inputs, const AttrMap& attrs) {
  if (kind == "add" || kind == "sub" || kind == "mul" || kind == "matmul") {
    arity(inputs, 2, kind);
    if (kind == "add") return add(inputs[0], inputs[1]);
    if (kind == "sub") return sub(inputs[0], inputs[1]);
    if (kind == "mul") return mul(inputs[0], inputs[1]);
    return matmul(inputs[0], inputs[1]);
  }
  if (kind == "scalar-mul") {
    arity(inputs, 1, kind);
    const auto& a = attr(attrs, "s", kind);
    double s = std::holds_alternative<double>(a) ? std::get<double>(a)
               : std::holds_alternative<std::int64_t>(a)
                   ? static_cast<double>(std::get<std::int64_t>(a))
                   : throw ConfigError("scalar-mul: attribute 's' must be numeric");
    return scale(inputs[0], s);
  }
  if (kind == "gelu" || kind == "relu" || kind == "sum" || kind == "mean") {
    arity(inputs, 1, kind);
    if (kind == "gelu") return gelu(inputs[0]);
    if (kind == "relu") return relu(inputs[0]);
    if (kind == "sum") return sum(inputs[0]);
    return mean(inputs[0]);
  }
  if (kind == "slice") {
    arity(inputs, 1, kind);
    return slice(inputs[0], attr_size(attrs, "axis", kind), attr_size(attrs, "start", kind),
                 attr_size(attrs, "length", kind));
  }
  if (kind == "pad") {
    arity(inputs, 1, kind);
    return pad(inputs[0], attr_size(attrs, "axis", kind), attr_size(attrs, "before", kind),
               attr_size(attrs, "after", kind));
  }
  if (kind == "reshape") {
    arity(inputs, 1, kind);
    auto s = attr_list(attrs, "shape", kind);
    return reshape(inputs[0], Shape(s.begin(), s.end()));
  }
  if (kind == "permute") {
    arity(inputs, 1, kind);
    return permute(inputs[0], attr_list(attrs, "perm", kind));
  }
  throw ConfigError("apply_primitive: unknown primitive kind '" + kind + "'");
}

}  // namespace ops
}  // namespace nolab
