#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "nolab/tensor.hpp"

namespace nolab {

/// Complex tensor stored interleaved: a real Tensor whose trailing extent
/// is 2 holding (re, im). shape() reports the logical complex shape.
class ComplexTensor {
 public:
  ComplexTensor() = default;
  explicit ComplexTensor(Tensor interleaved);

  Shape shape() const;
  const Tensor& interleaved() const { return data_; }
  std::size_t numel() const { return data_.numel() / 2; }
  double re(std::size_t i) const { return data_[2 * i]; }
  double im(std::size_t i) const { return data_[2 * i + 1]; }

 private:
  Tensor data_;
};

namespace ops {

// Elementwise binary ops require identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor zeros_like(const Tensor& a);

// Unary activations and maps. gelu is the tanh approximation with
// constants 0.7978845608 and 0.044715. relu'(0) = abs'(0) = 0.
Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor pow(const Tensor& x, double p);
// sqrt'(0) is taken as 0, like abs and relu.
Tensor sqrt(const Tensor& x);

// 2-D matrix product [m,k]x[k,n], or batched [b,m,k]x[b,k,n].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Sum over one axis; the axis is removed.
Tensor sum_axis(const Tensor& x, std::size_t axis);
Tensor mean_axis(const Tensor& x, std::size_t axis);
// Inserts a new axis of the given extent, repeating the values along it.
Tensor expand_axis(const Tensor& x, std::size_t axis, std::size_t extent);
// x + b broadcast along `axis` (b is 1-D with extent x.shape[axis]).
Tensor bias_add(const Tensor& x, const Tensor& b, std::size_t axis = 1);

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
Tensor pad(const Tensor& x, std::size_t axis, std::size_t before, std::size_t after);
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm);
Tensor concat(const std::vector<Tensor>& xs, std::size_t axis);

enum class Padding { zero, circular };

/// Same-size 2-D cross-correlation. input [B,Cin,H,W], kernel
/// [Cout,Cin,kh,kw] with odd kh, kw.
Tensor conv2d(const Tensor& input, const Tensor& kernel, Padding padding);
// Same, plus a per-output-channel bias [Cout].
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, Padding padding);

// Unnormalized forward DFT over the last two axes of a real tensor.
ComplexTensor fft2(const Tensor& x);
// Inverse DFT over the last two complex axes, scaled by 1/(H W).
ComplexTensor ifft2(const ComplexTensor& z);
Tensor real(const ComplexTensor& z);
ComplexTensor complex_mul(const ComplexTensor& a, const ComplexTensor& b);

/// Retained-mode spectrum of a real field [..., H, W] -> [..., R, C] complex.
/// Rows kept: 0..m_rows-1 and H-m_rows..H-1 (all H rows when 2 m_rows >= H).
/// Columns kept: 0..m_cols-1 of the half spectrum, or 0..W/2 when
/// m_cols >= W/2. Counts as one forward transform.
ComplexTensor rfft2_modes(const Tensor& x, std::size_t m_rows, std::size_t m_cols);

/// Inverse of the retained-mode layout above: Re(ifft2(D * embed(y))) with
/// D = 2 on interior half-plane columns and 1 on the DC/Nyquist columns.
/// Counts as one inverse transform.
Tensor irfft2_modes(const ComplexTensor& y, std::size_t rows, std::size_t cols);

/// Per-mode complex channel mixing: x [B,Cin,M...] and w [Cin,Cout,M...]
/// (same trailing mode shape) -> [B,Cout,M...].
ComplexTensor mode_mix(const ComplexTensor& x, const ComplexTensor& w);

/// Fourier resampling of the last two axes to a new even size. Upsampling
/// zero-pads the spectrum, downsampling truncates it; values are preserved
/// (interpolation convention).
Tensor spectral_resample(const Tensor& x, std::size_t rows, std::size_t cols);

struct TransformCounts {
  std::uint64_t forward = 0;
  std::uint64_t inverse = 0;
};
TransformCounts transform_counts();
void reset_transform_counts();

using Attr = std::variant<double, std::int64_t, std::string, std::vector<std::int64_t>>;
using AttrMap = std::map<std::string, Attr>;

/// String-dispatched entry point over the core primitive set:
/// add, sub, mul, scalar-mul (attr "s"), matmul, gelu, relu, sum, mean,
/// slice (axis, start, length), pad (axis, before, after), reshape (shape),
/// permute (perm).
Tensor apply_primitive(const std::string& kind, const std::vector<Tensor>& inputs,
                       const AttrMap& attrs = {});

}  // namespace ops
}  // namespace nolab
