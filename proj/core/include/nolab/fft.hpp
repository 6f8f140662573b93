#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace nolab::fft {

using cplx = std::complex<double>;

// Unnormalized 2-D transforms over one H x W slice, row-major.
// Forward uses e^{-2 pi i k.x}; inverse uses e^{+2 pi i k.x} without the
// 1/(H W) factor (callers scale).
void forward(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols);
void inverse(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols);

// Real input, half spectrum out: rows x (cols/2 + 1).
void forward_real(std::span<const double> in, std::span<cplx> out, std::size_t rows, std::size_t cols);

// Hermitian half spectrum in, real field out (unnormalized). Only the
// Hermitian part of the DC and Nyquist columns contributes.
void inverse_real(std::span<const cplx> in, std::span<double> out, std::size_t rows, std::size_t cols);

// 1-D unnormalized transforms.
void forward_1d(std::span<const cplx> in, std::span<cplx> out);
void inverse_1d(std::span<const cplx> in, std::span<cplx> out);

// Signed frequency of DFT index k on an axis of length n.
inline long signed_freq(std::size_t k, std::size_t n) {
  return k <= n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

}  // namespace nolab::fft
