#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nolab/field.hpp"
#include "nolab/models.hpp"
#include "nolab/storage.hpp"

namespace nolab::analysis {

/// Error energy binned by integer radius round(|k|) of the signed
/// frequency pair. energy[r] sums |E_k|^2 / N^2 over the bin, so the bins
/// partition ||pred - target||^2 (Parseval).
struct SpectrumBins {
  std::vector<std::size_t> count;  // modes per bin, bin r = radius r
  std::vector<double> energy;

  std::size_t bins() const { return energy.size(); }
  double total() const;
  // Energy of bins with radius <= k_max.
  double band(std::size_t k_max) const;
  double low_band() const { return band(6); }

  SpectrumBins& operator+=(const SpectrumBins& other);
  storage::CsvTable table() const;  // bin, count, error_energy
};

SpectrumBins radial_error_spectrum(const Field2D& pred, const Field2D& target);
SpectrumBins radial_error_spectrum(std::span<const double> pred, std::span<const double> target, std::size_t n);

/// Counterclockwise quarter turns of a square grid: one turn maps value
/// (i, j) to position (n-1-j, i). Negative counts turn clockwise.
Field2D c4_rotate(const Field2D& field, int quarter_turns);
std::vector<double> c4_rotate(std::span<const double> values, std::size_t n, int quarter_turns);

/// Mean over samples and the three nontrivial rotations g of
/// ||G(g a) - g G(a)|| / ||g G(a)||.
double c4_equivariance_error(const models::FieldOperator& op, const std::vector<Field2D>& samples);
// Models must have coordinate features disabled: coordinate channels pin an
// orientation and would be measured as an equivariance defect.
double c4_equivariance_error(const models::ModelState& state, const std::vector<Field2D>& samples);

}  // namespace nolab::analysis
