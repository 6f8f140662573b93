#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nolab/tensor.hpp"

namespace nolab {

enum class BoundaryKind { periodic, dirichlet_zero, neumann };

const char* boundary_name(BoundaryKind kind);
BoundaryKind parse_boundary(const std::string& name);

/// Scalar field on an n x n grid over [0,1]^2, row-major with the first
/// index along x. Periodic grids sample x_m = m/n; Dirichlet and Neumann
/// grids sample the vertices x_m = m/(n-1), boundary included.
class Field2D {
 public:
  Field2D() = default;
  Field2D(std::size_t n, BoundaryKind boundary);
  Field2D(std::size_t n, BoundaryKind boundary, std::vector<double> values);

  std::size_t n() const { return n_; }
  BoundaryKind boundary() const { return boundary_; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  // Coordinate of grid index m along either axis.
  double coord(std::size_t m) const;
  double spacing() const;

  Tensor to_tensor(DType dtype = DType::f64) const;
  static Field2D from_tensor(const Tensor& t, BoundaryKind boundary);

 private:
  std::size_t n_ = 0;
  BoundaryKind boundary_ = BoundaryKind::periodic;
  std::vector<double> values_;
};

double grid_coord(std::size_t m, std::size_t n, BoundaryKind boundary);

}  // namespace nolab
