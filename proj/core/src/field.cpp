#include "nolab/field.hpp"

#include <cmath>

namespace nolab {

const char* boundary_name(BoundaryKind kind) {
  switch (kind) {
    case BoundaryKind::periodic: return "periodic";
    case BoundaryKind::dirichlet_zero: return "dirichlet-zero";
    case BoundaryKind::neumann: return "neumann";
  }
  return "?";
}

BoundaryKind parse_boundary(const std::string& name) {
  if (name == "periodic") return BoundaryKind::periodic;
  if (name == "dirichlet-zero" || name == "dirichlet") return BoundaryKind::dirichlet_zero;
  if (name == "neumann") return BoundaryKind::neumann;
  throw ConfigError("unknown boundary kind '" + name + "'");
}

double grid_coord(std::size_t m, std::size_t n, BoundaryKind boundary) {
  if (boundary == BoundaryKind::periodic) return static_cast<double>(m) / static_cast<double>(n);
  return static_cast<double>(m) / static_cast<double>(n - 1);
}

Field2D::Field2D(std::size_t n, BoundaryKind boundary) : Field2D(n, boundary, std::vector<double>(n * n, 0.0)) {}

Field2D::Field2D(std::size_t n, BoundaryKind boundary, std::vector<double> values)
    : n_(n), boundary_(boundary), values_(std::move(values)) {
  if (n_ < 8) throw ConfigError("field: grid extent must be at least 8, got " + std::to_string(n_));
  if (values_.size() != n_ * n_) throw ShapeError("field: value count does not match an n x n grid");
  for (double v : values_)
    if (!std::isfinite(v)) throw NumericError("field: non-finite value");
}

double Field2D::coord(std::size_t m) const { return grid_coord(m, n_, boundary_); }

double Field2D::spacing() const {
  return boundary_ == BoundaryKind::periodic ? 1.0 / static_cast<double>(n_) : 1.0 / static_cast<double>(n_ - 1);
}

Tensor Field2D::to_tensor(DType dtype) const { return Tensor::from({n_, n_}, values_, dtype); }

Field2D Field2D::from_tensor(const Tensor& t, BoundaryKind boundary) {
  if (t.dim() != 2 || t.extent(0) != t.extent(1)) throw ShapeError("field: tensor must be square 2-D");
  return Field2D(t.extent(0), boundary, std::vector<double>(t.values().begin(), t.values().end()));
}

}  // namespace nolab
