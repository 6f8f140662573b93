#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "nolab/field.hpp"
#include "nolab/models.hpp"
#include "nolab/storage.hpp"

namespace nolab::erf {

enum class Method { autodiff, finite_difference, analytical };
const char* method_name(Method m);

struct GridIndex {
  std::size_t ix = 0;
  std::size_t iy = 0;
};

// Grid point nearest the domain center.
GridIndex center_index(std::size_t n);

/// Sensitivity of the output value at x0 to the input at every grid point.
struct ERFMap {
  Field2D map;
  GridIndex x0;
  std::string probe;  // identifies the probed input (e.g. "test[3] seed 17")
  Method method = Method::autodiff;
};

/// One reverse sweep seeded with u(x0). The operator sees a [1, N, N]
/// float64 input; pass a model through erf_autodiff(ModelState, ...) to get
/// the float64 promotion done for you.
ERFMap erf_autodiff(const models::FieldOperator& op, const Field2D& a, GridIndex x0, std::string probe = {});
ERFMap erf_autodiff(const models::ModelState& state, const Field2D& a, GridIndex x0, std::string probe = {});

/// Central differences (u(a + h e_x) - u(a - h e_x)) / 2h at x0 for every x.
/// h <= 0 selects 1e-4 times the standard deviation of a (or 1e-4 for a
/// constant probe). Perturbed inputs are evaluated in batches of `batch`.
ERFMap erf_finite_difference(const models::FieldOperator& op, const Field2D& a, GridIndex x0, double h = 0.0,
                             std::string probe = {}, std::size_t batch = 32);
ERFMap erf_finite_difference(const models::ModelState& state, const Field2D& a, GridIndex x0, double h = 0.0,
                             std::string probe = {}, std::size_t batch = 32);

/// Functional derivative of the wave solution operator u0 -> u(t) on the
/// Dirichlet vertex grid:
///   scale * sum_{i,j<=K} sin(pi i x0) sin(pi j y0) sin(pi i x) sin(pi j y) cos(c pi t sqrt(i^2+j^2))
/// with scale 4 (the sine-basis projection constant).
/// drop_projection_factor = true sets scale to 1.
ERFMap erf_analytical_wave(GridIndex x0, double t, double c = 0.1, int K = 24, std::size_t n = 64,
                           bool drop_projection_factor = false);

/// Fraction of sum |map| within Euclidean radius r of x0. Periodic grids use
/// the wrapped distance; other boundaries the plain distance in the square.
double mass_in_disc(const ERFMap& m, double radius);

struct Comparison {
  double cosine = 0.0;
  std::vector<double> radii;
  std::vector<double> mass_a, mass_b;

  storage::json to_json() const;
};

std::vector<double> default_radii();  // 0.05, 0.10, ..., 0.70
Comparison erf_compare(const ERFMap& a, const ERFMap& b, const std::vector<double>& radii = default_radii());
double cosine_similarity(const Field2D& a, const Field2D& b);

enum class ExportFormat { csv, pgm };

/// csv: header ix,iy,value then N^2 rows. pgm: min-max normalized 8-bit
/// image (rows along x) plus a "<path>.bounds.txt" sidecar holding the
/// bounds; a constant map renders mid-gray.
void erf_export(const ERFMap& m, const std::filesystem::path& path, ExportFormat format);
// Reads back a csv export (values only, row-major).
std::vector<double> read_erf_csv(const std::filesystem::path& path, std::size_t& n);

}  // namespace nolab::erf
