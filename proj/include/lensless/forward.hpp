#pragma once

// Forward models: virtual-image formation for a planar scene, pixelization,
// ideal measurements, finite-sensor blur and the aperture diffraction kernel.
//
// Continuous integrals are evaluated on a supersampled grid with `s` sub-cells
// per aperture element and axis; a sub-cell value is its quadrature
// contribution, so a pixel is the plain sum of its s x s sub-cells.

#include "lensless/geometry.hpp"
#include "lensless/sensing.hpp"

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace lensless {

using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

struct VirtualImage {
  Index supersample = 1;
  Image values;  // (s * rows) x (s * cols), non-negative

  Index rows() const { return values.rows() / supersample; }
  Index cols() const { return values.cols() / supersample; }
};

// Scene radiance on a plane parallel to the aperture. `origin` is the outer
// top-left corner of pixel (0, 0) and `pitch` the pixel size, both in the
// lateral aperture frame.
struct PlanarScene {
  Image radiance;
  Vec2 origin = Vec2::Zero();
  double pitch = 1.0;

  double width() const { return pitch * static_cast<double>(radiance.cols()); }
  double height() const { return pitch * static_cast<double>(radiance.rows()); }

  // Bilinear sample at a scene-plane point; throws ExtentError outside.
  double sample(const Vec2& p) const;

  // Places `image` so that, seen from `reference` through the aperture, it
  // spans the grid enlarged by `margin` elements on each side. With a zero
  // margin and an image of s times the grid size, a sensor at `reference`
  // samples the image pixel centers exactly.
  static PlanarScene covering(Image image, const ApertureGrid& grid, const SceneGeometry& geom,
                              const Vec2& reference, double margin = 0.0);
};

// Each sub-cell takes the scene radiance along the ray from the sensor
// through the sub-cell center.
VirtualImage render_virtual(const PlanarScene& scene, const SensorSpec& sensor, const SceneGeometry& geom,
                            const ApertureGrid& grid, Index supersample);

// Midpoint quadrature of the element integrals: sum of each s x s block.
Image pixelize(const VirtualImage& v);
Image pixelize(const Image& fine, Index supersample);

// Spreads each pixel uniformly over its s x s sub-cells; pixelize(upsample(x)) == x.
Image upsample(const Image& pixels, Index supersample);

enum class ForwardModel { Ideal, Finite, Diffraction };
std::string to_string(ForwardModel model);
ForwardModel forward_model_from_string(const std::string& name);

struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

struct MeasurementSet {
  Vector values;                 // ideal and finite models
  ComplexVector complex_values;  // diffraction model
  MatrixDescriptor matrix;
  ForwardModel model = ForwardModel::Ideal;
  NoiseSpec noise;
  SensorSpec sensor;
  Index rows = 0;
  Index cols = 0;
  double element_size = 1.0;
  double sensor_distance = 1.0;
  double scene_distance = 1.0;
  Index supersample = 1;
  double wavenumber = 0.0;
  Index quadrature = 0;  // diffraction model only
  std::string scene_hash;

  bool is_complex() const { return model == ForwardModel::Diffraction; }
  Index size() const { return is_complex() ? complex_values.size() : values.size(); }
};

// z = A I + noise.
MeasurementSet measure_ideal(const SensingMatrix& A, const Image& pixels, const NoiseSpec& noise = {});

// Normalized blur kernel on the supersampled grid. Separable: the 2D weight
// at offset (a, b) is vertical(a + radius_v) * horizontal(b + radius_h).
struct BlurKernel {
  Vector vertical;
  Vector horizontal;

  Index radius_rows() const { return vertical.size() / 2; }
  Index radius_cols() const { return horizontal.size() / 2; }
  bool is_identity() const { return vertical.size() == 1 && horizontal.size() == 1; }
  Image weights() const;
};

// Point-spread function of a uniform rectangular sensor: a box of physical
// size alpha * (width, height), rasterized by exact overlap with sub-cells.
// A point sensor yields the identity kernel.
BlurKernel finite_sensor_kernel(const SensorSpec& sensor, const SceneGeometry& geom, const ApertureGrid& grid,
                                Index supersample);

// out(r, c) = sum_{a,b} k(a, b) in(r - a, c - b), zero outside the grid.
Image blur(const Image& in, const BlurKernel& kernel);
// Adjoint (correlation) of blur.
Image blur_adjoint(const Image& in, const BlurKernel& kernel);

// z = A pixelize(kernel * v) + noise.
MeasurementSet measure_finite(const SensingMatrix& A, const VirtualImage& v, const SensorSpec& sensor,
                              const SceneGeometry& geom, const ApertureGrid& grid, const NoiseSpec& noise = {});

// Phase integrals between aperture elements for a monochromatic wave. With
// the sensor foot point as origin, element (i, j) integrated over (x, y) and
// element (s, t) represented by its center (u, v):
//
//   G(q(i,j), q(s,t)) = \iint_{E_ij} exp(-i k (l u + h v)) dx dy,
//   l = -x / r, h = -y / r, r = sqrt(x^2 + y^2 + f^2).
//
// The per-pattern kernel is B = G diag(T).
class DiffractionModel {
 public:
  DiffractionModel(const ApertureGrid& grid, const SceneGeometry& geom, double wavenumber, Index quadrature,
                   Vec2 sensor_position);
  // Sensor on the axis through the grid center.
  DiffractionModel(const ApertureGrid& grid, const SceneGeometry& geom, double wavenumber, Index quadrature = 4);

  const ComplexMatrix& phase_integrals() const { return phase_; }
  const ApertureGrid& grid() const { return grid_; }
  double wavenumber() const { return k_; }
  Index quadrature() const { return quadrature_; }

  ComplexMatrix kernel(const AperturePattern& pattern) const;
  // a B(a) for a row a of transmittance values in scan order.
  Eigen::RowVectorXcd modified_row(const Vector& row) const;
  // Stacked modified rows of every measurement of A.
  ComplexMatrix modified_rows(const SensingMatrix& A) const;

 private:
  ApertureGrid grid_;
  double k_;
  Index quadrature_;
  ComplexMatrix phase_;
};

ComplexMatrix diffraction_kernel(const AperturePattern& pattern, double wavenumber, const SceneGeometry& geom,
                                 const ApertureGrid& grid, Index quadrature = 4);

// z_m = a(m) B(m) I, kept complex.
MeasurementSet measure_diffracted(const SensingMatrix& A, const Image& pixels, const DiffractionModel& model,
                                  const NoiseSpec& noise = {});

struct AcquisitionSpec {
  ForwardModel model = ForwardModel::Ideal;
  Index supersample = 1;
  double wavenumber = 0.0;
  Index diffraction_quadrature = 4;
  NoiseSpec noise;
};

// One measurement set per sensor, all against the same matrix. Sensor k uses
// noise seed noise.seed + k.
std::vector<MeasurementSet> multiview_measure(const SensingMatrix& A, const PlanarScene& scene,
                                              const std::vector<SensorSpec>& sensors, const SceneGeometry& geom,
                                              const ApertureGrid& grid, const AcquisitionSpec& spec);

// FNV-1a over the dimensions and the raw bytes of the values.
std::string content_hash(const Image& image);

}  // namespace lensless
