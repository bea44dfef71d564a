#pragma once

// Aperture discretization, pixel scan order and the sensor/scene geometry
// that relates the virtual images seen by different sensors.
//
// Coordinates: origin at the top-left corner of the aperture grid, x to the
// right (columns), y downward (rows). Lengths are in the same units as
// ApertureGrid::element_size. Sensor positions are the perpendicular
// projections of the sensors onto the aperture plane in that frame.

#include <Eigen/Core>

#include <string>
#include <variant>

namespace lensless {

using Index = Eigen::Index;
using Vec2 = Eigen::Vector2d;

// Grid-shaped real data. Eigen's default column-major storage coincides with
// the pixel scan order, so `image.reshaped()` is the vector view I_n.
using Image = Eigen::ArrayXXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

class ApertureGrid {
 public:
  ApertureGrid(Index rows, Index cols, double element_size = 1.0);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  double element_size() const { return element_size_; }
  double element_area() const { return element_size_ * element_size_; }
  Index pixel_count() const { return rows_ * cols_; }
  double width() const { return static_cast<double>(cols_) * element_size_; }
  double height() const { return static_cast<double>(rows_) * element_size_; }

  // Center of element (i, j) in aperture coordinates.
  Vec2 element_center(Index i, Index j) const;

  friend bool operator==(const ApertureGrid&, const ApertureGrid&) = default;

 private:
  Index rows_;
  Index cols_;
  double element_size_;
};

struct GridIndex {
  Index row;
  Index col;
  friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

// Column-major scan order: top to bottom within a column, columns left to
// right. This is the only ordering used anywhere in the library.
class IndexMap {
 public:
  explicit IndexMap(ApertureGrid grid) : grid_(grid) {}

  const ApertureGrid& grid() const { return grid_; }

  // q(i, j); throws std::out_of_range.
  Index operator()(Index i, Index j) const;
  // q^-1(n); throws std::out_of_range.
  GridIndex inverse(Index n) const;

 private:
  ApertureGrid grid_;
};

class SceneGeometry {
 public:
  // f: sensor plane to aperture; F: aperture to scene plane.
  SceneGeometry(double f, double F);

  double sensor_distance() const { return f_; }
  double scene_distance() const { return F_; }

 private:
  double f_;
  double F_;
};

// F / (f + F), the factor relating displacements in the sensor plane to
// displacements in the aperture plane for a planar scene.
double alpha(const SceneGeometry& geom);

struct PointShape {};
struct RectangleShape {
  double width;
  double height;
};
using SensorShape = std::variant<PointShape, RectangleShape>;

struct SensorSpec {
  std::string id;
  Vec2 position = Vec2::Zero();
  SensorShape shape = PointShape{};
  // Offset along the optical axis from the common sensor plane. Multi-view
  // operations require every sensor to share the same value.
  double plane_offset = 0.0;

  bool is_point() const { return std::holds_alternative<PointShape>(shape); }
  // |S|; zero for a point sensor.
  double area() const;
  // Uniform sensitivity 1/|S| on S. Throws for point sensors.
  double sensitivity() const;

  static SensorSpec point(std::string id, Vec2 position);
  static SensorSpec rectangle(std::string id, Vec2 position, double width, double height);
};

// Point correspondence between the virtual images of two sensors for a
// planar scene: a point seen at p by the first sensor is seen at p + shift
// by the second.
struct ViewMapping {
  Vec2 shift = Vec2::Zero();
  double baseline = 0.0;

  Vec2 forward(const Vec2& p) const { return p + shift; }  // U12
  Vec2 inverse(const Vec2& p) const { return p - shift; }  // U21
};

ViewMapping view_shift(const SceneGeometry& geom, const SensorSpec& first, const SensorSpec& second);

struct RegionMasks {
  Mask common_first;
  Mask distinct_first;
  Mask common_second;
  Mask distinct_second;
  // True when the shift exceeds the grid extent and nothing is shared.
  bool common_empty = false;
};

// Rasterizes the common / distinct regions by element-center membership: an
// element of the first view is common when its center mapped by U12 lies
// strictly inside the grid (and symmetrically with U21 for the second view).
RegionMasks common_region(const ApertureGrid& grid, const ViewMapping& mapping);

}  // namespace lensless
