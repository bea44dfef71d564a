#include "lensless/geometry.hpp"

#include "lensless/errors.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lensless {

ApertureGrid::ApertureGrid(Index rows, Index cols, double element_size)
    : rows_(rows), cols_(cols), element_size_(element_size) {
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("aperture grid needs at least one row and one column");
  }
  if (!(element_size > 0.0) || !std::isfinite(element_size)) {
    throw std::invalid_argument("aperture element size must be positive");
  }
}

Vec2 ApertureGrid::element_center(Index i, Index j) const {
  return {(static_cast<double>(j) + 0.5) * element_size_, (static_cast<double>(i) + 0.5) * element_size_};
}

Index IndexMap::operator()(Index i, Index j) const {
  if (i < 0 || i >= grid_.rows() || j < 0 || j >= grid_.cols()) {
    throw std::out_of_range("grid index (" + std::to_string(i) + ", " + std::to_string(j) + ") outside " +
                            std::to_string(grid_.rows()) + "x" + std::to_string(grid_.cols()));
  }
  return j * grid_.rows() + i;
}

GridIndex IndexMap::inverse(Index n) const {
  if (n < 0 || n >= grid_.pixel_count()) {
    throw std::out_of_range("linear index " + std::to_string(n) + " outside [0, " +
                            std::to_string(grid_.pixel_count()) + ")");
  }
  return {n % grid_.rows(), n / grid_.rows()};
}

SceneGeometry::SceneGeometry(double f, double F) : f_(f), F_(F) {
  if (!(f > 0.0) || !(F > 0.0) || !std::isfinite(f) || !std::isfinite(F)) {
    throw std::invalid_argument("scene geometry distances must be positive and finite");
  }
}

double alpha(const SceneGeometry& geom) {
  return geom.scene_distance() / (geom.sensor_distance() + geom.scene_distance());
}

double SensorSpec::area() const {
  if (const auto* rect = std::get_if<RectangleShape>(&shape)) {
    return rect->width * rect->height;
  }
  return 0.0;
}

double SensorSpec::sensitivity() const {
  if (is_point()) {
    throw std::invalid_argument("point sensor has no area sensitivity");
  }
  return 1.0 / area();
}

SensorSpec SensorSpec::point(std::string id, Vec2 position) {
  return SensorSpec{std::move(id), position, PointShape{}, 0.0};
}

SensorSpec SensorSpec::rectangle(std::string id, Vec2 position, double width, double height) {
  if (!(width > 0.0) || !(height > 0.0)) {
    throw std::invalid_argument("rectangular sensor needs positive width and height");
  }
  return SensorSpec{std::move(id), position, RectangleShape{width, height}, 0.0};
}

ViewMapping view_shift(const SceneGeometry& geom, const SensorSpec& first, const SensorSpec& second) {
  if (first.plane_offset != second.plane_offset) {
    throw std::invalid_argument("sensors '" + first.id + "' and '" + second.id + "' are not coplanar");
  }
  const Vec2 baseline = second.position - first.position;
  // A scene point P seen through p1 from s1 satisfies P = p1 + (F/f)(p1 - s1);
  // equating with the same expression for s2 gives p2 - p1 = alpha (s2 - s1).
  return ViewMapping{alpha(geom) * baseline, baseline.norm()};
}

RegionMasks common_region(const ApertureGrid& grid, const ViewMapping& mapping) {
  const Index rows = grid.rows();
  const Index cols = grid.cols();
  RegionMasks masks;
  masks.common_first.resize(rows, cols);
  masks.common_second.resize(rows, cols);

  const auto inside = [&](const Vec2& p) {
    return p.x() > 0.0 && p.x() < grid.width() && p.y() > 0.0 && p.y() < grid.height();
  };
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      const Vec2 c = grid.element_center(i, j);
      masks.common_first(i, j) = inside(mapping.forward(c));
      masks.common_second(i, j) = inside(mapping.inverse(c));
    }
  }
  masks.distinct_first = !masks.common_first;
  masks.distinct_second = !masks.common_second;
  masks.common_empty = masks.common_first.count() == 0;
  return masks;
}

}  // namespace lensless
