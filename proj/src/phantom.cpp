#include "lensless/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lensless {

namespace {

struct Rect {
  double top, left, height, width;  // fractions of the image size
  double level;
};

// Chosen so that the gradient has a few hundred non-zeros at 64 x 64.
constexpr Rect kRects[] = {
    {0.08, 0.10, 0.40, 0.30, 120}, {0.20, 0.30, 0.45, 0.25, 60},  {0.55, 0.12, 0.30, 0.50, 200},
    {0.10, 0.62, 0.22, 0.28, 90},  {0.40, 0.70, 0.45, 0.18, 150}, {0.62, 0.40, 0.12, 0.42, 40},
    {0.30, 0.05, 0.10, 0.20, 250}, {0.05, 0.45, 0.12, 0.10, 30},  {0.78, 0.05, 0.15, 0.22, 70},
    {0.48, 0.50, 0.08, 0.08, 180},
};

Image rects(Index rows, Index cols) {
  Image img = Image::Constant(rows, cols, 10.0);
  for (const Rect& r : kRects) {
    const Index i0 = static_cast<Index>(std::floor(r.top * rows));
    const Index j0 = static_cast<Index>(std::floor(r.left * cols));
    const Index h = std::max<Index>(1, static_cast<Index>(std::floor(r.height * rows)));
    const Index w = std::max<Index>(1, static_cast<Index>(std::floor(r.width * cols)));
    const Index i1 = std::min(rows, i0 + h);
    const Index j1 = std::min(cols, j0 + w);
    if (i1 > i0 && j1 > j0) img.block(i0, j0, i1 - i0, j1 - j0) = r.level;
  }
  // A band of small blocks whose gradient is too dense for low rates.
  const Index cell = std::max<Index>(2, std::min(rows, cols) / 16);
  const Index band_top = rows - rows / 6;
  for (Index i = band_top, bi = 0; i + cell <= rows; i += cell, ++bi) {
    for (Index j = 0, bj = 0; j + cell <= cols; j += cell, ++bj) {
      img.block(i, j, cell, cell) = static_cast<double>(20 + 23 * ((bi * 7 + bj * 3) % 11));
    }
  }
  return img;
}

Image disk(Index rows, Index cols) {
  Image img = Image::Zero(rows, cols);
  const double ci = 0.5 * static_cast<double>(rows);
  const double cj = 0.5 * static_cast<double>(cols);
  const double radius = static_cast<double>(std::min(rows, cols)) / 3.0;
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      const double di = static_cast<double>(i) + 0.5 - ci;
      const double dj = static_cast<double>(j) + 0.5 - cj;
      if (di * di + dj * dj <= radius * radius) img(i, j) = 200.0;
    }
  }
  return img;
}

}  // namespace

const std::vector<std::string>& phantom_names() {
  static const std::vector<std::string> names = {"rects", "disk", "point", "ramp"};
  return names;
}

Image make_phantom(const std::string& name, Index rows, Index cols) {
  if (rows < 4 || cols < 4) throw std::invalid_argument("phantom dimensions must be at least 4x4");
  if (name == "rects") return rects(rows, cols);
  if (name == "disk") return disk(rows, cols);
  if (name == "point") {
    Image img = Image::Zero(rows, cols);
    img(rows / 2, cols / 2) = 1000.0;
    return img;
  }
  if (name == "ramp") {
    Image img(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) img(i, j) = static_cast<double>(i + j + 1);
    return img;
  }
  throw std::invalid_argument("unknown phantom '" + name + "' (expected rects, disk, point or ramp)");
}

}  // namespace lensless
