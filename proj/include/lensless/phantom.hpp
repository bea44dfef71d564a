#pragma once

// Built-in test scenes. Every value is a small non-negative integer, so the
// images survive a 16-bit PGM round trip exactly.

#include "lensless/geometry.hpp"

#include <string>
#include <vector>

namespace lensless {

// rects: overlapping axis-aligned rectangles at distinct levels.
// disk: 1 inside the circle of radius min(rows, cols) / 3 about the center,
//       membership tested at pixel centers; scaled by 200.
// point: a single pixel of value 1000 at (rows / 2, cols / 2).
// ramp: i + j + 1 shifted to start at 1.
Image make_phantom(const std::string& name, Index rows, Index cols);

const std::vector<std::string>& phantom_names();

}  // namespace lensless
