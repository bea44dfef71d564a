#pragma once

// Measurement files: a "key: value" header, a line holding "---", then one
// value per line. Real values are written in shortest round-trip decimal
// form; complex values as "re,im".

#include "lensless/forward.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace lensless {

void write_measurements(std::ostream& out, const MeasurementSet& set);
void write_measurements(const std::filesystem::path& path, const MeasurementSet& set);

MeasurementSet read_measurements(std::istream& in, const std::string& source = "<stream>");
MeasurementSet read_measurements(const std::filesystem::path& path);

// Header only, as written.
std::string measurement_header(const MeasurementSet& set);

}  // namespace lensless
