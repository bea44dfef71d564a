#pragma once

// 16-bit binary PGM (P5, maxval 65535, big-endian samples) with a text
// sidecar "<path>.meta" of "key: value" lines. The sidecar always carries
// `scale`, the value of one gray level; images whose maximum exceeds 65535
// are stored with a scale above 1 and quantized.

#include "lensless/geometry.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace lensless {

using Metadata = std::map<std::string, std::string>;

struct StoredImage {
  Image values;
  Metadata metadata;
};

// Rejects negative or non-finite values.
void write_pgm(const std::filesystem::path& path, const Image& image, Metadata metadata = {});
// The values read_pgm returns for an image written by write_pgm.
Image pgm_quantize(const Image& image);
// Reads the sidecar when present; values are gray levels times scale.
StoredImage read_pgm(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& image_path);

// "key: value" lines; blank lines and lines starting with '#' are skipped.
Metadata parse_metadata(const std::string& text);
std::string format_metadata(const Metadata& metadata);

// Shortest decimal form that reads back to the same double.
std::string format_double(double value);

}  // namespace lensless
