#include "lensless/image_io.hpp"

#include "lensless/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lensless {

namespace fs = std::filesystem;

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

fs::path sidecar_path(const fs::path& image_path) {
  fs::path p = image_path;
  p += ".meta";
  return p;
}

Metadata parse_metadata(const std::string& text) {
  Metadata out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw FormatError("line " + std::to_string(line_no) + ": expected 'key: value'");
    }
    std::string key = line.substr(0, colon);
    std::string value = line.substr(colon + 1);
    const auto trim = [](std::string& s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    trim(key);
    trim(value);
    out[key] = value;
  }
  return out;
}

std::string format_metadata(const Metadata& metadata) {
  std::string out;
  for (const auto& [k, v] : metadata) out += k + ": " + v + "\n";
  return out;
}

namespace {

double pgm_scale(const Image& image) {
  const double peak = image.maxCoeff();
  return peak > 65535.0 ? peak / 65535.0 : 1.0;
}

double pgm_level(double value, double scale) { return std::min(65535.0, std::round(value / scale)); }

}  // namespace

Image pgm_quantize(const Image& image) {
  if (image.size() == 0) return image;
  const double scale = pgm_scale(image);
  return image.unaryExpr([scale](double v) { return pgm_level(std::max(v, 0.0), scale) * scale; });
}

void write_pgm(const fs::path& path, const Image& image, Metadata metadata) {
  if (image.size() == 0) throw DimensionError("cannot write an empty image");
  if (!image.allFinite() || image.minCoeff() < 0.0) {
    throw std::invalid_argument("PGM images must be finite and non-negative: " + path.string());
  }
  const double scale = pgm_scale(image);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "P5\n" << image.cols() << " " << image.rows() << "\n65535\n";
  std::string raster(static_cast<std::size_t>(2 * image.size()), '\0');
  std::size_t k = 0;
  for (Index i = 0; i < image.rows(); ++i) {
    for (Index j = 0; j < image.cols(); ++j) {
      const double level = pgm_level(image(i, j), scale);
      const auto v = static_cast<unsigned>(level);
      raster[k++] = static_cast<char>((v >> 8) & 0xff);
      raster[k++] = static_cast<char>(v & 0xff);
    }
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());

  metadata["scale"] = format_double(scale);
  metadata["rows"] = std::to_string(image.rows());
  metadata["cols"] = std::to_string(image.cols());
  std::ofstream side(sidecar_path(path));
  if (!side) throw std::runtime_error("cannot open for writing: " + sidecar_path(path).string());
  side << format_metadata(metadata);
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

long parse_positive(const std::string& tok, const fs::path& path) {
  long v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || v <= 0) {
    throw FormatError(path.string() + ": bad PGM header field '" + tok + "'");
  }
  return v;
}

}  // namespace

StoredImage read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open image: " + path.string());
  if (header_token(in) != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
  const long cols = parse_positive(header_token(in), path);
  const long rows = parse_positive(header_token(in), path);
  const long maxval = parse_positive(header_token(in), path);
  if (maxval > 65535) throw FormatError(path.string() + ": maxval above 65535");
  const int bytes = maxval > 255 ? 2 : 1;

  std::string raster(static_cast<std::size_t>(rows * cols * bytes), '\0');
  in.read(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (in.gcount() != static_cast<std::streamsize>(raster.size())) {
    throw FormatError(path.string() + ": truncated raster");
  }

  StoredImage out;
  const fs::path side = sidecar_path(path);
  if (fs::exists(side)) {
    std::ifstream s(side);
    std::stringstream buf;
    buf << s.rdbuf();
    out.metadata = parse_metadata(buf.str());
  }
  double scale = 1.0;
  if (auto it = out.metadata.find("scale"); it != out.metadata.end()) {
    try {
      scale = std::stod(it->second);
    } catch (const std::exception&) {
      throw FormatError(side.string() + ": bad scale '" + it->second + "'");
    }
  }

  out.values.resize(rows, cols);
  std::size_t k = 0;
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) {
      unsigned v = static_cast<unsigned char>(raster[k++]);
      if (bytes == 2) v = (v << 8) | static_cast<unsigned char>(raster[k++]);
      out.values(i, j) = static_cast<double>(v) * scale;
    }
  }
  return out;
}

}  // namespace lensless
