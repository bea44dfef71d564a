#include "lensless/measurement_io.hpp"

#include "lensless/errors.hpp"
#include "lensless/image_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lensless {

namespace {

constexpr const char* kSeparator = "---";

void line(std::ostream& out, const char* key, const std::string& value) { out << key << ": " << value << "\n"; }

}  // namespace

std::string measurement_header(const MeasurementSet& set) {
  std::ostringstream out;
  const MatrixDescriptor& d = set.matrix;
  out << "# lensless measurement set\n";
  line(out, "kind", to_string(d.kind));
  line(out, "seed", std::to_string(d.seed));
  line(out, "n_pixels", std::to_string(d.n_pixels));
  line(out, "n_measurements", std::to_string(d.n_measurements));
  if (d.kind == MatrixKind::PermutedHadamard) {
    line(out, "order", std::to_string(d.order));
    line(out, "permuted", d.permuted ? "true" : "false");
    std::string ids;
    for (std::size_t k = 0; k < d.row_ids.size(); ++k) {
      if (k) ids += ' ';
      ids += std::to_string(d.row_ids[k]);
    }
    line(out, "row_ids", ids);
  }
  line(out, "sensor_id", set.sensor.id);
  line(out, "sensor_position", format_double(set.sensor.position.x()) + " " + format_double(set.sensor.position.y()));
  if (const auto* r = std::get_if<RectangleShape>(&set.sensor.shape)) {
    line(out, "sensor_shape", "rectangle");
    line(out, "sensor_width", format_double(r->width));
    line(out, "sensor_height", format_double(r->height));
  } else {
    line(out, "sensor_shape", "point");
  }
  line(out, "sensor_plane_offset", format_double(set.sensor.plane_offset));
  line(out, "model", to_string(set.model));
  line(out, "noise_sigma", format_double(set.noise.sigma));
  line(out, "noise_seed", std::to_string(set.noise.seed));
  line(out, "rows", std::to_string(set.rows));
  line(out, "cols", std::to_string(set.cols));
  line(out, "element_size", format_double(set.element_size));
  line(out, "f", format_double(set.sensor_distance));
  line(out, "F", format_double(set.scene_distance));
  line(out, "supersample", std::to_string(set.supersample));
  line(out, "wavenumber", format_double(set.wavenumber));
  if (set.is_complex()) line(out, "quadrature", std::to_string(set.quadrature));
  line(out, "scene_hash", set.scene_hash);
  return out.str();
}

void write_measurements(std::ostream& out, const MeasurementSet& set) {
  out << measurement_header(set) << kSeparator << "\n";
  if (set.is_complex()) {
    for (Index m = 0; m < set.complex_values.size(); ++m) {
      out << format_double(set.complex_values(m).real()) << "," << format_double(set.complex_values(m).imag())
          << "\n";
    }
  } else {
    for (Index m = 0; m < set.values.size(); ++m) out << format_double(set.values(m)) << "\n";
  }
}

void write_measurements(const std::filesystem::path& path, const MeasurementSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  write_measurements(out, set);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {

class HeaderReader {
 public:
  HeaderReader(Metadata fields, std::string source) : fields_(std::move(fields)), source_(std::move(source)) {}

  const std::string& text(const std::string& key) const {
    const auto it = fields_.find(key);
    if (it == fields_.end()) throw FormatError(source_ + ": missing header field '" + key + "'");
    return it->second;
  }
  bool has(const std::string& key) const { return fields_.count(key) != 0; }

  double real(const std::string& key) const { return parse_double(text(key), key); }

  long long integer(const std::string& key) const {
    const std::string& s = text(key);
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(key, s);
    return v;
  }

  std::uint64_t unsigned_integer(const std::string& key) const {
    const std::string& s = text(key);
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(key, s);
    return v;
  }

  double parse_double(const std::string& s, const std::string& key) const {
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) fail(key, s);
    return v;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& value) const {
    throw FormatError(source_ + ": bad value for '" + key + "': '" + value + "'");
  }

 private:
  Metadata fields_;
  std::string source_;
};

double parse_value(const std::string& s, const std::string& source, long line_no) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw FormatError(source + ": line " + std::to_string(line_no) + ": bad measurement value '" + s + "'");
  }
  return v;
}

}  // namespace

namespace {

MeasurementSet parse_measurements(std::istream& in, const std::string& source) {
  std::string header_text;
  std::string l;
  long line_no = 0;
  bool separated = false;
  while (std::getline(in, l)) {
    ++line_no;
    if (!l.empty() && l.back() == '\r') l.pop_back();
    if (l == kSeparator) {
      separated = true;
      break;
    }
    header_text += l + "\n";
  }
  if (!separated) throw FormatError(source + ": missing '---' after the header");
  HeaderReader h(parse_metadata(header_text), source);

  MeasurementSet set;
  MatrixDescriptor& d = set.matrix;
  d.kind = matrix_kind_from_string(h.text("kind"));
  d.seed = h.unsigned_integer("seed");
  d.n_pixels = h.integer("n_pixels");
  d.n_measurements = h.integer("n_measurements");
  if (d.kind == MatrixKind::PermutedHadamard) {
    d.order = h.integer("order");
    const std::string& p = h.text("permuted");
    if (p != "true" && p != "false") h.fail("permuted", p);
    d.permuted = p == "true";
    std::istringstream ids(h.text("row_ids"));
    std::string tok;
    while (ids >> tok) {
      long long v = 0;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) h.fail("row_ids", tok);
      d.row_ids.push_back(static_cast<Index>(v));
    }
  }

  set.sensor.id = h.text("sensor_id");
  {
    std::istringstream pos(h.text("sensor_position"));
    std::string x, y, extra;
    if (!(pos >> x >> y) || (pos >> extra)) h.fail("sensor_position", h.text("sensor_position"));
    set.sensor.position = Vec2(h.parse_double(x, "sensor_position"), h.parse_double(y, "sensor_position"));
  }
  const std::string& shape = h.text("sensor_shape");
  if (shape == "rectangle") {
    set.sensor.shape = RectangleShape{h.real("sensor_width"), h.real("sensor_height")};
  } else if (shape != "point") {
    h.fail("sensor_shape", shape);
  }
  if (h.has("sensor_plane_offset")) set.sensor.plane_offset = h.real("sensor_plane_offset");

  set.model = forward_model_from_string(h.text("model"));
  set.noise.sigma = h.real("noise_sigma");
  set.noise.seed = h.unsigned_integer("noise_seed");
  try {
    validate_descriptor(d);
  } catch (const std::invalid_argument& e) {
    throw FormatError(source + ": " + e.what());
  }
  set.rows = h.integer("rows");
  set.cols = h.integer("cols");
  set.element_size = h.real("element_size");
  set.sensor_distance = h.real("f");
  set.scene_distance = h.real("F");
  set.supersample = h.integer("supersample");
  set.wavenumber = h.real("wavenumber");
  if (set.is_complex()) set.quadrature = h.integer("quadrature");
  set.scene_hash = h.text("scene_hash");
  if (set.rows * set.cols != d.n_pixels) throw FormatError(source + ": rows x cols does not match n_pixels");

  std::vector<double> re, im;
  while (std::getline(in, l)) {
    ++line_no;
    if (!l.empty() && l.back() == '\r') l.pop_back();
    if (l.empty()) continue;
    if (set.is_complex()) {
      const auto comma = l.find(',');
      if (comma == std::string::npos) {
        throw FormatError(source + ": line " + std::to_string(line_no) + ": expected 're,im'");
      }
      re.push_back(parse_value(l.substr(0, comma), source, line_no));
      im.push_back(parse_value(l.substr(comma + 1), source, line_no));
    } else {
      re.push_back(parse_value(l, source, line_no));
    }
  }
  if (static_cast<Index>(re.size()) != d.n_measurements) {
    throw FormatError(source + ": header announces " + std::to_string(d.n_measurements) + " measurements, found " +
                      std::to_string(re.size()));
  }
  if (set.is_complex()) {
    set.complex_values.resize(d.n_measurements);
    for (Index m = 0; m < d.n_measurements; ++m) set.complex_values(m) = {re[m], im[m]};
  } else {
    set.values = Eigen::Map<const Vector>(re.data(), d.n_measurements);
  }
  return set;
}

}  // namespace

MeasurementSet read_measurements(std::istream& in, const std::string& source) {
  try {
    return parse_measurements(in, source);
  } catch (const FormatError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw FormatError(source + ": " + e.what());
  }
}

MeasurementSet read_measurements(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open measurement file: " + path.string());
  return read_measurements(in, path.string());
}

}  // namespace lensless
