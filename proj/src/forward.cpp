#include "lensless/forward.hpp"

#include "lensless/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <sstream>

namespace lensless {

namespace {

void add_noise(Vector& z, const NoiseSpec& noise) {
  if (noise.sigma <= 0.0) return;
  Rng rng(noise.seed);
  for (Index m = 0; m < z.size(); ++m) z(m) += noise.sigma * rng.normal();
}

void add_noise(ComplexVector& z, const NoiseSpec& noise) {
  if (noise.sigma <= 0.0) return;
  Rng rng(noise.seed);
  for (Index m = 0; m < z.size(); ++m) {
    const double re = rng.normal();
    const double im = rng.normal();
    z(m) += noise.sigma * std::complex<double>(re, im);
  }
}

void check_pixels(const SensingMatrix& A, const Image& pixels) {
  if (pixels.size() != A.n_pixels()) {
    throw DimensionError("image has " + std::to_string(pixels.size()) + " pixels, sensing matrix expects " +
                         std::to_string(A.n_pixels()));
  }
}

MeasurementSet provenance(const SensingMatrix& A, const Image& pixels, ForwardModel model, const NoiseSpec& noise) {
  MeasurementSet out;
  out.matrix = A.descriptor();
  out.model = model;
  out.noise = noise;
  out.rows = pixels.rows();
  out.cols = pixels.cols();
  out.scene_hash = content_hash(pixels);
  return out;
}

// Box of width `width` (in sub-cells) centered at 0, rasterized by overlap.
Vector box_weights(double width) {
  if (width <= 1e-12) return Vector::Ones(1);
  const auto radius = static_cast<Index>(std::ceil(width / 2.0 + 0.5)) - 1;
  Vector w(2 * radius + 1);
  for (Index c = -radius; c <= radius; ++c) {
    const double lo = std::max(static_cast<double>(c) - 0.5, -width / 2.0);
    const double hi = std::min(static_cast<double>(c) + 0.5, width / 2.0);
    w(c + radius) = std::max(0.0, hi - lo) / width;
  }
  return w;
}

}  // namespace

double PlanarScene::sample(const Vec2& p) const {
  const double u = (p.x() - origin.x()) / pitch - 0.5;
  const double v = (p.y() - origin.y()) / pitch - 0.5;
  const auto cols = static_cast<double>(radiance.cols());
  const auto rows = static_cast<double>(radiance.rows());
  constexpr double slack = 1e-9;
  if (u < -0.5 - slack || u > cols - 0.5 + slack || v < -0.5 - slack || v > rows - 0.5 + slack) {
    std::ostringstream msg;
    msg << "scene point (" << p.x() << ", " << p.y() << ") outside the scene extent";
    throw ExtentError(msg.str());
  }
  const double uc = std::clamp(u, 0.0, cols - 1.0);
  const double vc = std::clamp(v, 0.0, rows - 1.0);
  const auto c0 = std::min(static_cast<Index>(std::floor(uc)), radiance.cols() - 1);
  const auto r0 = std::min(static_cast<Index>(std::floor(vc)), radiance.rows() - 1);
  const Index c1 = std::min(c0 + 1, radiance.cols() - 1);
  const Index r1 = std::min(r0 + 1, radiance.rows() - 1);
  const double fu = uc - static_cast<double>(c0);
  const double fv = vc - static_cast<double>(r0);
  return (1.0 - fv) * ((1.0 - fu) * radiance(r0, c0) + fu * radiance(r0, c1)) +
         fv * ((1.0 - fu) * radiance(r1, c0) + fu * radiance(r1, c1));
}

PlanarScene PlanarScene::covering(Image image, const ApertureGrid& grid, const SceneGeometry& geom,
                                  const Vec2& reference, double margin) {
  const double f = geom.sensor_distance();
  const double F = geom.scene_distance();
  const double magnification = (f + F) / f;
  const double pad = margin * grid.element_size();
  PlanarScene scene;
  scene.pitch = magnification * (grid.width() + 2.0 * pad) / static_cast<double>(image.cols());
  const double pitch_rows = magnification * (grid.height() + 2.0 * pad) / static_cast<double>(image.rows());
  if (std::abs(pitch_rows - scene.pitch) > 1e-9 * scene.pitch) {
    throw DimensionError("scene image aspect ratio does not match the aperture grid");
  }
  scene.origin = magnification * Vec2(-pad, -pad) - (F / f) * reference;
  scene.radiance = std::move(image);
  return scene;
}

VirtualImage render_virtual(const PlanarScene& scene, const SensorSpec& sensor, const SceneGeometry& geom,
                            const ApertureGrid& grid, Index supersample) {
  if (supersample < 1) throw std::invalid_argument("supersample factor must be at least 1");
  const double ratio = geom.scene_distance() / geom.sensor_distance();
  const double cell = grid.element_size() / static_cast<double>(supersample);
  const double weight = cell * cell;
  VirtualImage v;
  v.supersample = supersample;
  v.values.resize(grid.rows() * supersample, grid.cols() * supersample);
  for (Index c = 0; c < v.values.cols(); ++c) {
    for (Index r = 0; r < v.values.rows(); ++r) {
      const Vec2 p((static_cast<double>(c) + 0.5) * cell, (static_cast<double>(r) + 0.5) * cell);
      v.values(r, c) = weight * scene.sample(p + ratio * (p - sensor.position));
    }
  }
  return v;
}

Image pixelize(const Image& fine, Index supersample) {
  if (supersample < 1 || fine.rows() % supersample != 0 || fine.cols() % supersample != 0) {
    throw DimensionError("supersampled image is not a whole number of elements");
  }
  const Index rows = fine.rows() / supersample;
  const Index cols = fine.cols() / supersample;
  Image out(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      out(i, j) = fine.block(i * supersample, j * supersample, supersample, supersample).sum();
    }
  }
  return out;
}

Image pixelize(const VirtualImage& v) { return pixelize(v.values, v.supersample); }

Image upsample(const Image& pixels, Index supersample) {
  if (supersample < 1) throw std::invalid_argument("supersample factor must be at least 1");
  const double share = 1.0 / static_cast<double>(supersample * supersample);
  Image out(pixels.rows() * supersample, pixels.cols() * supersample);
  for (Index j = 0; j < pixels.cols(); ++j) {
    for (Index i = 0; i < pixels.rows(); ++i) {
      out.block(i * supersample, j * supersample, supersample, supersample).setConstant(share * pixels(i, j));
    }
  }
  return out;
}

std::string to_string(ForwardModel model) {
  switch (model) {
    case ForwardModel::Ideal:
      return "ideal";
    case ForwardModel::Finite:
      return "finite";
    case ForwardModel::Diffraction:
      return "diffraction";
  }
  return "ideal";
}

ForwardModel forward_model_from_string(const std::string& name) {
  if (name == "ideal") return ForwardModel::Ideal;
  if (name == "finite") return ForwardModel::Finite;
  if (name == "diffraction") return ForwardModel::Diffraction;
  throw FormatError("unknown forward model '" + name + "'");
}

MeasurementSet measure_ideal(const SensingMatrix& A, const Image& pixels, const NoiseSpec& noise) {
  check_pixels(A, pixels);
  MeasurementSet out = provenance(A, pixels, ForwardModel::Ideal, noise);
  out.values = A.apply(pixels.reshaped());
  add_noise(out.values, noise);
  return out;
}

Image BlurKernel::weights() const { return (vertical * horizontal.transpose()).array(); }

BlurKernel finite_sensor_kernel(const SensorSpec& sensor, const SceneGeometry& geom, const ApertureGrid& grid,
                                Index supersample) {
  if (supersample < 1) throw std::invalid_argument("supersample factor must be at least 1");
  if (sensor.is_point()) return BlurKernel{Vector::Ones(1), Vector::Ones(1)};
  const auto& rect = std::get<RectangleShape>(sensor.shape);
  // rho_alpha(u, v) = rho(u / alpha, v / alpha) / alpha^2 is again uniform,
  // on S scaled by alpha.
  const double scale = alpha(geom) * static_cast<double>(supersample) / grid.element_size();
  return BlurKernel{box_weights(rect.height * scale), box_weights(rect.width * scale)};
}

Image blur(const Image& in, const BlurKernel& kernel) {
  if (kernel.is_identity()) return in * kernel.vertical(0) * kernel.horizontal(0);
  const Index rows = in.rows();
  const Index cols = in.cols();
  const Index rv = kernel.radius_rows();
  const Index rh = kernel.radius_cols();
  Image tmp = Image::Zero(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index b = -rh; b <= rh; ++b) {
      const Index src = c - b;
      if (src < 0 || src >= cols) continue;
      tmp.col(c) += kernel.horizontal(b + rh) * in.col(src);
    }
  }
  Image out = Image::Zero(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index a = -rv; a <= rv; ++a) {
      const Index src = r - a;
      if (src < 0 || src >= rows) continue;
      out.row(r) += kernel.vertical(a + rv) * tmp.row(src);
    }
  }
  return out;
}

Image blur_adjoint(const Image& in, const BlurKernel& kernel) {
  BlurKernel flipped{kernel.vertical.reverse(), kernel.horizontal.reverse()};
  return blur(in, flipped);
}

MeasurementSet measure_finite(const SensingMatrix& A, const VirtualImage& v, const SensorSpec& sensor,
                              const SceneGeometry& geom, const ApertureGrid& grid, const NoiseSpec& noise) {
  if (v.values.rows() != grid.rows() * v.supersample || v.values.cols() != grid.cols() * v.supersample) {
    throw DimensionError("virtual image does not match the aperture grid");
  }
  const BlurKernel kernel = finite_sensor_kernel(sensor, geom, grid, v.supersample);
  const Image pixels = pixelize(blur(v.values, kernel), v.supersample);
  check_pixels(A, pixels);
  MeasurementSet out = provenance(A, pixels, ForwardModel::Finite, noise);
  out.scene_hash = content_hash(v.values);
  out.values = A.apply(pixels.reshaped());
  add_noise(out.values, noise);
  out.sensor = sensor;
  out.element_size = grid.element_size();
  out.sensor_distance = geom.sensor_distance();
  out.scene_distance = geom.scene_distance();
  out.supersample = v.supersample;
  return out;
}

DiffractionModel::DiffractionModel(const ApertureGrid& grid, const SceneGeometry& geom, double wavenumber,
                                   Index quadrature, Vec2 sensor_position)
    : grid_(grid), k_(wavenumber), quadrature_(quadrature) {
  if (wavenumber < 0.0) throw std::invalid_argument("wavenumber must be non-negative");
  if (quadrature < 1) throw std::invalid_argument("quadrature order must be at least 1");
  const Index n = grid.pixel_count();
  const double f = geom.sensor_distance();
  const double h = grid.element_size() / static_cast<double>(quadrature);
  const double weight = h * h;
  const IndexMap q(grid);
  phase_.resize(n, n);

  // Direction cosines at every quadrature node of every element.
  std::vector<Vec2> cosines(static_cast<std::size_t>(n * quadrature * quadrature));
  for (Index p = 0; p < n; ++p) {
    const GridIndex e = q.inverse(p);
    for (Index a = 0; a < quadrature; ++a) {
      for (Index b = 0; b < quadrature; ++b) {
        const Vec2 node = Vec2((static_cast<double>(e.col * quadrature + b) + 0.5) * h,
                               (static_cast<double>(e.row * quadrature + a) + 0.5) * h) -
                          sensor_position;
        const double r = std::sqrt(node.squaredNorm() + f * f);
        cosines[static_cast<std::size_t>((p * quadrature + a) * quadrature + b)] = -node / r;
      }
    }
  }
  const Index nodes = quadrature * quadrature;
  for (Index st = 0; st < n; ++st) {
    const GridIndex e = q.inverse(st);
    const Vec2 center = grid.element_center(e.row, e.col) - sensor_position;
    for (Index ij = 0; ij < n; ++ij) {
      std::complex<double> acc = 0.0;
      for (Index node = 0; node < nodes; ++node) {
        const Vec2& lh = cosines[static_cast<std::size_t>(ij * nodes + node)];
        const double phase = -k_ * lh.dot(center);
        acc += std::complex<double>(std::cos(phase), std::sin(phase));
      }
      phase_(ij, st) = weight * acc;
    }
  }
}

DiffractionModel::DiffractionModel(const ApertureGrid& grid, const SceneGeometry& geom, double wavenumber,
                                   Index quadrature)
    : DiffractionModel(grid, geom, wavenumber, quadrature, Vec2(grid.width() / 2.0, grid.height() / 2.0)) {}

ComplexMatrix DiffractionModel::kernel(const AperturePattern& pattern) const {
  if (pattern.transmittance.rows() != grid_.rows() || pattern.transmittance.cols() != grid_.cols()) {
    throw DimensionError("aperture pattern does not match the diffraction grid");
  }
  const Vector t = pattern.transmittance.reshaped();
  return phase_ * t.asDiagonal();
}

Eigen::RowVectorXcd DiffractionModel::modified_row(const Vector& row) const {
  if (row.size() != grid_.pixel_count()) throw DimensionError("row length does not match the diffraction grid");
  const Eigen::RowVectorXcd through = row.transpose().cast<std::complex<double>>() * phase_;
  return through.array() * row.transpose().array().cast<std::complex<double>>();
}

ComplexMatrix DiffractionModel::modified_rows(const SensingMatrix& A) const {
  if (A.n_pixels() != grid_.pixel_count()) throw DimensionError("sensing matrix does not match the diffraction grid");
  const Eigen::MatrixXd rows = A.materialize();
  const ComplexMatrix through = rows.cast<std::complex<double>>() * phase_;
  return through.array() * rows.array().cast<std::complex<double>>();
}

ComplexMatrix diffraction_kernel(const AperturePattern& pattern, double wavenumber, const SceneGeometry& geom,
                                 const ApertureGrid& grid, Index quadrature) {
  return DiffractionModel(grid, geom, wavenumber, quadrature).kernel(pattern);
}

MeasurementSet measure_diffracted(const SensingMatrix& A, const Image& pixels, const DiffractionModel& model,
                                  const NoiseSpec& noise) {
  check_pixels(A, pixels);
  if (pixels.rows() != model.grid().rows() || pixels.cols() != model.grid().cols()) {
    throw DimensionError("image does not match the diffraction grid");
  }
  MeasurementSet out = provenance(A, pixels, ForwardModel::Diffraction, noise);
  const ComplexVector x = Vector(pixels.reshaped()).cast<std::complex<double>>();
  out.complex_values.resize(A.n_measurements());
  for (Index m = 0; m < A.n_measurements(); ++m) {
    const Vector a = A.row(m);
    const AperturePattern pattern{a.reshaped(pixels.rows(), pixels.cols()).array()};
    const ComplexVector blurred = model.kernel(pattern) * x;
    out.complex_values(m) = a.cast<std::complex<double>>().dot(blurred);
  }
  add_noise(out.complex_values, noise);
  out.wavenumber = model.wavenumber();
  out.quadrature = model.quadrature();
  out.element_size = model.grid().element_size();
  return out;
}

std::vector<MeasurementSet> multiview_measure(const SensingMatrix& A, const PlanarScene& scene,
                                              const std::vector<SensorSpec>& sensors, const SceneGeometry& geom,
                                              const ApertureGrid& grid, const AcquisitionSpec& spec) {
  if (sensors.empty()) throw std::invalid_argument("multi-view acquisition needs at least one sensor");
  for (const auto& s : sensors) {
    if (s.plane_offset != sensors.front().plane_offset) {
      throw std::invalid_argument("sensor '" + s.id + "' is not coplanar with '" + sensors.front().id + "'");
    }
  }
  std::vector<MeasurementSet> out;
  out.reserve(sensors.size());
  for (std::size_t k = 0; k < sensors.size(); ++k) {
    const SensorSpec& sensor = sensors[k];
    const NoiseSpec noise{spec.noise.sigma, spec.noise.seed + k};
    const VirtualImage v = render_virtual(scene, sensor, geom, grid, spec.supersample);
    MeasurementSet ms;
    switch (spec.model) {
      case ForwardModel::Ideal:
        ms = measure_ideal(A, pixelize(v), noise);
        break;
      case ForwardModel::Finite:
        ms = measure_finite(A, v, sensor, geom, grid, noise);
        break;
      case ForwardModel::Diffraction: {
        const DiffractionModel model(grid, geom, spec.wavenumber, spec.diffraction_quadrature, sensor.position);
        ms = measure_diffracted(A, pixelize(v), model, noise);
        break;
      }
    }
    ms.sensor = sensor;
    ms.element_size = grid.element_size();
    ms.sensor_distance = geom.sensor_distance();
    ms.scene_distance = geom.scene_distance();
    ms.supersample = spec.supersample;
    ms.wavenumber = spec.wavenumber;
    if (spec.model == ForwardModel::Diffraction) ms.quadrature = spec.diffraction_quadrature;
    ms.scene_hash = content_hash(scene.radiance);
    out.push_back(std::move(ms));
  }
  return out;
}

std::string content_hash(const Image& image) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < len; ++k) {
      h ^= bytes[k];
      h *= 0x100000001b3ULL;
    }
  };
  const std::int64_t dims[2] = {image.rows(), image.cols()};
  mix(dims, sizeof(dims));
  mix(image.data(), static_cast<std::size_t>(image.size()) * sizeof(double));
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

}  // namespace lensless
