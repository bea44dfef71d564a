#include "lensless/sensing.hpp"

#include "lensless/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lensless {

namespace {

constexpr std::uint64_t kRowStreamSalt = 0x9e3779b97f4a7c15ULL;

void check_length(Index got, Index want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                         std::to_string(got));
  }
}

bool hadamard_sign(Index row, Index col) {
  return (std::popcount(static_cast<std::uint64_t>(row & col)) & 1U) == 0;
}

}  // namespace

std::string to_string(MatrixKind kind) {
  return kind == MatrixKind::Dense ? "dense" : "hadamard";
}

MatrixKind matrix_kind_from_string(const std::string& name) {
  if (name == "dense") return MatrixKind::Dense;
  if (name == "hadamard") return MatrixKind::PermutedHadamard;
  throw FormatError("unknown matrix kind '" + name + "'");
}

bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

Index next_power_of_two(Index n) {
  Index p = 1;
  while (p < n) p *= 2;
  return p;
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t bound) {
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = bound * (UINT64_MAX / bound);
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % bound;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 == 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::vector<Index> seeded_permutation(std::uint64_t seed, Index n) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) perm[k] = k;
  Rng rng(seed);
  for (Index k = n - 1; k > 0; --k) {
    const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(k + 1)));
    std::swap(perm[k], perm[j]);
  }
  return perm;
}

SensingMatrix SensingMatrix::dense(std::uint64_t seed, Index n_measurements, Index n_pixels) {
  MatrixDescriptor d;
  d.kind = MatrixKind::Dense;
  d.seed = seed;
  d.n_measurements = n_measurements;
  d.n_pixels = n_pixels;
  return from_descriptor(d);
}

SensingMatrix SensingMatrix::hadamard(std::uint64_t seed, Index n_pixels, double rate, bool permuted) {
  if (!(rate > 0.0) || rate > 1.0) {
    throw std::invalid_argument("measurement rate must lie in (0, 1], got " + std::to_string(rate));
  }
  if (n_pixels < 1) {
    throw std::invalid_argument("Hadamard ensemble needs at least one pixel");
  }
  MatrixDescriptor d;
  d.kind = MatrixKind::PermutedHadamard;
  d.seed = seed;
  d.n_pixels = n_pixels;
  d.order = next_power_of_two(n_pixels);
  d.permuted = permuted;
  d.n_measurements = std::max<Index>(1, std::llround(rate * static_cast<double>(n_pixels)));

  // Row 0 first, then a partial Fisher-Yates draw from rows 1..N-1.
  std::vector<Index> pool(static_cast<std::size_t>(d.order - 1));
  for (Index k = 0; k < d.order - 1; ++k) pool[k] = k + 1;
  Rng rng(seed ^ kRowStreamSalt);
  d.row_ids.reserve(static_cast<std::size_t>(d.n_measurements));
  d.row_ids.push_back(0);
  for (Index k = 0; k + 1 < d.n_measurements; ++k) {
    const auto remaining = static_cast<std::uint64_t>(pool.size()) - static_cast<std::uint64_t>(k);
    const auto j = k + static_cast<Index>(rng.below(remaining));
    std::swap(pool[k], pool[j]);
    d.row_ids.push_back(pool[k]);
  }
  return from_descriptor(d);
}

void validate_descriptor(const MatrixDescriptor& d) {
  if (d.n_pixels < 1 || d.n_measurements < 1) {
    throw std::invalid_argument("sensing matrix dimensions must be positive");
  }
  if (d.kind == MatrixKind::Dense) return;
  if (d.n_measurements > d.n_pixels) {
    throw std::invalid_argument("more Hadamard measurements than pixels");
  }
  if (!is_power_of_two(d.order) || d.order < d.n_pixels) {
    throw std::invalid_argument("Hadamard order must be a power of two no smaller than the pixel count");
  }
  if (static_cast<Index>(d.row_ids.size()) != d.n_measurements) {
    throw std::invalid_argument("descriptor lists " + std::to_string(d.row_ids.size()) + " row ids for " +
                                std::to_string(d.n_measurements) + " measurements");
  }
  std::vector<bool> seen(static_cast<std::size_t>(d.order), false);
  for (const Index r : d.row_ids) {
    if (r < 0 || r >= d.order || seen[r]) {
      throw std::invalid_argument("invalid or repeated Hadamard row id " + std::to_string(r));
    }
    seen[r] = true;
  }
}

SensingMatrix SensingMatrix::from_descriptor(const MatrixDescriptor& descriptor) {
  const auto& d = descriptor;
  validate_descriptor(d);
  SensingMatrix A;
  A.desc_ = d;
  if (d.kind == MatrixKind::Dense) {
    A.desc_.order = 0;
    A.desc_.row_ids.clear();
    A.dense_.resize(d.n_measurements, d.n_pixels);
    Rng rng(d.seed);
    for (Index m = 0; m < d.n_measurements; ++m) {
      for (Index n = 0; n < d.n_pixels; ++n) A.dense_(m, n) = rng.uniform();
    }
    return A;
  }

  for (std::size_t m = 0; m < d.row_ids.size(); ++m) {
    if (d.row_ids[m] == 0) A.total_flux_row_ = static_cast<Index>(m);
  }
  if (d.permuted) {
    A.perm_ = seeded_permutation(d.seed, d.order);
  } else {
    A.perm_.resize(static_cast<std::size_t>(d.order));
    for (Index k = 0; k < d.order; ++k) A.perm_[k] = k;
  }
  return A;
}

Vector SensingMatrix::embed(const Vector& x) const {
  Vector full = Vector::Zero(desc_.order);
  for (Index n = 0; n < desc_.n_pixels; ++n) full(perm_[n]) = x(n);
  return full;
}

Vector SensingMatrix::scatter_rows(const Vector& y) const {
  Vector full = Vector::Zero(desc_.order);
  for (Index m = 0; m < desc_.n_measurements; ++m) full(desc_.row_ids[m]) = y(m);
  return full;
}

Vector SensingMatrix::apply(const Vector& x) const {
  check_length(x.size(), desc_.n_pixels, "sensing apply");
  if (desc_.kind == MatrixKind::Dense) return dense_ * x;
  Vector t = embed(x);
  fwht_inplace(t);
  const double total = x.sum();
  Vector z(desc_.n_measurements);
  for (Index m = 0; m < desc_.n_measurements; ++m) z(m) = 0.5 * (t(desc_.row_ids[m]) + total);
  return z;
}

Vector SensingMatrix::apply_adjoint(const Vector& y) const {
  check_length(y.size(), desc_.n_measurements, "sensing adjoint");
  if (desc_.kind == MatrixKind::Dense) return dense_.transpose() * y;
  Vector t = scatter_rows(y);
  fwht_inplace(t);
  const double total = y.sum();
  Vector x(desc_.n_pixels);
  for (Index n = 0; n < desc_.n_pixels; ++n) x(n) = 0.5 * (t(perm_[n]) + total);
  return x;
}

bool SensingMatrix::has_total_flux_row() const {
  return desc_.kind == MatrixKind::PermutedHadamard && total_flux_row_ >= 0;
}

Vector SensingMatrix::apply_centered(const Vector& x) const {
  if (desc_.kind != MatrixKind::PermutedHadamard) {
    throw std::logic_error("centered form exists only for Hadamard ensembles");
  }
  check_length(x.size(), desc_.n_pixels, "centered apply");
  Vector t = embed(x);
  fwht_inplace(t);
  Vector z(desc_.n_measurements);
  for (Index m = 0; m < desc_.n_measurements; ++m) z(m) = t(desc_.row_ids[m]);
  return z;
}

Vector SensingMatrix::apply_centered_adjoint(const Vector& y) const {
  if (desc_.kind != MatrixKind::PermutedHadamard) {
    throw std::logic_error("centered form exists only for Hadamard ensembles");
  }
  check_length(y.size(), desc_.n_measurements, "centered adjoint");
  Vector t = scatter_rows(y);
  fwht_inplace(t);
  Vector x(desc_.n_pixels);
  for (Index n = 0; n < desc_.n_pixels; ++n) x(n) = t(perm_[n]);
  return x;
}

Vector SensingMatrix::center_measurements(const Vector& z) const {
  if (!has_total_flux_row()) {
    throw std::logic_error("centering needs the all-open Hadamard row");
  }
  check_length(z.size(), desc_.n_measurements, "center measurements");
  return 2.0 * z.array() - z(total_flux_row_);
}

Vector SensingMatrix::row(Index m) const {
  if (m < 0 || m >= desc_.n_measurements) {
    throw std::out_of_range("measurement row " + std::to_string(m) + " outside [0, " +
                            std::to_string(desc_.n_measurements) + ")");
  }
  if (desc_.kind == MatrixKind::Dense) return dense_.row(m).transpose();
  Vector r(desc_.n_pixels);
  const Index h = desc_.row_ids[m];
  for (Index n = 0; n < desc_.n_pixels; ++n) r(n) = hadamard_sign(h, perm_[n]) ? 1.0 : 0.0;
  return r;
}

Eigen::MatrixXd SensingMatrix::materialize() const {
  if (desc_.kind == MatrixKind::Dense) return dense_;
  Eigen::MatrixXd out(desc_.n_measurements, desc_.n_pixels);
  for (Index m = 0; m < desc_.n_measurements; ++m) out.row(m) = row(m).transpose();
  return out;
}

AperturePattern row_pattern(const SensingMatrix& A, const ApertureGrid& grid, Index m) {
  if (grid.pixel_count() != A.n_pixels()) {
    throw DimensionError("aperture grid has " + std::to_string(grid.pixel_count()) +
                         " elements but the sensing matrix has " + std::to_string(A.n_pixels()) + " columns");
  }
  const Vector r = A.row(m);
  return AperturePattern{r.reshaped(grid.rows(), grid.cols()).array()};
}

}  // namespace lensless
