#pragma once

// Sensing ensembles for the programmable aperture: dense uniform [0, 1]
// matrices and column-permuted Hadamard rows mapped to 0/1 transmittance.
// Matrices are defined entirely by their descriptor; Hadamard matrices are
// never materialized and are applied through the fast Walsh-Hadamard
// transform.

#include "lensless/geometry.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace lensless {

using Vector = Eigen::VectorXd;

enum class MatrixKind { Dense, PermutedHadamard };

std::string to_string(MatrixKind kind);
MatrixKind matrix_kind_from_string(const std::string& name);

// Everything needed to rebuild a sensing matrix bit-for-bit.
struct MatrixDescriptor {
  MatrixKind kind = MatrixKind::Dense;
  std::uint64_t seed = 0;
  Index n_pixels = 0;
  Index n_measurements = 0;
  // Hadamard only.
  Index order = 0;
  bool permuted = true;
  std::vector<Index> row_ids;

  friend bool operator==(const MatrixDescriptor&, const MatrixDescriptor&) = default;
};

// Throws std::invalid_argument for inconsistent dimensions or Hadamard row
// ids; cheap, never builds the matrix.
void validate_descriptor(const MatrixDescriptor& descriptor);

class SensingMatrix {
 public:
  // Uniform [0, 1] entries drawn row by row from the seeded generator.
  static SensingMatrix dense(std::uint64_t seed, Index n_measurements, Index n_pixels);

  // round(rate * n_pixels) rows of the Sylvester Hadamard matrix of order
  // N = next power of two >= n_pixels. Row 0 (all open) comes first; the rest
  // are a seeded random subset without repetition. Columns are permuted by a
  // seeded Fisher-Yates shuffle unless `permuted` is false.
  static SensingMatrix hadamard(std::uint64_t seed, Index n_pixels, double rate, bool permuted = true);

  static SensingMatrix from_descriptor(const MatrixDescriptor& descriptor);

  const MatrixDescriptor& descriptor() const { return desc_; }
  MatrixKind kind() const { return desc_.kind; }
  Index n_pixels() const { return desc_.n_pixels; }
  Index n_measurements() const { return desc_.n_measurements; }
  Index order() const { return desc_.order; }
  // column n of the pixel vector -> column of the natural Hadamard matrix.
  const std::vector<Index>& permutation() const { return perm_; }

  // z = A x.
  Vector apply(const Vector& x) const;
  // A^T y.
  Vector apply_adjoint(const Vector& y) const;

  // Row m of A, length n_pixels.
  Vector row(Index m) const;
  // Explicit m x n matrix. Intended for small problems and tests.
  Eigen::MatrixXd materialize() const;

  // True when a Hadamard ensemble includes the all-open row, so that the
  // measurements can be converted to the equivalent +-1 system.
  bool has_total_flux_row() const;

  // +-1 form of a Hadamard ensemble, C = 2 A - 1 1^T: the selected Hadamard
  // rows themselves, mutually orthogonal.
  Vector apply_centered(const Vector& x) const;
  Vector apply_centered_adjoint(const Vector& y) const;
  // Converts measurements of A into measurements of the centered system.
  Vector center_measurements(const Vector& z) const;

 private:
  SensingMatrix() = default;

  Vector embed(const Vector& x) const;
  Vector scatter_rows(const Vector& y) const;

  MatrixDescriptor desc_;
  Eigen::MatrixXd dense_;
  std::vector<Index> perm_;
  Index total_flux_row_ = -1;
};

// Grid-shaped transmittance values in [0, 1].
struct AperturePattern {
  Image transmittance;
};

AperturePattern row_pattern(const SensingMatrix& A, const ApertureGrid& grid, Index m);

bool is_power_of_two(Index n);
Index next_power_of_two(Index n);

// Unnormalized in-place Walsh-Hadamard transform in natural (Sylvester)
// order, H[r][c] = (-1)^popcount(r & c). Applying it twice multiplies by N.
template <typename Derived>
void fwht_inplace(Eigen::DenseBase<Derived>& v) {
  const Index n = v.size();
  if (!is_power_of_two(n)) {
    throw std::invalid_argument("Walsh-Hadamard transform length must be a power of two, got " +
                                std::to_string(n));
  }
  for (Index half = 1; half < n; half *= 2) {
    for (Index block = 0; block < n; block += 2 * half) {
      for (Index k = block; k < block + half; ++k) {
        const auto a = v(k);
        const auto b = v(k + half);
        v(k) = a + b;
        v(k + half) = a - b;
      }
    }
  }
}

template <typename Derived>
typename Derived::PlainObject fwht(const Eigen::DenseBase<Derived>& v) {
  typename Derived::PlainObject out = v;
  fwht_inplace(out);
  return out;
}

// Deterministic generators shared by every seeded component. The bit-level
// output of std::mt19937_64 is fixed by the standard; the conversions below
// are spelled out so that results do not depend on the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next_u64();
  double uniform();                  // [0, 1)
  std::uint64_t below(std::uint64_t bound);  // [0, bound)
  double normal();                   // standard normal, Box-Muller

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Fisher-Yates permutation of [0, n).
std::vector<Index> seeded_permutation(std::uint64_t seed, Index n);

}  // namespace lensless
