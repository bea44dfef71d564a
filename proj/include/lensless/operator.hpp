#pragma once

// Matrix-free linear operators with an exact adjoint. Every operator checks
// the adjoint identity <A x, y> = <x, A^T y> on random vectors when it is
// constructed, so composing mismatched pieces fails immediately.

#include "lensless/forward.hpp"
#include "lensless/geometry.hpp"
#include "lensless/sensing.hpp"

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace lensless {

class LinearOperator {
 public:
  using Map = std::function<Vector(const Vector&)>;

  static constexpr double kAdjointTolerance = 1e-8;

  // Throws std::logic_error when the adjoint check fails.
  LinearOperator(Index rows, Index cols, Map forward, Map adjoint, std::string name = "operator");

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  const std::string& name() const { return name_; }

  Vector apply(const Vector& x) const;
  Vector adjoint(const Vector& y) const;
  LinearOperator transpose() const;

  static LinearOperator identity(Index n);
  static LinearOperator from_matrix(Eigen::MatrixXd matrix, std::string name = "matrix");
  // [A; B; ...]
  static LinearOperator vstack(const std::vector<LinearOperator>& parts);
  // [A, B, ...]
  static LinearOperator hstack(const std::vector<LinearOperator>& parts);

  friend LinearOperator operator*(const LinearOperator& outer, const LinearOperator& inner);
  friend LinearOperator operator*(double scale, const LinearOperator& op);
  friend LinearOperator operator+(const LinearOperator& a, const LinearOperator& b);

 private:
  struct Unchecked {};
  LinearOperator(Unchecked, Index rows, Index cols, Map forward, Map adjoint, std::string name);

  Index rows_;
  Index cols_;
  std::shared_ptr<const Map> forward_;
  std::shared_ptr<const Map> adjoint_;
  std::string name_;
};

// |<A x, y> - <x, A^T y>| / (|A x| |y| + |x| |A^T y|) on seeded random vectors.
double adjoint_mismatch(const LinearOperator& op, std::uint64_t seed, int trials = 2);

// Largest singular value by power iteration from a fixed start vector.
double estimate_norm(const LinearOperator& op, int iterations = 40);

// A as an operator. `centered` switches a Hadamard ensemble with the all-open
// row to its +-1 form (see SensingMatrix::apply_centered).
LinearOperator sensing_operator(const SensingMatrix& A, bool centered = false);

// Fine (s rows x s cols) -> coarse, summing s x s blocks.
LinearOperator pixelize_operator(Index rows, Index cols, Index supersample);
// Coarse -> fine, spreading each pixel evenly over its block.
LinearOperator upsample_operator(Index rows, Index cols, Index supersample);
// Zero-boundary convolution on a (rows x cols) grid.
LinearOperator blur_operator(Index rows, Index cols, const BlurKernel& kernel);

// Content shift by (dx, dy) elements: (U x)(i, j) = x(i - dy, j - dx) with
// bilinear interpolation and zero fill. Integer shifts are exact
// permutations restricted to the grid.
class ShiftOperator {
 public:
  ShiftOperator(Index rows, Index cols, Vec2 shift);

  Vec2 shift() const { return shift_; }
  bool is_integer() const;

  Image apply(const Image& x) const;
  Image adjoint(const Image& y) const;
  LinearOperator as_operator() const;

 private:
  Index rows_;
  Index cols_;
  Vec2 shift_;
};

// Box average of a fine grid (factor r per axis) over the aperture elements
// of a view whose content is displaced by `offset` elements: coarse pixel
// (i, j) averages the fine image over E_ij - offset, zero outside the grid.
LinearOperator downsample_operator(Index rows, Index cols, Index factor, Vec2 offset);

// Real-valued image -> [Re(M x); Im(M x)].
LinearOperator complex_rows_operator(const ComplexMatrix& rows);

}  // namespace lensless
