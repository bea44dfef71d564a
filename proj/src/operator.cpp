#include "lensless/operator.hpp"

#include "lensless/errors.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lensless {

namespace {

using Sparse = Eigen::SparseMatrix<double>;

Vector random_vector(Rng& rng, Index n) {
  Vector v(n);
  for (Index k = 0; k < n; ++k) v(k) = 2.0 * rng.uniform() - 1.0;
  return v;
}

LinearOperator from_sparse(Sparse matrix, std::string name) {
  auto shared = std::make_shared<const Sparse>(std::move(matrix));
  return LinearOperator(
      shared->rows(), shared->cols(), [shared](const Vector& x) -> Vector { return *shared * x; },
      [shared](const Vector& y) -> Vector { return shared->transpose() * y; }, std::move(name));
}

// Overlap length of [a0, a1) with [b0, b1).
double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

LinearOperator::LinearOperator(Unchecked, Index rows, Index cols, Map forward, Map adjoint, std::string name)
    : rows_(rows),
      cols_(cols),
      forward_(std::make_shared<const Map>(std::move(forward))),
      adjoint_(std::make_shared<const Map>(std::move(adjoint))),
      name_(std::move(name)) {}

LinearOperator::LinearOperator(Index rows, Index cols, Map forward, Map adjoint, std::string name)
    : LinearOperator(Unchecked{}, rows, cols, std::move(forward), std::move(adjoint), std::move(name)) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("operator dimensions must be non-negative");
  const double mismatch = adjoint_mismatch(*this, 0x5eed);
  if (!(mismatch <= kAdjointTolerance)) {
    std::ostringstream msg;
    msg << "operator '" << name_ << "' fails the adjoint check (relative mismatch " << mismatch << ")";
    throw std::logic_error(msg.str());
  }
}

Vector LinearOperator::apply(const Vector& x) const {
  if (x.size() != cols_) {
    throw DimensionError("operator '" + name_ + "' expects input length " + std::to_string(cols_) + ", got " +
                         std::to_string(x.size()));
  }
  Vector y = (*forward_)(x);
  if (y.size() != rows_) throw std::logic_error("operator '" + name_ + "' returned the wrong output length");
  return y;
}

Vector LinearOperator::adjoint(const Vector& y) const {
  if (y.size() != rows_) {
    throw DimensionError("adjoint of '" + name_ + "' expects input length " + std::to_string(rows_) + ", got " +
                         std::to_string(y.size()));
  }
  Vector x = (*adjoint_)(y);
  if (x.size() != cols_) throw std::logic_error("adjoint of '" + name_ + "' returned the wrong output length");
  return x;
}

LinearOperator LinearOperator::transpose() const {
  LinearOperator t = *this;
  std::swap(t.rows_, t.cols_);
  std::swap(t.forward_, t.adjoint_);
  t.name_ = name_ + "^T";
  return t;
}

LinearOperator LinearOperator::identity(Index n) {
  return LinearOperator(
      Unchecked{}, n, n, [](const Vector& x) { return x; }, [](const Vector& y) { return y; }, "identity");
}

LinearOperator LinearOperator::from_matrix(Eigen::MatrixXd matrix, std::string name) {
  auto shared = std::make_shared<const Eigen::MatrixXd>(std::move(matrix));
  return LinearOperator(
      shared->rows(), shared->cols(), [shared](const Vector& x) -> Vector { return *shared * x; },
      [shared](const Vector& y) -> Vector { return shared->transpose() * y; }, std::move(name));
}

LinearOperator LinearOperator::vstack(const std::vector<LinearOperator>& parts) {
  if (parts.empty()) throw std::invalid_argument("vstack needs at least one operator");
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != parts.front().cols()) throw DimensionError("vstack operands differ in input length");
    rows += p.rows();
  }
  const Index cols = parts.front().cols();
  auto fwd = [parts, rows](const Vector& x) {
    Vector y(rows);
    Index offset = 0;
    for (const auto& p : parts) {
      y.segment(offset, p.rows()) = p.apply(x);
      offset += p.rows();
    }
    return y;
  };
  auto adj = [parts, cols](const Vector& y) {
    Vector x = Vector::Zero(cols);
    Index offset = 0;
    for (const auto& p : parts) {
      x += p.adjoint(y.segment(offset, p.rows()));
      offset += p.rows();
    }
    return x;
  };
  return LinearOperator(rows, cols, fwd, adj, "vstack");
}

LinearOperator LinearOperator::hstack(const std::vector<LinearOperator>& parts) {
  if (parts.empty()) throw std::invalid_argument("hstack needs at least one operator");
  std::vector<LinearOperator> transposed;
  transposed.reserve(parts.size());
  for (const auto& p : parts) transposed.push_back(p.transpose());
  LinearOperator out = vstack(transposed).transpose();
  out.name_ = "hstack";
  return out;
}

LinearOperator operator*(const LinearOperator& outer, const LinearOperator& inner) {
  if (outer.cols() != inner.rows()) {
    throw DimensionError("cannot compose '" + outer.name() + "' (" + std::to_string(outer.cols()) +
                         " inputs) with '" + inner.name() + "' (" + std::to_string(inner.rows()) + " outputs)");
  }
  return LinearOperator(
      outer.rows(), inner.cols(),
      [outer, inner](const Vector& x) { return outer.apply(inner.apply(x)); },
      [outer, inner](const Vector& y) { return inner.adjoint(outer.adjoint(y)); },
      outer.name() + "*" + inner.name());
}

LinearOperator operator*(double scale, const LinearOperator& op) {
  return LinearOperator(
      op.rows(), op.cols(),
      [op, scale](const Vector& x) -> Vector { return scale * op.apply(x); },
      [op, scale](const Vector& y) -> Vector { return scale * op.adjoint(y); }, op.name());
}

LinearOperator operator+(const LinearOperator& a, const LinearOperator& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("operator sum needs equal shapes");
  return LinearOperator(
      a.rows(), a.cols(),
      [a, b](const Vector& x) -> Vector { return a.apply(x) + b.apply(x); },
      [a, b](const Vector& y) -> Vector { return a.adjoint(y) + b.adjoint(y); }, a.name() + "+" + b.name());
}

double adjoint_mismatch(const LinearOperator& op, std::uint64_t seed, int trials) {
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Vector x = random_vector(rng, op.cols());
    const Vector y = random_vector(rng, op.rows());
    const Vector ax = op.apply(x);
    const Vector aty = op.adjoint(y);
    const double scale = ax.norm() * y.norm() + x.norm() * aty.norm();
    if (scale == 0.0) continue;
    worst = std::max(worst, std::abs(ax.dot(y) - x.dot(aty)) / scale);
  }
  return worst;
}

double estimate_norm(const LinearOperator& op, int iterations) {
  if (op.cols() == 0 || op.rows() == 0) return 0.0;
  Rng rng(0x6e6f726d);
  Vector x = random_vector(rng, op.cols());
  x.normalize();
  double sigma = 0.0;
  for (int k = 0; k < iterations; ++k) {
    Vector y = op.adjoint(op.apply(x));
    const double lambda = y.norm();
    if (lambda == 0.0) return 0.0;
    sigma = std::sqrt(lambda);
    x = y / lambda;
  }
  return sigma;
}

LinearOperator sensing_operator(const SensingMatrix& A, bool centered) {
  auto shared = std::make_shared<const SensingMatrix>(A);
  if (centered) {
    if (!A.has_total_flux_row()) throw std::invalid_argument("centered form needs the all-open Hadamard row");
    return LinearOperator(
        A.n_measurements(), A.n_pixels(), [shared](const Vector& x) { return shared->apply_centered(x); },
        [shared](const Vector& y) { return shared->apply_centered_adjoint(y); }, "hadamard+-1");
  }
  return LinearOperator(
      A.n_measurements(), A.n_pixels(), [shared](const Vector& x) { return shared->apply(x); },
      [shared](const Vector& y) { return shared->apply_adjoint(y); }, "sensing");
}

LinearOperator pixelize_operator(Index rows, Index cols, Index supersample) {
  const Index fr = rows * supersample;
  const Index fc = cols * supersample;
  return LinearOperator(
      rows * cols, fr * fc,
      [=](const Vector& x) -> Vector {
        const Image fine = x.reshaped(fr, fc).array();
        return pixelize(fine, supersample).reshaped();
      },
      [=](const Vector& y) -> Vector {
        const Image coarse = y.reshaped(rows, cols).array();
        const auto s2 = static_cast<double>(supersample * supersample);
        return upsample(coarse, supersample).reshaped() * s2;
      },
      "pixelize");
}

LinearOperator upsample_operator(Index rows, Index cols, Index supersample) {
  LinearOperator p = pixelize_operator(rows, cols, supersample);
  const auto s2 = static_cast<double>(supersample * supersample);
  LinearOperator out = (1.0 / s2) * p.transpose();
  return out;
}

LinearOperator blur_operator(Index rows, Index cols, const BlurKernel& kernel) {
  return LinearOperator(
      rows * cols, rows * cols,
      [=](const Vector& x) -> Vector {
        const Image img = x.reshaped(rows, cols).array();
        return blur(img, kernel).reshaped();
      },
      [=](const Vector& y) -> Vector {
        const Image img = y.reshaped(rows, cols).array();
        return blur_adjoint(img, kernel).reshaped();
      },
      "blur");
}

ShiftOperator::ShiftOperator(Index rows, Index cols, Vec2 shift) : rows_(rows), cols_(cols), shift_(shift) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("shift operator needs a non-empty grid");
  if (!shift.allFinite()) throw std::invalid_argument("shift must be finite");
}

bool ShiftOperator::is_integer() const {
  return shift_.x() == std::round(shift_.x()) && shift_.y() == std::round(shift_.y());
}

Image ShiftOperator::apply(const Image& x) const {
  if (x.rows() != rows_ || x.cols() != cols_) throw DimensionError("shift operator input has the wrong shape");
  // Sample x at (i - dy, j - dx): integer part plus bilinear fraction.
  const double fy = std::floor(shift_.y());
  const double fx = std::floor(shift_.x());
  const double ty = shift_.y() - fy;
  const double tx = shift_.x() - fx;
  const auto oy = static_cast<Index>(fy);
  const auto ox = static_cast<Index>(fx);
  const auto at = [&](Index i, Index j) { return (i >= 0 && i < rows_ && j >= 0 && j < cols_) ? x(i, j) : 0.0; };
  Image out(rows_, cols_);
  for (Index j = 0; j < cols_; ++j) {
    for (Index i = 0; i < rows_; ++i) {
      const Index si = i - oy;
      const Index sj = j - ox;
      double v = (1.0 - ty) * (1.0 - tx) * at(si, sj);
      if (tx != 0.0) v += (1.0 - ty) * tx * at(si, sj - 1);
      if (ty != 0.0) v += ty * (1.0 - tx) * at(si - 1, sj);
      if (tx != 0.0 && ty != 0.0) v += ty * tx * at(si - 1, sj - 1);
      out(i, j) = v;
    }
  }
  return out;
}

Image ShiftOperator::adjoint(const Image& y) const {
  if (y.rows() != rows_ || y.cols() != cols_) throw DimensionError("shift adjoint input has the wrong shape");
  const double fy = std::floor(shift_.y());
  const double fx = std::floor(shift_.x());
  const double ty = shift_.y() - fy;
  const double tx = shift_.x() - fx;
  const auto oy = static_cast<Index>(fy);
  const auto ox = static_cast<Index>(fx);
  Image out = Image::Zero(rows_, cols_);
  const auto add = [&](Index i, Index j, double v) {
    if (i >= 0 && i < rows_ && j >= 0 && j < cols_) out(i, j) += v;
  };
  for (Index j = 0; j < cols_; ++j) {
    for (Index i = 0; i < rows_; ++i) {
      const Index si = i - oy;
      const Index sj = j - ox;
      const double v = y(i, j);
      add(si, sj, (1.0 - ty) * (1.0 - tx) * v);
      if (tx != 0.0) add(si, sj - 1, (1.0 - ty) * tx * v);
      if (ty != 0.0) add(si - 1, sj, ty * (1.0 - tx) * v);
      if (tx != 0.0 && ty != 0.0) add(si - 1, sj - 1, ty * tx * v);
    }
  }
  return out;
}

LinearOperator ShiftOperator::as_operator() const {
  const ShiftOperator self = *this;
  return LinearOperator(
      rows_ * cols_, rows_ * cols_,
      [self](const Vector& x) -> Vector {
        const Image img = x.reshaped(self.rows_, self.cols_).array();
        return self.apply(img).reshaped();
      },
      [self](const Vector& y) -> Vector {
        const Image img = y.reshaped(self.rows_, self.cols_).array();
        return self.adjoint(img).reshaped();
      },
      "shift");
}

LinearOperator downsample_operator(Index rows, Index cols, Index factor, Vec2 offset) {
  if (factor < 1) throw std::invalid_argument("downsample factor must be at least 1");
  const Index fr = rows * factor;
  const Index fc = cols * factor;
  const auto r = static_cast<double>(factor);
  // 1D weights: coarse index -> (fine index, overlap / r).
  const auto axis = [&](Index coarse_count, Index fine_count, double shift) {
    std::vector<std::vector<std::pair<Index, double>>> w(static_cast<std::size_t>(coarse_count));
    for (Index c = 0; c < coarse_count; ++c) {
      const double lo = (static_cast<double>(c) - shift) * r;
      const double hi = lo + r;
      const auto first = std::max<Index>(0, static_cast<Index>(std::floor(lo)));
      const auto last = std::min<Index>(fine_count - 1, static_cast<Index>(std::ceil(hi)));
      for (Index f = first; f <= last; ++f) {
        const double len = overlap(lo, hi, static_cast<double>(f), static_cast<double>(f + 1));
        if (len > 0.0) w[c].emplace_back(f, len / r);
      }
    }
    return w;
  };
  const auto wy = axis(rows, fr, offset.y());
  const auto wx = axis(cols, fc, offset.x());
  std::vector<Eigen::Triplet<double>> triplets;
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      for (const auto& [fj, ax] : wx[j]) {
        for (const auto& [fi, ay] : wy[i]) triplets.emplace_back(j * rows + i, fj * fr + fi, ax * ay);
      }
    }
  }
  Sparse d(rows * cols, fr * fc);
  d.setFromTriplets(triplets.begin(), triplets.end());
  return from_sparse(std::move(d), "downsample");
}

LinearOperator complex_rows_operator(const ComplexMatrix& rows) {
  Eigen::MatrixXd stacked(2 * rows.rows(), rows.cols());
  stacked.topRows(rows.rows()) = rows.real();
  stacked.bottomRows(rows.rows()) = rows.imag();
  return LinearOperator::from_matrix(std::move(stacked), "complex-rows");
}

}  // namespace lensless
