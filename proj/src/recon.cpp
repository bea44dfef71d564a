#include "lensless/recon.hpp"

#include "lensless/errors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lensless {

SensingSystem sensing_system(const SensingMatrix& A, const Vector& z) {
  if (z.size() != A.n_measurements()) {
    throw DimensionError("expected " + std::to_string(A.n_measurements()) + " measurements, got " +
                         std::to_string(z.size()));
  }
  if (A.has_total_flux_row()) return {sensing_operator(A, true), A.center_measurements(z)};
  return {sensing_operator(A, false), z};
}

ReconResult tv_reconstruct(const LinearOperator& op, const Vector& z, Index rows, Index cols,
                           const SolverConfig& config) {
  return solve_tv(op, z, {ImageBlock{rows, cols, 1.0, {}}}, config);
}

ReconResult tv_reconstruct(const SensingMatrix& A, const Vector& z, Index rows, Index cols,
                           const SolverConfig& config) {
  if (rows * cols != A.n_pixels()) throw DimensionError("image shape does not match the sensing matrix");
  const SensingSystem sys = sensing_system(A, z);
  return tv_reconstruct(sys.op, sys.z, rows, cols, config);
}

ReconResult finite_sensor_reconstruct(const Vector& z, const SensingMatrix& A, const BlurKernel& kernel,
                                      const ApertureGrid& grid, Index supersample, const SolverConfig& config,
                                      ReconGrid target) {
  if (grid.pixel_count() != A.n_pixels()) throw DimensionError("aperture grid does not match the sensing matrix");
  const SensingSystem sys = sensing_system(A, z);
  const Index fr = grid.rows() * supersample;
  const Index fc = grid.cols() * supersample;
  const LinearOperator blurred =
      sys.op * pixelize_operator(grid.rows(), grid.cols(), supersample) * blur_operator(fr, fc, kernel);
  if (target == ReconGrid::Supersampled) return tv_reconstruct(blurred, sys.z, fr, fc, config);
  return tv_reconstruct(blurred * upsample_operator(grid.rows(), grid.cols(), supersample), sys.z, grid.rows(),
                        grid.cols(), config);
}

JointResult joint_multiview_reconstruct(const Vector& z1, const Vector& z2, const SensingMatrix& A,
                                        const ShiftOperator& U, const RegionMasks& regions,
                                        const SolverConfig& config) {
  const Index rows = regions.common_first.rows();
  const Index cols = regions.common_first.cols();
  const Index n = rows * cols;
  if (n != A.n_pixels()) throw DimensionError("region masks do not match the sensing matrix");
  const SensingSystem s1 = sensing_system(A, z1);
  const SensingSystem s2 = sensing_system(A, z2);
  const LinearOperator shift = U.as_operator();
  const LinearOperator S = s1.op;
  const Index m = S.rows();

  // x = [I_C; I_D1; I_D2] -> [S (I_C + I_D1); S (U I_C + I_D2)]
  const LinearOperator joint(
      2 * m, 3 * n,
      [S, shift, n, m](const Vector& x) {
        Vector y(2 * m);
        y.head(m) = S.apply(x.segment(0, n) + x.segment(n, n));
        y.tail(m) = S.apply(shift.apply(x.segment(0, n)) + x.segment(2 * n, n));
        return y;
      },
      [S, shift, n, m](const Vector& y) {
        const Vector a1 = S.adjoint(y.head(m));
        const Vector a2 = S.adjoint(y.tail(m));
        Vector x(3 * n);
        x.segment(0, n) = a1 + shift.adjoint(a2);
        x.segment(n, n) = a1;
        x.segment(2 * n, n) = a2;
        return x;
      },
      "joint");

  double sigma = config.sigma;
  if (config.sigma_from_areas) {
    const double distinct = 0.5 * static_cast<double>(regions.distinct_first.count() + regions.distinct_second.count());
    if (distinct > 0.0) sigma = static_cast<double>(regions.common_first.count()) / distinct;
  }
  Vector z(2 * m);
  z << s1.z, s2.z;
  const std::vector<ImageBlock> blocks = {
      {rows, cols, 1.0, regions.common_first},
      {rows, cols, 0.5 * sigma, regions.distinct_first},
      {rows, cols, 0.5 * sigma, regions.distinct_second},
  };
  JointResult out;
  out.sigma = sigma;
  out.info = solve_tv(joint, z, blocks, config);
  out.common = out.info.images[0];
  out.distinct_first = out.info.images[1];
  out.distinct_second = out.info.images[2];
  out.view_first = out.common + out.distinct_first;
  out.view_second = U.apply(out.common) + out.distinct_second;
  return out;
}

JointResult joint_multiview_reconstruct(const MeasurementSet& first, const MeasurementSet& second,
                                        const SensingMatrix& A, const ShiftOperator& U, const RegionMasks& regions,
                                        const SolverConfig& config) {
  if (!(first.matrix == second.matrix) || !(first.matrix == A.descriptor())) {
    throw std::invalid_argument("joint reconstruction needs both views measured with the same sensing matrix");
  }
  if (first.is_complex() || second.is_complex()) {
    throw std::invalid_argument("joint reconstruction takes real-valued measurements");
  }
  return joint_multiview_reconstruct(first.values, second.values, A, U, regions, config);
}

ReconResult superres_reconstruct(const std::vector<ViewData>& views, const SensingMatrix& A, Index rows,
                                 Index cols, Index factor, const SolverConfig& config) {
  if (views.empty()) throw std::invalid_argument("super-resolution needs at least one view");
  if (factor < 1) throw std::invalid_argument("upsample factor must be at least 1");
  if (rows * cols != A.n_pixels()) throw DimensionError("image shape does not match the sensing matrix");
  if (factor > 1) {
    bool any_fractional = false;
    for (const auto& v : views) {
      any_fractional |= v.offset.x() != std::round(v.offset.x()) || v.offset.y() != std::round(v.offset.y());
    }
    if (!any_fractional) {
      throw std::invalid_argument(
          "all view offsets are whole elements, so the views add no sub-pixel samples; "
          "use joint_multiview_reconstruct instead");
    }
  }
  std::vector<LinearOperator> parts;
  Vector z(0);
  for (const auto& v : views) {
    const SensingSystem sys = sensing_system(A, v.z);
    parts.push_back(sys.op * downsample_operator(rows, cols, factor, v.offset));
    Vector grown(z.size() + sys.z.size());
    grown << z, sys.z;
    z = std::move(grown);
  }
  const LinearOperator stacked = parts.size() == 1 ? parts.front() : LinearOperator::vstack(parts);
  return tv_reconstruct(stacked, z, rows * factor, cols * factor, config);
}

ReconResult diffraction_aware_reconstruct(const ComplexVector& z, const ComplexMatrix& modified_rows, Index rows,
                                          Index cols, const SolverConfig& config) {
  if (modified_rows.rows() == 0 || modified_rows.rows() != z.size()) {
    throw std::invalid_argument("diffraction-aware reconstruction needs one modified row per measurement");
  }
  if (modified_rows.cols() != rows * cols) throw DimensionError("modified rows do not match the image shape");
  Vector stacked(2 * z.size());
  stacked << z.real(), z.imag();
  return tv_reconstruct(complex_rows_operator(modified_rows), stacked, rows, cols, config);
}

ReconResult diffraction_aware_reconstruct(const ComplexVector& z, const SensingMatrix& A,
                                          const DiffractionModel& model, const SolverConfig& config) {
  return diffraction_aware_reconstruct(z, model.modified_rows(A), model.grid().rows(), model.grid().cols(),
                                       config);
}

double psnr(const Image& reference, const Image& test) {
  if (reference.rows() != test.rows() || reference.cols() != test.cols()) {
    throw DimensionError("PSNR needs images of equal shape");
  }
  const double mse = (reference - test).square().mean();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  const double peak = reference.maxCoeff();
  return 10.0 * std::log10(peak * peak / mse);
}

double relative_error(const Image& reference, const Image& test) {
  if (reference.rows() != test.rows() || reference.cols() != test.cols()) {
    throw DimensionError("relative error needs images of equal shape");
  }
  const double ref = reference.matrix().norm();
  const double diff = (reference - test).matrix().norm();
  return ref == 0.0 ? diff : diff / ref;
}

}  // namespace lensless
