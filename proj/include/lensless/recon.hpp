#pragma once

// Reconstruction problems built on solve_tv: single view, finite sensor,
// joint two-view decomposition, sub-pixel super-resolution and
// diffraction-aware recovery.
//
// Hadamard ensembles that contain the all-open row are converted to their
// +-1 form before solving (same solution set, orthogonal rows).

#include "lensless/forward.hpp"
#include "lensless/geometry.hpp"
#include "lensless/operator.hpp"
#include "lensless/sensing.hpp"
#include "lensless/tv_solver.hpp"

#include <vector>

namespace lensless {

struct SensingSystem {
  LinearOperator op;
  Vector z;
};

// A (or its centered form) together with the matching measurements.
SensingSystem sensing_system(const SensingMatrix& A, const Vector& z);

ReconResult tv_reconstruct(const LinearOperator& op, const Vector& z, Index rows, Index cols,
                           const SolverConfig& config);
ReconResult tv_reconstruct(const SensingMatrix& A, const Vector& z, Index rows, Index cols,
                           const SolverConfig& config);

// Aperture: the unknown is constant within each element (upsampled before
// blurring). Supersampled: the unknown lives on the s-times finer grid.
enum class ReconGrid { Aperture, Supersampled };

// Recovers the point-sensor image from finite-sensor data by solving against
// A * pixelize * blur(kernel) rather than A alone.
ReconResult finite_sensor_reconstruct(const Vector& z, const SensingMatrix& A, const BlurKernel& kernel,
                                      const ApertureGrid& grid, Index supersample, const SolverConfig& config,
                                      ReconGrid target = ReconGrid::Aperture);

struct JointResult {
  Image common;
  Image distinct_first;
  Image distinct_second;
  Image view_first;   // common + distinct_first
  Image view_second;  // U common + distinct_second
  double sigma = 1.0;
  ReconResult info;
};

// Two-view decomposition: min TV(I_C) + (sigma/2)(TV(I_D1) + TV(I_D2)) with
// A (I_C + I_D1) = z1 and A (U I_C + I_D2) = z2, I_C supported on the first
// view's common region and I_Dk on the distinct regions.
JointResult joint_multiview_reconstruct(const Vector& z1, const Vector& z2, const SensingMatrix& A,
                                        const ShiftOperator& U, const RegionMasks& regions,
                                        const SolverConfig& config);
// Rejects sets whose matrix descriptors differ from each other or from A.
JointResult joint_multiview_reconstruct(const MeasurementSet& first, const MeasurementSet& second,
                                        const SensingMatrix& A, const ShiftOperator& U, const RegionMasks& regions,
                                        const SolverConfig& config);

struct ViewData {
  Vector z;
  Vec2 offset = Vec2::Zero();  // content displacement in aperture elements
};

// Unknown on a `factor`-times finer grid; view k sees A D_k with D_k the box
// average over its displaced elements.
ReconResult superres_reconstruct(const std::vector<ViewData>& views, const SensingMatrix& A, Index rows,
                                 Index cols, Index factor, const SolverConfig& config);

// Complex data against the modified rows a(m) B(m).
ReconResult diffraction_aware_reconstruct(const ComplexVector& z, const ComplexMatrix& modified_rows, Index rows,
                                          Index cols, const SolverConfig& config);
ReconResult diffraction_aware_reconstruct(const ComplexVector& z, const SensingMatrix& A,
                                          const DiffractionModel& model, const SolverConfig& config);

// 10 log10(peak^2 / MSE) with peak = max(reference); +inf for identical images.
double psnr(const Image& reference, const Image& test);
double relative_error(const Image& reference, const Image& test);

}  // namespace lensless
