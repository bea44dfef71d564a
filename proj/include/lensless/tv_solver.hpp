#pragma once

// Total-variation reconstruction by the alternating direction method of
// multipliers.
//
// The unknown is a stack of images ("blocks"), each with its own TV weight
// and an optional support mask; pixels off the support are not unknowns at
// all. For an operator O and data z the solver addresses
//
//   min  sum_b c_b TV(x_b)  +  fidelity(O x - z)   subject to x >= 0,
//
// where the fidelity is the indicator of O x = z (Fidelity::Constrained) or
// (mu / 2) |O x - z|^2 (Fidelity::Penalized). The splitting introduces
// w = D x for the masked forward-difference gradient, v = x for the
// non-negativity constraint and r = O x - z, so that every sub-problem other
// than the x-update is a closed-form proximal step (soft thresholding,
// clamping, scaling). The x-update is a symmetric positive definite solve by
// conjugate gradients, warm-started from the previous iterate.
//
// Before solving, O is scaled to unit spectral norm and the data to unit
// image magnitude, so mu and the splitting penalties are dimensionless.

#include "lensless/geometry.hpp"
#include "lensless/operator.hpp"

#include <string>
#include <vector>

namespace lensless {

enum class TvVariant { Anisotropic, Isotropic };
enum class Fidelity { Constrained, Penalized };

std::string to_string(TvVariant tv);
std::string to_string(Fidelity fidelity);
TvVariant tv_variant_from_string(const std::string& name);
Fidelity fidelity_from_string(const std::string& name);

struct SolverConfig {
  double mu = 256.0;     // fidelity weight / fidelity split penalty
  double sigma = 1.0;    // weight of the distinct components in joint recovery
  bool sigma_from_areas = false;
  int max_iterations = 300;
  double tolerance = 1e-4;  // relative change between outer iterations
  TvVariant tv = TvVariant::Anisotropic;
  Fidelity fidelity = Fidelity::Constrained;
  double beta = 32.0;    // gradient split penalty
  double gamma = 32.0;   // non-negativity split penalty
  int cg_iterations = 100;
  double cg_tolerance = 1e-10;
  bool nonnegative = true;

  void validate() const;
};

struct ImageBlock {
  Index rows = 0;
  Index cols = 0;
  double tv_weight = 1.0;
  Mask support;  // empty: every pixel is an unknown
};

struct ReconResult {
  std::vector<Image> images;  // one per block, zero off the support
  int iterations = 0;
  // |O x - z| / |z| for the returned images.
  double residual = 0.0;
  bool converged = false;
  double wall_seconds = 0.0;
  // Per outer iteration, in normalized units: the objective with the quadratic
  // fidelity evaluated at the feasible iterate, and the ADMM fixed-point
  // residual (primal-split change plus dual change in the penalty-weighted
  // norm), which is non-increasing for exact sub-problem solves.
  std::vector<double> objective;
  std::vector<double> fixed_point_residual;

  const Image& image() const { return images.front(); }
};

ReconResult solve_tv(const LinearOperator& op, const Vector& z, const std::vector<ImageBlock>& blocks,
                     const SolverConfig& config);

// Anisotropic or isotropic TV with forward differences and reflexive
// boundary, restricted to edges whose end points are both in `support`.
double total_variation(const Image& image, TvVariant tv = TvVariant::Anisotropic, const Mask& support = {});

}  // namespace lensless
