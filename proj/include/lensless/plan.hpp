#pragma once

// Experiment plans: one JSON document describing the scene, aperture grid,
// geometry, sensors, acquisition and solver. Keys (all optional except where
// noted, defaults in brackets):
//
//   scene            phantom name [rects]     scene_file   PGM path (wins over scene)
//   margin           elements of scene beyond the grid [0]
//   rows, cols       aperture grid [64, 64]   element_size [1]
//   f, F             sensor and scene distances [1, 1000]
//   sensors          [{id, position: [x, y], shape: point|rectangle, width, height}]
//                    [one point sensor at the grid center]
//   matrix           hadamard | dense [hadamard]      permuted [true]
//   rates            list in (0, 1] [[1.0]]           seeds [[1]]
//   model            ideal | finite | diffraction [ideal]
//   supersample      [1 for ideal and diffraction, 4 for finite]
//   wavenumber [0]   quadrature [4]      noise_sigma [0]
//   superres_factor  fine-grid factor for fractional two-view shifts [2]
//   workers [1]      output [out]
//   solver           {mu, sigma, sigma_from_areas, max_iterations, tolerance,
//                     tv: anisotropic|isotropic, fidelity: constrained|penalized,
//                     beta, gamma, cg_iterations, cg_tolerance, nonnegative}
//
// Relative paths are resolved against the plan file's directory.

#include "lensless/forward.hpp"
#include "lensless/geometry.hpp"
#include "lensless/sensing.hpp"
#include "lensless/tv_solver.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace lensless {

// Invalid or inconsistent plan contents.
class PlanError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentPlan {
  std::string phantom = "rects";
  std::filesystem::path scene_file;
  double margin = 0.0;
  ApertureGrid grid{64, 64, 1.0};
  SceneGeometry geometry{1.0, 1000.0};
  std::vector<SensorSpec> sensors;
  MatrixKind matrix = MatrixKind::PermutedHadamard;
  bool permuted = true;
  std::vector<double> rates{1.0};
  std::vector<std::uint64_t> seeds{1};
  AcquisitionSpec acquisition;
  int superres_factor = 2;
  SolverConfig solver;
  int workers = 1;
  std::filesystem::path output = "out";

  // Throws PlanError.
  void validate() const;
};

ExperimentPlan parse_plan(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentPlan load_plan(const std::filesystem::path& path);

// The plan's scene radiance: the scene file, or the phantom rendered at
// supersample times the grid size.
Image load_scene(const ExperimentPlan& plan);

SensingMatrix make_matrix(const ExperimentPlan& plan, double rate, std::uint64_t seed);

// Noise for the run with matrix seed `seed`, decorrelated from the matrix stream.
NoiseSpec noise_for(const ExperimentPlan& plan, std::uint64_t seed);

}  // namespace lensless
