#pragma once

// The lensless command-line tool: phantom, measure, reconstruct, sweep and
// inspect. The workflow functions are usable without the argument parser.

#include "lensless/forward.hpp"
#include "lensless/plan.hpp"
#include "lensless/tv_solver.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace lensless {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNotConverged = 3 };

struct ReconstructionOutput {
  // single, finite, diffraction, joint or superres
  std::string mode;
  // Named images; the first is the primary result.
  std::vector<std::pair<std::string, Image>> images;
  ReconResult info;
  double sigma = 0.0;  // joint mode only
};

// One set reconstructs by its forward-model tag. Two ideal sets whose
// sensors are a whole number of elements apart go to the joint solver;
// otherwise several sets go to super-resolution on a `superres_factor`
// finer grid. Throws MismatchError for inconsistent sets.
ReconstructionOutput reconstruct_sets(const std::vector<MeasurementSet>& sets, const SolverConfig& config,
                                      int superres_factor = 2);

// Point-sensor pixel image of the plan scene as seen by `sensor`.
Image truth_image(const ExperimentPlan& plan, const PlanarScene& scene, const SensorSpec& sensor);
PlanarScene place_scene(const ExperimentPlan& plan);

// Writes truth_<sensor>.pgm and meas_r<rate>_s<seed>_<sensor>.txt into out_dir.
std::vector<std::filesystem::path> measure_plan(const ExperimentPlan& plan, const std::filesystem::path& out_dir);

struct SweepRow {
  double rate = 0.0;
  std::uint64_t seed = 0;
  double psnr = 0.0;
  double relative_error = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string image;  // relative to the output directory
};

struct SweepReport {
  std::vector<SweepRow> rows;                      // rate-major, plan order
  std::vector<std::pair<double, double>> mean_psnr;  // (rate, mean over seeds)
};

// Measures and reconstructs every (rate, seed) cell with the first sensor,
// using up to plan.workers threads. Writes truth.pgm, one r<rate>_s<seed>/
// directory per cell, report.csv and summary.csv. PSNR is computed between
// the images as stored.
SweepReport sweep_plan(const ExperimentPlan& plan, const std::filesystem::path& out_dir);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lensless
