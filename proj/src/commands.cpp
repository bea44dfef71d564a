#include "lensless/commands.hpp"

#include "lensless/errors.hpp"
#include "lensless/image_io.hpp"
#include "lensless/measurement_io.hpp"
#include "lensless/phantom.hpp"
#include "lensless/recon.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

namespace lensless {

namespace fs = std::filesystem;

namespace {

bool is_whole(const Vec2& v) {
  return std::abs(v.x() - std::round(v.x())) < 1e-9 && std::abs(v.y() - std::round(v.y())) < 1e-9;
}

void check_consistent(const std::vector<MeasurementSet>& sets) {
  const MeasurementSet& a = sets.front();
  for (std::size_t k = 1; k < sets.size(); ++k) {
    const MeasurementSet& b = sets[k];
    if (!(a.matrix == b.matrix)) {
      throw MismatchError("measurement sets 1 and " + std::to_string(k + 1) + " use different sensing matrices");
    }
    if (a.model != b.model || a.rows != b.rows || a.cols != b.cols || a.element_size != b.element_size ||
        a.sensor_distance != b.sensor_distance || a.scene_distance != b.scene_distance ||
        a.supersample != b.supersample) {
      throw MismatchError("measurement sets 1 and " + std::to_string(k + 1) + " disagree on model or geometry");
    }
  }
}

Vector real_values(const MeasurementSet& set) {
  if (set.is_complex()) throw MismatchError("expected real-valued measurements");
  return set.values;
}

}  // namespace

ReconstructionOutput reconstruct_sets(const std::vector<MeasurementSet>& sets, const SolverConfig& config,
                                      int superres_factor) {
  if (sets.empty()) throw std::invalid_argument("no measurement sets given");
  check_consistent(sets);
  const MeasurementSet& first = sets.front();
  const auto [A, grid, geom] = [&first] {
    try {
      return std::tuple{SensingMatrix::from_descriptor(first.matrix),
                        ApertureGrid(first.rows, first.cols, first.element_size),
                        SceneGeometry(first.sensor_distance, first.scene_distance)};
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("measurement header: ") + e.what());
    }
  }();

  ReconstructionOutput out;
  if (sets.size() == 1) {
    switch (first.model) {
      case ForwardModel::Ideal:
        out.mode = "single";
        out.info = tv_reconstruct(A, first.values, grid.rows(), grid.cols(), config);
        break;
      case ForwardModel::Finite: {
        out.mode = "finite";
        const BlurKernel kernel = finite_sensor_kernel(first.sensor, geom, grid, first.supersample);
        out.info = finite_sensor_reconstruct(first.values, A, kernel, grid, first.supersample, config);
        break;
      }
      case ForwardModel::Diffraction: {
        out.mode = "diffraction";
        const DiffractionModel model(grid, geom, first.wavenumber, first.quadrature, first.sensor.position);
        out.info = diffraction_aware_reconstruct(first.complex_values, A, model, config);
        break;
      }
    }
    out.images.emplace_back("recon", out.info.image());
    return out;
  }

  if (first.model != ForwardModel::Ideal) {
    throw MismatchError("multi-view reconstruction supports the ideal model only, got " + to_string(first.model));
  }
  std::vector<Vec2> offsets;
  std::vector<ViewMapping> mappings;
  for (const auto& s : sets) {
    mappings.push_back(view_shift(geom, first.sensor, s.sensor));
    offsets.push_back(mappings.back().shift / grid.element_size());
  }
  if (sets.size() == 2 && is_whole(offsets[1])) {
    out.mode = "joint";
    const Vec2 shift(std::round(offsets[1].x()), std::round(offsets[1].y()));
    const ShiftOperator U(grid.rows(), grid.cols(), shift);
    const RegionMasks regions = common_region(grid, mappings[1]);
    JointResult j = joint_multiview_reconstruct(real_values(sets[0]), real_values(sets[1]), A, U, regions, config);
    out.sigma = j.sigma;
    out.info = std::move(j.info);
    out.images = {{"view_1", j.view_first},
                  {"view_2", j.view_second},
                  {"common", j.common},
                  {"distinct_1", j.distinct_first},
                  {"distinct_2", j.distinct_second}};
    return out;
  }
  out.mode = "superres";
  std::vector<ViewData> views;
  for (std::size_t k = 0; k < sets.size(); ++k) views.push_back({real_values(sets[k]), offsets[k]});
  out.info = superres_reconstruct(views, A, grid.rows(), grid.cols(), superres_factor, config);
  out.images.emplace_back("superres", out.info.image());
  return out;
}

PlanarScene place_scene(const ExperimentPlan& plan) {
  return PlanarScene::covering(load_scene(plan), plan.grid, plan.geometry, plan.sensors.front().position,
                               plan.margin);
}

Image truth_image(const ExperimentPlan& plan, const PlanarScene& scene, const SensorSpec& sensor) {
  return pixelize(render_virtual(scene, sensor, plan.geometry, plan.grid, plan.acquisition.supersample));
}

namespace {

std::string cell_name(double rate, std::uint64_t seed) {
  return "r" + format_double(rate) + "_s" + std::to_string(seed);
}

Metadata metrics(const ReconstructionOutput& r) {
  Metadata m;
  m["mode"] = r.mode;
  m["iterations"] = std::to_string(r.info.iterations);
  m["residual"] = format_double(r.info.residual);
  m["converged"] = r.info.converged ? "true" : "false";
  if (r.mode == "joint") m["sigma"] = format_double(r.sigma);
  return m;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

}  // namespace

std::vector<fs::path> measure_plan(const ExperimentPlan& plan, const fs::path& out_dir) {
  plan.validate();
  ensure_dir(out_dir);
  const PlanarScene scene = place_scene(plan);
  for (const auto& sensor : plan.sensors) {
    write_pgm(out_dir / ("truth_" + sensor.id + ".pgm"), truth_image(plan, scene, sensor),
              {{"sensor", sensor.id}, {"scene_hash", content_hash(scene.radiance)}});
  }
  std::vector<fs::path> written;
  for (double rate : plan.rates) {
    for (std::uint64_t seed : plan.seeds) {
      const SensingMatrix A = make_matrix(plan, rate, seed);
      AcquisitionSpec spec = plan.acquisition;
      spec.noise = noise_for(plan, seed);
      const auto sets = multiview_measure(A, scene, plan.sensors, plan.geometry, plan.grid, spec);
      for (std::size_t k = 0; k < sets.size(); ++k) {
        const fs::path path = out_dir / ("meas_" + cell_name(rate, seed) + "_" + plan.sensors[k].id + ".txt");
        write_measurements(path, sets[k]);
        written.push_back(path);
      }
    }
  }
  return written;
}

SweepReport sweep_plan(const ExperimentPlan& plan, const fs::path& out_dir) {
  plan.validate();
  ensure_dir(out_dir);
  const PlanarScene scene = place_scene(plan);
  const SensorSpec& sensor = plan.sensors.front();
  const Image truth = pgm_quantize(truth_image(plan, scene, sensor));
  write_pgm(out_dir / "truth.pgm", truth, {{"sensor", sensor.id}, {"scene_hash", content_hash(scene.radiance)}});

  struct Cell {
    double rate;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (double rate : plan.rates)
    for (std::uint64_t seed : plan.seeds) cells.push_back({rate, seed});

  SweepReport report;
  report.rows.resize(cells.size());
  std::vector<std::exception_ptr> failures(cells.size());
  std::atomic<std::size_t> next{0};

  const auto work = [&]() {
    for (std::size_t k; (k = next.fetch_add(1)) < cells.size();) {
      try {
        const Cell& c = cells[k];
        const std::string name = cell_name(c.rate, c.seed);
        const fs::path dir = out_dir / name;
        ensure_dir(dir);
        const SensingMatrix A = make_matrix(plan, c.rate, c.seed);
        AcquisitionSpec spec = plan.acquisition;
        spec.noise = noise_for(plan, c.seed);
        const auto sets = multiview_measure(A, scene, {sensor}, plan.geometry, plan.grid, spec);
        write_measurements(dir / "measurements.txt", sets.front());
        const ReconstructionOutput r = reconstruct_sets(sets, plan.solver);
        const Image stored = pgm_quantize(r.images.front().second);
        SweepRow& row = report.rows[k];
        row.rate = c.rate;
        row.seed = c.seed;
        row.psnr = psnr(truth, stored);
        row.relative_error = relative_error(truth, stored);
        row.iterations = r.info.iterations;
        row.converged = r.info.converged;
        row.image = name + "/recon.pgm";
        Metadata m = metrics(r);
        m["psnr"] = format_double(row.psnr);
        m["reference"] = "truth.pgm";
        write_pgm(dir / "recon.pgm", stored);
        write_text(dir / "metrics.txt", format_metadata(m));
      } catch (...) {
        failures[k] = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(plan.workers, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (!failures[k]) continue;
    try {
      std::rethrow_exception(failures[k]);
    } catch (const std::exception& e) {
      throw std::runtime_error("sweep cell " + cell_name(cells[k].rate, cells[k].seed) + ": " + e.what());
    }
  }

  std::string csv = "rate,seed,psnr,relative_error,iterations,converged,image\n";
  for (const auto& r : report.rows) {
    csv += format_double(r.rate) + "," + std::to_string(r.seed) + "," + format_double(r.psnr) + "," +
           format_double(r.relative_error) + "," + std::to_string(r.iterations) + "," +
           (r.converged ? "true" : "false") + "," + r.image + "\n";
  }
  write_text(out_dir / "report.csv", csv);

  std::string summary = "rate,mean_psnr,runs\n";
  for (double rate : plan.rates) {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : report.rows) {
      if (r.rate == rate) {
        sum += r.psnr;
        ++count;
      }
    }
    report.mean_psnr.emplace_back(rate, sum / count);
    summary += format_double(rate) + "," + format_double(sum / count) + "," + std::to_string(count) + "\n";
  }
  write_text(out_dir / "summary.csv", summary);
  return report;
}

namespace {

struct Overrides {
  std::vector<std::uint64_t> seeds;
  std::vector<double> rates;
  std::string model;
  int workers = 0;
  std::string out;
};

void add_overrides(CLI::App* cmd, Overrides& o, bool with_workers) {
  cmd->add_option("--seed", o.seeds, "Matrix seed (repeatable; replaces the plan's seeds)");
  cmd->add_option("--rate", o.rates, "Measurement rate in (0, 1] (repeatable; replaces the plan's rates)");
  cmd->add_option("--model", o.model, "Forward model")->check(CLI::IsMember({"ideal", "finite", "diffraction"}));
  if (with_workers) cmd->add_option("--workers", o.workers, "Parallel cells")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "Output directory (default: the plan's output)");
}

ExperimentPlan load_with_overrides(const fs::path& path, const Overrides& o) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read plan: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw PlanError(path.string() + ": not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw PlanError(path.string() + ": plan must be a JSON object");
  if (!o.seeds.empty()) j["seeds"] = o.seeds;
  if (!o.rates.empty()) j["rates"] = o.rates;
  if (!o.model.empty()) j["model"] = o.model;
  if (o.workers > 0) j["workers"] = o.workers;
  ExperimentPlan plan = parse_plan(j.dump(), path.parent_path());
  if (!o.out.empty()) plan.output = o.out;
  return plan;
}

int reconstruct_command(const std::vector<std::string>& files, const std::string& plan_path,
                        const std::string& reference, const std::string& out_dir, std::ostream& out) {
  SolverConfig config;
  int factor = 2;
  if (!plan_path.empty()) {
    const ExperimentPlan plan = load_with_overrides(plan_path, {});
    config = plan.solver;
    factor = plan.superres_factor;
  }
  std::vector<MeasurementSet> sets;
  for (const auto& f : files) sets.push_back(read_measurements(fs::path(f)));
  const ReconstructionOutput r = reconstruct_sets(sets, config, factor);

  ensure_dir(out_dir);
  Metadata m = metrics(r);
  if (!reference.empty()) {
    const Image ref = read_pgm(reference).values;
    const Image stored = pgm_quantize(r.images.front().second);
    if (ref.rows() != stored.rows() || ref.cols() != stored.cols()) {
      throw DimensionError("reference " + reference + " is " + std::to_string(ref.rows()) + "x" +
                           std::to_string(ref.cols()) + ", reconstruction is " + std::to_string(stored.rows()) +
                           "x" + std::to_string(stored.cols()));
    }
    m["psnr"] = format_double(psnr(ref, stored));
    m["reference"] = fs::path(reference).filename().string();
  }
  for (const auto& [name, image] : r.images) write_pgm(fs::path(out_dir) / (name + ".pgm"), image);
  write_text(fs::path(out_dir) / "metrics.txt", format_metadata(m));
  out << "mode " << r.mode << ", " << r.info.iterations << " iterations, residual "
      << format_double(r.info.residual) << (r.info.converged ? "" : " (not converged)");
  if (m.count("psnr")) out << ", PSNR " << m["psnr"] << " dB";
  out << "\n";
  return r.info.converged ? kExitOk : kExitNotConverged;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lensless compressive imaging: simulate measurements and reconstruct images"};
  app.require_subcommand(1);

  std::string phantom_name;
  Index phantom_rows = 64, phantom_cols = 64;
  std::string phantom_out = ".";
  auto* phantom = app.add_subcommand("phantom", "Write a built-in test scene as 16-bit PGM");
  phantom->add_option("name", phantom_name, "rects, disk, point or ramp")->required();
  phantom->add_option("--rows", phantom_rows, "Image rows")->check(CLI::PositiveNumber);
  phantom->add_option("--cols", phantom_cols, "Image columns")->check(CLI::PositiveNumber);
  phantom->add_option("--out", phantom_out, "Output directory");

  std::string plan_path;
  Overrides measure_over;
  auto* measure = app.add_subcommand("measure", "Simulate measurements for every rate, seed and sensor of a plan");
  measure->add_option("--plan", plan_path, "Plan file (JSON)")->required();
  add_overrides(measure, measure_over, false);

  std::vector<std::string> recon_files;
  std::string recon_plan, reference, recon_out = "recon";
  auto* recon = app.add_subcommand("reconstruct", "Reconstruct from one or more measurement files");
  recon->add_option("files", recon_files, "Measurement files")->required();
  recon->add_option("--plan", recon_plan, "Plan file supplying the solver settings");
  recon->add_option("--reference", reference, "Reference PGM for PSNR");
  recon->add_option("--out", recon_out, "Output directory");

  Overrides sweep_over;
  auto* sweep = app.add_subcommand("sweep", "Measure and reconstruct over the plan's rates and seeds");
  sweep->add_option("--plan", plan_path, "Plan file (JSON)")->required();
  add_overrides(sweep, sweep_over, true);

  std::string inspect_file;
  auto* inspect = app.add_subcommand("inspect", "Print the header of a measurement file");
  inspect->add_option("file", inspect_file, "Measurement file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*phantom) {
      ensure_dir(phantom_out);
      const fs::path path = fs::path(phantom_out) / (phantom_name + ".pgm");
      write_pgm(path, make_phantom(phantom_name, phantom_rows, phantom_cols), {{"phantom", phantom_name}});
      out << path.string() << "\n";
      return kExitOk;
    }
    if (*measure) {
      const ExperimentPlan plan = load_with_overrides(plan_path, measure_over);
      for (const auto& p : measure_plan(plan, plan.output)) out << p.string() << "\n";
      return kExitOk;
    }
    if (*recon) return reconstruct_command(recon_files, recon_plan, reference, recon_out, out);
    if (*sweep) {
      const ExperimentPlan plan = load_with_overrides(plan_path, sweep_over);
      const SweepReport report = sweep_plan(plan, plan.output);
      out << "rate    mean PSNR (dB)\n";
      for (const auto& [rate, mean] : report.mean_psnr) {
        out << format_double(rate) << "    " << format_double(std::round(mean * 100.0) / 100.0) << "\n";
      }
      return kExitOk;
    }
    if (*inspect) {
      read_measurements(fs::path(inspect_file));
      std::ifstream in(inspect_file, std::ios::binary);
      std::string line;
      while (std::getline(in, line) && line != "---") out << line << "\n";
      return kExitOk;
    }
  } catch (const PlanError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace lensless
