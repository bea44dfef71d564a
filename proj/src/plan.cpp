#include "lensless/plan.hpp"

#include "lensless/image_io.hpp"
#include "lensless/phantom.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace lensless {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kTopKeys = {
    "scene",  "scene_file", "margin",      "rows",       "cols",           "element_size", "f",
    "F",      "sensors",    "matrix",      "permuted",   "rates",          "seeds",        "model",
    "supersample", "wavenumber", "quadrature", "noise_sigma", "superres_factor", "workers", "output",
    "solver"};
const std::set<std::string> kSolverKeys = {"mu",        "sigma",         "sigma_from_areas", "max_iterations",
                                           "tolerance", "tv",            "fidelity",         "beta",
                                           "gamma",     "cg_iterations", "cg_tolerance",     "nonnegative"};
const std::set<std::string> kSensorKeys = {"id", "position", "shape", "width", "height", "plane_offset"};

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw PlanError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw PlanError(std::string("bad value for '") + key + "': " + e.what());
  }
}

SensorSpec parse_sensor(const json& j, std::size_t index) {
  if (!j.is_object()) throw PlanError("sensors[" + std::to_string(index) + "] must be an object");
  reject_unknown(j, kSensorKeys, "sensors[" + std::to_string(index) + "]");
  const std::string id = get<std::string>(j, "id", "s" + std::to_string(index + 1));
  const auto pos = get<std::vector<double>>(j, "position", {});
  if (pos.size() != 2) throw PlanError("sensor '" + id + "' needs position [x, y]");
  const std::string shape = get<std::string>(j, "shape", "point");
  SensorSpec s;
  if (shape == "point") {
    s = SensorSpec::point(id, Vec2(pos[0], pos[1]));
  } else if (shape == "rectangle") {
    if (!j.contains("width")) throw PlanError("rectangular sensor '" + id + "' needs a width");
    const double w = get<double>(j, "width", 0.0);
    s = SensorSpec::rectangle(id, Vec2(pos[0], pos[1]), w, get<double>(j, "height", w));
  } else {
    throw PlanError("sensor '" + id + "': shape must be point or rectangle");
  }
  s.plane_offset = get<double>(j, "plane_offset", 0.0);
  return s;
}

}  // namespace

void ExperimentPlan::validate() const {
  if (rates.empty()) throw PlanError("the plan needs at least one rate");
  for (double r : rates) {
    if (!(r > 0.0 && r <= 1.0)) throw PlanError("rates must lie in (0, 1], got " + format_double(r));
  }
  if (seeds.empty()) throw PlanError("the plan needs at least one seed");
  if (sensors.empty()) throw PlanError("the plan needs at least one sensor");
  std::set<std::string> ids;
  for (const auto& s : sensors) {
    if (!ids.insert(s.id).second) throw PlanError("duplicate sensor id '" + s.id + "'");
  }
  if (acquisition.supersample < 1) throw PlanError("supersample must be at least 1");
  if (acquisition.diffraction_quadrature < 1) throw PlanError("quadrature must be at least 1");
  if (acquisition.wavenumber < 0.0) throw PlanError("wavenumber must be non-negative");
  if (acquisition.noise.sigma < 0.0) throw PlanError("noise_sigma must be non-negative");
  if (margin < 0.0) throw PlanError("margin must be non-negative");
  if (superres_factor < 1) throw PlanError("superres_factor must be at least 1");
  if (workers < 1) throw PlanError("workers must be at least 1");
  try {
    solver.validate();
  } catch (const std::invalid_argument& e) {
    throw PlanError(std::string("solver: ") + e.what());
  }
}

ExperimentPlan parse_plan(const std::string& json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw PlanError(std::string("plan is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw PlanError("plan must be a JSON object");
  reject_unknown(j, kTopKeys, "plan");

  ExperimentPlan p;
  const auto resolve = [&base_dir](const std::string& s) {
    const fs::path path(s);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  p.phantom = get<std::string>(j, "scene", p.phantom);
  if (j.contains("scene_file")) p.scene_file = resolve(get<std::string>(j, "scene_file", ""));
  p.margin = get<double>(j, "margin", p.margin);
  try {
    p.grid = ApertureGrid(get<Index>(j, "rows", 64), get<Index>(j, "cols", 64), get<double>(j, "element_size", 1.0));
    p.geometry = SceneGeometry(get<double>(j, "f", 1.0), get<double>(j, "F", 1000.0));
  } catch (const PlanError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw PlanError(e.what());
  }

  if (j.contains("sensors")) {
    const json& list = j.at("sensors");
    if (!list.is_array()) throw PlanError("sensors must be a list");
    for (std::size_t k = 0; k < list.size(); ++k) {
      try {
        p.sensors.push_back(parse_sensor(list[k], k));
      } catch (const PlanError&) {
        throw;
      } catch (const std::invalid_argument& e) {
        throw PlanError(e.what());
      }
    }
  } else {
    p.sensors.push_back(SensorSpec::point("s1", Vec2(p.grid.width() / 2.0, p.grid.height() / 2.0)));
  }

  try {
    p.matrix = matrix_kind_from_string(get<std::string>(j, "matrix", "hadamard"));
    p.acquisition.model = forward_model_from_string(get<std::string>(j, "model", "ideal"));
  } catch (const PlanError&) {
    throw;
  } catch (const std::exception& e) {
    throw PlanError(e.what());
  }
  p.permuted = get<bool>(j, "permuted", true);
  p.rates = get<std::vector<double>>(j, "rates", p.rates);
  p.seeds = get<std::vector<std::uint64_t>>(j, "seeds", p.seeds);
  p.acquisition.supersample = get<Index>(j, "supersample", p.acquisition.model == ForwardModel::Finite ? 4 : 1);
  p.acquisition.wavenumber = get<double>(j, "wavenumber", 0.0);
  p.acquisition.diffraction_quadrature = get<Index>(j, "quadrature", 4);
  p.acquisition.noise.sigma = get<double>(j, "noise_sigma", 0.0);
  p.superres_factor = get<int>(j, "superres_factor", p.superres_factor);
  p.workers = get<int>(j, "workers", p.workers);
  p.output = resolve(get<std::string>(j, "output", "out"));

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    if (!s.is_object()) throw PlanError("solver must be an object");
    reject_unknown(s, kSolverKeys, "solver");
    SolverConfig& c = p.solver;
    c.mu = get<double>(s, "mu", c.mu);
    c.sigma = get<double>(s, "sigma", c.sigma);
    c.sigma_from_areas = get<bool>(s, "sigma_from_areas", c.sigma_from_areas);
    c.max_iterations = get<int>(s, "max_iterations", c.max_iterations);
    c.tolerance = get<double>(s, "tolerance", c.tolerance);
    c.beta = get<double>(s, "beta", c.beta);
    c.gamma = get<double>(s, "gamma", c.gamma);
    c.cg_iterations = get<int>(s, "cg_iterations", c.cg_iterations);
    c.cg_tolerance = get<double>(s, "cg_tolerance", c.cg_tolerance);
    c.nonnegative = get<bool>(s, "nonnegative", c.nonnegative);
    try {
      if (s.contains("tv")) c.tv = tv_variant_from_string(get<std::string>(s, "tv", ""));
      if (s.contains("fidelity")) c.fidelity = fidelity_from_string(get<std::string>(s, "fidelity", ""));
    } catch (const std::exception& e) {
      throw PlanError(std::string("solver: ") + e.what());
    }
  }
  p.validate();
  return p;
}

ExperimentPlan load_plan(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read plan: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  fs::path base = path.parent_path();
  return parse_plan(buf.str(), base);
}

Image load_scene(const ExperimentPlan& plan) {
  if (!plan.scene_file.empty()) return read_pgm(plan.scene_file).values;
  const Index s = plan.acquisition.supersample;
  try {
    return make_phantom(plan.phantom, plan.grid.rows() * s, plan.grid.cols() * s);
  } catch (const std::invalid_argument& e) {
    throw PlanError(e.what());
  }
}

SensingMatrix make_matrix(const ExperimentPlan& plan, double rate, std::uint64_t seed) {
  const Index n = plan.grid.pixel_count();
  if (plan.matrix == MatrixKind::Dense) {
    const Index m = std::max<Index>(1, static_cast<Index>(std::llround(rate * static_cast<double>(n))));
    return SensingMatrix::dense(seed, m, n);
  }
  return SensingMatrix::hadamard(seed, n, rate, plan.permuted);
}

NoiseSpec noise_for(const ExperimentPlan& plan, std::uint64_t seed) {
  return {plan.acquisition.noise.sigma, seed ^ 0x6e6f697365ULL};
}

}  // namespace lensless
