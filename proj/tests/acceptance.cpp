// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include "lensless/commands.hpp"
#include "lensless/errors.hpp"
#include "lensless/forward.hpp"
#include "lensless/geometry.hpp"
#include "lensless/operator.hpp"
#include "lensless/phantom.hpp"
#include "lensless/recon.hpp"
#include "lensless/sensing.hpp"

#include <Eigen/QR>

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace lensless;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Vector random_vector(Rng& rng, Index n) {
  Vector v(n);
  for (Index k = 0; k < n; ++k) v(k) = 2.0 * rng.uniform() - 1.0;
  return v;
}

// Independent dense form of a sensing matrix: Sylvester entries
// (-1)^popcount(r & c) for Hadamard, the raw generator stream for dense.
Eigen::MatrixXd reference_matrix(const SensingMatrix& A) {
  const MatrixDescriptor& d = A.descriptor();
  Eigen::MatrixXd out(d.n_measurements, d.n_pixels);
  if (d.kind == MatrixKind::Dense) {
    Rng rng(d.seed);
    for (Index m = 0; m < d.n_measurements; ++m) {
      for (Index n = 0; n < d.n_pixels; ++n) out(m, n) = rng.uniform();
    }
    return out;
  }
  std::vector<Index> perm(static_cast<std::size_t>(d.order));
  if (d.permuted) {
    perm = seeded_permutation(d.seed, d.order);
  } else {
    for (Index k = 0; k < d.order; ++k) perm[k] = k;
  }
  for (Index m = 0; m < d.n_measurements; ++m) {
    for (Index n = 0; n < d.n_pixels; ++n) {
      const auto bits = static_cast<std::uint64_t>(d.row_ids[m]) & static_cast<std::uint64_t>(perm[n]);
      out(m, n) = std::popcount(bits) % 2 == 0 ? 1.0 : 0.0;
    }
  }
  return out;
}

Outcome operator_correctness() {
  double worst_apply = 0.0;
  double worst_adjoint = 0.0;
  int cases = 0;
  Rng rng(77);
  std::vector<SensingMatrix> matrices;
  for (const Index n : {16, 60, 64, 100, 256}) {
    for (const double rate : {0.25, 0.5, 1.0}) {
      matrices.push_back(SensingMatrix::hadamard(static_cast<std::uint64_t>(n) + 3, n, rate));
      matrices.push_back(SensingMatrix::hadamard(static_cast<std::uint64_t>(n) + 5, n, rate, false));
      matrices.push_back(SensingMatrix::dense(static_cast<std::uint64_t>(n) + 7, std::max<Index>(1, n * rate), n));
    }
  }
  for (const auto& A : matrices) {
    const Eigen::MatrixXd ref = reference_matrix(A);
    for (int t = 0; t < 3; ++t) {
      const Vector x = random_vector(rng, A.n_pixels());
      const Vector y = random_vector(rng, A.n_measurements());
      worst_apply = std::max(worst_apply, (A.apply(x) - ref * x).cwiseAbs().maxCoeff());
      worst_apply = std::max(worst_apply, (A.apply_adjoint(y) - ref.transpose() * y).cwiseAbs().maxCoeff());
      const double lhs = A.apply(x).dot(y);
      const double rhs = x.dot(A.apply_adjoint(y));
      worst_adjoint = std::max(worst_adjoint, std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300));
    }
    if (A.has_total_flux_row()) {
      worst_adjoint = std::max(worst_adjoint, adjoint_mismatch(sensing_operator(A, true), 11, 3));
    }
    ++cases;
  }
  return {worst_apply <= 1e-10 && worst_adjoint <= 1e-10,
          std::to_string(cases) + " matrices, max |fast - dense| " + fmt(worst_apply) + ", adjoint rel " +
              fmt(worst_adjoint)};
}

Outcome full_rate_recovery() {
  const Image truth = make_phantom("rects", 64, 64);
  const auto A = SensingMatrix::hadamard(1, 64 * 64, 1.0);
  SolverConfig c;
  c.tolerance = 1e-9;
  c.max_iterations = 1000;
  const ReconResult r = tv_reconstruct(A, A.apply(truth.reshaped()), 64, 64, c);
  const double err = relative_error(truth, r.image());
  return {err <= 1e-6, "rel err " + fmt(err) + " after " + std::to_string(r.iterations) + " iterations"};
}

Outcome rate_sweep() {
  const Image truth = make_phantom("rects", 64, 64);
  const double rates[3] = {0.125, 0.25, 0.5};
  double mean[3] = {0, 0, 0};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (int k = 0; k < 3; ++k) {
      const auto A = SensingMatrix::hadamard(seed, 64 * 64, rates[k]);
      const ReconResult r = tv_reconstruct(A, A.apply(truth.reshaped()), 64, 64, SolverConfig{});
      mean[k] += psnr(truth, r.image()) / 5.0;
    }
  }
  const bool increasing = mean[0] < mean[1] && mean[1] < mean[2];
  const bool gap = mean[2] - mean[0] >= 3.0;
  return {increasing && gap,
          "mean PSNR " + fmt(mean[0]) + " / " + fmt(mean[1]) + " / " + fmt(mean[2]) + " dB at 12.5 / 25 / 50%"};
}

double overlap(double a0, double a1, double b0, double b1) { return std::max(0.0, std::min(a1, b1) - std::max(a0, b0)); }

Outcome finite_forward() {
  const ApertureGrid grid(8, 8);
  const SceneGeometry geom(1.5, 20);
  const Index s = 4;
  const SensorSpec sensor = SensorSpec::rectangle("sq", Vec2(4, 4), 0.8, 0.8);
  Rng rng(404);
  Image radiance(40, 40);
  for (Index j = 0; j < 40; ++j) {
    for (Index i = 0; i < 40; ++i) radiance(i, j) = 100.0 * rng.uniform();
  }
  const PlanarScene scene = PlanarScene::covering(radiance, grid, geom, sensor.position, 1.0);
  const VirtualImage v = render_virtual(scene, sensor, geom, grid, s);
  const auto A = SensingMatrix::hadamard(2, 64, 1.0);
  const MeasurementSet ms = measure_finite(A, v, sensor, geom, grid);

  // I_f(i, j) = sum_q kappa_ij(q) v(q) with kappa_ij the exact overlap of
  // the sensor's scaled footprint centered at q with element E_ij.
  const double bw = alpha(geom) * 0.8;
  const double cell = 1.0 / static_cast<double>(s);
  Image oracle = Image::Zero(8, 8);
  for (Index i = 0; i < 8; ++i) {
    for (Index j = 0; j < 8; ++j) {
      double acc = 0.0;
      for (Index r = 0; r < v.values.rows(); ++r) {
        for (Index c = 0; c < v.values.cols(); ++c) {
          const double xc = (c + 0.5) * cell;
          const double yc = (r + 0.5) * cell;
          acc += overlap(xc - bw / 2, xc + bw / 2, j, j + 1.0) / bw *
                 overlap(yc - bw / 2, yc + bw / 2, i, i + 1.0) / bw * v.values(r, c);
        }
      }
      oracle(i, j) = acc;
    }
  }
  const Vector expected = A.apply(oracle.reshaped());
  const double err = (ms.values - expected).norm() / expected.norm();
  return {err <= 1e-6, "rel err " + fmt(err)};
}

Outcome deblurring() {
  // 8 x 8 elements, 8 x 8 sub-cells each; the source occupies sub-cell
  // (2, 2) of element (3, 4), 5/16 of an element from its top-left edges.
  const Index n = 8;
  const Index s = 8;
  const ApertureGrid grid(n, n);
  const SceneGeometry geom(1, 1000);
  const SensorSpec sensor = SensorSpec::rectangle("pix", Vec2(4, 4), 1.0, 1.0);
  const Index ti = 3, tj = 4;
  Image fine = Image::Zero(n * s, n * s);
  fine(ti * s + 2, tj * s + 2) = 1000.0;
  const PlanarScene scene = PlanarScene::covering(fine, grid, geom, sensor.position);
  const VirtualImage v = render_virtual(scene, sensor, geom, grid, s);
  const auto A = SensingMatrix::hadamard(1, n * n, 1.0);
  const MeasurementSet ms = measure_finite(A, v, sensor, geom, grid);
  const BlurKernel kernel = finite_sensor_kernel(sensor, geom, grid, s);

  SolverConfig c;
  c.max_iterations = 1000;
  const ReconResult corrected = finite_sensor_reconstruct(ms.values, A, kernel, grid, s, c, ReconGrid::Supersampled);
  const Image coarse = pixelize(corrected.image(), s);
  const double frac_corrected = coarse(ti, tj) / coarse.sum();
  const ReconResult plain = tv_reconstruct(A, ms.values, n, n, c);
  const double frac_plain = plain.image()(ti, tj) / plain.image().sum();
  return {frac_corrected >= 0.9 && frac_plain < 0.7,
          "energy in true pixel: blur-aware " + fmt(frac_corrected) + ", plain " + fmt(frac_plain)};
}

Outcome view_geometry() {
  bool exact = true;
  // Every case has alpha = 3/4 or 1/2, so the expected shifts are exact in binary.
  struct Case {
    double f, F, x1, y1, x2, y2, dx, dy;
  };
  const Case cases[] = {
      {1, 3, 0, 0, 4, 0, 3, 0},
      {1, 3, 1, 1, 4, 5, 2.25, 3},
      {0.5, 1.5, 2, 8, 0, 0, -1.5, -6},
      {2, 6, -1, 2, 7, 2, 6, 0},
      {1, 1, 0, 0, 0.5, -0.25, 0.25, -0.125},
  };
  for (const Case& k : cases) {
    const ViewMapping m = view_shift(SceneGeometry(k.f, k.F), SensorSpec::point("a", Vec2(k.x1, k.y1)),
                                     SensorSpec::point("b", Vec2(k.x2, k.y2)));
    exact = exact && m.shift.x() == k.dx && m.shift.y() == k.dy;
    exact = exact && m.shift.norm() == std::hypot(k.dx, k.dy);
  }
  double worst = 0.0;
  for (const double ratio : {100.0, 250.0, 1000.0, 1e4}) {
    for (const Vec2 d : {Vec2(1, 0), Vec2(3, 4), Vec2(-2, 7)}) {
      const ViewMapping m =
          view_shift(SceneGeometry(1, ratio), SensorSpec::point("a", Vec2::Zero()), SensorSpec::point("b", d));
      worst = std::max(worst, std::abs(m.shift.norm() - d.norm()) / d.norm());
    }
  }
  return {exact && worst <= 0.01,
          std::string("rational cases ") + (exact ? "exact" : "inexact") + ", far-limit deviation " + fmt(worst)};
}

Outcome joint_benefit() {
  const Index n = 32;
  const ApertureGrid grid(n, n);
  const SceneGeometry geom(1, 1000);
  const double d = 2.0 / alpha(geom);
  const SensorSpec s1 = SensorSpec::point("a", Vec2(16, 16));
  const SensorSpec s2 = SensorSpec::point("b", Vec2(16 + d, 16));
  const PlanarScene scene = PlanarScene::covering(make_phantom("rects", n + 4, n + 4), grid, geom, s1.position, 2.0);
  const Image view1 = pixelize(render_virtual(scene, s1, geom, grid, 1));
  const ViewMapping mapping = view_shift(geom, s1, s2);
  const ShiftOperator U(n, n, Vec2(std::round(mapping.shift.x()), std::round(mapping.shift.y())));
  const RegionMasks regions = common_region(grid, mapping);
  double joint = 0.0;
  double single = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto A = SensingMatrix::hadamard(seed, n * n, 0.25);
    const auto sets = multiview_measure(A, scene, {s1, s2}, geom, grid, AcquisitionSpec{});
    single += psnr(view1, tv_reconstruct(A, sets[0].values, n, n, SolverConfig{}).image()) / 5.0;
    joint += psnr(view1, joint_multiview_reconstruct(sets[0], sets[1], A, U, regions, SolverConfig{}).view_first) /
             5.0;
  }
  return {joint >= single, "mean PSNR of view 1: joint " + fmt(joint) + " dB, independent " + fmt(single) + " dB"};
}

Outcome superres() {
  const Index n = 8;
  const Index r = 2;
  const ApertureGrid grid(n, n);
  const SceneGeometry geom(1, 1000);
  const Image fine = make_phantom("rects", n * r, n * r);
  Image padded = Image::Zero(n * r + 4, n * r + 4);
  padded.block(2, 2, n * r, n * r) = fine;
  const SensorSpec s1 = SensorSpec::point("a", Vec2(4, 4));
  const double half = 0.5 / alpha(geom);
  const SensorSpec s2 = SensorSpec::point("b", Vec2(4 + half, 4 + half));
  const PlanarScene scene = PlanarScene::covering(padded, grid, geom, s1.position, 1.0);
  const auto A = SensingMatrix::hadamard(1, n * n, 1.0);

  std::vector<ViewData> views;
  Eigen::MatrixXd stacked(2 * n * n, n * n * r * r);
  Vector z(2 * n * n);
  int k = 0;
  for (const SensorSpec& s : {s1, s2}) {
    const Image pixels = pixelize(render_virtual(scene, s, geom, grid, r));
    const Vec2 offset = view_shift(geom, s1, s).shift;
    views.push_back({A.apply(pixels.reshaped()), offset});
    const LinearOperator D = downsample_operator(n, n, r, offset);
    Eigen::MatrixXd dm(n * n, n * n * r * r);
    for (Index c = 0; c < dm.cols(); ++c) dm.col(c) = D.apply(Vector::Unit(dm.cols(), c));
    stacked.middleRows(k * n * n, n * n) = A.materialize() * dm;
    z.segment(k * n * n, n * n) = views.back().z;
    ++k;
  }
  const Vector ls = stacked.completeOrthogonalDecomposition().solve(z);
  const double ls_err = relative_error(fine, ls.reshaped(n * r, n * r).array());
  const ReconResult res = superres_reconstruct(views, A, n, n, r, SolverConfig{});
  const double err = relative_error(fine, res.image());
  return {err <= 1.1 * ls_err, "rel err " + fmt(err) + ", least-squares oracle " + fmt(ls_err)};
}

Outcome diffraction() {
  const ApertureGrid grid(4, 4, 0.5);
  const SceneGeometry geom(1, 1000);
  const auto A = SensingMatrix::hadamard(3, 16, 1.0);
  double worst_kernel = 0.0;
  for (Index m = 0; m < A.n_measurements(); ++m) {
    const AperturePattern p = row_pattern(A, grid, m);
    const ComplexMatrix B = diffraction_kernel(p, 0.0, geom, grid);
    for (Index c = 0; c < 16; ++c) {
      const double t = p.transmittance.reshaped()(c);
      for (Index r = 0; r < 16; ++r) {
        worst_kernel = std::max(worst_kernel, std::abs(B(r, c) - std::complex<double>(t * grid.element_area(), 0)));
      }
    }
  }
  // Round trips over element sizes, sensor distances and wavenumbers; the
  // harder settings need several thousand iterations to reach the tolerance.
  const Image truth = make_phantom("ramp", 4, 4);
  SolverConfig c;
  c.tolerance = 1e-8;
  c.max_iterations = 10000;
  double worst = 0.0;
  for (const double es : {1.0, 0.5}) {
    for (const double f : {1.0, 2.0}) {
      for (const double k : {1.0, 3.0, 4.0}) {
        const DiffractionModel model(ApertureGrid(4, 4, es), SceneGeometry(f, 1000), k);
        const MeasurementSet ms = measure_diffracted(A, truth, model);
        const ReconResult r = diffraction_aware_reconstruct(ms.complex_values, A, model, c);
        worst = std::max(worst, relative_error(truth, r.image()));
      }
    }
  }
  return {worst_kernel <= 1e-12 && worst <= 1e-3,
          "k=0 kernel max dev " + fmt(worst_kernel) + ", worst k>0 round-trip rel err " + fmt(worst)};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = buf.str();
  }
  return files;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "lensless");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("lensless_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream plan(root / "plan.json");
    plan << R"({"rows": 16, "cols": 16, "rates": [0.25, 0.5], "seeds": [1, 2], "margin": 3, "noise_sigma": 0.5,
               "workers": 2,
               "sensors": [{"id": "a", "position": [8, 8]}, {"id": "b", "position": [10.002, 8]}]})";
  }
  const auto pipeline = [&](const std::string& tag) {
    const fs::path out = root / tag;
    int code = cli({"measure", "--plan", (root / "plan.json").string(), "--out", (out / "meas").string()});
    code |= cli({"reconstruct", (out / "meas" / "meas_r0.5_s1_a.txt").string(),
                 (out / "meas" / "meas_r0.5_s1_b.txt").string(), "--plan", (root / "plan.json").string(),
                 "--reference", (out / "meas" / "truth_a.pgm").string(), "--out", (out / "joint").string()}) &
            ~kExitNotConverged;
    code |= cli({"sweep", "--plan", (root / "plan.json").string(), "--out", (out / "sweep").string()});
    return code;
  };
  const int a = pipeline("run1");
  const int b = pipeline("run2");
  const auto t1 = tree(root / "run1");
  const auto t2 = tree(root / "run2");
  const bool same = a == 0 && b == 0 && !t1.empty() && t1 == t2;
  fs::remove_all(root);
  return {same, std::to_string(t1.size()) + " files compared, " + (same ? "byte-identical" : "differ")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"operator correctness", operator_correctness},
      {"full-rate exact recovery", full_rate_recovery},
      {"rate sweep", rate_sweep},
      {"finite-sensor forward equivalence", finite_forward},
      {"de-blurring", deblurring},
      {"multi-view geometry", view_geometry},
      {"joint reconstruction benefit", joint_benefit},
      {"super-resolution", superres},
      {"diffraction consistency", diffraction},
      {"determinism", determinism},
  };
  int failed = 0;
  int index = 0;
  for (const auto& [name, check] : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  %2d. %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", index, name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
