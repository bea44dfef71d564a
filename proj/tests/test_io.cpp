#include "lensless/image_io.hpp"
#include "lensless/measurement_io.hpp"
#include "lensless/plan.hpp"

#include "lensless/errors.hpp"
#include "lensless/phantom.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace lensless;

namespace {

MeasurementSet sample_set() {
  const auto A = SensingMatrix::hadamard(7, 48, 0.5);
  MeasurementSet ms = measure_ideal(A, make_phantom("rects", 6, 8), {0.25, 99});
  ms.sensor = SensorSpec::rectangle("cam", Vec2(3.5, 2.25), 0.5, 0.75);
  ms.sensor.plane_offset = 0.0;
  ms.element_size = 0.1;
  ms.sensor_distance = 2.0;
  ms.scene_distance = 300.0;
  ms.scene_hash = "abc123";
  return ms;
}

std::string replace_line(const std::string& text, const std::string& prefix, const std::string& line) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string s;
  while (std::getline(in, s)) out << (s.rfind(prefix, 0) == 0 ? line : s) << '\n';
  return out.str();
}

}  // namespace

TEST_CASE("metadata text round trip") {
  const Metadata m = {{"rows", "4"}, {"note", "two words"}, {"scale", "0.5"}};
  CHECK(parse_metadata(format_metadata(m)) == m);
  CHECK(parse_metadata("# comment\n\nkey: value\n") == Metadata{{"key", "value"}});
  CHECK_THROWS_AS(parse_metadata("no separator\n"), FormatError);
}

TEST_CASE("format_double reads back exactly") {
  for (const double v : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5, 0.0}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.125) == "0.125");
  CHECK(format_double(3.0) == "3");
}

TEST_CASE("16-bit PGM round trip") {
  test::TempDir dir("pgm");
  SUBCASE("integer image is exact") {
    Image img(3, 5);
    for (Index j = 0; j < 5; ++j) {
      for (Index i = 0; i < 3; ++i) img(i, j) = static_cast<double>(1000 * i + 37 * j);
    }
    img(2, 4) = 65535;
    write_pgm(dir / "a.pgm", img, {{"sensor", "s1"}});
    const StoredImage back = read_pgm(dir / "a.pgm");
    CHECK((back.values == img).all());
    CHECK(back.metadata.at("sensor") == "s1");
    CHECK(back.metadata.at("rows") == "3");
    CHECK(back.metadata.at("cols") == "5");
    CHECK(back.metadata.at("scale") == "1");
    const std::string bytes = test::slurp(dir / "a.pgm");
    CHECK(bytes.rfind("P5\n5 3\n65535\n", 0) == 0);
    CHECK(bytes.size() == std::string("P5\n5 3\n65535\n").size() + 2 * 15);
    // Big-endian: pixel (0, 1) = 37 = 0x0025 is the second sample of the first raster row.
    const std::size_t off = std::string("P5\n5 3\n65535\n").size();
    CHECK(static_cast<unsigned char>(bytes[off + 2]) == 0x00);
    CHECK(static_cast<unsigned char>(bytes[off + 3]) == 0x25);
  }
  SUBCASE("values above the 16-bit range are scaled") {
    Image img = Image::Zero(2, 2);
    img(0, 0) = 131070.0;
    img(1, 1) = 1000.0;
    write_pgm(dir / "b.pgm", img);
    const StoredImage back = read_pgm(dir / "b.pgm");
    CHECK((back.values - pgm_quantize(img)).abs().maxCoeff() == 0.0);
    CHECK(back.values(0, 0) == 131070.0);
    CHECK(std::abs(back.values(1, 1) - 1000.0) <= 1.0);
  }
  SUBCASE("fractional values quantize to the nearest gray level") {
    Image img(1, 3);
    img << 0.4, 0.6, 2.5;
    write_pgm(dir / "c.pgm", img);
    CHECK((read_pgm(dir / "c.pgm").values == pgm_quantize(img)).all());
    CHECK(pgm_quantize(img)(0) == 0.0);
    CHECK(pgm_quantize(img)(1) == 1.0);
  }
  SUBCASE("invalid images are rejected") {
    Image neg = Image::Ones(2, 2);
    neg(1, 0) = -1;
    CHECK_THROWS_AS(write_pgm(dir / "n.pgm", neg), std::invalid_argument);
    neg(1, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(write_pgm(dir / "n.pgm", neg), std::invalid_argument);
    CHECK_THROWS_AS(write_pgm(dir / "n.pgm", Image(0, 0)), DimensionError);
  }
  SUBCASE("malformed files are rejected") {
    test::spit(dir / "p2.pgm", "P2\n2 2\n255\n1 2 3 4\n");
    CHECK_THROWS_AS(read_pgm(dir / "p2.pgm"), FormatError);
    test::spit(dir / "short.pgm", std::string("P5\n2 2\n65535\n\x00\x01", 15));
    CHECK_THROWS_AS(read_pgm(dir / "short.pgm"), FormatError);
    CHECK_THROWS_AS(read_pgm(dir / "missing.pgm"), FormatError);
  }
  SUBCASE("PGM without sidecar") {
    test::spit(dir / "plain.pgm", std::string("P5\n2 1\n65535\n\x01\x00\x00\x02", 17));
    const StoredImage back = read_pgm(dir / "plain.pgm");
    CHECK(back.values(0, 0) == 256.0);
    CHECK(back.values(0, 1) == 2.0);
  }
}

TEST_CASE("real measurement sets round trip exactly") {
  const MeasurementSet ms = sample_set();
  std::stringstream buf;
  write_measurements(buf, ms);
  const MeasurementSet back = read_measurements(buf);
  CHECK((back.values.array() == ms.values.array()).all());
  CHECK(back.matrix == ms.matrix);
  CHECK(back.model == ForwardModel::Ideal);
  CHECK(back.noise.sigma == 0.25);
  CHECK(back.noise.seed == 99);
  CHECK(back.sensor.id == "cam");
  CHECK(back.sensor.position == ms.sensor.position);
  REQUIRE_FALSE(back.sensor.is_point());
  CHECK(std::get<RectangleShape>(back.sensor.shape).width == 0.5);
  CHECK(std::get<RectangleShape>(back.sensor.shape).height == 0.75);
  CHECK(back.rows == 6);
  CHECK(back.cols == 8);
  CHECK(back.element_size == 0.1);
  CHECK(back.sensor_distance == 2.0);
  CHECK(back.scene_distance == 300.0);
  CHECK(back.scene_hash == "abc123");

  std::stringstream again;
  write_measurements(again, back);
  CHECK(again.str() == buf.str());
}

TEST_CASE("the header lists descriptor, sensor, model and scene") {
  const std::string h = measurement_header(sample_set());
  for (const char* key : {"kind: hadamard", "seed: 7", "n_pixels: 48", "n_measurements: 24", "order: 64",
                          "row_ids: 0 ", "sensor_id: cam", "model: ideal", "noise_sigma: 0.25", "rows: 6",
                          "cols: 8", "scene_hash: abc123"}) {
    CAPTURE(key);
    CHECK(h.find(key) != std::string::npos);
  }
}

TEST_CASE("complex measurement sets round trip exactly") {
  const ApertureGrid grid(4, 4);
  const SceneGeometry geom(2, 500);
  const DiffractionModel model(grid, geom, 3.0, 2);
  const auto A = SensingMatrix::hadamard(1, 16, 0.5);
  const MeasurementSet ms = measure_diffracted(A, make_phantom("ramp", 4, 4), model);
  std::stringstream buf;
  write_measurements(buf, ms);
  const MeasurementSet back = read_measurements(buf);
  REQUIRE(back.is_complex());
  CHECK((back.complex_values.array() == ms.complex_values.array()).all());
  CHECK(back.wavenumber == 3.0);
  CHECK(back.quadrature == 2);
}

TEST_CASE("dense descriptors rebuild the same matrix") {
  const auto A = SensingMatrix::dense(12, 10, 16);
  MeasurementSet ms = measure_ideal(A, make_phantom("disk", 4, 4));
  ms.rows = ms.cols = 4;
  std::stringstream buf;
  write_measurements(buf, ms);
  const MeasurementSet back = read_measurements(buf);
  CHECK(test::max_abs(SensingMatrix::from_descriptor(back.matrix).materialize() - A.materialize()) == 0.0);
}

TEST_CASE("malformed measurement files are rejected") {
  std::stringstream buf;
  write_measurements(buf, sample_set());
  const std::string good = buf.str();
  const auto reject = [](const std::string& text) {
    CAPTURE(text);
    std::istringstream in(text);
    CHECK_THROWS_AS(read_measurements(in), FormatError);
  };
  reject(good.substr(0, good.find("---")));
  reject(replace_line(good, "n_pixels:", "n_pixels: 50"));
  reject(replace_line(good, "n_measurements:", "n_measurements: 30"));
  reject(replace_line(good, "model:", "model: holographic"));
  reject(replace_line(good, "seed:", "seed: many"));
  reject(replace_line(good, "kind:", ""));
  reject(replace_line(good, "row_ids:", "row_ids: 0 1 2"));
  reject(good + "1.5\n");
  {
    std::string bad = good;
    bad.replace(bad.rfind('\n', bad.size() - 2) + 1, std::string::npos, "abc\n");
    reject(bad);
  }
  CHECK_THROWS_AS(read_measurements(std::filesystem::path("/nonexistent/meas.txt")), FormatError);
}

TEST_CASE("measurement files on disk") {
  test::TempDir dir("meas");
  const MeasurementSet ms = sample_set();
  write_measurements(dir / "m.txt", ms);
  const MeasurementSet back = read_measurements(dir / "m.txt");
  CHECK((back.values.array() == ms.values.array()).all());
  CHECK(test::slurp(dir / "m.txt").rfind(measurement_header(ms), 0) == 0);
}

TEST_CASE("plan defaults") {
  const ExperimentPlan p = parse_plan("{}");
  CHECK(p.phantom == "rects");
  CHECK(p.grid.rows() == 64);
  CHECK(p.grid.cols() == 64);
  CHECK(p.geometry.sensor_distance() == 1.0);
  CHECK(p.geometry.scene_distance() == 1000.0);
  REQUIRE(p.sensors.size() == 1);
  CHECK(p.sensors[0].is_point());
  CHECK(p.sensors[0].position == Vec2(32, 32));
  CHECK(p.matrix == MatrixKind::PermutedHadamard);
  CHECK(p.rates == std::vector<double>{1.0});
  CHECK(p.seeds == std::vector<std::uint64_t>{1});
  CHECK(p.acquisition.model == ForwardModel::Ideal);
  CHECK(p.acquisition.supersample == 1);
  CHECK(p.solver.mu == 256.0);
  CHECK(p.solver.tolerance == 1e-4);
  CHECK(p.solver.max_iterations == 300);
}

TEST_CASE("plan with every section") {
  const std::string text = R"({
    "scene": "disk", "rows": 16, "cols": 12, "element_size": 0.5, "f": 2, "F": 400, "margin": 1,
    "sensors": [{"id": "left", "position": [2, 4]},
                {"id": "right", "position": [4, 4], "shape": "rectangle", "width": 0.5, "height": 0.25}],
    "matrix": "dense", "rates": [0.25, 0.5], "seeds": [3, 4, 5], "model": "finite",
    "noise_sigma": 0.1, "workers": 2, "output": "results",
    "solver": {"mu": 64, "tolerance": 1e-6, "max_iterations": 50, "tv": "isotropic", "fidelity": "penalized",
               "sigma_from_areas": true}
  })";
  const ExperimentPlan p = parse_plan(text, "/data/plans");
  CHECK(p.phantom == "disk");
  CHECK(p.grid == ApertureGrid(16, 12, 0.5));
  CHECK(p.geometry.scene_distance() == 400.0);
  CHECK(p.margin == 1.0);
  REQUIRE(p.sensors.size() == 2);
  CHECK(p.sensors[1].id == "right");
  CHECK(p.sensors[1].area() == doctest::Approx(0.125));
  CHECK(p.matrix == MatrixKind::Dense);
  CHECK(p.rates == std::vector<double>{0.25, 0.5});
  CHECK(p.seeds == std::vector<std::uint64_t>{3, 4, 5});
  CHECK(p.acquisition.model == ForwardModel::Finite);
  CHECK(p.acquisition.supersample == 4);
  CHECK(p.acquisition.noise.sigma == 0.1);
  CHECK(p.workers == 2);
  CHECK(p.output == std::filesystem::path("/data/plans/results"));
  CHECK(p.solver.mu == 64.0);
  CHECK(p.solver.tv == TvVariant::Isotropic);
  CHECK(p.solver.fidelity == Fidelity::Penalized);
  CHECK(p.solver.sigma_from_areas);

  const SensingMatrix A = make_matrix(p, 0.25, 4);
  CHECK(A.kind() == MatrixKind::Dense);
  CHECK(A.n_pixels() == 192);
  CHECK(A.n_measurements() == 48);
  CHECK(noise_for(p, 4).seed != 4);
  CHECK(noise_for(p, 4).sigma == 0.1);
}

TEST_CASE("invalid plans are usage errors") {
  for (const char* text : {
           "not json",
           "[1, 2]",
           R"({"rates": []})",
           R"({"rates": [0]})",
           R"({"rates": [1.5]})",
           R"({"seeds": []})",
           R"({"bogus": 1})",
           R"({"solver": {"mu": -1}})",
           R"({"solver": {"speed": 3}})",
           R"({"solver": {"tv": "fancy"}})",
           R"({"model": "holographic"})",
           R"({"matrix": "circulant"})",
           R"({"rows": "many"})",
           R"({"sensors": [{"id": "a", "position": [1]}]})",
           R"({"sensors": [{"id": "a", "position": [1, 1]}, {"id": "a", "position": [2, 2]}]})",
           R"({"sensors": [{"id": "a", "position": [1, 1], "shape": "rectangle"}]})",
           R"({"workers": 0})",
       }) {
    CAPTURE(text);
    CHECK_THROWS_AS(parse_plan(text), PlanError);
  }
}

TEST_CASE("plan scenes") {
  test::TempDir dir("plan");
  const ExperimentPlan p = parse_plan(R"({"rows": 8, "cols": 8, "scene": "point"})");
  const Image scene = load_scene(p);
  CHECK(scene.rows() == 8);
  CHECK(scene.cols() == 8);
  CHECK((scene > 0).count() == 1);

  Image custom = make_phantom("ramp", 8, 8);
  write_pgm(dir / "scene.pgm", custom);
  test::spit(dir / "plan.json", R"({"rows": 8, "cols": 8, "scene_file": "scene.pgm"})");
  const ExperimentPlan q = load_plan(dir / "plan.json");
  CHECK(q.scene_file == dir / "scene.pgm");
  CHECK((load_scene(q) == custom).all());

  test::spit(dir / "bad.json", R"({"rows": 8, "cols": 8, "scene": "galaxy"})");
  CHECK_THROWS_AS(load_scene(load_plan(dir / "bad.json")), std::invalid_argument);
}
