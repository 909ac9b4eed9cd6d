#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "xmodal/io.hpp"
#include "xmodal/synthscene.hpp"

using namespace xmodal;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("xmodal_io_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const char* name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("PFM depth round trip preserves float values and invalidity") {
  TempDir tmp;
  Rng rng(1);
  DepthMap map(7, 5);
  for (size_t i = 0; i < map.values.size(); ++i) {
    map.values[i] = static_cast<double>(static_cast<float>(rng.uniform(0.1, 50.0)));
    map.valid[i] = rng.uniform() > 0.25;
  }
  write_pfm(tmp.file("d.pfm"), map);
  const DepthMap back = read_pfm(tmp.file("d.pfm"));
  REQUIRE(back.rows() == 7);
  REQUIRE(back.cols() == 5);
  for (size_t i = 0; i < map.values.size(); ++i) {
    CHECK(back.valid[i] == map.valid[i]);
    if (map.valid[i]) CHECK(back.values[i] == map.values[i]);
  }
}

TEST_CASE("PFM scanlines are stored bottom-up with little-endian scale -1") {
  TempDir tmp;
  DepthMap map(2, 1, 0.0, true);
  map.values(0, 0) = 1.0;  // top row
  map.values(1, 0) = 2.0;  // bottom row
  write_pfm(tmp.file("order.pfm"), map);
  std::ifstream in(tmp.file("order.pfm"), std::ios::binary);
  std::string header;
  std::getline(in, header);
  CHECK(header == "Pf");
  std::getline(in, header);
  CHECK(header == "1 2");
  std::getline(in, header);
  CHECK(header == "-1.0");
  float first, second;
  in.read(reinterpret_cast<char*>(&first), 4);
  in.read(reinterpret_cast<char*>(&second), 4);
  CHECK(first == 2.0f);   // bottom row first
  CHECK(second == 1.0f);
}

TEST_CASE("PFM grid I/O keeps zeros and negatives for non-depth rasters") {
  TempDir tmp;
  Grid<double> g(2, 2, 0.0);  // dyadic values survive the float32 round trip
  g(0, 0) = 0.0;
  g(0, 1) = -3.5;
  g(1, 0) = 7.25;
  g(1, 1) = 0.015625;
  write_pfm_grid(tmp.file("g.pfm"), g);
  const PfmGrid back = read_pfm_grid(tmp.file("g.pfm"));
  for (size_t i = 0; i < g.size(); ++i) {
    CHECK(back.finite[i]);
    CHECK(back.values[i] == g[i]);
  }
}

TEST_CASE("big-endian PFM input (positive scale) is byte-swapped on read") {
  TempDir tmp;
  std::ofstream out(tmp.file("be.pfm"), std::ios::binary);
  out << "Pf\n1 1\n1.0\n";
  const float v = 3.5f;
  unsigned char b[4];
  std::memcpy(b, &v, 4);
  if constexpr (std::endian::native == std::endian::little) {
    std::swap(b[0], b[3]);
    std::swap(b[1], b[2]);
  }
  out.write(reinterpret_cast<const char*>(b), 4);
  out.close();
  const DepthMap map = read_pfm(tmp.file("be.pfm"));
  REQUIRE(map.valid(0, 0));
  CHECK(map.values(0, 0) == 3.5);
}

TEST_CASE("16-bit PGM samples are big-endian") {
  TempDir tmp;
  ThermalImageRaw img(1, 2, 0);
  img(0, 0) = 0x0102;
  img(0, 1) = 0xFFEE;
  write_pgm16(tmp.file("t.pgm"), img);
  std::ifstream in(tmp.file("t.pgm"), std::ios::binary);
  std::string line;
  std::getline(in, line);  // P5
  std::getline(in, line);  // 2 1
  std::getline(in, line);  // 65535
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  CHECK(bytes[0] == 0x01);
  CHECK(bytes[1] == 0x02);
  CHECK(bytes[2] == 0xFF);
  CHECK(bytes[3] == 0xEE);
  const ThermalImageRaw back = read_pgm16(tmp.file("t.pgm"));
  CHECK(back(0, 0) == 0x0102);
  CHECK(back(0, 1) == 0xFFEE);
}

TEST_CASE("8-bit PGM reads normalize by maxval") {
  TempDir tmp;
  std::ofstream out(tmp.file("small.pgm"), std::ios::binary);
  out << "P5\n# comment line\n2 1\n255\n";
  out.put(static_cast<char>(0));
  out.put(static_cast<char>(255));
  out.close();
  const Grid<double> g = read_pgm_normalized(tmp.file("small.pgm"));
  CHECK(g(0, 0) == 0.0);
  CHECK(g(0, 1) == 1.0);
}

TEST_CASE("PPM round trip") {
  TempDir tmp;
  Image3 img(2, 2, 3, 0.0);
  img.at(0, 0, 0) = 1.0;
  img.at(0, 1, 1) = 0.5;
  img.at(1, 0, 2) = 0.25;
  write_ppm(tmp.file("c.ppm"), img);
  const Image3 back = read_ppm(tmp.file("c.ppm"));
  CHECK(back.at(0, 0, 0) == 1.0);
  CHECK(back.at(0, 1, 1) == Catch::Approx(0.5).margin(1.0 / 255.0));
  CHECK(back.at(1, 0, 2) == Catch::Approx(0.25).margin(1.0 / 255.0));
}

TEST_CASE("feature map binary round trip and header validation") {
  TempDir tmp;
  Rng rng(4);
  FeatureMap fm(3, 4, 2, 0.0);
  for (auto& v : fm.raw()) v = static_cast<double>(static_cast<float>(rng.uniform(-2, 2)));
  write_feature_map(tmp.file("f.bin"), fm);
  CHECK(fs::file_size(tmp.file("f.bin")) == 16 + 3 * 4 * 2 * 4);
  const FeatureMap back = read_feature_map(tmp.file("f.bin"));
  CHECK(back.rows() == 3);
  CHECK(back.cols() == 4);
  CHECK(back.channels() == 2);
  for (size_t i = 0; i < fm.raw().size(); ++i) CHECK(back.raw()[i] == fm.raw()[i]);

  std::ofstream bad(tmp.file("bad.bin"), std::ios::binary);
  bad << "nonsense data here";
  bad.close();
  CHECK_THROWS_AS(read_feature_map(tmp.file("bad.bin")), io_error);
}

TEST_CASE("rig calibration JSON round trip and validation") {
  TempDir tmp;
  RigCalibration rig;
  rig.rgb = CameraIntrinsics(70, 71, 31.5, 23.5, 64, 48);
  rig.thermal = CameraIntrinsics(80, 81, 32.5, 24.5, 66, 50);
  rig.T_thermal_rgb = RigidTransform(rotation_y(0.01), {-0.2, 0.01, 0.002});
  write_json_file(tmp.file("calib.json"), rig_calibration_to_json(rig));
  const RigCalibration back = load_rig_calibration(tmp.file("calib.json"));
  CHECK(back.rgb == rig.rgb);
  CHECK(back.thermal == rig.thermal);
  CHECK(back.T_thermal_rgb.rotation.isApprox(rig.T_thermal_rgb.rotation, 1e-15));
  CHECK(back.T_thermal_rgb.translation.isApprox(rig.T_thermal_rgb.translation, 1e-15));

  json bad = rig_calibration_to_json(rig);
  bad["T_thermal_rgb"][15] = 2.0;  // broken homogeneous row
  write_json_file(tmp.file("bad.json"), bad);
  CHECK_THROWS_AS(load_rig_calibration(tmp.file("bad.json")), io_error);

  json skew = rig_calibration_to_json(rig);
  skew["T_thermal_rgb"][0] = 1.5;  // not orthonormal
  write_json_file(tmp.file("skew.json"), skew);
  CHECK_THROWS_AS(load_rig_calibration(tmp.file("skew.json")), io_error);

  CHECK_THROWS_AS(load_rig_calibration(tmp.file("missing.json")), io_error);
}

TEST_CASE("XYZ text round trip") {
  TempDir tmp;
  const std::vector<Eigen::Vector3d> pts = {{1.5, -2.25, 3.0}, {0, 0, 0.125}};
  write_xyz(tmp.file("cloud.xyz"), pts);
  const auto back = read_xyz(tmp.file("cloud.xyz"));
  REQUIRE(back.size() == 2);
  CHECK(back[0].isApprox(pts[0], 1e-12));
  CHECK(back[1].isApprox(pts[1], 1e-12));
}

TEST_CASE("loss reports serialize name, value, kept count and gradient norms") {
  LossResult res;
  res.value = 1.25;
  res.num_pixels_kept = 42;
  Grid<double> g(1, 2, 3.0);
  res.gradients.emplace("confidence", g);
  const json j = loss_report_json("laplacian_nll", res);
  CHECK(j.at("name") == "laplacian_nll");
  CHECK(j.at("value") == 1.25);
  CHECK(j.at("num_pixels_kept") == 42);
  CHECK(j.at("grad_norms").at("confidence").get<double>() ==
        Catch::Approx(std::sqrt(18.0)).margin(1e-12));
}

TEST_CASE("unknown config keys are rejected") {
  json j = {{"known", 1}, {"mystery", 2}};
  CHECK_THROWS_AS(check_keys(j, {"known"}, "test section"), config_error);
  CHECK_NOTHROW(check_keys(j, {"known", "mystery"}, "test section"));
}
