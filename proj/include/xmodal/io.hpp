#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xmodal/camera.hpp"
#include "xmodal/error.hpp"
#include "xmodal/grid.hpp"
#include "xmodal/losses.hpp"

namespace xmodal {

using json = nlohmann::json;

namespace detail {

inline bool host_is_little_endian() { return std::endian::native == std::endian::little; }

inline float byteswap_f32(float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  u = __builtin_bswap32(u);
  std::memcpy(&v, &u, 4);
  return v;
}

// Reads one whitespace-delimited token, skipping PNM '#' comments.
inline std::string pnm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {}
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw io_error("unexpected end of PNM header");
  return tok;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PFM: grayscale portable float map, scale -1.0 (little-endian), scanlines
// stored bottom-to-top per the format. Invalid entries are encoded as NaN;
// depth maps additionally treat non-positive values as invalid on read.
// ---------------------------------------------------------------------------

inline void write_pfm_grid(const std::string& path, const Grid<double>& values,
                           const Mask* valid = nullptr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << "Pf\n" << values.cols() << " " << values.rows() << "\n-1.0\n";
  std::vector<float> row(static_cast<size_t>(values.cols()));
  for (int r = values.rows() - 1; r >= 0; --r) {
    for (int c = 0; c < values.cols(); ++c)
      row[static_cast<size_t>(c)] = (!valid || (*valid)(r, c))
                                        ? static_cast<float>(values(r, c))
                                        : std::numeric_limits<float>::quiet_NaN();
    if (!detail::host_is_little_endian())
      for (auto& v : row) v = detail::byteswap_f32(v);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw io_error("write failed: " + path);
}

struct PfmGrid {
  Grid<double> values;
  Mask finite;
};

inline PfmGrid read_pfm_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open: " + path);
  const std::string magic = detail::pnm_token(in);
  if (magic != "Pf") throw io_error("not a grayscale PFM: " + path);
  const int cols = std::stoi(detail::pnm_token(in));
  const int rows = std::stoi(detail::pnm_token(in));
  const double scale = std::stod(detail::pnm_token(in));
  if (cols < 1 || rows < 1) throw io_error("bad PFM dimensions: " + path);
  const bool file_little = scale < 0.0;
  PfmGrid out{Grid<double>(rows, cols, 0.0), Mask(rows, cols, 0)};
  std::vector<float> row(static_cast<size_t>(cols));
  for (int r = rows - 1; r >= 0; --r) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw io_error("truncated PFM: " + path);
    for (int c = 0; c < cols; ++c) {
      float v = row[static_cast<size_t>(c)];
      if (file_little != detail::host_is_little_endian()) v = detail::byteswap_f32(v);
      out.values(r, c) = static_cast<double>(v);
      out.finite(r, c) = std::isfinite(v) ? 1 : 0;
    }
  }
  return out;
}

inline void write_pfm(const std::string& path, const DepthMap& map) {
  write_pfm_grid(path, map.values, &map.valid);
}

inline DepthMap read_pfm(const std::string& path) {
  PfmGrid g = read_pfm_grid(path);
  DepthMap map;
  map.values = std::move(g.values);
  map.valid = std::move(g.finite);
  map.sanitize();
  return map;
}

// ---------------------------------------------------------------------------
// PGM (P5): 8-bit or 16-bit grayscale; 16-bit samples are big-endian per the
// format. Values are returned normalized to [0,1] by maxval, with the raw
// counts available for thermal input.
// ---------------------------------------------------------------------------

inline void write_pgm16(const std::string& path, const ThermalImageRaw& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << "P5\n" << img.cols() << " " << img.rows() << "\n65535\n";
  for (int r = 0; r < img.rows(); ++r)
    for (int c = 0; c < img.cols(); ++c) {
      const std::uint16_t v = img(r, c);
      const unsigned char bytes[2] = {static_cast<unsigned char>(v >> 8),
                                      static_cast<unsigned char>(v & 0xff)};
      out.write(reinterpret_cast<const char*>(bytes), 2);
    }
  if (!out) throw io_error("write failed: " + path);
}

inline ThermalImageRaw read_pgm16(const std::string& path, int* maxval_out = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open: " + path);
  if (detail::pnm_token(in) != "P5") throw io_error("not a binary PGM: " + path);
  const int cols = std::stoi(detail::pnm_token(in));
  const int rows = std::stoi(detail::pnm_token(in));
  const int maxval = std::stoi(detail::pnm_token(in));
  if (cols < 1 || rows < 1 || maxval < 1 || maxval > 65535)
    throw io_error("bad PGM header: " + path);
  if (maxval_out) *maxval_out = maxval;
  ThermalImageRaw img(rows, cols, 0);
  const bool wide = maxval > 255;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      unsigned char b[2];
      in.read(reinterpret_cast<char*>(b), wide ? 2 : 1);
      if (!in) throw io_error("truncated PGM: " + path);
      img(r, c) = wide ? static_cast<std::uint16_t>((b[0] << 8) | b[1])
                       : static_cast<std::uint16_t>(b[0]);
    }
  return img;
}

inline Grid<double> read_pgm_normalized(const std::string& path) {
  int maxval = 65535;
  const ThermalImageRaw raw = read_pgm16(path, &maxval);
  Grid<double> out(raw.rows(), raw.cols(), 0.0);
  for (size_t i = 0; i < raw.size(); ++i)
    out[i] = static_cast<double>(raw[i]) / static_cast<double>(maxval);
  return out;
}

// ---------------------------------------------------------------------------
// PPM (P6): 8-bit RGB, normalized to [0,1] in memory.
// ---------------------------------------------------------------------------

inline void write_ppm(const std::string& path, const Image3& img) {
  if (img.channels() != 3) throw std::invalid_argument("write_ppm: image must have 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << "P6\n" << img.cols() << " " << img.rows() << "\n255\n";
  for (int r = 0; r < img.rows(); ++r)
    for (int c = 0; c < img.cols(); ++c) {
      const double* px = img.at(r, c);
      for (int ch = 0; ch < 3; ++ch) {
        const double v = std::clamp(px[ch], 0.0, 1.0);
        out.put(static_cast<char>(std::lround(v * 255.0)));
      }
    }
  if (!out) throw io_error("write failed: " + path);
}

inline Image3 read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open: " + path);
  if (detail::pnm_token(in) != "P6") throw io_error("not a binary PPM: " + path);
  const int cols = std::stoi(detail::pnm_token(in));
  const int rows = std::stoi(detail::pnm_token(in));
  const int maxval = std::stoi(detail::pnm_token(in));
  if (cols < 1 || rows < 1 || maxval < 1 || maxval > 255)
    throw io_error("bad PPM header: " + path);
  Image3 img(rows, cols, 3, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        const int b = in.get();
        if (b == EOF) throw io_error("truncated PPM: " + path);
        img.at(r, c, ch) = static_cast<double>(b) / static_cast<double>(maxval);
      }
  return img;
}

// ---------------------------------------------------------------------------
// Feature map binary: 16-byte header (magic 'XFM1', u32 H, W, C, all
// little-endian) followed by H*W*C float32 samples, row-major,
// channel-interleaved, little-endian.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kFeatureMagic = 0x314d4658u;  // 'XFM1'

inline void write_feature_map(const std::string& path, const FeatureMap& fm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  const std::uint32_t header[4] = {kFeatureMagic, static_cast<std::uint32_t>(fm.rows()),
                                   static_cast<std::uint32_t>(fm.cols()),
                                   static_cast<std::uint32_t>(fm.channels())};
  static_assert(sizeof(header) == 16);
  out.write(reinterpret_cast<const char*>(header), 16);
  for (double v : fm.raw()) {
    const float f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), 4);
  }
  if (!out) throw io_error("write failed: " + path);
}

inline FeatureMap read_feature_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open: " + path);
  std::uint32_t header[4];
  in.read(reinterpret_cast<char*>(header), 16);
  if (!in || header[0] != kFeatureMagic) throw io_error("not a feature map file: " + path);
  const int rows = static_cast<int>(header[1]);
  const int cols = static_cast<int>(header[2]);
  const int channels = static_cast<int>(header[3]);
  if (rows < 1 || cols < 1 || channels < 1) throw io_error("bad feature map header: " + path);
  FeatureMap fm(rows, cols, channels, 0.0);
  for (double& v : fm.raw()) {
    float f;
    in.read(reinterpret_cast<char*>(&f), 4);
    if (!in) throw io_error("truncated feature map: " + path);
    v = static_cast<double>(f);
  }
  return fm;
}

// ---------------------------------------------------------------------------
// Calibration JSON: one intrinsics object per named camera plus a 4x4
// row-major rig transform "T_thermal_rgb" (RGB camera frame -> thermal
// camera frame), translation in meters.
// ---------------------------------------------------------------------------

inline CameraIntrinsics intrinsics_from_json(const json& j) {
  try {
    return CameraIntrinsics(j.at("fx").get<double>(), j.at("fy").get<double>(),
                            j.at("cx").get<double>(), j.at("cy").get<double>(),
                            j.at("width").get<int>(), j.at("height").get<int>());
  } catch (const json::exception& e) {
    throw io_error(std::string("bad intrinsics: ") + e.what());
  }
}

inline json intrinsics_to_json(const CameraIntrinsics& K) {
  return json{{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx},
              {"cy", K.cy}, {"width", K.width}, {"height", K.height}};
}

inline RigidTransform transform_from_json(const json& j) {
  if (!j.is_array() || j.size() != 16) throw io_error("rig transform must be 16 numbers, 4x4 row-major");
  Eigen::Matrix3d R;
  Eigen::Vector3d t;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) R(r, c) = j[static_cast<size_t>(4 * r + c)].get<double>();
    t(r) = j[static_cast<size_t>(4 * r + 3)].get<double>();
  }
  const double w0 = j[12].get<double>(), w1 = j[13].get<double>(), w2 = j[14].get<double>(),
               w3 = j[15].get<double>();
  if (w0 != 0.0 || w1 != 0.0 || w2 != 0.0 || w3 != 1.0)
    throw io_error("rig transform: last row must be 0 0 0 1");
  try {
    return RigidTransform(R, t);
  } catch (const std::invalid_argument& e) {
    throw io_error(std::string("bad rig transform: ") + e.what());
  }
}

inline json transform_to_json(const RigidTransform& T) {
  json arr = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) arr.push_back(T.rotation(r, c));
    arr.push_back(T.translation(r));
  }
  arr.push_back(0.0);
  arr.push_back(0.0);
  arr.push_back(0.0);
  arr.push_back(1.0);
  return arr;
}

struct RigCalibration {
  CameraIntrinsics rgb;
  CameraIntrinsics thermal;
  RigidTransform T_thermal_rgb;
};

// Strict config parsing: unknown keys are rejected so typos cannot silently
// fall back to defaults.
inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& context) {
  if (!j.is_object()) throw config_error(context + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) throw config_error("unknown key '" + it.key() + "' in " + context);
  }
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw io_error("JSON parse error in " + path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw io_error("write failed: " + path);
}

inline RigCalibration load_rig_calibration(const std::string& path) {
  const json j = load_json_file(path);
  RigCalibration rig;
  try {
    rig.rgb = intrinsics_from_json(j.at("rgb"));
    rig.thermal = intrinsics_from_json(j.at("thermal"));
    rig.T_thermal_rgb = transform_from_json(j.at("T_thermal_rgb"));
  } catch (const json::exception& e) {
    throw io_error("bad calibration file " + path + ": " + e.what());
  }
  return rig;
}

inline json rig_calibration_to_json(const RigCalibration& rig) {
  return json{{"rgb", intrinsics_to_json(rig.rgb)},
              {"thermal", intrinsics_to_json(rig.thermal)},
              {"T_thermal_rgb", transform_to_json(rig.T_thermal_rgb)}};
}

// ---------------------------------------------------------------------------
// XYZ point cloud text: one "x y z" triple per line.
// ---------------------------------------------------------------------------

inline std::vector<Eigen::Vector3d> read_xyz(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open: " + path);
  std::vector<Eigen::Vector3d> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double x, y, z;
    if (!(ss >> x >> y >> z)) throw io_error("bad XYZ line in " + path + ": " + line);
    pts.emplace_back(x, y, z);
  }
  return pts;
}

inline void write_xyz(const std::string& path, const std::vector<Eigen::Vector3d>& pts) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path);
  for (const auto& p : pts) out << p.x() << " " << p.y() << " " << p.z() << "\n";
  if (!out) throw io_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Loss report serialization.
// ---------------------------------------------------------------------------

inline json loss_report_json(const std::string& name, const LossResult& res) {
  json norms = json::object();
  for (const auto& [key, grid] : res.gradients) {
    double s = 0.0;
    for (size_t i = 0; i < grid.size(); ++i) s += grid[i] * grid[i];
    norms[key] = std::sqrt(s);
  }
  return json{{"name", name},
              {"value", res.value},
              {"num_pixels_kept", res.num_pixels_kept},
              {"grad_norms", norms}};
}

// Rounds to 1e-9 so serialized reports are stable across platforms.
inline double round9(double v) {
  if (!std::isfinite(v)) return v;
  return std::round(v * 1e9) / 1e9;
}

}  // namespace xmodal
