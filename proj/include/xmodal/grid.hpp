#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace xmodal {

// Dense row-major H x W raster.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T init = T{})
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, init) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Grid: negative shape");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }

  T& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }
  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  bool same_shape(const Grid<U>& o) const { return rows_ == o.rows() && cols_ == o.cols(); }

  bool operator==(const Grid& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;

inline Mask mask_and(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("mask_and: shape mismatch");
  Mask out(a.rows(), a.cols());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] && b[i];
  return out;
}

inline long mask_count(const Mask& m) {
  long n = 0;
  for (size_t i = 0; i < m.size(); ++i) n += m[i] ? 1 : 0;
  return n;
}

// Depth raster in meters. Valid pixels hold positive finite values; invalid
// pixels are never read by consumers.
struct DepthMap {
  Grid<double> values;
  Mask valid;

  DepthMap() = default;
  DepthMap(int rows, int cols, double v = 0.0, bool all_valid = false)
      : values(rows, cols, v), valid(rows, cols, all_valid ? 1 : 0) {}

  int rows() const { return values.rows(); }
  int cols() const { return values.cols(); }

  // Enforces the type invariant: drops non-finite or non-positive entries.
  void sanitize() {
    for (size_t i = 0; i < values.size(); ++i)
      if (valid[i] && (!std::isfinite(values[i]) || values[i] <= 0.0)) valid[i] = 0;
  }
};

// Per-pixel confidence in (0,1); dense.
using ConfidenceMap = Grid<double>;

// H x W x C embedding, channel-interleaved. Entries must be finite.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int rows, int cols, int channels, double init = 0.0)
      : rows_(rows), cols_(cols), channels_(channels),
        data_(static_cast<size_t>(rows) * cols * channels, init) {
    if (channels < 1) throw std::invalid_argument("FeatureMap: channels must be >= 1");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int channels() const { return channels_; }

  double* at(int r, int c) { return data_.data() + (static_cast<size_t>(r) * cols_ + c) * channels_; }
  const double* at(int r, int c) const {
    return data_.data() + (static_cast<size_t>(r) * cols_ + c) * channels_;
  }
  double& at(int r, int c, int ch) { return at(r, c)[ch]; }
  double at(int r, int c, int ch) const { return at(r, c)[ch]; }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  bool same_shape(const FeatureMap& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && channels_ == o.channels_;
  }

 private:
  int rows_ = 0, cols_ = 0, channels_ = 0;
  std::vector<double> data_;
};

// Per-pixel cosine similarity in [-1, 1] with validity mask.
struct SimilarityMap {
  Grid<double> values;
  Mask valid;

  SimilarityMap() = default;
  SimilarityMap(int rows, int cols, double v = 0.0, bool all_valid = false)
      : values(rows, cols, v), valid(rows, cols, all_valid ? 1 : 0) {}

  int rows() const { return values.rows(); }
  int cols() const { return values.cols(); }
};

// 3-channel image, values normalized to [0,1].
using Image3 = FeatureMap;

// 16-bit thermal counts as read from sensor files.
using ThermalImageRaw = Grid<std::uint16_t>;

}  // namespace xmodal
