#pragma once

#include <Eigen/Core>

#include <array>
#include <cassert>
#include <cstdint>
#include <vector>

namespace bt {

/// Row-major 2D grid.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, const T& fill = T{}) : width(w), height(h), data(std::size_t(w) * h, fill) {}

  T& operator()(int u, int v) {
    assert(contains(u, v));
    return data[std::size_t(v) * width + u];
  }
  const T& operator()(int u, int v) const {
    assert(contains(u, v));
    return data[std::size_t(v) * width + u];
  }

  bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
  bool empty() const { return data.empty(); }
  std::size_t size() const { return data.size(); }

  template <typename U>
  bool same_shape(const Image<U>& o) const { return width == o.width && height == o.height; }

  bool operator==(const Image&) const = default;
};

using Rgb = std::array<std::uint8_t, 3>;
using ColorImage = Image<Rgb>;
/// Depth in meters; 0 marks an invalid pixel.
using DepthMap = Image<double>;
/// Binary object mask, 1 = object.
using Mask = Image<std::uint8_t>;
using GrayImage = Image<float>;
/// Per-pixel 3-vectors; the zero vector marks an invalid entry.
using PointMap = Image<Eigen::Vector3d>;

inline std::size_t count_nonzero(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m.data) n += v != 0;
  return n;
}

}  // namespace bt
