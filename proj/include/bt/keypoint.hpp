#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace bt {

inline constexpr int kDescriptorSize = 128;
using Descriptor = Eigen::Matrix<float, kDescriptorSize, 1>;

struct Keypoint {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  Eigen::Vector3d point = Eigen::Vector3d::Zero();   // camera frame, meters
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();  // unit, camera facing
  Descriptor descriptor = Descriptor::Zero();
  float response = 0.f;
};

struct Match {
  std::size_t index_a = 0;
  std::size_t index_b = 0;
  float distance = 0.f;

  bool operator==(const Match&) const = default;
};

/// One-to-one correspondences between two keypoint lists.
using MatchSet = std::vector<Match>;

}  // namespace bt
