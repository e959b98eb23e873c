#pragma once

#include "bt/keypoint.hpp"
#include "bt/se3.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace bt {

struct RansacParams {
  double delta = 0.005;             // inlier distance gate, meters
  double alpha = deg2rad(45.0);     // inlier normal-angle gate, radians
  int iterations = 2000;
  std::uint64_t seed = 0;
  double early_exit_ratio = 0.9;
  std::size_t min_inliers = 3;
};

struct RegistrationResult {
  /// Maps frame-a camera points onto frame-b camera points: p_b = T p_a.
  Pose3d relative_pose;
  MatchSet inliers;
  std::size_t inlier_count = 0;
};

/// Closed-form rigid fit minimizing sum |T src_k - dst_k|^2. Throws
/// DegenerateSampleError for fewer than three pairs or collinear/coincident points.
Pose3d rigid_least_squares(std::span<const Eigen::Vector3d> src, std::span<const Eigen::Vector3d> dst);

/// True when the match passes both gates under T.
bool is_inlier(const Pose3d& T, const Keypoint& a, const Keypoint& b, double delta, double cos_alpha);

/// Seeded three-point RANSAC over the matches. Empty when fewer than three
/// matches exist or the best hypothesis keeps fewer than min_inliers.
std::optional<RegistrationResult> ransac_register(const MatchSet& matches, std::span<const Keypoint> a,
                                                  std::span<const Keypoint> b, const RansacParams& params);

/// Current-frame pose from the previous pose and the camera-frame motion
/// solving p_t = T_rel p_{t-1}.
inline Pose3d coarse_pose(const Pose3d& prev_pose, const Pose3d& relative_pose) {
  return compose(relative_pose, prev_pose);
}

}  // namespace bt
