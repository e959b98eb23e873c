#pragma once

#include "bt/keypoint.hpp"
#include "bt/rgbd_frame.hpp"

#include <cstdint>
#include <filesystem>
#include <span>

namespace bt {

/// Multi-scale Harris corners with oriented gradient-histogram descriptors.
struct DetectorParams {
  int target_n = 500;
  int levels = 2;
  double harris_k = 0.04;
  /// Candidates below this fraction of the level's strongest response are dropped.
  double min_response_ratio = 0.01;
  int nms_radius = 3;
  /// Minimum spacing between accepted keypoints, level-0 pixels.
  double min_separation = 3.0;
};

GrayImage to_gray(const ColorImage& color);

/// Up to params.target_n keypoints inside the mask with valid depth and
/// normal, strongest first. Deterministic.
std::vector<Keypoint> detect_keypoints(const Frame& frame, const DetectorParams& params);

inline std::vector<Keypoint> detect_keypoints(const Frame& frame, int target_n) {
  DetectorParams p;
  p.target_n = target_n;
  return detect_keypoints(frame, p);
}

/// Mutual nearest neighbors in descriptor space that also pass the ratio
/// test on the a-side. Sorted by index_a.
MatchSet match_descriptors(std::span<const Keypoint> a, std::span<const Keypoint> b, double ratio = 0.8);

/// Rewires round(fraction * size) seeded-random matches to wrong partners by
/// cycling their b-side indices; the set stays one-to-one.
void inject_outliers(MatchSet& matches, double fraction, std::uint64_t seed);

/// Source of keypoints for an ingested frame.
class KeypointProvider {
 public:
  virtual ~KeypointProvider() = default;
  virtual std::vector<Keypoint> keypoints(const Frame& frame) const = 0;
};

class HarrisKeypointProvider final : public KeypointProvider {
 public:
  explicit HarrisKeypointProvider(DetectorParams params = {}) : params_(params) {}
  std::vector<Keypoint> keypoints(const Frame& frame) const override { return detect_keypoints(frame, params_); }

 private:
  DetectorParams params_;
};

/// Reads `keypoints_%06d.txt` from a directory. Entries whose pixel has no
/// valid masked point or normal are dropped.
class FileKeypointProvider final : public KeypointProvider {
 public:
  explicit FileKeypointProvider(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::vector<Keypoint> keypoints(const Frame& frame) const override;

 private:
  std::filesystem::path dir_;
};

/// Attaches geometry to raw (pixel, descriptor) detections using the frame's
/// depth and normals. Depth is bilinearly interpolated when the four
/// neighbors are valid and consistent, nearest otherwise.
std::vector<Keypoint> attach_geometry(const Frame& frame, std::vector<Keypoint> raw);

}  // namespace bt
