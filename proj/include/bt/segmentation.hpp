#pragma once

#include "bt/image.hpp"
#include "bt/se3.hpp"

#include <cstdint>
#include <filesystem>

namespace bt {

/// Source of the object mask M_t for a frame.
class MaskProvider {
 public:
  virtual ~MaskProvider() = default;
  virtual Mask mask(int frame_id, const DepthMap& depth, const Intrinsics& K) const = 0;
};

/// Binarized 8-bit image, nonzero = object. Throws DataError when the file
/// is missing or its size differs from width x height.
Mask mask_from_file(const std::filesystem::path& path, int width, int height);

/// Loads `mask_%06d.png` from a directory.
class FileMaskProvider final : public MaskProvider {
 public:
  explicit FileMaskProvider(std::filesystem::path dir) : dir_(std::move(dir)) {}
  Mask mask(int frame_id, const DepthMap& depth, const Intrinsics& K) const override;

 private:
  std::filesystem::path dir_;
};

struct PlaneRemovalParams {
  double inlier_distance = 0.01;
  int iterations = 500;
  double linkage = 0.02;
  std::size_t min_cluster = 50;
  std::size_t min_points = 100;
  std::uint64_t seed = 0;
};

/// Dominant plane removed by RANSAC, remaining points grouped by
/// single-linkage clustering; the largest cluster becomes the mask.
/// Throws EmptyMaskError when no cluster reaches min_cluster points and
/// DataError when the depth map has fewer than min_points valid pixels.
Mask plane_removal_mask(const DepthMap& depth, const Intrinsics& K, const PlaneRemovalParams& params = {});

class PlaneRemovalMaskProvider final : public MaskProvider {
 public:
  explicit PlaneRemovalMaskProvider(PlaneRemovalParams params = {}) : params_(params) {}
  Mask mask(int, const DepthMap& depth, const Intrinsics& K) const override {
    return plane_removal_mask(depth, K, params_);
  }

 private:
  PlaneRemovalParams params_;
};

}  // namespace bt
