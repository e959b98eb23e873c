#pragma once

#include "bt/evaluation.hpp"
#include "bt/image.hpp"
#include "bt/keypoint.hpp"
#include "bt/se3.hpp"
#include "bt/tracker.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bt {

struct SyntheticScene;

/// "<prefix>_%06d<ext>"
std::string frame_filename(const std::string& prefix, int id, const std::string& ext);

/// 16 row-major entries, %.17g, single spaces.
std::string format_pose(const Pose3d& T);
/// Parses 16 whitespace-separated values; rotation must be orthonormal.
Pose3d parse_pose(const std::string& text, const std::string& origin = "pose");

Pose3d read_pose_file(const std::filesystem::path& path);
void write_pose_file(const std::filesystem::path& path, const Pose3d& T);

Intrinsics read_intrinsics(const std::filesystem::path& path);
void write_intrinsics(const std::filesystem::path& path, const Intrinsics& K);

/// Lines `u v d_1 ... d_128`. Geometry fields are left empty.
std::vector<Keypoint> read_keypoint_file(const std::filesystem::path& path);
void write_keypoint_file(const std::filesystem::path& path, const std::vector<Keypoint>& keypoints);

/// One line per point, `x y z` in the object frame.
ModelPoints read_model_file(const std::filesystem::path& path);
void write_model_file(const std::filesystem::path& path, const ModelPoints& points);

/// `dx dy dz` bounding-box extents.
Eigen::Vector3d read_bbox_file(const std::filesystem::path& path);
void write_bbox_file(const std::filesystem::path& path, const Eigen::Vector3d& dims);

std::string format_log_entry(const PoseLogEntry& e);
PoseLogEntry parse_log_entry(const std::string& line);
std::vector<PoseLogEntry> read_pose_log(const std::filesystem::path& path);
void write_pose_log(std::ostream& os, const std::vector<PoseLogEntry>& log);

/// A dataset directory. Frame ids are contiguous from 0; the count is the
/// highest id among color/depth/mask files plus one.
class Dataset {
 public:
  explicit Dataset(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  const Intrinsics& intrinsics() const { return K_; }
  int frame_count() const { return count_; }
  Pose3d initial_pose() const;

  struct Images {
    ColorImage color;
    DepthMap depth;
  };
  /// Throws DataError naming the missing or malformed file.
  Images load(int id) const;
  Mask load_mask(int id) const;
  bool has_ground_truth(int id) const;
  Pose3d ground_truth(int id) const;
  std::filesystem::path path(const std::string& prefix, int id, const std::string& ext) const {
    return dir_ / frame_filename(prefix, id, ext);
  }

 private:
  std::filesystem::path dir_;
  Intrinsics K_;
  int count_ = 0;
};

struct ExportOptions {
  bool with_keypoints = false;
  std::size_t model_points = 2000;
};

/// Writes every trajectory entry of the scene in dataset layout, ids
/// renumbered 0..n-1, plus model.txt and bbox.txt.
void write_dataset(const SyntheticScene& scene, const std::filesystem::path& dir, const ExportOptions& opts = {});

}  // namespace bt
