#pragma once

#include "bt/rgbd_frame.hpp"

#include <memory>
#include <vector>

namespace bt {

struct Keyframe {
  std::shared_ptr<const Frame> frame;
  Pose3d pose;  // current estimate, refined by later optimizations
};

/// Keyframes ordered by insertion; entry 0 is the initial frame.
class MemoryPool {
 public:
  std::size_t size() const { return keyframes_.size(); }
  bool empty() const { return keyframes_.empty(); }
  const Keyframe& operator[](std::size_t i) const { return keyframes_[i]; }
  const std::vector<Keyframe>& keyframes() const { return keyframes_; }

  bool contains(int frame_id) const;
  void add(std::shared_ptr<const Frame> frame, const Pose3d& pose) { keyframes_.push_back({std::move(frame), pose}); }
  void set_pose(std::size_t i, const Pose3d& pose) { keyframes_[i].pose = pose; }

 private:
  std::vector<Keyframe> keyframes_;
};

/// Greedy minimum-geodesic selection of at most K pool indices, starting
/// from entry 0. Returned in selection order.
std::vector<std::size_t> select_keyframes(const MemoryPool& pool, const Eigen::Matrix3d& current_rotation,
                                          std::size_t K);

/// Adds the frame when its rotation differs from every pool member by more
/// than `threshold` radians. An empty pool always accepts.
bool maybe_add_keyframe(MemoryPool& pool, std::shared_ptr<const Frame> frame, const Pose3d& pose,
                        double threshold);

}  // namespace bt
