#include "bt/keyframes.hpp"

#include <algorithm>
#include <limits>

namespace bt {

bool MemoryPool::contains(int frame_id) const {
  return std::any_of(keyframes_.begin(), keyframes_.end(),
                     [&](const Keyframe& k) { return k.frame && k.frame->id == frame_id; });
}

std::vector<std::size_t> select_keyframes(const MemoryPool& pool, const Eigen::Matrix3d& current_rotation,
                                          std::size_t K) {
  const std::size_t n = pool.size();
  std::vector<std::size_t> selected;
  if (n == 0 || K == 0) return selected;
  if (n <= K) {
    for (std::size_t i = 0; i < n; ++i) selected.push_back(i);
    return selected;
  }

  // cost[c] accumulates the geodesic sum of candidate c against I_t and the
  // current selection.
  std::vector<double> cost(n);
  std::vector<bool> taken(n, false);
  for (std::size_t c = 0; c < n; ++c) cost[c] = rotation_geodesic(pool[c].pose.rotation, current_rotation);

  auto take = [&](std::size_t s) {
    taken[s] = true;
    selected.push_back(s);
    for (std::size_t c = 0; c < n; ++c)
      if (!taken[c]) cost[c] += rotation_geodesic(pool[c].pose.rotation, pool[s].pose.rotation);
  };
  take(0);
  auto frame_id = [&](std::size_t i) { return pool[i].frame ? pool[i].frame->id : static_cast<int>(i); };
  while (selected.size() < K) {
    std::size_t best = n;
    for (std::size_t c = 0; c < n; ++c) {
      if (taken[c]) continue;
      if (best == n || cost[c] < cost[best] || (cost[c] == cost[best] && frame_id(c) < frame_id(best))) best = c;
    }
    take(best);
  }
  return selected;
}

bool maybe_add_keyframe(MemoryPool& pool, std::shared_ptr<const Frame> frame, const Pose3d& pose,
                        double threshold) {
  if (pool.empty()) {
    pool.add(std::move(frame), pose);
    return true;
  }
  if (frame && pool.contains(frame->id)) return false;
  double min_dist = std::numeric_limits<double>::infinity();
  for (const Keyframe& k : pool.keyframes()) min_dist = std::min(min_dist, rotation_geodesic(k.pose.rotation, pose.rotation));
  if (min_dist <= threshold) return false;
  pool.add(std::move(frame), pose);
  return true;
}

}  // namespace bt
