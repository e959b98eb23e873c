#pragma once

#include "bt/features.hpp"
#include "bt/keyframes.hpp"
#include "bt/pose_graph.hpp"
#include "bt/segmentation.hpp"

#include <memory>
#include <vector>

namespace bt {

struct TrackerConfig {
  std::size_t K = 15;
  int n_keypoints = 500;
  double ransac_delta = 0.005;
  double ransac_alpha = deg2rad(45.0);
  int ransac_iterations = 2000;
  std::uint64_t seed = 0;
  double novelty_threshold = deg2rad(10.0);
  double lambda1 = 1.0;  // feature term
  double lambda2 = 1.0;  // geometric term
  SolverParams solver;
  int dense_stride = 4;
  NormalParams normals;
  HuberParams huber;
  DenseGates gates;
  std::size_t min_edge_inliers = 12;
  double outlier_injection = 0.0;
  bool disable_pose_graph = false;
  bool disable_E_f = false;
  bool disable_E_g = false;

  /// Throws ConfigError (line 0) on non-positive values or, with
  /// cross_field, when both energy terms are disabled with the pose graph
  /// enabled.
  void validate(bool cross_field = true) const;
  FeatureEdgeParams edge_params() const;
};

/// Immutable output record for one frame.
struct PoseLogEntry {
  int frame_id = 0;
  Pose3d pose;
  bool coasted = false;

  bool operator==(const PoseLogEntry& o) const {
    return frame_id == o.frame_id && coasted == o.coasted && pose.rotation == o.pose.rotation &&
           pose.translation == o.pose.translation;
  }
};

struct StageTimings {
  double segmentation_ms = 0;
  double ingest_ms = 0;
  double keypoints_ms = 0;
  double registration_ms = 0;
  double selection_ms = 0;
  double feature_edges_ms = 0;
  double optimization_ms = 0;
  double pool_ms = 0;
  double total_ms = 0;
};

struct FrameDiagnostics {
  int frame_id = 0;
  StageTimings timing;
  OptimizeReport optimization;
  std::size_t keypoints = 0;
  std::size_t registration_inliers = 0;
  std::size_t graph_nodes = 0;
  std::size_t new_pairs = 0;
  bool keyframe_added = false;
};

struct TrackerProviders {
  std::shared_ptr<const MaskProvider> masks;       // needed by the mask-less overloads
  std::shared_ptr<const KeypointProvider> keypoints;  // defaults to the Harris detector
};

/// Causal per-frame tracker. Emitted poses are never revised; keyframe
/// poses in the pool are refined by every optimization.
class Tracker {
 public:
  explicit Tracker(TrackerConfig config = {}, TrackerProviders providers = {});

  /// Throws SequencingError when already initialized and EmptyMaskError
  /// when the mask is empty.
  void initialize(int id, ColorImage color, DepthMap depth, Mask mask, const Intrinsics& K, const Pose3d& pose0);
  void initialize(int id, ColorImage color, DepthMap depth, const Intrinsics& K, const Pose3d& pose0);

  /// Throws SequencingError when not initialized or when id does not
  /// exceed the previous frame id. An empty mask coasts on the last pose.
  Pose3d process_frame(int id, ColorImage color, DepthMap depth, Mask mask, const Intrinsics& K);
  Pose3d process_frame(int id, ColorImage color, DepthMap depth, const Intrinsics& K);

  bool initialized() const { return !log_.empty(); }
  const TrackerConfig& config() const { return config_; }
  const std::vector<PoseLogEntry>& log() const { return log_; }
  const std::vector<FrameDiagnostics>& diagnostics() const { return diagnostics_; }
  const MemoryPool& pool() const { return pool_; }
  const CorrespondenceCache& cache() const { return cache_; }

 private:
  Mask pull_mask(int id, const DepthMap& depth, const Intrinsics& K, StageTimings& timing) const;
  std::shared_ptr<Frame> prepare(int id, ColorImage color, DepthMap depth, Mask mask, const Intrinsics& K,
                                 FrameDiagnostics& diag) const;
  Pose3d emit(int id, const Pose3d& pose, bool coasted, FrameDiagnostics diag);

  TrackerConfig config_;
  TrackerProviders providers_;
  MemoryPool pool_;
  CorrespondenceCache cache_;
  std::shared_ptr<const Frame> last_frame_;
  Pose3d last_pose_;
  int last_id_ = 0;
  std::vector<PoseLogEntry> log_;
  std::vector<FrameDiagnostics> diagnostics_;
};

}  // namespace bt
