#include "bt/tracker.hpp"

#include "bt/error.hpp"

#include <chrono>

namespace bt {

namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what, 0);
}

}  // namespace

void TrackerConfig::validate(bool cross_field) const {
  require(K > 0, "K must be positive");
  require(n_keypoints > 0, "n_keypoints must be positive");
  require(ransac_delta > 0, "ransac_delta must be positive");
  require(ransac_alpha > 0, "ransac_alpha must be positive");
  require(ransac_iterations > 0, "ransac_iterations must be positive");
  require(novelty_threshold > 0, "novelty_threshold must be positive");
  require(lambda1 > 0 && lambda2 > 0, "lambda1 and lambda2 must be positive");
  require(solver.gn_iters > 0 && solver.pcg_max_iter > 0 && solver.pcg_tol > 0 && solver.max_halvings >= 0,
          "solver parameters must be positive");
  require(dense_stride > 0, "dense_stride must be positive");
  require(normals.radius > 0 && normals.depth_jump > 0, "normal parameters must be positive");
  require(huber.delta_feature > 0 && huber.delta_geometric > 0, "huber thresholds must be positive");
  require(gates.max_distance > 0 && gates.max_angle > 0, "dense gates must be positive");
  require(min_edge_inliers >= 3, "min_edge_inliers must be at least 3");
  require(outlier_injection >= 0 && outlier_injection <= 1, "outlier_injection must lie in [0, 1]");
  require(!cross_field || disable_pose_graph || !(disable_E_f && disable_E_g),
          "disable_E_f and disable_E_g cannot both be set with the pose graph enabled");
}

FeatureEdgeParams TrackerConfig::edge_params() const {
  FeatureEdgeParams p;
  p.ransac.delta = ransac_delta;
  p.ransac.alpha = ransac_alpha;
  p.ransac.iterations = ransac_iterations;
  p.ransac.seed = seed;
  p.min_inliers = min_edge_inliers;
  p.outlier_injection = outlier_injection;
  return p;
}

Tracker::Tracker(TrackerConfig config, TrackerProviders providers)
    : config_(std::move(config)), providers_(std::move(providers)) {
  config_.validate();
  if (!providers_.keypoints) {
    DetectorParams dp;
    dp.target_n = config_.n_keypoints;
    providers_.keypoints = std::make_shared<HarrisKeypointProvider>(dp);
  }
}

Mask Tracker::pull_mask(int id, const DepthMap& depth, const Intrinsics& K, StageTimings& timing) const {
  if (!providers_.masks) throw Error("no mask provider configured");
  Stopwatch sw;
  Mask m;
  try {
    m = providers_.masks->mask(id, depth, K);
  } catch (const EmptyMaskError&) {
    m = Mask(depth.width, depth.height, 0);
  }
  timing.segmentation_ms = sw.lap();
  return m;
}

std::shared_ptr<Frame> Tracker::prepare(int id, ColorImage color, DepthMap depth, Mask mask, const Intrinsics& K,
                                        FrameDiagnostics& diag) const {
  Stopwatch sw;
  auto frame = std::make_shared<Frame>(ingest(id, std::move(color), std::move(depth), std::move(mask), K, config_.normals));
  frame->samples = masked_points(*frame, config_.dense_stride);
  diag.timing.ingest_ms = sw.lap();
  frame->keypoints = providers_.keypoints->keypoints(*frame);
  if (frame->keypoints.size() > std::size_t(config_.n_keypoints)) frame->keypoints.resize(config_.n_keypoints);
  diag.keypoints = frame->keypoints.size();
  diag.timing.keypoints_ms = sw.lap();
  return frame;
}

void Tracker::initialize(int id, ColorImage color, DepthMap depth, Mask mask, const Intrinsics& K,
                         const Pose3d& pose0) {
  if (initialized()) throw SequencingError("tracker is already initialized; re-initialization is not allowed");
  if (count_nonzero(mask) == 0) throw EmptyMaskError("initial mask is empty");
  Stopwatch total;
  FrameDiagnostics diag;
  auto frame = prepare(id, std::move(color), std::move(depth), std::move(mask), K, diag);
  frame->pose = pose0;
  pool_.add(frame, pose0);
  last_frame_ = frame;
  diag.keyframe_added = true;
  diag.timing.total_ms = total.lap();
  emit(id, pose0, false, std::move(diag));
}

void Tracker::initialize(int id, ColorImage color, DepthMap depth, const Intrinsics& K, const Pose3d& pose0) {
  StageTimings t;
  Mask m = pull_mask(id, depth, K, t);
  initialize(id, std::move(color), std::move(depth), std::move(m), K, pose0);
  diagnostics_.back().timing.segmentation_ms = t.segmentation_ms;
}

Pose3d Tracker::emit(int id, const Pose3d& pose, bool coasted, FrameDiagnostics diag) {
  diag.frame_id = id;
  log_.push_back({id, pose, coasted});
  diagnostics_.push_back(std::move(diag));
  last_pose_ = pose;
  last_id_ = id;
  return pose;
}

Pose3d Tracker::process_frame(int id, ColorImage color, DepthMap depth, const Intrinsics& K) {
  StageTimings t;
  Mask m = pull_mask(id, depth, K, t);
  const Pose3d pose = process_frame(id, std::move(color), std::move(depth), std::move(m), K);
  diagnostics_.back().timing.segmentation_ms = t.segmentation_ms;
  return pose;
}

Pose3d Tracker::process_frame(int id, ColorImage color, DepthMap depth, Mask mask, const Intrinsics& K) {
  if (!initialized()) throw SequencingError("process_frame called before initialize");
  if (id <= last_id_)
    throw SequencingError("frame " + std::to_string(id) + " does not follow frame " + std::to_string(last_id_));

  Stopwatch total;
  FrameDiagnostics diag;
  if (count_nonzero(mask) == 0) {
    diag.timing.total_ms = total.lap();
    return emit(id, last_pose_, true, std::move(diag));
  }

  auto frame = prepare(id, std::move(color), std::move(depth), std::move(mask), K, diag);
  const FeatureEdgeParams edge_params = config_.edge_params();

  Stopwatch sw;
  const auto reg = register_frames(*last_frame_, *frame, edge_params);
  cache_.store(last_frame_->id, frame->id, reg ? reg->inliers : MatchSet{});
  const Pose3d coarse = reg ? coarse_pose(last_pose_, reg->relative_pose) : last_pose_;
  diag.registration_inliers = reg ? reg->inlier_count : 0;
  diag.timing.registration_ms = sw.lap();

  Pose3d pose = coarse;
  if (!config_.disable_pose_graph) {
    const std::vector<std::size_t> selected = select_keyframes(pool_, coarse.rotation, config_.K);
    diag.timing.selection_ms = sw.lap();

    PoseGraph graph;
    graph.lambda_feature = config_.lambda1;
    graph.lambda_geometric = config_.lambda2;
    graph.use_feature = !config_.disable_E_f;
    graph.use_geometric = !config_.disable_E_g;
    graph.huber = config_.huber;
    graph.gates = config_.gates;
    for (std::size_t idx : selected) {
      const Keyframe& kf = pool_[idx];
      graph.nodes.push_back({kf.frame, log_map(kf.pose), idx == 0});
    }
    graph.nodes.push_back({frame, log_map(coarse), false});
    diag.graph_nodes = graph.nodes.size();

    if (graph.use_feature) diag.new_pairs = build_feature_edges(graph, cache_, edge_params);
    diag.timing.feature_edges_ms = sw.lap();

    try {
      diag.optimization = optimize(graph, config_.solver);
      pose = graph.nodes.back().pose();
      for (std::size_t k = 0; k < selected.size(); ++k)
        if (!graph.nodes[k].fixed) pool_.set_pose(selected[k], graph.nodes[k].pose());
    } catch (const UnconstrainedGraphError&) {
      pose = coarse;
    }
    diag.timing.optimization_ms = sw.lap();
  }

  frame->pose = pose;
  diag.keyframe_added = maybe_add_keyframe(pool_, frame, pose, config_.novelty_threshold);
  last_frame_ = frame;
  diag.timing.pool_ms = sw.lap();
  diag.timing.total_ms = total.lap();
  return emit(id, pose, !reg, std::move(diag));
}

}  // namespace bt
