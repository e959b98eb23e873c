#pragma once

#include "bt/se3.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace bt {

/// Object-frame model points, meters.
using ModelPoints = std::vector<Eigen::Vector3d>;

/// Mean displacement of model points between the two poses.
double add_error(const Pose3d& est, const Pose3d& gt, const ModelPoints& model);

/// Mean closest-point distance from the ground-truth posed model to the
/// estimated posed model (brute force).
double adds_error(const Pose3d& est, const Pose3d& gt, const ModelPoints& model);

double rotation_error_deg(const Pose3d& est, const Pose3d& gt);
double translation_error_cm(const Pose3d& est, const Pose3d& gt);

bool five_deg_five_cm(const Pose3d& est, const Pose3d& gt);

/// IoU of the object-frame box [-dims/2, dims/2] posed by est and gt, by
/// seeded Monte Carlo sampling over the union's bounding volume.
double box_iou(const Pose3d& est, const Pose3d& gt, const Eigen::Vector3d& bbox_dims, int samples = 100000,
               std::uint64_t seed = 0);

inline bool iou25(const Pose3d& est, const Pose3d& gt, const Eigen::Vector3d& bbox_dims) {
  return box_iou(est, gt, bbox_dims) > 0.25;
}

struct FrameMetrics {
  int frame_id = 0;
  double add = 0;
  double adds = 0;
  double rotation_deg = 0;
  double translation_cm = 0;
  double iou = 0;
  bool within_5deg_5cm = false;
};

struct MetricReport {
  std::vector<FrameMetrics> frames;
  double five_deg_five_cm_pct = 0;
  double iou25_pct = 0;
  /// Means over frames with IoU > 0.25; absent when no frame qualifies.
  std::optional<double> rotation_err_mean_deg;
  std::optional<double> translation_err_mean_cm;
  double add_auc = 0;
  double adds_auc = 0;
  double auc_max_threshold = 0.1;
};

struct PosePair {
  int frame_id;
  Pose3d est;
  Pose3d gt;
};

/// Area under the accuracy-vs-threshold curve on [0, max_threshold],
/// normalized to [0, 1].
double accuracy_auc(const std::vector<double>& errors, double max_threshold);

/// Fraction of errors below the threshold.
double accuracy_at(const std::vector<double>& errors, double threshold);

MetricReport aggregate(const std::vector<PosePair>& frames, const ModelPoints& model, const Eigen::Vector3d& bbox_dims,
                       double auc_max_threshold = 0.1);

}  // namespace bt
