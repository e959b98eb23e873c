#include "bt/evaluation.hpp"

#include "bt/parallel.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <stdexcept>

namespace bt {

double add_error(const Pose3d& est, const Pose3d& gt, const ModelPoints& model) {
  if (model.empty()) return 0.0;
  double sum = 0;
  for (const auto& x : model) sum += (gt * x - est * x).norm();
  return sum / double(model.size());
}

double adds_error(const Pose3d& est, const Pose3d& gt, const ModelPoints& model) {
  if (model.empty()) return 0.0;
  std::vector<Eigen::Vector3d> posed_est(model.size());
  for (std::size_t k = 0; k < model.size(); ++k) posed_est[k] = est * model[k];
  std::vector<double> nearest(model.size());
  parallel_for(model.size(), [&](std::size_t k) {
    const Eigen::Vector3d g = gt * model[k];
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : posed_est) best = std::min(best, (g - e).squaredNorm());
    nearest[k] = std::sqrt(best);
  });
  double sum = 0;
  for (double d : nearest) sum += d;
  return sum / double(model.size());
}

double rotation_error_deg(const Pose3d& est, const Pose3d& gt) {
  return rad2deg(rotation_geodesic(est.rotation, gt.rotation));
}

double translation_error_cm(const Pose3d& est, const Pose3d& gt) {
  return 100.0 * (est.translation - gt.translation).norm();
}

bool five_deg_five_cm(const Pose3d& est, const Pose3d& gt) {
  return rotation_error_deg(est, gt) < 5.0 && translation_error_cm(est, gt) < 5.0;
}

double box_iou(const Pose3d& est, const Pose3d& gt, const Eigen::Vector3d& bbox_dims, int samples,
               std::uint64_t seed) {
  const Eigen::Vector3d half = 0.5 * bbox_dims;
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (const Pose3d* T : {&est, &gt}) {
    for (int c = 0; c < 8; ++c) {
      const Eigen::Vector3d corner((c & 1 ? 1 : -1) * half.x(), (c & 2 ? 1 : -1) * half.y(), (c & 4 ? 1 : -1) * half.z());
      const Eigen::Vector3d w = *T * corner;
      lo = lo.cwiseMin(w);
      hi = hi.cwiseMax(w);
    }
  }
  const Pose3d est_inv = inverse(est), gt_inv = inverse(gt);
  auto inside = [&](const Pose3d& inv, const Eigen::Vector3d& p) {
    const Eigen::Vector3d q = inv * p;
    return (q.cwiseAbs() - half).maxCoeff() <= 0.0;
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  long in_est = 0, in_gt = 0, in_both = 0;
  for (int s = 0; s < samples; ++s) {
    const Eigen::Vector3d p(lo.x() + unit(rng) * (hi.x() - lo.x()), lo.y() + unit(rng) * (hi.y() - lo.y()),
                            lo.z() + unit(rng) * (hi.z() - lo.z()));
    const bool a = inside(est_inv, p), b = inside(gt_inv, p);
    in_est += a;
    in_gt += b;
    in_both += a && b;
  }
  const long uni = in_est + in_gt - in_both;
  return uni > 0 ? double(in_both) / double(uni) : 0.0;
}

double accuracy_auc(const std::vector<double>& errors, double max_threshold) {
  if (errors.empty()) return 0.0;
  // Integral of the step curve 1[e < t] over t in [0, max] is max - min(e, max).
  double sum = 0;
  for (double e : errors) sum += 1.0 - std::min(std::max(e, 0.0), max_threshold) / max_threshold;
  return sum / double(errors.size());
}

double accuracy_at(const std::vector<double>& errors, double threshold) {
  if (errors.empty()) return 0.0;
  const auto n = std::count_if(errors.begin(), errors.end(), [&](double e) { return e < threshold; });
  return double(n) / double(errors.size());
}

MetricReport aggregate(const std::vector<PosePair>& frames, const ModelPoints& model, const Eigen::Vector3d& bbox_dims,
                       double auc_max_threshold) {
  if (frames.empty()) throw std::invalid_argument("no frames to evaluate");
  MetricReport rep;
  rep.auc_max_threshold = auc_max_threshold;
  std::vector<double> adds, addss;
  double r_sum = 0, t_sum = 0;
  std::size_t counted = 0, ok55 = 0, ok_iou = 0;
  for (const PosePair& f : frames) {
    FrameMetrics m;
    m.frame_id = f.frame_id;
    m.add = add_error(f.est, f.gt, model);
    m.adds = adds_error(f.est, f.gt, model);
    m.rotation_deg = rotation_error_deg(f.est, f.gt);
    m.translation_cm = translation_error_cm(f.est, f.gt);
    m.iou = box_iou(f.est, f.gt, bbox_dims);
    m.within_5deg_5cm = m.rotation_deg < 5.0 && m.translation_cm < 5.0;
    ok55 += m.within_5deg_5cm;
    if (m.iou > 0.25) {
      ++ok_iou;
      ++counted;
      r_sum += m.rotation_deg;
      t_sum += m.translation_cm;
    }
    adds.push_back(m.add);
    addss.push_back(m.adds);
    rep.frames.push_back(m);
  }
  const double n = double(frames.size());
  rep.five_deg_five_cm_pct = 100.0 * double(ok55) / n;
  rep.iou25_pct = 100.0 * double(ok_iou) / n;
  if (counted > 0) {
    rep.rotation_err_mean_deg = r_sum / double(counted);
    rep.translation_err_mean_cm = t_sum / double(counted);
  }
  rep.add_auc = accuracy_auc(adds, auc_max_threshold);
  rep.adds_auc = accuracy_auc(addss, auc_max_threshold);
  return rep;
}

}  // namespace bt
