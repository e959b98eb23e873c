#include "bt/registration.hpp"

#include "bt/error.hpp"
#include "bt/parallel.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <random>

namespace bt {

Pose3d rigid_least_squares(std::span<const Eigen::Vector3d> src, std::span<const Eigen::Vector3d> dst) {
  if (src.size() != dst.size()) throw DegenerateSampleError("point lists differ in length");
  if (src.size() < 3) throw DegenerateSampleError("need at least three point pairs");
  const double n = static_cast<double>(src.size());
  Eigen::Vector3d cs = Eigen::Vector3d::Zero(), cd = Eigen::Vector3d::Zero();
  for (std::size_t k = 0; k < src.size(); ++k) {
    cs += src[k];
    cd += dst[k];
  }
  cs /= n;
  cd /= n;
  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  double spread = 0;
  for (std::size_t k = 0; k < src.size(); ++k) {
    H += (src[k] - cs) * (dst[k] - cd).transpose();
    spread += (src[k] - cs).squaredNorm();
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  // Rank < 2 means the points are collinear or coincident.
  if (spread < 1e-20 || sv(1) <= 1e-9 * sv(0) || sv(0) < 1e-20) throw DegenerateSampleError("rank-deficient sample");

  const Eigen::Matrix3d U = svd.matrixU(), V = svd.matrixV();
  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  if ((V * U.transpose()).determinant() < 0) D(2, 2) = -1;
  Pose3d T;
  T.rotation = V * D * U.transpose();
  T.translation = cd - T.rotation * cs;
  return T;
}

bool is_inlier(const Pose3d& T, const Keypoint& a, const Keypoint& b, double delta, double cos_alpha) {
  if ((T * a.point - b.point).squaredNorm() > delta * delta) return false;
  return (T.rotation * a.normal).dot(b.normal) >= cos_alpha;
}

namespace {

struct Hypothesis {
  Pose3d pose;
  std::size_t count = 0;
  double mean_distance = 0;
  bool valid = false;
};

Hypothesis score(const Pose3d& T, const MatchSet& matches, std::span<const Keypoint> a,
                 std::span<const Keypoint> b, double delta, double cos_alpha) {
  Hypothesis h{T, 0, 0.0, true};
  double sum = 0;
  for (const Match& m : matches) {
    const Keypoint& ka = a[m.index_a];
    const Keypoint& kb = b[m.index_b];
    if (!is_inlier(T, ka, kb, delta, cos_alpha)) continue;
    ++h.count;
    sum += (T * ka.point - kb.point).norm();
  }
  h.mean_distance = h.count ? sum / double(h.count) : 0.0;
  return h;
}

bool better(const Hypothesis& x, const Hypothesis& y) {
  if (x.valid != y.valid) return x.valid;
  if (x.count != y.count) return x.count > y.count;
  return x.mean_distance < y.mean_distance;
}

MatchSet inliers_of(const Pose3d& T, const MatchSet& matches, std::span<const Keypoint> a,
                    std::span<const Keypoint> b, double delta, double cos_alpha) {
  MatchSet out;
  for (const Match& m : matches)
    if (is_inlier(T, a[m.index_a], b[m.index_b], delta, cos_alpha)) out.push_back(m);
  return out;
}

Pose3d fit(const MatchSet& set, std::span<const Keypoint> a, std::span<const Keypoint> b) {
  std::vector<Eigen::Vector3d> src, dst;
  src.reserve(set.size());
  dst.reserve(set.size());
  for (const Match& m : set) {
    src.push_back(a[m.index_a].point);
    dst.push_back(b[m.index_b].point);
  }
  return rigid_least_squares(src, dst);
}

}  // namespace

std::optional<RegistrationResult> ransac_register(const MatchSet& matches, std::span<const Keypoint> a,
                                                  std::span<const Keypoint> b, const RansacParams& params) {
  if (matches.size() < 3) return std::nullopt;
  const double cos_alpha = std::cos(params.alpha);

  // Samples are drawn up front so the result does not depend on scheduling.
  const std::size_t total = static_cast<std::size_t>(std::max(params.iterations, 1));
  std::vector<std::array<std::size_t, 3>> samples(total);
  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<std::size_t> pick(0, matches.size() - 1);
  for (auto& s : samples) {
    s[0] = pick(rng);
    do s[1] = pick(rng); while (s[1] == s[0]);
    do s[2] = pick(rng); while (s[2] == s[0] || s[2] == s[1]);
  }

  constexpr std::size_t kBatch = 64;
  Hypothesis best;
  std::vector<Hypothesis> batch;
  for (std::size_t start = 0; start < total; start += kBatch) {
    const std::size_t count = std::min(kBatch, total - start);
    batch.assign(count, Hypothesis{});
    parallel_for(count, [&](std::size_t k) {
      const auto& s = samples[start + k];
      std::array<Eigen::Vector3d, 3> src, dst;
      for (int q = 0; q < 3; ++q) {
        src[q] = a[matches[s[q]].index_a].point;
        dst[q] = b[matches[s[q]].index_b].point;
      }
      try {
        batch[k] = score(rigid_least_squares(src, dst), matches, a, b, params.delta, cos_alpha);
      } catch (const DegenerateSampleError&) {
      }
    });
    for (const Hypothesis& h : batch)
      if (better(h, best)) best = h;
    if (best.valid && double(best.count) > params.early_exit_ratio * double(matches.size())) break;
  }
  if (!best.valid || best.count < std::max<std::size_t>(params.min_inliers, 3)) return std::nullopt;

  // Refit on the consensus set until it stops growing; the reported inliers
  // always satisfy both gates under the reported pose.
  Pose3d pose = best.pose;
  MatchSet inliers = inliers_of(pose, matches, a, b, params.delta, cos_alpha);
  for (int round = 0; round < 5; ++round) {
    Pose3d refined;
    try {
      refined = fit(inliers, a, b);
    } catch (const DegenerateSampleError&) {
      break;
    }
    MatchSet next = inliers_of(refined, matches, a, b, params.delta, cos_alpha);
    if (next.size() < inliers.size()) break;
    const bool same = next == inliers;
    pose = refined;
    inliers = std::move(next);
    if (same) break;
  }
  RegistrationResult result;
  result.relative_pose = pose;
  result.inlier_count = inliers.size();
  result.inliers = std::move(inliers);
  return result;
}

}  // namespace bt
