#include "bt/segmentation.hpp"

#include "bt/dataset.hpp"
#include "bt/error.hpp"
#include "bt/image_io.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

namespace bt {

Mask mask_from_file(const std::filesystem::path& path, int width, int height) {
  if (!std::filesystem::exists(path)) throw DataError("missing mask file " + path.string());
  Mask m = read_mask_png(path);
  if (m.width != width || m.height != height)
    throw DataError(path.string() + ": mask is " + std::to_string(m.width) + "x" + std::to_string(m.height) +
                    ", frame is " + std::to_string(width) + "x" + std::to_string(height));
  return m;
}

Mask FileMaskProvider::mask(int frame_id, const DepthMap& depth, const Intrinsics&) const {
  return mask_from_file(dir_ / frame_filename("mask", frame_id, ".png"), depth.width, depth.height);
}

namespace {

struct Plane {
  Eigen::Vector3d n;
  double d;  // n.p + d = 0
  double distance(const Eigen::Vector3d& p) const { return std::abs(n.dot(p) + d); }
};

std::optional<Plane> plane_through(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const Eigen::Vector3d n = (b - a).cross(c - a);
  const double len = n.norm();
  if (len < 1e-12) return std::nullopt;
  return Plane{n / len, -n.dot(a) / len};
}

Plane fit_plane(const std::vector<Eigen::Vector3d>& pts, const std::vector<std::size_t>& idx) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (auto i : idx) mean += pts[i];
  mean /= double(idx.size());
  Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
  for (auto i : idx) C += (pts[i] - mean) * (pts[i] - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(C);
  const Eigen::Vector3d n = es.eigenvectors().col(0);
  return {n, -n.dot(mean)};
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};
struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    return std::size_t(k.x * 73856093LL ^ k.y * 19349663LL ^ k.z * 83492791LL);
  }
};

}  // namespace

Mask plane_removal_mask(const DepthMap& depth, const Intrinsics& K, const PlaneRemovalParams& params) {
  std::vector<Eigen::Vector3d> pts;
  std::vector<std::size_t> pixel;
  for (int v = 0; v < depth.height; ++v)
    for (int u = 0; u < depth.width; ++u)
      if (auto p = unproject<double>(u, v, depth(u, v), K)) {
        pts.push_back(*p);
        pixel.push_back(std::size_t(v) * depth.width + u);
      }
  if (pts.size() < params.min_points)
    throw DataError("plane removal needs at least " + std::to_string(params.min_points) + " valid depth points");

  // Hypotheses are scored on a fixed subsample to bound the cost.
  constexpr std::size_t kScoreSamples = 20000;
  const std::size_t step = std::max<std::size_t>(1, pts.size() / kScoreSamples);
  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  std::optional<Plane> best;
  std::size_t best_count = 0;
  for (int it = 0; it < params.iterations; ++it) {
    const std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
    const auto plane = plane_through(pts[a], pts[b], pts[c]);
    if (!plane) continue;
    std::size_t count = 0;
    for (std::size_t i = 0; i < pts.size(); i += step) count += plane->distance(pts[i]) <= params.inlier_distance;
    if (count > best_count) {
      best_count = count;
      best = plane;
    }
  }

  std::vector<bool> on_plane(pts.size(), false);
  if (best) {
    std::vector<std::size_t> inliers;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (best->distance(pts[i]) <= params.inlier_distance) inliers.push_back(i);
    if (inliers.size() >= 3) {
      const Plane refined = fit_plane(pts, inliers);
      for (std::size_t i = 0; i < pts.size(); ++i) on_plane[i] = refined.distance(pts[i]) <= params.inlier_distance;
    }
  }

  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (!on_plane[i]) rest.push_back(i);

  const double cell = params.linkage;
  auto key_of = [&](const Eigen::Vector3d& p) {
    return CellKey{std::int64_t(std::floor(p.x() / cell)), std::int64_t(std::floor(p.y() / cell)),
                   std::int64_t(std::floor(p.z() / cell))};
  };
  std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> grid;
  for (std::size_t k = 0; k < rest.size(); ++k) grid[key_of(pts[rest[k]])].push_back(k);

  UnionFind uf(rest.size());
  const double r2 = params.linkage * params.linkage;
  for (std::size_t k = 0; k < rest.size(); ++k) {
    const Eigen::Vector3d& p = pts[rest[k]];
    const CellKey c = key_of(p);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = grid.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            if (j <= k || uf.find(j) == uf.find(k)) continue;
            if ((pts[rest[j]] - p).squaredNorm() <= r2) uf.unite(j, k);
          }
        }
  }

  std::vector<std::size_t> size(rest.size(), 0);
  for (std::size_t k = 0; k < rest.size(); ++k) ++size[uf.find(k)];
  std::size_t best_root = 0, best_size = 0;
  for (std::size_t k = 0; k < rest.size(); ++k)
    if (size[k] > best_size) {
      best_size = size[k];
      best_root = k;
    }
  if (best_size < params.min_cluster) throw EmptyMaskError("no off-plane cluster of at least " +
                                                           std::to_string(params.min_cluster) + " points");

  Mask mask(depth.width, depth.height, 0);
  for (std::size_t k = 0; k < rest.size(); ++k)
    if (uf.find(k) == best_root) mask.data[pixel[rest[k]]] = 1;
  return mask;
}

}  // namespace bt
