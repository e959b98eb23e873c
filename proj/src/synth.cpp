#include "bt/synth.hpp"

#include "bt/error.hpp"
#include "bt/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace bt {

namespace {

constexpr double kCell = 0.02;    // checker cell, meters
constexpr double kGrain = 0.005;  // noise lattice, meters
constexpr double kFrames = 100;

std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double hash01(std::uint64_t a, std::int64_t b, std::int64_t c) {
  const std::uint64_t h = mix(a * 0x100000001b3ULL ^ mix(std::uint64_t(b) * 31 + mix(std::uint64_t(c))));
  return double(h >> 11) * (1.0 / 9007199254740992.0);
}

double value_noise(std::uint64_t face, double s, double t) {
  const double x = s / kGrain, y = t / kGrain;
  const double fx = std::floor(x), fy = std::floor(y);
  const auto ix = std::int64_t(fx), iy = std::int64_t(fy);
  const double ax = x - fx, ay = y - fy;
  const std::uint64_t key = face + 1000;
  const double v00 = hash01(key, ix, iy), v10 = hash01(key, ix + 1, iy);
  const double v01 = hash01(key, ix, iy + 1), v11 = hash01(key, ix + 1, iy + 1);
  return (1 - ax) * (1 - ay) * v00 + ax * (1 - ay) * v10 + (1 - ax) * ay * v01 + ax * ay * v11;
}

/// Checkerboard with random per-cell shade plus fine value noise.
Rgb texture(std::uint64_t face, double s, double t) {
  const auto ci = std::int64_t(std::floor(s / kCell)), cj = std::int64_t(std::floor(t / kCell));
  const double shade = 0.15 + 0.7 * hash01(face, ci, cj);
  const double grain = 0.2 * (value_noise(face, s, t) - 0.5);
  const double tint_r = 0.85 + 0.3 * hash01(face + 77, ci, cj);
  const double tint_b = 0.85 + 0.3 * hash01(face + 91, ci, cj);
  auto to8 = [](double x) { return static_cast<std::uint8_t>(std::clamp(std::lround(255.0 * x), 0L, 255L)); };
  const double g = std::clamp(shade + grain, 0.0, 1.0);
  return {to8(g * tint_r), to8(g), to8(g * tint_b)};
}

struct SurfaceHit {
  double s;  // ray parameter
  Eigen::Vector3d normal;
  std::uint64_t face;
  double tu, tv;  // texture coordinates, meters
};

std::optional<SurfaceHit> hit_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& half) {
  double t_near = -std::numeric_limits<double>::infinity(), t_far = std::numeric_limits<double>::infinity();
  int axis = -1;
  double sign = 0;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (std::abs(o[k]) > half[k]) return std::nullopt;
      continue;
    }
    double t0 = (-half[k] - o[k]) / d[k], t1 = (half[k] - o[k]) / d[k];
    double entry_sign = -1;
    if (t0 > t1) {
      std::swap(t0, t1);
      entry_sign = 1;
    }
    if (t0 > t_near) {
      t_near = t0;
      axis = k;
      sign = entry_sign;
    }
    t_far = std::min(t_far, t1);
  }
  if (axis < 0 || t_near > t_far || t_near <= 0) return std::nullopt;
  SurfaceHit h;
  h.s = t_near;
  h.normal = Eigen::Vector3d::Zero();
  h.normal[axis] = sign;
  h.face = std::uint64_t(axis * 2 + (sign > 0));
  const Eigen::Vector3d p = o + t_near * d;
  const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
  h.tu = p[a1] + half[a1];
  h.tv = p[a2] + half[a2];
  return h;
}

std::optional<SurfaceHit> hit_sphere(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double r) {
  const double a = d.squaredNorm(), b = 2 * o.dot(d), c = o.squaredNorm() - r * r;
  const double disc = b * b - 4 * a * c;
  if (disc < 0) return std::nullopt;
  const double s = (-b - std::sqrt(disc)) / (2 * a);
  if (s <= 0) return std::nullopt;
  const Eigen::Vector3d p = o + s * d;
  SurfaceHit h{s, p / r, 0, 0, 0};
  h.tu = r * std::atan2(p.y(), p.x());
  h.tv = r * std::asin(std::clamp(p.z() / r, -1.0, 1.0));
  return h;
}

std::optional<SurfaceHit> hit_cylinder(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double r, double height) {
  std::optional<SurfaceHit> best;
  const double hz = height / 2;
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > 1e-15) {
    const double b = 2 * (o.x() * d.x() + o.y() * d.y());
    const double c = o.x() * o.x() + o.y() * o.y() - r * r;
    const double disc = b * b - 4 * a * c;
    if (disc >= 0) {
      const double s = (-b - std::sqrt(disc)) / (2 * a);
      const Eigen::Vector3d p = o + s * d;
      if (s > 0 && std::abs(p.z()) <= hz) {
        best = SurfaceHit{s, Eigen::Vector3d(p.x() / r, p.y() / r, 0), 0, r * std::atan2(p.y(), p.x()), p.z() + hz};
      }
    }
  }
  for (double cap : {-hz, hz}) {
    if (std::abs(d.z()) < 1e-15) continue;
    const double s = (cap - o.z()) / d.z();
    if (s <= 0 || (best && s >= best->s)) continue;
    const Eigen::Vector3d p = o + s * d;
    if (p.x() * p.x() + p.y() * p.y() > r * r) continue;
    if ((cap > 0 ? 1.0 : -1.0) * d.z() > 0) continue;  // back face
    best = SurfaceHit{s, Eigen::Vector3d(0, 0, cap > 0 ? 1 : -1), std::uint64_t(cap > 0 ? 2 : 1), p.x() + r, p.y() + r};
  }
  return best;
}

std::optional<SurfaceHit> hit_object(const ObjectShape& shape, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  switch (shape.kind) {
    case ShapeKind::Box:
      return hit_box(o, d, 0.5 * shape.dims);
    case ShapeKind::Sphere:
      return hit_sphere(o, d, shape.dims.x());
    case ShapeKind::Cylinder:
      return hit_cylinder(o, d, shape.dims.x(), shape.dims.z());
  }
  return std::nullopt;
}

struct ShadedHit {
  RayHit hit;
  Rgb color;
};

std::optional<ShadedHit> shade(const SyntheticScene& scene, const Pose3d& pose, const Pose3d& pose_inv, double u,
                               double v) {
  const Intrinsics& K = scene.camera;
  const Eigen::Vector3d d_cam((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
  const Eigen::Vector3d o = pose_inv.translation;
  const Eigen::Vector3d d = pose_inv.rotation * d_cam;

  std::optional<SurfaceHit> obj = hit_object(scene.object, o, d);
  std::optional<ShadedHit> out;
  if (obj) {
    const Eigen::Vector3d p = o + obj->s * d;
    out = ShadedHit{{obj->s, p, obj->normal, true}, texture(obj->face + 10 * scene.seed, obj->tu, obj->tv)};
  }
  if (scene.table && std::abs(d.z()) > 1e-15) {
    const double z0 = -0.5 * scene.object.bbox().z();
    const double s = (z0 - o.z()) / d.z();
    if (s > 0 && (!out || s < out->hit.depth) && o.z() > z0) {
      const Eigen::Vector3d p = o + s * d;
      const double shade_v = 0.35 + 0.1 * value_noise(999, p.x(), p.y());
      const auto g = static_cast<std::uint8_t>(std::lround(255 * shade_v));
      out = ShadedHit{{s, p, Eigen::Vector3d::UnitZ(), false}, {g, g, g}};
    }
  }
  (void)pose;
  return out;
}

}  // namespace

Eigen::Vector3d ObjectShape::bbox() const {
  switch (kind) {
    case ShapeKind::Box:
      return dims;
    case ShapeKind::Sphere:
      return Eigen::Vector3d::Constant(2 * dims.x());
    case ShapeKind::Cylinder:
      return {2 * dims.x(), 2 * dims.x(), dims.z()};
  }
  return dims;
}

std::optional<RayHit> cast_ray(const SyntheticScene& scene, const Pose3d& pose, double u, double v) {
  auto h = shade(scene, pose, inverse(pose), u, v);
  if (!h) return std::nullopt;
  return h->hit;
}

RenderedFrame render(const SyntheticScene& scene, std::size_t t) {
  if (t >= scene.trajectory.size()) throw Error("trajectory index " + std::to_string(t) + " out of range");
  const Intrinsics& K = scene.camera;
  RenderedFrame f;
  f.frame_id = t < scene.frame_ids.size() ? scene.frame_ids[t] : static_cast<int>(t);
  f.gt_pose = scene.trajectory[t];
  f.color = ColorImage(K.width, K.height, Rgb{0, 0, 0});
  f.depth = DepthMap(K.width, K.height, 0.0);
  f.mask = Mask(K.width, K.height, 0);
  const Pose3d inv = inverse(f.gt_pose);

  std::mt19937_64 rng(mix(scene.seed ^ mix(std::uint64_t(f.frame_id) + 1)));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int v = 0; v < K.height; ++v) {
    for (int u = 0; u < K.width; ++u) {
      const auto h = shade(scene, f.gt_pose, inv, u, v);
      if (!h) continue;
      double depth = h->hit.depth;
      if (scene.depth_sigma > 0) depth += scene.depth_sigma * noise(rng);
      f.depth(u, v) = std::max(depth, 0.0);
      f.color(u, v) = h->color;
      f.mask(u, v) = h->hit.on_object ? 1 : 0;
    }
  }
  if (count_nonzero(f.mask) == 0) throw Error("object not visible in frame " + std::to_string(f.frame_id));
  return f;
}

SyntheticCorrespondences ground_truth_correspondences(const SyntheticScene& scene, std::size_t t1, std::size_t t2,
                                                      std::size_t n, double outlier_frac, std::uint64_t seed) {
  if (t1 >= scene.size() || t2 >= scene.size()) throw Error("trajectory index out of range");
  SyntheticCorrespondences out;
  if (n == 0) return out;
  const Pose3d T1 = scene.trajectory[t1], T2 = scene.trajectory[t2];
  const Intrinsics& K = scene.camera;
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> gauss(0.f, 1.f);

  std::vector<int> pixels(std::size_t(K.width) * K.height);
  std::iota(pixels.begin(), pixels.end(), 0);
  std::shuffle(pixels.begin(), pixels.end(), rng);
  for (std::size_t k = 0; k < pixels.size() && out.a.size() < n; ++k) {
    const double u = pixels[k] % K.width, v = pixels[k] / K.width;
    const auto h1 = cast_ray(scene, T1, u, v);
    if (!h1 || !h1->on_object) continue;
    const Eigen::Vector3d q = T2 * h1->object_point;
    const auto px = project<double>(q, K);
    if (!px || px->x() < 0 || px->y() < 0 || px->x() > K.width - 1 || px->y() > K.height - 1) continue;
    const auto h2 = cast_ray(scene, T2, px->x(), px->y());
    if (!h2 || !h2->on_object || std::abs(h2->depth - q.z()) > 1e-6) continue;

    Keypoint ka, kb;
    ka.pixel = {u, v};
    ka.point = T1 * h1->object_point;
    ka.normal = T1.rotation * h1->object_normal;
    kb.pixel = *px;
    kb.point = q;
    kb.normal = T2.rotation * h1->object_normal;
    for (int k = 0; k < kDescriptorSize; ++k) ka.descriptor[k] = gauss(rng);
    ka.descriptor.normalize();
    kb.descriptor = ka.descriptor;
    if (scene.descriptor_sigma > 0)
      for (int k = 0; k < kDescriptorSize; ++k) kb.descriptor[k] += static_cast<float>(scene.descriptor_sigma) * gauss(rng);
    out.matches.push_back({out.a.size(), out.b.size(), (ka.descriptor - kb.descriptor).norm()});
    out.a.push_back(ka);
    out.b.push_back(kb);
  }
  out.shortfall = n - out.a.size();
  if (outlier_frac > 0) inject_outliers(out.matches, outlier_frac, mix(seed));
  return out;
}

ModelPoints sample_model_points(const ObjectShape& shape, std::size_t n, std::uint64_t seed) {
  ModelPoints pts;
  pts.reserve(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::Vector3d half = 0.5 * shape.dims;
  while (pts.size() < n) {
    switch (shape.kind) {
      case ShapeKind::Box: {
        const double ax = shape.dims.y() * shape.dims.z(), ay = shape.dims.x() * shape.dims.z(),
                     az = shape.dims.x() * shape.dims.y();
        const double pick = unit(rng) * (ax + ay + az);
        const int axis = pick < ax ? 0 : (pick < ax + ay ? 1 : 2);
        Eigen::Vector3d p;
        for (int k = 0; k < 3; ++k) p[k] = (2 * unit(rng) - 1) * half[k];
        p[axis] = unit(rng) < 0.5 ? -half[axis] : half[axis];
        pts.push_back(p);
        break;
      }
      case ShapeKind::Sphere: {
        const double z = 2 * unit(rng) - 1, phi = 2 * std::numbers::pi * unit(rng);
        const double rxy = std::sqrt(1 - z * z);
        pts.push_back(shape.dims.x() * Eigen::Vector3d(rxy * std::cos(phi), rxy * std::sin(phi), z));
        break;
      }
      case ShapeKind::Cylinder: {
        const double r = shape.dims.x(), h = shape.dims.z();
        const double side = 2 * std::numbers::pi * r * h, cap = std::numbers::pi * r * r;
        if (unit(rng) * (side + 2 * cap) < side) {
          const double phi = 2 * std::numbers::pi * unit(rng);
          pts.push_back({r * std::cos(phi), r * std::sin(phi), (unit(rng) - 0.5) * h});
        } else {
          const double rr = r * std::sqrt(unit(rng)), phi = 2 * std::numbers::pi * unit(rng);
          pts.push_back({rr * std::cos(phi), rr * std::sin(phi), unit(rng) < 0.5 ? -h / 2 : h / 2});
        }
        break;
      }
    }
  }
  return pts;
}

Intrinsics default_camera() { return Intrinsics{525.0, 525.0, 319.5, 239.5, 640, 480}; }

Pose3d look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  Pose3d cam_to_obj;
  cam_to_obj.rotation.col(0) = right;
  cam_to_obj.rotation.col(1) = down;
  cam_to_obj.rotation.col(2) = forward;
  cam_to_obj.translation = eye;
  return inverse(cam_to_obj);
}

namespace {

SyntheticScene base_scene(const std::string& name, std::uint64_t seed) {
  SyntheticScene s;
  s.name = name;
  s.camera = default_camera();
  s.depth_sigma = 0.002;
  s.descriptor_sigma = 0.05;
  s.outlier_fraction = 0.2;
  s.seed = seed;
  return s;
}

void orbit_trajectory(SyntheticScene& s) {
  const double radius = 0.7, elevation = deg2rad(25.0);
  for (int t = 0; t < int(kFrames); ++t) {
    const double az = deg2rad(2.0 * t) - deg2rad(60.0);
    const Eigen::Vector3d eye(radius * std::cos(elevation) * std::cos(az), radius * std::cos(elevation) * std::sin(az),
                              radius * std::sin(elevation));
    s.trajectory.push_back(look_at(eye, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ()));
    s.frame_ids.push_back(t);
  }
  s.initial_pose = s.trajectory.front();
}

}  // namespace

SyntheticScene orbit_scene(std::uint64_t seed) {
  SyntheticScene s = base_scene("ORBIT", seed);
  orbit_trajectory(s);
  return s;
}

SyntheticScene manipulate_scene(std::uint64_t seed) {
  SyntheticScene s = base_scene("MANIPULATE", seed);
  const Eigen::Vector3d eye(0.0, -0.65, 0.3);
  const Pose3d world_to_cam = look_at(eye, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ());
  const Eigen::Vector3d tilt_axis = Eigen::Vector3d(0.2, 0.1, 1.0).normalized();
  for (int t = 0; t < int(kFrames); ++t) {
    Pose3d object_to_world;
    object_to_world.rotation = so3_exp(Eigen::Vector3d(deg2rad(2.0 * t) * tilt_axis));
    object_to_world.translation = Eigen::Vector3d(-0.1 + 0.002 * t, 0.0, 0.0);
    s.trajectory.push_back(compose(world_to_cam, object_to_world));
    s.frame_ids.push_back(t);
  }
  s.initial_pose = s.trajectory.front();
  return s;
}

SyntheticScene dropped_scene(std::uint64_t seed) {
  SyntheticScene full = orbit_scene(seed);
  SyntheticScene s = full;
  s.name = "DROPPED";
  s.trajectory.clear();
  s.frame_ids.clear();
  std::vector<int> candidates;
  for (int t = 1; t < int(full.size()); ++t) candidates.push_back(t);
  std::mt19937_64 rng(mix(seed ^ 0xd209ULL));
  std::shuffle(candidates.begin(), candidates.end(), rng);
  const std::size_t drop = full.size() * 15 / 100;
  std::vector<bool> dropped(full.size(), false);
  for (std::size_t k = 0; k < drop; ++k) dropped[candidates[k]] = true;
  for (std::size_t t = 0; t < full.size(); ++t) {
    if (dropped[t]) continue;
    s.trajectory.push_back(full.trajectory[t]);
    s.frame_ids.push_back(full.frame_ids[t]);
  }
  return s;
}

SyntheticScene perturbed_scene(std::uint64_t seed) {
  SyntheticScene s = orbit_scene(seed);
  s.name = "PERTURBED";
  std::mt19937_64 rng(mix(seed ^ 0x4cULL));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Eigen::Vector3d offset;
  do offset = Eigen::Vector3d(unit(rng), unit(rng), unit(rng));
  while (offset.squaredNorm() > 1.0);
  s.initial_pose.translation += 0.04 * offset;
  return s;
}

std::vector<SyntheticScene> standard_benchmarks() {
  return {orbit_scene(), manipulate_scene(), dropped_scene(), perturbed_scene()};
}

SyntheticScene benchmark_by_name(const std::string& name, std::optional<std::uint64_t> seed) {
  if (name == "ORBIT") return seed ? orbit_scene(*seed) : orbit_scene();
  if (name == "MANIPULATE") return seed ? manipulate_scene(*seed) : manipulate_scene();
  if (name == "DROPPED") return seed ? dropped_scene(*seed) : dropped_scene();
  if (name == "PERTURBED") return seed ? perturbed_scene(*seed) : perturbed_scene();
  throw Error("unknown scene '" + name + "' (expected ORBIT, MANIPULATE, DROPPED or PERTURBED)");
}

}  // namespace bt
