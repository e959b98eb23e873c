#include "bt/features.hpp"

#include "bt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace bt {

namespace {

constexpr int kPatchHalf = 8;  // descriptor grid is 16x16 samples
constexpr int kCells = 4;
constexpr int kOrientationBins = 8;
constexpr int kOrientationHistBins = 36;

std::vector<float> gaussian_kernel(double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<float> k(2 * r + 1);
  double sum = 0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
    sum += k[i + r];
  }
  for (auto& v : k) v = static_cast<float>(v / sum);
  return k;
}

GrayImage blur(const GrayImage& in, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  GrayImage tmp(in.width, in.height), out(in.width, in.height);
  for (int v = 0; v < in.height; ++v) {
    for (int u = 0; u < in.width; ++u) {
      float acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * in(std::clamp(u + i, 0, in.width - 1), v);
      tmp(u, v) = acc;
    }
  }
  for (int v = 0; v < in.height; ++v) {
    for (int u = 0; u < in.width; ++u) {
      float acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp(u, std::clamp(v + i, 0, in.height - 1));
      out(u, v) = acc;
    }
  }
  return out;
}

GrayImage downsample(const GrayImage& in) {
  GrayImage out(in.width / 2, in.height / 2);
  for (int v = 0; v < out.height; ++v)
    for (int u = 0; u < out.width; ++u)
      out(u, v) = 0.25f * (in(2 * u, 2 * v) + in(2 * u + 1, 2 * v) + in(2 * u, 2 * v + 1) + in(2 * u + 1, 2 * v + 1));
  return out;
}

struct Gradients {
  GrayImage gx, gy;
};

Gradients gradients(const GrayImage& img) {
  Gradients g{GrayImage(img.width, img.height), GrayImage(img.width, img.height)};
  for (int v = 1; v < img.height - 1; ++v) {
    for (int u = 1; u < img.width - 1; ++u) {
      g.gx(u, v) = 0.5f * (img(u + 1, v) - img(u - 1, v));
      g.gy(u, v) = 0.5f * (img(u, v + 1) - img(u, v - 1));
    }
  }
  return g;
}

float bilinear(const GrayImage& img, double x, double y) {
  x = std::clamp(x, 0.0, img.width - 1.001);
  y = std::clamp(y, 0.0, img.height - 1.001);
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const float fx = static_cast<float>(x - x0), fy = static_cast<float>(y - y0);
  return (1 - fx) * (1 - fy) * img(x0, y0) + fx * (1 - fy) * img(x0 + 1, y0) +
         (1 - fx) * fy * img(x0, y0 + 1) + fx * fy * img(x0 + 1, y0 + 1);
}

/// Summed-area table over the mask, for O(1) "square fully inside" checks.
class MaskIntegral {
 public:
  explicit MaskIntegral(const Mask& m) : w_(m.width + 1), sums_(std::size_t(m.width + 1) * (m.height + 1), 0) {
    for (int v = 0; v < m.height; ++v) {
      std::int64_t row = 0;
      for (int u = 0; u < m.width; ++u) {
        row += m(u, v) != 0;
        at(u + 1, v + 1) = at(u + 1, v) + row;
      }
    }
    width_ = m.width;
    height_ = m.height;
  }

  bool square_inside(int u, int v, int half) const {
    const int u0 = u - half, v0 = v - half, u1 = u + half + 1, v1 = v + half + 1;
    if (u0 < 0 || v0 < 0 || u1 > width_ || v1 > height_) return false;
    const std::int64_t s = at(u1, v1) - at(u0, v1) - at(u1, v0) + at(u0, v0);
    return s == std::int64_t(u1 - u0) * (v1 - v0);
  }

 private:
  std::int64_t& at(int u, int v) { return sums_[std::size_t(v) * w_ + u]; }
  std::int64_t at(int u, int v) const { return sums_[std::size_t(v) * w_ + u]; }
  int w_;
  int width_ = 0, height_ = 0;
  std::vector<std::int64_t> sums_;
};

struct Candidate {
  int level;
  double u, v;  // level coordinates, subpixel
  double score;
};

double dominant_orientation(const Gradients& g, double cu, double cv) {
  std::array<double, kOrientationHistBins> hist{};
  const int r = kPatchHalf;
  const double sigma = 0.5 * r;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy > r * r) continue;
      const double x = cu + dx, y = cv + dy;
      const double gx = bilinear(g.gx, x, y), gy = bilinear(g.gy, x, y);
      const double mag = std::hypot(gx, gy);
      if (mag == 0) continue;
      const double ang = std::atan2(gy, gx) + std::numbers::pi;
      int bin = static_cast<int>(ang / (2 * std::numbers::pi) * kOrientationHistBins);
      bin = std::clamp(bin, 0, kOrientationHistBins - 1);
      hist[bin] += mag * std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma));
    }
  }
  // Smooth the circular histogram once.
  std::array<double, kOrientationHistBins> smooth{};
  for (int i = 0; i < kOrientationHistBins; ++i) {
    smooth[i] = 0.25 * hist[(i + kOrientationHistBins - 1) % kOrientationHistBins] + 0.5 * hist[i] +
                0.25 * hist[(i + 1) % kOrientationHistBins];
  }
  const int best = static_cast<int>(std::max_element(smooth.begin(), smooth.end()) - smooth.begin());
  const double l = smooth[(best + kOrientationHistBins - 1) % kOrientationHistBins];
  const double c = smooth[best];
  const double rr = smooth[(best + 1) % kOrientationHistBins];
  const double denom = l - 2 * c + rr;
  const double offset = denom != 0 ? 0.5 * (l - rr) / denom : 0.0;
  return (best + 0.5 + offset) * 2 * std::numbers::pi / kOrientationHistBins - std::numbers::pi;
}

Descriptor describe(const Gradients& g, double cu, double cv) {
  const double theta = dominant_orientation(g, cu, cv);
  const double c = std::cos(theta), s = std::sin(theta);
  std::array<double, kCells * kCells * kOrientationBins> hist{};
  const double sigma = kPatchHalf;
  const double bin_width = 2 * std::numbers::pi / kOrientationBins;
  for (int iy = 0; iy < 2 * kPatchHalf; ++iy) {
    for (int ix = 0; ix < 2 * kPatchHalf; ++ix) {
      const double lx = ix - kPatchHalf + 0.5, ly = iy - kPatchHalf + 0.5;
      const double x = cu + c * lx - s * ly;
      const double y = cv + s * lx + c * ly;
      const double gx = bilinear(g.gx, x, y), gy = bilinear(g.gy, x, y);
      // Gradient expressed in the keypoint's rotated frame.
      const double rgx = c * gx + s * gy;
      const double rgy = -s * gx + c * gy;
      const double mag = std::hypot(rgx, rgy) * std::exp(-0.5 * (lx * lx + ly * ly) / (sigma * sigma));
      if (mag == 0) continue;
      double ang = std::atan2(rgy, rgx) + std::numbers::pi;
      const double fbin = ang / bin_width - 0.5;
      const int b0 = static_cast<int>(std::floor(fbin));
      const double frac = fbin - b0;
      const int cell = (iy / (2 * kPatchHalf / kCells)) * kCells + ix / (2 * kPatchHalf / kCells);
      hist[cell * kOrientationBins + (b0 + kOrientationBins) % kOrientationBins] += mag * (1 - frac);
      hist[cell * kOrientationBins + (b0 + 1 + kOrientationBins) % kOrientationBins] += mag * frac;
    }
  }
  Eigen::Map<Eigen::Matrix<double, kDescriptorSize, 1>> h(hist.data());
  Descriptor d = Descriptor::Zero();
  const double n0 = h.norm();
  if (n0 == 0) return d;
  h /= n0;
  h = h.cwiseMin(0.2);
  const double n1 = h.norm();
  if (n1 > 0) h /= n1;
  return h.cast<float>();
}

}  // namespace

GrayImage to_gray(const ColorImage& color) {
  GrayImage g(color.width, color.height);
  for (std::size_t i = 0; i < color.size(); ++i) {
    const auto& c = color.data[i];
    g.data[i] = (0.299f * c[0] + 0.587f * c[1] + 0.114f * c[2]) / 255.f;
  }
  return g;
}

std::vector<Keypoint> detect_keypoints(const Frame& frame, const DetectorParams& params) {
  if (frame.color.empty() || params.target_n <= 0) return {};
  const MaskIntegral mask_sum(frame.mask);

  std::vector<GrayImage> pyramid;
  pyramid.push_back(blur(to_gray(frame.color), 1.0));
  for (int l = 1; l < params.levels; ++l) pyramid.push_back(blur(downsample(pyramid.back()), 1.0));

  std::vector<Gradients> grads;
  std::vector<Candidate> candidates;
  for (int level = 0; level < static_cast<int>(pyramid.size()); ++level) {
    const GrayImage& img = pyramid[level];
    grads.push_back(gradients(img));
    const Gradients& g = grads.back();
    GrayImage ixx(img.width, img.height), iyy(img.width, img.height), ixy(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) {
      ixx.data[i] = g.gx.data[i] * g.gx.data[i];
      iyy.data[i] = g.gy.data[i] * g.gy.data[i];
      ixy.data[i] = g.gx.data[i] * g.gy.data[i];
    }
    ixx = blur(ixx, 1.5);
    iyy = blur(iyy, 1.5);
    ixy = blur(ixy, 1.5);
    GrayImage response(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) {
      const double det = double(ixx.data[i]) * iyy.data[i] - double(ixy.data[i]) * ixy.data[i];
      const double tr = double(ixx.data[i]) + iyy.data[i];
      response.data[i] = static_cast<float>(det - params.harris_k * tr * tr);
    }

    const int scale = 1 << level;
    // Descriptor support (rotated 16x16 patch) must lie inside the mask.
    const int support = static_cast<int>(std::ceil(kPatchHalf * std::sqrt(2.0))) + 2;
    auto usable = [&](int u, int v) {
      const int u0 = u * scale + scale / 2, v0 = v * scale + scale / 2;
      if (!mask_sum.square_inside(u0, v0, support * scale)) return false;
      return frame.has_point(u0, v0) && frame.has_normal(u0, v0);
    };

    float max_r = 0;
    for (int v = 0; v < img.height; ++v)
      for (int u = 0; u < img.width; ++u)
        if (response(u, v) > max_r && usable(u, v)) max_r = response(u, v);
    if (max_r <= 0) continue;
    const float threshold = static_cast<float>(params.min_response_ratio * max_r);

    const int nr = params.nms_radius;
    for (int v = nr; v < img.height - nr; ++v) {
      for (int u = nr; u < img.width - nr; ++u) {
        const float r = response(u, v);
        if (r < threshold) continue;
        bool is_max = true;
        for (int dy = -nr; dy <= nr && is_max; ++dy) {
          for (int dx = -nr; dx <= nr; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const float o = response(u + dx, v + dy);
            // Strict on one half so plateaus keep exactly one pixel.
            if (o > r || (o == r && (dy < 0 || (dy == 0 && dx < 0)))) {
              is_max = false;
              break;
            }
          }
        }
        if (!is_max || !usable(u, v)) continue;
        const double rl = response(u - 1, v), rr = response(u + 1, v);
        const double ru = response(u, v - 1), rd = response(u, v + 1);
        const double dxn = rl - 2.0 * r + rr, dyn = ru - 2.0 * r + rd;
        const double ox = dxn < 0 ? std::clamp(0.5 * (rl - rr) / dxn, -0.5, 0.5) : 0.0;
        const double oy = dyn < 0 ? std::clamp(0.5 * (ru - rd) / dyn, -0.5, 0.5) : 0.0;
        candidates.push_back({level, u + ox, v + oy, r / max_r});
      }
    }
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });

  std::vector<Keypoint> raw;
  std::vector<Eigen::Vector2d> accepted;
  const double min_sep2 = params.min_separation * params.min_separation;
  for (const Candidate& c : candidates) {
    if (static_cast<int>(raw.size()) >= params.target_n) break;
    const double scale = double(1 << c.level);
    const Eigen::Vector2d px((c.u + 0.5) * scale - 0.5, (c.v + 0.5) * scale - 0.5);
    bool crowded = false;
    for (const auto& q : accepted) {
      if ((q - px).squaredNorm() < min_sep2) {
        crowded = true;
        break;
      }
    }
    if (crowded) continue;
    Keypoint kp;
    kp.pixel = px;
    kp.response = static_cast<float>(c.score);
    kp.descriptor = describe(grads[c.level], c.u, c.v);
    raw.push_back(kp);
    accepted.push_back(px);
  }
  return attach_geometry(frame, std::move(raw));
}

std::vector<Keypoint> attach_geometry(const Frame& frame, std::vector<Keypoint> raw) {
  std::vector<Keypoint> out;
  out.reserve(raw.size());
  const Intrinsics& K = frame.intrinsics;
  for (Keypoint& kp : raw) {
    const double u = kp.pixel.x(), v = kp.pixel.y();
    const int iu = static_cast<int>(std::lround(u)), iv = static_cast<int>(std::lround(v));
    if (!frame.cloud.contains(iu, iv) || !frame.has_point(iu, iv) || !frame.has_normal(iu, iv)) continue;
    double depth = frame.depth(iu, iv);
    const int u0 = static_cast<int>(std::floor(u)), v0 = static_cast<int>(std::floor(v));
    if (frame.cloud.contains(u0, v0) && frame.cloud.contains(u0 + 1, v0 + 1)) {
      const double d00 = frame.depth(u0, v0), d10 = frame.depth(u0 + 1, v0);
      const double d01 = frame.depth(u0, v0 + 1), d11 = frame.depth(u0 + 1, v0 + 1);
      const double lo = std::min({d00, d10, d01, d11}), hi = std::max({d00, d10, d01, d11});
      if (lo > 0 && hi - lo < 0.01) {
        const double fx = u - u0, fy = v - v0;
        depth = (1 - fx) * (1 - fy) * d00 + fx * (1 - fy) * d10 + (1 - fx) * fy * d01 + fx * fy * d11;
      }
    }
    auto p = unproject(u, v, depth, K);
    if (!p) continue;
    kp.point = *p;
    kp.normal = frame.normals(iu, iv);
    out.push_back(kp);
  }
  return out;
}

MatchSet match_descriptors(std::span<const Keypoint> a, std::span<const Keypoint> b, double ratio) {
  MatchSet out;
  if (a.empty() || b.empty()) return out;
  Eigen::MatrixXf A(kDescriptorSize, a.size()), B(kDescriptorSize, b.size());
  for (std::size_t i = 0; i < a.size(); ++i) A.col(i) = a[i].descriptor;
  for (std::size_t j = 0; j < b.size(); ++j) B.col(j) = b[j].descriptor;
  const Eigen::VectorXf na = A.colwise().squaredNorm().transpose();
  const Eigen::RowVectorXf nb = B.colwise().squaredNorm();
  Eigen::MatrixXf d2 = -2.0f * (A.transpose() * B);
  d2.colwise() += na;
  d2.rowwise() += nb;
  d2 = d2.cwiseMax(0.0f);

  std::vector<Eigen::Index> best_a_for_b(b.size());
  for (Eigen::Index j = 0; j < d2.cols(); ++j) d2.col(j).minCoeff(&best_a_for_b[j]);

  const float ratio2 = static_cast<float>(ratio * ratio);
  for (Eigen::Index i = 0; i < d2.rows(); ++i) {
    Eigen::Index best = 0;
    const float d_best = d2.row(i).minCoeff(&best);
    if (best_a_for_b[best] != i) continue;
    float d_second = std::numeric_limits<float>::infinity();
    for (Eigen::Index j = 0; j < d2.cols(); ++j)
      if (j != best) d_second = std::min(d_second, d2(i, j));
    if (std::isfinite(d_second) && d_best > ratio2 * d_second) continue;
    out.push_back({std::size_t(i), std::size_t(best), std::sqrt(d_best)});
  }
  return out;
}

void inject_outliers(MatchSet& matches, double fraction, std::uint64_t seed) {
  const std::size_t count = std::min(matches.size(), static_cast<std::size_t>(std::lround(fraction * matches.size())));
  if (count < 2) return;
  std::vector<std::size_t> order(matches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(count);
  const std::size_t first_b = matches[order[0]].index_b;
  for (std::size_t k = 0; k + 1 < count; ++k) matches[order[k]].index_b = matches[order[k + 1]].index_b;
  matches[order[count - 1]].index_b = first_b;
}

std::vector<Keypoint> FileKeypointProvider::keypoints(const Frame& frame) const {
  return attach_geometry(frame, read_keypoint_file(dir_ / frame_filename("keypoints", frame.id, ".txt")));
}

}  // namespace bt
