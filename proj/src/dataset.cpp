#include "bt/dataset.hpp"

#include "bt/error.hpp"
#include "bt/features.hpp"
#include "bt/image_io.hpp"
#include "bt/synth.hpp"

#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

namespace bt {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::vector<double> numbers(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::vector<double> v;
  std::string tok;
  while (in >> tok) {
    std::size_t used = 0;
    double x = 0;
    try {
      x = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw DataError(origin + ": not a number: '" + tok + "'");
    v.push_back(x);
  }
  return v;
}

}  // namespace

std::string frame_filename(const std::string& prefix, int id, const std::string& ext) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", id);
  return prefix + "_" + buf + ext;
}

std::string format_pose(const Pose3d& T) {
  const Eigen::Matrix4d M = T.matrix();
  std::string s;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      if (!s.empty()) s += ' ';
      s += fmt(M(r, c));
    }
  return s;
}

Pose3d parse_pose(const std::string& text, const std::string& origin) {
  const auto v = numbers(text, origin);
  if (v.size() != 16) throw DataError(origin + ": expected 16 values, got " + std::to_string(v.size()));
  Eigen::Matrix4d M;
  for (int k = 0; k < 16; ++k) M(k / 4, k % 4) = v[k];
  Pose3d T = Pose3d::from_matrix(M);
  if (!T.is_valid(1e-6)) throw DataError(origin + ": rotation is not orthonormal");
  return T;
}

Pose3d read_pose_file(const fs::path& path) { return parse_pose(slurp(path), path.string()); }

void write_pose_file(const fs::path& path, const Pose3d& T) {
  const Eigen::Matrix4d M = T.matrix();
  auto out = open_out(path);
  for (int r = 0; r < 4; ++r)
    out << fmt(M(r, 0)) << ' ' << fmt(M(r, 1)) << ' ' << fmt(M(r, 2)) << ' ' << fmt(M(r, 3)) << '\n';
}

Intrinsics read_intrinsics(const fs::path& path) {
  const auto v = numbers(slurp(path), path.string());
  if (v.size() != 6) throw DataError(path.string() + ": expected fx fy cx cy width height");
  Intrinsics K{v[0], v[1], v[2], v[3], int(v[4]), int(v[5])};
  if (!K.is_valid()) throw DataError(path.string() + ": invalid intrinsics");
  return K;
}

void write_intrinsics(const fs::path& path, const Intrinsics& K) {
  auto out = open_out(path);
  out << fmt(K.fx) << ' ' << fmt(K.fy) << ' ' << fmt(K.cx) << ' ' << fmt(K.cy) << ' ' << K.width << ' ' << K.height
      << '\n';
}

std::vector<Keypoint> read_keypoint_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<Keypoint> kps;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto v = numbers(line, path.string() + ":" + std::to_string(lineno));
    if (v.size() != 2 + kDescriptorSize)
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected u v and 128 descriptor values");
    Keypoint k;
    k.pixel = {v[0], v[1]};
    for (int d = 0; d < kDescriptorSize; ++d) k.descriptor[d] = static_cast<float>(v[2 + d]);
    kps.push_back(k);
  }
  return kps;
}

void write_keypoint_file(const fs::path& path, const std::vector<Keypoint>& keypoints) {
  auto out = open_out(path);
  for (const auto& k : keypoints) {
    out << fmt(k.pixel.x()) << ' ' << fmt(k.pixel.y());
    for (int d = 0; d < kDescriptorSize; ++d) {
      char buf[32];
      std::snprintf(buf, sizeof buf, " %.9g", double(k.descriptor[d]));
      out << buf;
    }
    out << '\n';
  }
}

ModelPoints read_model_file(const fs::path& path) {
  const auto v = numbers(slurp(path), path.string());
  if (v.empty() || v.size() % 3) throw DataError(path.string() + ": expected x y z triples");
  ModelPoints pts(v.size() / 3);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {v[3 * i], v[3 * i + 1], v[3 * i + 2]};
  return pts;
}

void write_model_file(const fs::path& path, const ModelPoints& points) {
  auto out = open_out(path);
  for (const auto& p : points) out << fmt(p.x()) << ' ' << fmt(p.y()) << ' ' << fmt(p.z()) << '\n';
}

Eigen::Vector3d read_bbox_file(const fs::path& path) {
  const auto v = numbers(slurp(path), path.string());
  if (v.size() != 3 || v[0] <= 0 || v[1] <= 0 || v[2] <= 0)
    throw DataError(path.string() + ": expected three positive extents");
  return {v[0], v[1], v[2]};
}

void write_bbox_file(const fs::path& path, const Eigen::Vector3d& dims) {
  auto out = open_out(path);
  out << fmt(dims.x()) << ' ' << fmt(dims.y()) << ' ' << fmt(dims.z()) << '\n';
}

std::string format_log_entry(const PoseLogEntry& e) {
  return std::to_string(e.frame_id) + ' ' + format_pose(e.pose) + (e.coasted ? " coasted" : " ok");
}

PoseLogEntry parse_log_entry(const std::string& line) {
  std::istringstream in(line);
  std::string id_tok;
  in >> id_tok;
  std::vector<std::string> rest;
  for (std::string t; in >> t;) rest.push_back(t);
  if (rest.size() != 17) throw DataError("pose log line needs frame_id, 16 values and a status: '" + line + "'");
  PoseLogEntry e;
  try {
    std::size_t used = 0;
    e.frame_id = std::stoi(id_tok, &used);
    if (used != id_tok.size()) throw std::invalid_argument(id_tok);
  } catch (const std::exception&) {
    throw DataError("bad frame id '" + id_tok + "'");
  }
  const std::string status = rest.back();
  if (status != "ok" && status != "coasted") throw DataError("bad status '" + status + "'");
  e.coasted = status == "coasted";
  rest.pop_back();
  std::string joined;
  for (const auto& t : rest) joined += t + ' ';
  e.pose = parse_pose(joined, "pose log frame " + id_tok);
  return e;
}

std::vector<PoseLogEntry> read_pose_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<PoseLogEntry> log;
  std::string line;
  while (std::getline(in, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) log.push_back(parse_log_entry(line));
  return log;
}

void write_pose_log(std::ostream& os, const std::vector<PoseLogEntry>& log) {
  for (const auto& e : log) os << format_log_entry(e) << '\n';
}

Dataset::Dataset(fs::path dir) : dir_(std::move(dir)) {
  if (!fs::is_directory(dir_)) throw DataError("dataset directory not found: " + dir_.string());
  K_ = read_intrinsics(dir_ / "intrinsics.txt");
  static const std::regex pattern(R"((color|depth|mask)_(\d{6})\.png)");
  int max_id = -1;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) max_id = std::max(max_id, std::stoi(m[2].str()));
  }
  if (max_id < 0) throw DataError("no frames in " + dir_.string());
  count_ = max_id + 1;
}

Pose3d Dataset::initial_pose() const { return read_pose_file(dir_ / "init_pose.txt"); }

Dataset::Images Dataset::load(int id) const {
  for (const char* prefix : {"color", "depth"}) {
    const fs::path p = path(prefix, id, ".png");
    if (!fs::exists(p)) throw DataError("missing " + p.filename().string() + " in " + dir_.string());
  }
  Images im{read_color_png(path("color", id, ".png")), read_depth_png(path("depth", id, ".png"))};
  for (const auto& [w, h, name] : {std::tuple{im.color.width, im.color.height, "color"},
                                   std::tuple{im.depth.width, im.depth.height, "depth"}}) {
    if (w != K_.width || h != K_.height)
      throw DataError(frame_filename(name, id, ".png") + " does not match intrinsics size");
  }
  return im;
}

Mask Dataset::load_mask(int id) const {
  const fs::path p = path("mask", id, ".png");
  if (!fs::exists(p)) throw DataError("missing " + p.filename().string() + " in " + dir_.string());
  Mask m = read_mask_png(p);
  if (m.width != K_.width || m.height != K_.height)
    throw DataError(p.filename().string() + " does not match intrinsics size");
  return m;
}

bool Dataset::has_ground_truth(int id) const { return fs::exists(path("gt_pose", id, ".txt")); }

Pose3d Dataset::ground_truth(int id) const { return read_pose_file(path("gt_pose", id, ".txt")); }

void write_dataset(const SyntheticScene& scene, const fs::path& dir, const ExportOptions& opts) {
  fs::create_directories(dir);
  write_intrinsics(dir / "intrinsics.txt", scene.camera);
  write_pose_file(dir / "init_pose.txt", scene.initial_pose);
  write_model_file(dir / "model.txt", sample_model_points(scene.object, opts.model_points, scene.seed));
  write_bbox_file(dir / "bbox.txt", scene.object.bbox());
  for (std::size_t t = 0; t < scene.size(); ++t) {
    const RenderedFrame f = render(scene, t);
    const int id = int(t);
    write_color_png(dir / frame_filename("color", id, ".png"), f.color);
    write_depth_png(dir / frame_filename("depth", id, ".png"), f.depth);
    write_mask_png(dir / frame_filename("mask", id, ".png"), f.mask);
    write_pose_file(dir / frame_filename("gt_pose", id, ".txt"), f.gt_pose);
    if (opts.with_keypoints) {
      const Frame frame = ingest(id, f.color, f.depth, f.mask, scene.camera);
      write_keypoint_file(dir / frame_filename("keypoints", id, ".txt"), detect_keypoints(frame, DetectorParams{}));
    }
  }
}

}  // namespace bt
