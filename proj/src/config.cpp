#include "bt/config.hpp"

#include "bt/error.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace bt {

void RunConfig::set_seed(std::uint64_t seed) {
  tracker.seed = seed;
  plane_removal.seed = seed;
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& v) {
  std::size_t used = 0;
  const double x = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument(v);
  return x;
}

long long to_int(const std::string& v) {
  std::size_t used = 0;
  const long long x = std::stoll(v, &used);
  if (used != v.size()) throw std::invalid_argument(v);
  return x;
}

std::uint64_t to_u64(const std::string& v) {
  if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
  std::size_t used = 0;
  const unsigned long long x = std::stoull(v, &used);
  if (used != v.size()) throw std::invalid_argument(v);
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument(v);
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

Field real_field(std::function<double&(RunConfig&)> ref, double scale = 1.0) {
  return {[ref, scale](RunConfig& c, const std::string& v) { ref(c) = to_double(v) * scale; },
          [ref, scale](const RunConfig& c) { return fmt(ref(const_cast<RunConfig&>(c)) / scale); }};
}

template <typename I>
Field int_field(std::function<I&(RunConfig&)> ref) {
  return {[ref](RunConfig& c, const std::string& v) {
            const long long x = to_int(v);
            if (x < 0) throw std::invalid_argument(v);
            ref(c) = static_cast<I>(x);
          },
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

Field bool_field(std::function<bool&(RunConfig&)> ref) {
  return {[ref](RunConfig& c, const std::string& v) { ref(c) = to_bool(v); },
          [ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

const std::map<std::string, Field>& fields() {
  static const double deg = deg2rad(1.0);
  static const std::map<std::string, Field> f = {
      {"K", int_field<std::size_t>([](RunConfig& c) -> std::size_t& { return c.tracker.K; })},
      {"n_keypoints", int_field<int>([](RunConfig& c) -> int& { return c.tracker.n_keypoints; })},
      {"ransac_delta", real_field([](RunConfig& c) -> double& { return c.tracker.ransac_delta; })},
      {"ransac_alpha_deg", real_field([](RunConfig& c) -> double& { return c.tracker.ransac_alpha; }, deg)},
      {"ransac_iterations", int_field<int>([](RunConfig& c) -> int& { return c.tracker.ransac_iterations; })},
      {"seed", {[](RunConfig& c, const std::string& v) { c.set_seed(to_u64(v)); },
                [](const RunConfig& c) { return std::to_string(c.tracker.seed); }}},
      {"novelty_threshold_deg", real_field([](RunConfig& c) -> double& { return c.tracker.novelty_threshold; }, deg)},
      {"lambda1", real_field([](RunConfig& c) -> double& { return c.tracker.lambda1; })},
      {"lambda2", real_field([](RunConfig& c) -> double& { return c.tracker.lambda2; })},
      {"gn_iters", int_field<int>([](RunConfig& c) -> int& { return c.tracker.solver.gn_iters; })},
      {"pcg_tol", real_field([](RunConfig& c) -> double& { return c.tracker.solver.pcg_tol; })},
      {"pcg_max_iter", int_field<int>([](RunConfig& c) -> int& { return c.tracker.solver.pcg_max_iter; })},
      {"max_halvings", int_field<int>([](RunConfig& c) -> int& { return c.tracker.solver.max_halvings; })},
      {"dense_stride", int_field<int>([](RunConfig& c) -> int& { return c.tracker.dense_stride; })},
      {"normal_radius", int_field<int>([](RunConfig& c) -> int& { return c.tracker.normals.radius; })},
      {"normal_depth_jump", real_field([](RunConfig& c) -> double& { return c.tracker.normals.depth_jump; })},
      {"huber_feature", real_field([](RunConfig& c) -> double& { return c.tracker.huber.delta_feature; })},
      {"huber_geometric", real_field([](RunConfig& c) -> double& { return c.tracker.huber.delta_geometric; })},
      {"dense_max_distance", real_field([](RunConfig& c) -> double& { return c.tracker.gates.max_distance; })},
      {"dense_max_angle_deg", real_field([](RunConfig& c) -> double& { return c.tracker.gates.max_angle; }, deg)},
      {"min_edge_inliers",
       int_field<std::size_t>([](RunConfig& c) -> std::size_t& { return c.tracker.min_edge_inliers; })},
      {"outlier_injection", real_field([](RunConfig& c) -> double& { return c.tracker.outlier_injection; })},
      {"disable_pose_graph", bool_field([](RunConfig& c) -> bool& { return c.tracker.disable_pose_graph; })},
      {"disable_E_f", bool_field([](RunConfig& c) -> bool& { return c.tracker.disable_E_f; })},
      {"disable_E_g", bool_field([](RunConfig& c) -> bool& { return c.tracker.disable_E_g; })},
      {"mask_provider",
       {[](RunConfig& c, const std::string& v) {
          if (v == "files") c.mask_source = MaskSource::Files;
          else if (v == "plane_removal") c.mask_source = MaskSource::PlaneRemoval;
          else throw std::invalid_argument(v);
        },
        [](const RunConfig& c) { return std::string(c.mask_source == MaskSource::Files ? "files" : "plane_removal"); }}},
      {"keypoint_provider",
       {[](RunConfig& c, const std::string& v) {
          if (v == "detector") c.keypoint_source = KeypointSource::Detector;
          else if (v == "files") c.keypoint_source = KeypointSource::Files;
          else throw std::invalid_argument(v);
        },
        [](const RunConfig& c) {
          return std::string(c.keypoint_source == KeypointSource::Detector ? "detector" : "files");
        }}},
      {"plane_inlier_distance", real_field([](RunConfig& c) -> double& { return c.plane_removal.inlier_distance; })},
      {"plane_iterations", int_field<int>([](RunConfig& c) -> int& { return c.plane_removal.iterations; })},
      {"cluster_linkage", real_field([](RunConfig& c) -> double& { return c.plane_removal.linkage; })},
  };
  return f;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0, last_flag_line = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value", lineno);
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown key '" + key + "'", lineno);
    try {
      it->second.set(cfg, value);
    } catch (const std::exception&) {
      throw ConfigError("bad value '" + value + "' for " + key, lineno);
    }
    try {
      cfg.tracker.validate(false);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), lineno);
    }
    if (key.starts_with("disable_")) last_flag_line = lineno;
  }
  try {
    cfg.tracker.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), last_flag_line);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
  return out;
}

}  // namespace bt
