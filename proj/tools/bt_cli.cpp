// bt: track, synth and eval entry points.

#include "bt/config.hpp"
#include "bt/dataset.hpp"
#include "bt/error.hpp"
#include "bt/evaluation.hpp"
#include "bt/synth.hpp"
#include "bt/tracker.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <set>

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDegraded = 3;

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw bt::DataError("cannot write " + path.string());
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int cmd_track(const fs::path& dataset_dir, const std::string& config_path, std::optional<std::uint64_t> seed,
              const fs::path& out_dir) {
  bt::RunConfig cfg = config_path.empty() ? bt::RunConfig{} : bt::load_config(config_path);
  if (seed) cfg.set_seed(*seed);

  const bt::Dataset data(dataset_dir);
  bt::TrackerProviders providers;
  if (cfg.mask_source == bt::MaskSource::Files)
    providers.masks = std::make_shared<bt::FileMaskProvider>(dataset_dir);
  else
    providers.masks = std::make_shared<bt::PlaneRemovalMaskProvider>(cfg.plane_removal);
  if (cfg.keypoint_source == bt::KeypointSource::Files)
    providers.keypoints = std::make_shared<bt::FileKeypointProvider>(dataset_dir);

  bt::Tracker tracker(cfg.tracker, providers);
  const bt::Intrinsics& K = data.intrinsics();
  for (int id = 0; id < data.frame_count(); ++id) {
    auto im = data.load(id);
    if (id == 0)
      tracker.initialize(id, std::move(im.color), std::move(im.depth), K, data.initial_pose());
    else
      tracker.process_frame(id, std::move(im.color), std::move(im.depth), K);
  }

  fs::create_directories(out_dir);
  {
    auto out = open_out(out_dir / "poses.txt");
    bt::write_pose_log(out, tracker.log());
  }
  {
    auto out = open_out(out_dir / "energy.csv");
    out << "frame_id,iter,E_f,E_g,E_total\n";
    for (const auto& d : tracker.diagnostics())
      for (std::size_t it = 0; it < d.optimization.energies.size(); ++it) {
        const auto& e = d.optimization.energies[it];
        out << d.frame_id << ',' << it << ',' << num(e.feature) << ',' << num(e.geometric) << ',' << num(e.total)
            << '\n';
      }
  }
  {
    auto out = open_out(out_dir / "timing.csv");
    out << "frame_id,segmentation_ms,ingest_ms,keypoints_ms,registration_ms,selection_ms,feature_edges_ms,"
           "optimization_ms,pool_ms,total_ms\n";
    for (const auto& d : tracker.diagnostics()) {
      const auto& t = d.timing;
      out << d.frame_id << ',' << t.segmentation_ms << ',' << t.ingest_ms << ',' << t.keypoints_ms << ','
          << t.registration_ms << ',' << t.selection_ms << ',' << t.feature_edges_ms << ',' << t.optimization_ms
          << ',' << t.pool_ms << ',' << t.total_ms << '\n';
    }
  }

  std::size_t coasted = 0;
  for (const auto& e : tracker.log()) coasted += e.coasted;
  std::cout << "tracked " << tracker.log().size() << " frames, " << coasted << " coasted, pool size "
            << tracker.pool().size() << '\n';
  return coasted ? kExitDegraded : kExitOk;
}

int cmd_synth(const std::string& scene_name, const fs::path& out_dir, std::optional<std::uint64_t> seed,
              bool with_keypoints) {
  bt::SyntheticScene scene;
  try {
    scene = bt::benchmark_by_name(scene_name, seed);
  } catch (const bt::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  bt::ExportOptions opts;
  opts.with_keypoints = with_keypoints;
  bt::write_dataset(scene, out_dir, opts);
  std::cout << "wrote " << scene.size() << " frames of " << scene.name << " to " << out_dir.string() << '\n';
  return kExitOk;
}

int cmd_eval(const fs::path& poses_path, const fs::path& gt_dir, fs::path model_path, fs::path bbox_path,
             const fs::path& out_dir) {
  if (model_path.empty()) model_path = gt_dir / "model.txt";
  if (bbox_path.empty()) bbox_path = gt_dir / "bbox.txt";
  const auto log = bt::read_pose_log(poses_path);

  static const std::regex gt_pattern(R"(gt_pose_(\d{6})\.txt)");
  std::set<int> gt_ids;
  for (const auto& entry : fs::directory_iterator(gt_dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, gt_pattern)) gt_ids.insert(std::stoi(m[1].str()));
  }
  std::set<int> pose_ids;
  for (const auto& e : log) pose_ids.insert(e.frame_id);

  std::vector<int> missing_gt, missing_pose;
  for (int id : pose_ids)
    if (!gt_ids.count(id)) missing_gt.push_back(id);
  for (int id : gt_ids)
    if (!pose_ids.count(id)) missing_pose.push_back(id);
  if (!missing_gt.empty() || !missing_pose.empty()) {
    std::string msg = "frame id mismatch;";
    auto list = [&](const char* what, const std::vector<int>& ids) {
      if (ids.empty()) return;
      msg += std::string(" ") + what + ":";
      for (int id : ids) msg += " " + std::to_string(id);
    };
    list("missing ground truth", missing_gt);
    list("missing estimates", missing_pose);
    throw bt::DataError(msg);
  }
  if (log.empty()) throw bt::DataError("no frames to evaluate");

  std::vector<bt::PosePair> pairs;
  for (const auto& e : log)
    pairs.push_back({e.frame_id, e.pose, bt::read_pose_file(gt_dir / bt::frame_filename("gt_pose", e.frame_id, ".txt"))});
  const bt::ModelPoints model = bt::read_model_file(model_path);
  const Eigen::Vector3d bbox = bt::read_bbox_file(bbox_path);
  const bt::MetricReport r = bt::aggregate(pairs, model, bbox);

  fs::create_directories(out_dir);
  {
    auto out = open_out(out_dir / "metrics.txt");
    out << "frames=" << r.frames.size() << '\n';
    out << "five_deg_five_cm_pct=" << num(r.five_deg_five_cm_pct) << '\n';
    out << "iou25_pct=" << num(r.iou25_pct) << '\n';
    out << "rotation_err_mean_deg=" << (r.rotation_err_mean_deg ? num(*r.rotation_err_mean_deg) : "nan") << '\n';
    out << "translation_err_mean_cm=" << (r.translation_err_mean_cm ? num(*r.translation_err_mean_cm) : "nan")
        << '\n';
    out << "add_auc=" << num(r.add_auc) << '\n';
    out << "adds_auc=" << num(r.adds_auc) << '\n';
    out << "auc_max_threshold_m=" << num(r.auc_max_threshold) << '\n';
  }
  {
    std::vector<double> add, adds;
    for (const auto& f : r.frames) {
      add.push_back(f.add);
      adds.push_back(f.adds);
    }
    auto out = open_out(out_dir / "curves.csv");
    out << "threshold_m,add_accuracy,adds_accuracy\n";
    for (int k = 0; k <= 100; ++k) {
      const double t = r.auc_max_threshold * k / 100.0;
      out << num(t) << ',' << num(bt::accuracy_at(add, t)) << ',' << num(bt::accuracy_at(adds, t)) << '\n';
    }
  }
  std::cout << "5deg5cm " << r.five_deg_five_cm_pct << "%  IoU25 " << r.iou25_pct << "%  ADD AUC " << r.add_auc
            << "  ADD-S AUC " << r.adds_auc << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-free RGB-D object pose tracker"};
  app.require_subcommand(1);

  std::string dataset, config, out, scene, poses, gt_dir, model, bbox;
  std::uint64_t seed_value = 0;
  bool with_keypoints = false;

  auto* track = app.add_subcommand("track", "Track an object through a dataset directory");
  track->add_option("dataset", dataset, "Dataset directory")->required();
  track->add_option("--config", config, "key=value run configuration");
  auto* track_seed = track->add_option("--seed", seed_value, "Seed overriding the configuration");
  track->add_option("--out", out, "Output directory")->required();

  auto* synth = app.add_subcommand("synth", "Write a synthetic benchmark scene as a dataset");
  synth->add_option("scene", scene, "ORBIT, MANIPULATE, DROPPED or PERTURBED")->required();
  synth->add_option("--out", out, "Output directory")->required();
  auto* synth_seed = synth->add_option("--seed", seed_value, "Scene seed");
  synth->add_flag("--with-keypoints", with_keypoints, "Also write keypoints_%06d.txt files");

  auto* eval = app.add_subcommand("eval", "Score a pose log against ground truth");
  eval->add_option("poses", poses, "poses.txt written by track")->required();
  eval->add_option("gt_dir", gt_dir, "Directory with gt_pose_%06d.txt files")->required();
  eval->add_option("--model", model, "Model points (default <gt_dir>/model.txt)");
  eval->add_option("--bbox", bbox, "Bounding box extents (default <gt_dir>/bbox.txt)");
  eval->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*track)
      return cmd_track(dataset, config, *track_seed ? std::optional(seed_value) : std::nullopt, out);
    if (*synth)
      return cmd_synth(scene, out, *synth_seed ? std::optional(seed_value) : std::nullopt, with_keypoints);
    return cmd_eval(poses, gt_dir, model, bbox, out);
  } catch (const bt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
