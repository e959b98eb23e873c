// One PASS/FAIL line per acceptance criterion. Exit status is the number
// of failed criteria.

#include "bt/dataset.hpp"
#include "bt/evaluation.hpp"
#include "bt/registration.hpp"
#include "bt/tracker.hpp"

#include "oracles.hpp"

#include <Eigen/Cholesky>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <sys/wait.h>

using namespace bt;
using test::Rng;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [failed]");
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome geometry() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double round_trip = 0;
  for (int k = 0; k < 1000; ++k) {
    const Twist6d xi = test::random_twist(rng, kPi - 0.1, 2.0);
    round_trip = std::max(round_trip, (log_map(exp_map(xi)) - xi).cwiseAbs().maxCoeff());
  }
  double axioms = 0;
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Matrix3d A = test::angle_axis(test::random_rotvec(rng, kPi));
    const Eigen::Matrix3d B = test::angle_axis(test::random_rotvec(rng, kPi));
    const Eigen::Matrix3d C = test::angle_axis(test::random_rotvec(rng, kPi));
    const double ab = rotation_geodesic(A, B);
    axioms = std::max({axioms, rotation_geodesic(A, A), std::abs(ab - rotation_geodesic(B, A)),
                       ab - rotation_geodesic(A, C) - rotation_geodesic(C, B), -ab});
  }
  const double secs = seconds_since(t0);
  o.require(round_trip < 1e-9, "exp/log round trip " + fmt("%.2e", round_trip));
  o.require(axioms < 1e-9, "metric axiom violation " + fmt("%.2e", axioms));
  o.require(secs < 1.0, "runtime " + fmt("%.2f s", secs));
  return o;
}

Outcome registration() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(202);
  double kabsch = 0;
  for (int k = 0; k < 100; ++k) {
    const Pose3d T = test::random_pose(rng);
    std::vector<Eigen::Vector3d> src, dst;
    for (int i = 0; i < 50; ++i) {
      src.emplace_back(test::uniform(rng, -1, 1), test::uniform(rng, -1, 1), test::uniform(rng, -1, 1));
      dst.push_back(T * src.back());
    }
    kabsch = std::max(kabsch, test::pose_distance(rigid_least_squares(src, dst), T));
  }
  int good = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = test::make_registration_problem(rng, 500, 0.6, 0.001);
    RansacParams params;
    params.seed = std::uint64_t(trial);
    const auto reg = ransac_register(p.matches, p.a, p.b, params);
    if (reg && rad2deg(rotation_geodesic(reg->relative_pose, p.truth)) < 1.0 &&
        (reg->relative_pose.translation - p.truth.translation).norm() < 0.003)
      ++good;
  }
  const double secs = seconds_since(t0);
  o.require(kabsch < 1e-9, "noiseless least squares " + fmt("%.2e", kabsch));
  o.require(good >= 19, "RANSAC 60% outliers " + std::to_string(good) + "/20");
  o.require(secs < 10.0, "runtime " + fmt("%.2f s", secs));
  return o;
}

Outcome solver() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(303);

  double jac = 0;
  for (int trial = 0; trial < 20; ++trial) jac = std::max(jac, test::check_jacobians(test::random_graph(rng)).max_relative_deviation);

  double pcg = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd M(30, 30);
    for (int r = 0; r < 30; ++r)
      for (int c = 0; c < 30; ++c) M(r, c) = test::uniform(rng, -1, 1);
    Eigen::MatrixXd A = M * M.transpose();
    A.diagonal().array() += 0.5;
    Eigen::VectorXd b(30);
    for (int k = 0; k < 30; ++k) b[k] = test::uniform(rng, -1, 1);
    const Eigen::VectorXd direct = A.ldlt().solve(b);
    const auto res = pcg_solve([&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = A * x; }, b, A.diagonal(),
                               1e-14, 500);
    pcg = std::max(pcg, (res.x - direct).norm() / direct.norm());
  }

  bool monotone = true;
  for (int trial = 0; trial < 3; ++trial) {
    test::OrbitGraph g = test::orbit_graph(0.002, 40 + trial);
    for (auto& e : g.graph.feature_edges)
      if (e.matches.size() > 4) std::swap(e.matches[0].index_b, e.matches[1].index_b);
    for (std::size_t k = 1; k < g.graph.nodes.size(); ++k)
      g.graph.nodes[k].xi = log_map(test::perturb(g.gt[k], rng, deg2rad(8.0), 0.03));
    const OptimizeReport rep = optimize(g.graph);
    for (std::size_t k = 1; k < rep.energies.size(); ++k)
      monotone = monotone && rep.energies[k].total <= rep.energies[k - 1].total;
  }

  test::OrbitGraph g = test::orbit_graph(0.0005, 9);
  for (std::size_t k = 1; k < 5; ++k) g.graph.nodes[k].xi = log_map(test::perturb(g.gt[k], rng, deg2rad(5.0), 0.02));
  optimize(g.graph);
  double rot = 0, trans = 0;
  for (std::size_t k = 1; k < 5; ++k) {
    rot = std::max(rot, rad2deg(rotation_geodesic(g.graph.nodes[k].pose(), g.gt[k])));
    trans = std::max(trans, (g.graph.nodes[k].pose().translation - g.gt[k].translation).norm());
  }
  const double secs = seconds_since(t0);
  o.require(jac < 1e-4, "Jacobian deviation " + fmt("%.2e", jac));
  o.require(pcg < 1e-8, "PCG vs direct " + fmt("%.2e", pcg));
  o.require(monotone, std::string("energy monotone ") + (monotone ? "yes" : "no"));
  o.require(rot < 0.5 && trans < 0.002, "5-node recovery " + fmt("%.3f deg", rot) + " / " + fmt("%.3f mm", 1000 * trans));
  o.require(secs < 30.0, "runtime " + fmt("%.2f s", secs));
  return o;
}

Outcome keyframes() {
  Outcome o;
  Rng rng(404);
  int exact = 0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 1 + rng() % 20, K = 1 + rng() % 5;
    const auto in = test::random_keyframe_instance(rng, n);
    exact += select_keyframes(in.pool, in.current, K) == test::reference_greedy(in.R, in.ids, in.current, K);
  }
  double worst_ratio = 0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 5 + rng() % 8, K = 2 + rng() % 3;
    const auto in = test::random_keyframe_instance(rng, n);
    const double greedy = test::selection_objective(in.R, select_keyframes(in.pool, in.current, K), in.current);
    worst_ratio = std::max(worst_ratio, greedy / test::exhaustive_optimum(in.R, in.current, K));
  }
  o.require(exact == 100, "reference greedy agreement " + std::to_string(exact) + "/100");
  o.require(worst_ratio <= 1.5, "worst greedy/optimal " + fmt("%.4f", worst_ratio));
  return o;
}

struct Run {
  std::vector<Pose3d> poses;
  std::vector<Pose3d> gt;
  std::size_t coasted = 0;
  double seconds = 0;

  double five_five_pct() const {
    std::size_t ok = 0;
    for (std::size_t k = 0; k < poses.size(); ++k) ok += five_deg_five_cm(poses[k], gt[k]);
    return 100.0 * double(ok) / double(poses.size());
  }
  double final_rot_deg() const { return rotation_error_deg(poses.back(), gt.back()); }
  double final_trans_cm() const { return translation_error_cm(poses.back(), gt.back()); }
};

/// Runs the tracker with its default keypoint detector on rendered frames
/// and their ground-truth masks.
Run track_scene(const SyntheticScene& scene, TrackerConfig cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Tracker tr(cfg);
  Run run;
  for (std::size_t t = 0; t < scene.size(); ++t) {
    RenderedFrame f = render(scene, t);
    if (t == 0)
      tr.initialize(f.frame_id, std::move(f.color), std::move(f.depth), std::move(f.mask), scene.camera,
                    scene.initial_pose);
    else
      tr.process_frame(f.frame_id, std::move(f.color), std::move(f.depth), std::move(f.mask), scene.camera);
    run.gt.push_back(scene.trajectory[t]);
  }
  for (const auto& e : tr.log()) {
    run.poses.push_back(e.pose);
    run.coasted += e.coasted;
  }
  run.seconds = seconds_since(t0);
  return run;
}

std::string describe(const std::string& name, const Run& r) {
  return name + " final " + fmt("%.2f deg", r.final_rot_deg()) + " / " + fmt("%.2f cm", r.final_trans_cm()) +
         ", 5deg5cm " + fmt("%.0f%%", r.five_five_pct()) + ", " + fmt("%.0f s", r.seconds);
}

Outcome drift() {
  Outcome o;
  const SyntheticScene scene = orbit_scene();
  TrackerConfig cfg;
  cfg.outlier_injection = scene.outlier_fraction;
  const Run full = track_scene(scene, cfg);
  cfg.disable_pose_graph = true;
  const Run chained = track_scene(scene, cfg);
  o.require(full.final_rot_deg() < 5.0 && full.final_trans_cm() < 1.0, describe("full", full));
  o.require(full.final_rot_deg() < chained.final_rot_deg() && full.final_trans_cm() < chained.final_trans_cm(),
            describe("disable_pose_graph", chained));
  o.require(full.five_five_pct() >= 95.0, "full 5deg5cm >= 95%");
  o.require(full.seconds < 300.0, "full runtime under 5 min");
  return o;
}

Outcome robustness() {
  Outcome o;
  for (const SyntheticScene& scene : {dropped_scene(), perturbed_scene()}) {
    TrackerConfig cfg;
    cfg.outlier_injection = scene.outlier_fraction;
    const Run r = track_scene(scene, cfg);
    o.require(r.five_five_pct() >= 90.0, describe(scene.name, r));
  }
  return o;
}

Outcome metrics() {
  Outcome o;
  Rng rng(707);
  ModelPoints model;
  for (int k = 0; k < 200; ++k)
    model.emplace_back(test::uniform(rng, -0.1, 0.1), test::uniform(rng, -0.1, 0.1), test::uniform(rng, -0.1, 0.1));
  const Pose3d gt = test::random_pose(rng);
  Pose3d shifted = gt;
  shifted.translation += Eigen::Vector3d(0.03, -0.04, 0.12);
  o.require(add_error(gt, gt, model) == 0 && std::abs(add_error(shifted, gt, model) - 0.13) < 1e-12, "ADD shift");

  ModelPoints ring;
  const int m = 360;
  for (int k = 0; k < m; ++k) ring.emplace_back(std::cos(2 * kPi * k / m), std::sin(2 * kPi * k / m), 0);
  Pose3d half, spun;
  half.rotation = test::angle_axis({0, 0, kPi});
  spun.rotation = test::angle_axis({0, 0, 0.7});
  o.require(std::abs(add_error(half, Pose3d{}, ring) - 2.0) < 1e-12, "ring ADD diameter");
  o.require(adds_error(spun, Pose3d{}, ring) <= 2 * kPi / m && add_error(spun, Pose3d{}, ring) > 0, "ring ADD-S");

  Pose3d r6, r4t4;
  r6.rotation = test::angle_axis({0, 0, deg2rad(6.0)});
  r4t4.rotation = test::angle_axis({0, 0, deg2rad(4.0)});
  r4t4.translation = {0.04, 0, 0};
  o.require(five_deg_five_cm(gt, gt) && !five_deg_five_cm(r6, Pose3d{}) && five_deg_five_cm(r4t4, Pose3d{}), "5deg5cm");

  const Eigen::Vector3d unit(1, 1, 1);
  Pose3d x_half, far;
  x_half.translation = {0.5, 0, 0};
  far.translation = {2.0, 0, 0};
  const double iou = box_iou(x_half, Pose3d{}, unit);
  o.require(box_iou(gt, gt, unit) == 1.0 && box_iou(far, Pose3d{}, unit) == 0.0 && std::abs(iou - 1.0 / 3.0) < 0.01,
            "IoU " + fmt("%.4f", iou));
  o.require(std::abs(accuracy_auc(std::vector<double>(8, 0.05), 0.1) - 0.5) < 1e-12, "AUC 0.5");

  int ordered = 0;
  for (int k = 0; k < 1000; ++k) {
    ModelPoints pts;
    for (std::size_t i = 0, n = 1 + rng() % 40; i < n; ++i)
      pts.emplace_back(test::uniform(rng, -0.1, 0.1), test::uniform(rng, -0.1, 0.1), test::uniform(rng, -0.1, 0.1));
    const Pose3d a = test::random_pose(rng), b = test::random_pose(rng);
    ordered += adds_error(a, b, pts) <= add_error(a, b, pts);
  }
  o.require(ordered == 1000, "ADD-S <= ADD " + std::to_string(ordered) + "/1000");
  return o;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + BT_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct CliRuns {
  fs::path root;
  int synth_status = -1, first_status = -1, second_status = -1;
};

const CliRuns& cli_runs() {
  static const CliRuns runs = [] {
    CliRuns r;
    r.root = fs::temp_directory_path() / "bt_acceptance";
    fs::remove_all(r.root);
    fs::create_directories(r.root);
    const std::string data = (r.root / "manipulate").string();
    r.synth_status = run_cli("synth MANIPULATE --out \"" + data + "\"");
    r.first_status = run_cli("track \"" + data + "\" --seed 5 --out \"" + (r.root / "run1").string() + "\"");
    r.second_status = run_cli("track \"" + data + "\" --seed 5 --out \"" + (r.root / "run2").string() + "\"");
    return r;
  }();
  return runs;
}

Outcome performance() {
  Outcome o;
  const CliRuns& runs = cli_runs();
  o.require(runs.synth_status == 0 && runs.first_status == 0, "cli exit codes " + std::to_string(runs.synth_status) +
                                                                  "," + std::to_string(runs.first_status));
  std::ifstream in(runs.root / "run1" / "timing.csv");
  std::string header;
  std::getline(in, header);
  const std::string expected =
      "frame_id,segmentation_ms,ingest_ms,keypoints_ms,registration_ms,selection_ms,feature_edges_ms,"
      "optimization_ms,pool_ms,total_ms";
  o.require(header == expected, "timing.csv stage columns");
  std::vector<double> totals;
  for (std::string line; std::getline(in, line);) {
    std::stringstream ss(line);
    std::vector<double> cols;
    for (std::string cell; std::getline(ss, cell, ',');) cols.push_back(std::stod(cell));
    if (cols.size() == 10 && cols[0] > 0) totals.push_back(cols[9]);
  }
  double median = std::numeric_limits<double>::infinity();
  if (!totals.empty()) {
    std::nth_element(totals.begin(), totals.begin() + totals.size() / 2, totals.end());
    median = totals[totals.size() / 2];
  }
  o.require(totals.size() == 99, "frames timed " + std::to_string(totals.size()));
  o.require(median < 1000.0, "median process_frame " + fmt("%.0f ms", median));
  return o;
}

Outcome determinism() {
  Outcome o;
  const CliRuns& runs = cli_runs();
  const std::string a = slurp(runs.root / "run1" / "poses.txt"), b = slurp(runs.root / "run2" / "poses.txt");
  o.require(runs.second_status == 0, "second run exit code " + std::to_string(runs.second_status));
  o.require(!a.empty() && a == b, "poses.txt bitwise identical (" + std::to_string(a.size()) + " bytes)");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, geometry},   {2, registration}, {3, solver},       {4, keyframes},  {5, drift},
      {6, robustness}, {7, metrics},      {8, performance},  {9, determinism},
  };
  int failed = 0;
  for (const auto& [id, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  }
  return failed;
}
