#include "bt/error.hpp"
#include "bt/evaluation.hpp"
#include "bt/tracker.hpp"

#include "synthetic_frames.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <set>

using namespace bt;

namespace {

struct Fixture {
  SyntheticScene scene;
  std::shared_ptr<const test::ModelKeypoints> model;

  explicit Fixture(SyntheticScene s, std::size_t points = 600) : scene(std::move(s)) {
    scene.depth_sigma = 0;
    model = std::make_shared<test::ModelKeypoints>(scene, points, 3);
  }

  Tracker tracker(TrackerConfig cfg = {}, std::shared_ptr<const KeypointProvider> kp = nullptr) const {
    TrackerProviders p;
    p.keypoints = kp ? kp : std::make_shared<test::ModelKeypointProvider>(model);
    return Tracker(cfg, p);
  }

  void init(Tracker& tr, std::size_t t = 0) const {
    RenderedFrame f = render(scene, t);
    tr.initialize(f.frame_id, std::move(f.color), std::move(f.depth), std::move(f.mask), scene.camera,
                  scene.trajectory[t]);
  }

  Pose3d step(Tracker& tr, std::size_t t) const {
    RenderedFrame f = render(scene, t);
    return tr.process_frame(f.frame_id, std::move(f.color), std::move(f.depth), std::move(f.mask), scene.camera);
  }
};

/// Drops every keypoint of the listed frame ids.
class SilencedProvider final : public KeypointProvider {
 public:
  SilencedProvider(std::shared_ptr<const KeypointProvider> inner, std::set<int> ids)
      : inner_(std::move(inner)), ids_(std::move(ids)) {}
  std::vector<Keypoint> keypoints(const Frame& f) const override {
    return ids_.count(f.id) ? std::vector<Keypoint>{} : inner_->keypoints(f);
  }

 private:
  std::shared_ptr<const KeypointProvider> inner_;
  std::set<int> ids_;
};

}  // namespace

TEST_CASE("initialization") {
  const Fixture fx(orbit_scene());
  Tracker tr = fx.tracker();
  CHECK_FALSE(tr.initialized());
  fx.init(tr);
  CHECK(tr.initialized());
  CHECK(tr.pool().size() == 1);
  REQUIRE(tr.log().size() == 1);
  CHECK(tr.log()[0] == PoseLogEntry{0, fx.scene.trajectory[0], false});

  SUBCASE("re-initialization is rejected") { CHECK_THROWS_AS(fx.init(tr, 1), SequencingError); }
  SUBCASE("frames must arrive in increasing id order") {
    CHECK_THROWS_AS(fx.step(tr, 0), SequencingError);
    fx.step(tr, 2);
    CHECK_THROWS_AS(fx.step(tr, 1), SequencingError);
    CHECK(tr.log().size() == 2);
  }
}

TEST_CASE("tracker misuse") {
  const Fixture fx(orbit_scene());
  Tracker tr = fx.tracker();
  CHECK_THROWS_AS(fx.step(tr, 1), SequencingError);

  RenderedFrame f = render(fx.scene, 0);
  Mask empty(f.mask.width, f.mask.height, 0);
  CHECK_THROWS_AS(tr.initialize(0, f.color, f.depth, empty, fx.scene.camera, f.gt_pose), EmptyMaskError);
  CHECK_FALSE(tr.initialized());

  TrackerConfig bad;
  bad.disable_E_f = bad.disable_E_g = true;
  CHECK_THROWS_AS(fx.tracker(bad), ConfigError);
  bad.disable_pose_graph = true;
  CHECK_NOTHROW(fx.tracker(bad));
  TrackerConfig zero_k;
  zero_k.K = 0;
  CHECK_THROWS_AS(fx.tracker(zero_k), ConfigError);
}

TEST_CASE("empty mask coasts on the previous pose") {
  const Fixture fx(orbit_scene());
  Tracker tr = fx.tracker();
  fx.init(tr);
  const Pose3d p1 = fx.step(tr, 1);
  RenderedFrame f = render(fx.scene, 2);
  const Pose3d p2 = tr.process_frame(2, f.color, f.depth, Mask(f.mask.width, f.mask.height, 0), fx.scene.camera);
  CHECK(p2.rotation == p1.rotation);
  CHECK(p2.translation == p1.translation);
  CHECK(tr.log().back().coasted);
  CHECK_FALSE(tr.log()[1].coasted);
  // Tracking resumes against the last frame that had a mask.
  fx.step(tr, 3);
  CHECK_FALSE(tr.log().back().coasted);
  CHECK(rotation_error_deg(tr.log().back().pose, fx.scene.trajectory[3]) < 0.1);
}

TEST_CASE("registration failure coasts and is flagged") {
  const Fixture fx(orbit_scene());
  auto base = std::make_shared<test::ModelKeypointProvider>(fx.model);
  TrackerConfig cfg;
  cfg.disable_pose_graph = true;
  Tracker tr = fx.tracker(cfg, std::make_shared<SilencedProvider>(base, std::set<int>{2}));
  fx.init(tr);
  const Pose3d p1 = fx.step(tr, 1);
  const Pose3d p2 = fx.step(tr, 2);
  CHECK(tr.log().back().coasted);
  CHECK(p2.rotation == p1.rotation);
  CHECK(tr.diagnostics().back().registration_inliers == 0);
}

TEST_CASE("static object with exact features tracks to 1e-6") {
  SyntheticScene still = orbit_scene();
  still.trajectory.assign(50, still.trajectory[0]);
  still.frame_ids.resize(50);
  const Fixture fx(still);
  Tracker tr = fx.tracker();
  fx.init(tr);
  double worst = 0;
  for (std::size_t t = 1; t < 50; ++t) worst = std::max(worst, test::pose_distance(fx.step(tr, t), still.trajectory[t]));
  CHECK(worst < 1e-6);
  for (const auto& e : tr.log()) CHECK_FALSE(e.coasted);
}

TEST_CASE("noiseless orbit with the exact feature term tracks to 1e-6") {
  // The dense term associates to the nearest pixel, so only the feature
  // term is exact on a moving camera.
  const Fixture fx(orbit_scene());
  TrackerConfig cfg;
  cfg.disable_E_g = true;
  Tracker tr = fx.tracker(cfg);
  fx.init(tr);
  double worst = 0;
  for (std::size_t t = 1; t < 50; ++t) worst = std::max(worst, test::pose_distance(fx.step(tr, t), fx.scene.trajectory[t]));
  CHECK(worst < 1e-6);
}

TEST_CASE("noiseless orbit with both terms stays close") {
  const Fixture fx(orbit_scene());
  Tracker tr = fx.tracker();
  fx.init(tr);
  double worst = 0;
  for (std::size_t t = 1; t < 30; ++t) worst = std::max(worst, test::pose_distance(fx.step(tr, t), fx.scene.trajectory[t]));
  CHECK(worst < 1e-3);
}

TEST_CASE("disabled pose graph equals chained registration") {
  const Fixture fx(orbit_scene());
  TrackerConfig cfg;
  cfg.disable_pose_graph = true;
  cfg.outlier_injection = 0.2;
  auto kp = std::make_shared<test::ModelKeypointProvider>(fx.model, 0.001);
  Tracker tr = fx.tracker(cfg, kp);
  fx.init(tr);
  for (std::size_t t = 1; t < 10; ++t) fx.step(tr, t);

  Pose3d chained = fx.scene.trajectory[0];
  std::shared_ptr<Frame> prev;
  for (std::size_t t = 0; t < 10; ++t) {
    auto f = std::make_shared<Frame>();
    f->id = fx.scene.frame_ids[t];
    f->keypoints = kp->keypoints(*f);
    if (prev) {
      const auto reg = register_frames(*prev, *f, cfg.edge_params());
      REQUIRE(reg);
      chained = coarse_pose(chained, reg->relative_pose);
    }
    CHECK(tr.log()[t].pose.rotation == chained.rotation);
    CHECK(tr.log()[t].pose.translation == chained.translation);
    prev = f;
  }
}

TEST_CASE("outputs are causal and never revised") {
  const Fixture fx(orbit_scene());
  TrackerConfig cfg;
  cfg.outlier_injection = 0.2;
  auto kp = std::make_shared<test::ModelKeypointProvider>(fx.model, 0.001);
  Tracker full = fx.tracker(cfg, kp), prefix = fx.tracker(cfg, kp);
  fx.init(full);
  fx.init(prefix);
  std::vector<PoseLogEntry> snapshot;
  std::size_t pool_size = full.pool().size();
  for (std::size_t t = 1; t < 16; ++t) {
    fx.step(full, t);
    if (t < 8) fx.step(prefix, t);
    CHECK(full.pool().size() >= pool_size);
    pool_size = full.pool().size();
    for (std::size_t k = 0; k < snapshot.size(); ++k) CHECK(full.log()[k] == snapshot[k]);
    snapshot = full.log();
  }
  REQUIRE(prefix.log().size() == 8);
  for (std::size_t k = 0; k < 8; ++k) CHECK(prefix.log()[k] == full.log()[k]);
  CHECK(pool_size > 1);
}

TEST_CASE("dropped frames still track") {
  const Fixture fx(orbit_scene());
  Tracker tr = fx.tracker();
  fx.init(tr);
  std::size_t good = 0, total = 0;
  for (std::size_t t = 1; t < 40; ++t) {
    if (t % 3 == 1) continue;
    const Pose3d T = fx.step(tr, t);
    good += five_deg_five_cm(T, fx.scene.trajectory[t]);
    ++total;
  }
  CHECK(good == total);
}

TEST_CASE("diagnostics are recorded per frame") {
  const Fixture fx(manipulate_scene());
  Tracker tr = fx.tracker();
  fx.init(tr);
  for (std::size_t t = 1; t < 5; ++t) fx.step(tr, t);
  REQUIRE(tr.diagnostics().size() == 5);
  for (std::size_t k = 1; k < 5; ++k) {
    const FrameDiagnostics& d = tr.diagnostics()[k];
    CHECK(d.frame_id == tr.log()[k].frame_id);
    CHECK(d.keypoints > 0);
    CHECK(d.registration_inliers >= 12);
    CHECK(d.graph_nodes >= 2);
    CHECK(d.optimization.energies.size() >= 1);
    CHECK(d.timing.total_ms > 0);
  }
}
