#pragma once

#include "bt/pcg.hpp"
#include "bt/registration.hpp"
#include "bt/rgbd_frame.hpp"

#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace bt {

struct HuberParams {
  double delta_feature = 0.005;
  double delta_geometric = 0.005;
};

struct HuberValue {
  double value;
  double weight;  // IRLS weight rho'(r) / r
};

/// Huber loss of a non-negative residual magnitude.
inline HuberValue huber(double r, double delta) {
  if (r <= delta) return {0.5 * r * r, 1.0};
  return {delta * (r - 0.5 * delta), delta / r};
}

/// Outlier filters for dense reprojection associations.
struct DenseGates {
  double max_distance = 0.02;
  double max_angle = deg2rad(45.0);
};

struct GraphNode {
  std::shared_ptr<const Frame> frame;
  Twist6d xi = Twist6d::Zero();
  bool fixed = false;

  Pose3d pose() const { return exp_map(xi); }
};

/// Feature correspondences C_ij; index_a refers to node i's keypoints,
/// index_b to node j's.
struct FeatureEdge {
  std::size_t i = 0, j = 0;
  MatchSet matches;
};

struct DenseCorrespondence {
  Eigen::Vector3d point;   // p, camera i
  Eigen::Vector3d normal;  // n_i(p), camera i
  Eigen::Vector3d target;  // reprojected partner, camera j
};

/// Dense associations of the ordered pair (i, j).
struct DenseEdge {
  std::size_t i = 0, j = 0;
  std::vector<DenseCorrespondence> entries;
};

struct PoseGraph {
  std::vector<GraphNode> nodes;
  std::vector<FeatureEdge> feature_edges;  // unordered pairs, i < j
  std::vector<DenseEdge> dense_edges;      // ordered pairs
  double lambda_feature = 1.0;
  double lambda_geometric = 1.0;
  bool use_feature = true;
  bool use_geometric = true;
  HuberParams huber;
  DenseGates gates;
};

/// Match sets keyed by the unordered frame-id pair, stored oriented from the
/// lower id to the higher id.
class CorrespondenceCache {
 public:
  std::optional<MatchSet> find(int id_a, int id_b) const;
  void store(int id_a, int id_b, MatchSet matches);
  bool contains(int id_a, int id_b) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::pair<int, int>, MatchSet> entries_;
};

MatchSet swap_sides(const MatchSet& m);

struct FeatureEdgeParams {
  RansacParams ransac;
  double ratio = 0.8;
  /// Registrations keeping fewer inliers than this give an empty edge.
  std::size_t min_inliers = 12;
  /// Fraction of raw matches rewired to wrong partners before RANSAC.
  double outlier_injection = 0.0;
};

/// Seed of the RANSAC run for a frame pair; independent of build order.
std::uint64_t pair_seed(std::uint64_t base, int id_a, int id_b);

/// Matching plus RANSAC for one frame pair, oriented a -> b. Empty when
/// registration fails or keeps fewer than min_inliers.
std::optional<RegistrationResult> register_frames(const Frame& a, const Frame& b, const FeatureEdgeParams& params);

/// Inlier set of register_frames, empty on failure.
MatchSet register_pair(const Frame& a, const Frame& b, const FeatureEdgeParams& params);

/// Fills graph.feature_edges for every node pair, reusing cached sets.
/// Returns the number of pairs that had to be computed.
std::size_t build_feature_edges(PoseGraph& graph, CorrespondenceCache& cache, const FeatureEdgeParams& params);

/// Reprojection association of frame i's sampled points into frame j.
DenseEdge build_dense_edge(const Frame& frame_i, const Frame& frame_j, const Pose3d& T_i, const Pose3d& T_j,
                           const DenseGates& gates);

/// Rebuilds dense edges for all ordered node pairs at the current poses.
void rebuild_dense_edges(PoseGraph& graph);

struct EnergyBreakdown {
  double feature = 0;    // sum over ordered pairs of E_f(i, j)
  double geometric = 0;  // sum over ordered pairs of E_g(i, j)
  double total = 0;      // lambda_f * feature + lambda_g * geometric
};

double energy_feature_pair(const PoseGraph& graph, const FeatureEdge& edge);
double energy_geometric_pair(const PoseGraph& graph, const DenseEdge& edge);
double energy_feature(const PoseGraph& graph);
double energy_geometric(const PoseGraph& graph);
EnergyBreakdown total_energy(const PoseGraph& graph);

/// Object-frame disagreements T_i^-1 p_m - T_j^-1 p_n for every
/// correspondence of every ordered pair.
std::vector<Eigen::Vector3d> residuals_feature(const PoseGraph& graph);
/// Point-to-plane residuals of the current dense associations.
Eigen::VectorXd residuals_geometric(const PoseGraph& graph);

struct FeatureRow {
  int col_i = -1, col_j = -1;  // block columns, -1 for fixed nodes
  Eigen::Matrix<double, 3, 6> J_i, J_j;
  Eigen::Vector3d r;
  double weight = 1;
};

struct DenseRow {
  int col_i = -1, col_j = -1;
  Eigen::Matrix<double, 1, 6> J_i, J_j;
  double r = 0;
  double weight = 1;
};

/// Jacobians w.r.t. left-multiplicative increments of the incident node
/// twists, IRLS weights (including lambda) and residuals.
struct Linearization {
  std::vector<int> columns;  // node -> block column, -1 when fixed
  int free_blocks = 0;
  std::vector<FeatureRow> feature;
  std::vector<DenseRow> dense;
};

Linearization linearize(const PoseGraph& graph);

/// Block form of J^T W J and J^T W r over the free nodes.
struct NormalEquations {
  int blocks = 0;
  std::vector<Matrix6d> H;  // blocks x blocks, row-major
  std::vector<bool> nonzero;
  Eigen::VectorXd g;

  explicit NormalEquations(int n = 0);
  Matrix6d& block(int r, int c) { return H[std::size_t(r) * blocks + c]; }
  const Matrix6d& block(int r, int c) const { return H[std::size_t(r) * blocks + c]; }
  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;
  Eigen::VectorXd diagonal() const;
  Eigen::MatrixXd dense() const;
};

NormalEquations normal_equations(const Linearization& lin);
/// Same system accumulated directly from the graph without storing rows.
NormalEquations normal_equations(const PoseGraph& graph, std::vector<int>* columns = nullptr);

struct SolverParams {
  int gn_iters = 7;
  double pcg_tol = 1e-6;
  int pcg_max_iter = 100;
  int max_halvings = 5;
};

struct OptimizeReport {
  std::vector<EnergyBreakdown> energies;  // [0] initial, then one per accepted iteration
  int accepted_steps = 0;
  bool degraded_solve = false;
};

/// IRLS Gauss-Newton over the free nodes. Dense associations are rebuilt at
/// every evaluated pose set; a step that raises the total energy is halved
/// up to max_halvings times and dropped otherwise. Throws
/// UnconstrainedGraphError when the graph has no correspondences at all.
OptimizeReport optimize(PoseGraph& graph, const SolverParams& params = {});

}  // namespace bt
