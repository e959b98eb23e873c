#include "bt/pose_graph.hpp"

#include "bt/error.hpp"
#include "bt/features.hpp"
#include "bt/parallel.hpp"

#include <cmath>

namespace bt {

// ---------------------------------------------------------------------------
// Correspondence cache

std::optional<MatchSet> CorrespondenceCache::find(int id_a, int id_b) const {
  const auto it = entries_.find({std::min(id_a, id_b), std::max(id_a, id_b)});
  if (it == entries_.end()) return std::nullopt;
  return id_a <= id_b ? it->second : swap_sides(it->second);
}

void CorrespondenceCache::store(int id_a, int id_b, MatchSet matches) {
  if (id_a > id_b) {
    matches = swap_sides(matches);
    std::swap(id_a, id_b);
  }
  entries_[{id_a, id_b}] = std::move(matches);
}

bool CorrespondenceCache::contains(int id_a, int id_b) const {
  return entries_.count({std::min(id_a, id_b), std::max(id_a, id_b)}) != 0;
}

MatchSet swap_sides(const MatchSet& m) {
  MatchSet out;
  out.reserve(m.size());
  for (const Match& x : m) out.push_back({x.index_b, x.index_a, x.distance});
  return out;
}

// ---------------------------------------------------------------------------
// Edge construction

std::uint64_t pair_seed(std::uint64_t base, int id_a, int id_b) {
  // splitmix64 over the ordered ids
  std::uint64_t z = base ^ (std::uint64_t(std::uint32_t(id_a)) << 32 | std::uint32_t(id_b));
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::optional<RegistrationResult> register_frames(const Frame& a, const Frame& b, const FeatureEdgeParams& params) {
  MatchSet matches = match_descriptors(a.keypoints, b.keypoints, params.ratio);
  const std::uint64_t seed = pair_seed(params.ransac.seed, a.id, b.id);
  if (params.outlier_injection > 0) inject_outliers(matches, params.outlier_injection, seed ^ 0x5bd1e995ULL);
  RansacParams rp = params.ransac;
  rp.seed = seed;
  auto reg = ransac_register(matches, a.keypoints, b.keypoints, rp);
  if (!reg || reg->inlier_count < params.min_inliers) return std::nullopt;
  return reg;
}

MatchSet register_pair(const Frame& a, const Frame& b, const FeatureEdgeParams& params) {
  auto reg = register_frames(a, b, params);
  return reg ? std::move(reg->inliers) : MatchSet{};
}

std::size_t build_feature_edges(PoseGraph& graph, CorrespondenceCache& cache, const FeatureEdgeParams& params) {
  const std::size_t n = graph.nodes.size();
  struct Job {
    std::size_t i, j;
    const Frame* a;
    const Frame* b;
    MatchSet result;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Frame* a = graph.nodes[i].frame.get();
      const Frame* b = graph.nodes[j].frame.get();
      if (!cache.contains(a->id, b->id)) jobs.push_back({i, j, a, b, {}});
    }
  }
  // Computed with the lower frame id on the a side so a pair's result does
  // not depend on node order.
  parallel_for(jobs.size(), [&](std::size_t k) {
    Job& job = jobs[k];
    const bool flip = job.a->id > job.b->id;
    job.result = flip ? register_pair(*job.b, *job.a, params) : register_pair(*job.a, *job.b, params);
    if (flip) job.result = swap_sides(job.result);
  });
  for (Job& job : jobs) cache.store(job.a->id, job.b->id, std::move(job.result));

  graph.feature_edges.clear();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      FeatureEdge e{i, j, *cache.find(graph.nodes[i].frame->id, graph.nodes[j].frame->id)};
      if (!e.matches.empty()) graph.feature_edges.push_back(std::move(e));
    }
  }
  return jobs.size();
}

DenseEdge build_dense_edge(const Frame& frame_i, const Frame& frame_j, const Pose3d& T_i, const Pose3d& T_j,
                           const DenseGates& gates) {
  DenseEdge edge;
  const Pose3d j_from_i = compose(T_j, inverse(T_i));
  const Pose3d i_from_j = inverse(j_from_i);
  const double max_d2 = gates.max_distance * gates.max_distance;
  const double cos_gate = std::cos(gates.max_angle);
  const std::vector<SurfacePoint> fallback = frame_i.samples.empty() ? masked_points(frame_i, 1)
                                                                     : std::vector<SurfacePoint>{};
  const auto& samples = frame_i.samples.empty() ? fallback : frame_i.samples;
  edge.entries.reserve(samples.size());
  for (const SurfacePoint& s : samples) {
    const auto px = project<double>(j_from_i * s.point, frame_j.intrinsics);
    if (!px) continue;
    const auto hit = lookup(frame_j, px->x(), px->y());
    if (!hit) continue;
    const Eigen::Vector3d back = i_from_j * hit->point;
    if ((back - s.point).squaredNorm() > max_d2) continue;
    if (s.normal.dot(i_from_j.rotation * hit->normal) < cos_gate) continue;
    edge.entries.push_back({s.point, s.normal, hit->point});
  }
  return edge;
}

void rebuild_dense_edges(PoseGraph& graph) {
  const std::size_t n = graph.nodes.size();
  std::vector<Pose3d> poses(n);
  for (std::size_t i = 0; i < n; ++i) poses[i] = graph.nodes[i].pose();
  graph.dense_edges.clear();
  if (n < 2) return;
  graph.dense_edges.resize(n * (n - 1));
  parallel_for(n * (n - 1), [&](std::size_t k) {
    const std::size_t i = k / (n - 1);
    std::size_t j = k % (n - 1);
    if (j >= i) ++j;
    DenseEdge e = build_dense_edge(*graph.nodes[i].frame, *graph.nodes[j].frame, poses[i], poses[j], graph.gates);
    e.i = i;
    e.j = j;
    graph.dense_edges[k] = std::move(e);
  });
}

// ---------------------------------------------------------------------------
// Residuals and energies

namespace {

struct PairPoses {
  Pose3d inv_i, inv_j;  // object_from_camera
  Pose3d i_from_j;      // T_i T_j^-1
};

PairPoses pair_poses(const PoseGraph& g, std::size_t i, std::size_t j) {
  const Pose3d Ti = g.nodes[i].pose(), Tj = g.nodes[j].pose();
  return {inverse(Ti), inverse(Tj), compose(Ti, inverse(Tj))};
}

const Eigen::Vector3d& kp_point(const PoseGraph& g, std::size_t node, std::size_t idx) {
  return g.nodes[node].frame->keypoints[idx].point;
}

}  // namespace

double energy_feature_pair(const PoseGraph& graph, const FeatureEdge& edge) {
  const PairPoses P = pair_poses(graph, edge.i, edge.j);
  double e = 0;
  for (const Match& m : edge.matches) {
    const Eigen::Vector3d r = P.inv_i * kp_point(graph, edge.i, m.index_a) - P.inv_j * kp_point(graph, edge.j, m.index_b);
    e += huber(r.norm(), graph.huber.delta_feature).value;
  }
  return e;
}

double energy_geometric_pair(const PoseGraph& graph, const DenseEdge& edge) {
  const Pose3d A = pair_poses(graph, edge.i, edge.j).i_from_j;
  double e = 0;
  for (const DenseCorrespondence& c : edge.entries)
    e += huber(std::abs(c.normal.dot(A * c.target - c.point)), graph.huber.delta_geometric).value;
  return e;
}

double energy_feature(const PoseGraph& graph) {
  double e = 0;
  // E_f(i, j) = E_f(j, i); the double sum visits both orders.
  for (const FeatureEdge& edge : graph.feature_edges) e += 2.0 * energy_feature_pair(graph, edge);
  return e;
}

double energy_geometric(const PoseGraph& graph) {
  std::vector<double> parts(graph.dense_edges.size());
  parallel_for(parts.size(), [&](std::size_t k) { parts[k] = energy_geometric_pair(graph, graph.dense_edges[k]); });
  double e = 0;
  for (double p : parts) e += p;
  return e;
}

EnergyBreakdown total_energy(const PoseGraph& graph) {
  EnergyBreakdown b;
  if (graph.use_feature) b.feature = energy_feature(graph);
  if (graph.use_geometric) b.geometric = energy_geometric(graph);
  b.total = graph.lambda_feature * b.feature + graph.lambda_geometric * b.geometric;
  return b;
}

std::vector<Eigen::Vector3d> residuals_feature(const PoseGraph& graph) {
  std::vector<Eigen::Vector3d> out;
  for (const FeatureEdge& edge : graph.feature_edges) {
    const PairPoses P = pair_poses(graph, edge.i, edge.j);
    for (const Match& m : edge.matches)
      out.push_back(P.inv_i * kp_point(graph, edge.i, m.index_a) - P.inv_j * kp_point(graph, edge.j, m.index_b));
    for (const Match& m : edge.matches)
      out.push_back(P.inv_j * kp_point(graph, edge.j, m.index_b) - P.inv_i * kp_point(graph, edge.i, m.index_a));
  }
  return out;
}

Eigen::VectorXd residuals_geometric(const PoseGraph& graph) {
  std::vector<double> r;
  for (const DenseEdge& edge : graph.dense_edges) {
    const Pose3d A = pair_poses(graph, edge.i, edge.j).i_from_j;
    for (const DenseCorrespondence& c : edge.entries) r.push_back(c.normal.dot(A * c.target - c.point));
  }
  return Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
}

// ---------------------------------------------------------------------------
// Linearization
//
// Increments act on the left: T <- exp(delta) T with delta = (rho, phi), so
// d(exp(delta) x)/d(delta) = [I, -[x]x].

namespace {

std::vector<int> block_columns(const PoseGraph& g, int& free_blocks) {
  std::vector<int> cols(g.nodes.size(), -1);
  free_blocks = 0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (!g.nodes[i].fixed) cols[i] = free_blocks++;
  return cols;
}

/// e = T_i^-1 p_m - T_j^-1 p_n
void feature_jacobian(const Pose3d& Ti, const Pose3d& Tj, const Eigen::Vector3d& pm, const Eigen::Vector3d& pn,
                      Eigen::Vector3d& r, Eigen::Matrix<double, 3, 6>& Ji, Eigen::Matrix<double, 3, 6>& Jj) {
  const Eigen::Matrix3d Rti = Ti.rotation.transpose(), Rtj = Tj.rotation.transpose();
  r = Rti * (pm - Ti.translation) - Rtj * (pn - Tj.translation);
  Ji.leftCols<3>() = -Rti;
  Ji.rightCols<3>() = Rti * hat(pm);
  Jj.leftCols<3>() = Rtj;
  Jj.rightCols<3>() = -Rtj * hat(pn);
}

/// r = n . (A q - p), A = T_i T_j^-1
void dense_jacobian(const Pose3d& A, const DenseCorrespondence& c, double& r, Eigen::Matrix<double, 1, 6>& Ji,
                    Eigen::Matrix<double, 1, 6>& Jj) {
  const Eigen::Vector3d x = A * c.target;
  r = c.normal.dot(x - c.point);
  const Eigen::Vector3d m = A.rotation.transpose() * c.normal;
  Ji.leftCols<3>() = c.normal.transpose();
  Ji.rightCols<3>() = x.cross(c.normal).transpose();
  Jj.leftCols<3>() = -m.transpose();
  Jj.rightCols<3>() = m.cross(c.target).transpose();
}

/// Per-edge contribution to the normal equations.
struct BlockContribution {
  Matrix6d Hii = Matrix6d::Zero(), Hij = Matrix6d::Zero(), Hjj = Matrix6d::Zero();
  Vector6d gi = Vector6d::Zero(), gj = Vector6d::Zero();
  bool any = false;

  template <int Rows>
  void add(const Eigen::Matrix<double, Rows, 6>& Ji, const Eigen::Matrix<double, Rows, 6>& Jj,
           const Eigen::Matrix<double, Rows, 1>& r, double w) {
    Hii.noalias() += w * Ji.transpose() * Ji;
    Hij.noalias() += w * Ji.transpose() * Jj;
    Hjj.noalias() += w * Jj.transpose() * Jj;
    gi.noalias() += w * Ji.transpose() * r;
    gj.noalias() += w * Jj.transpose() * r;
    any = true;
  }
};

void scatter(NormalEquations& ne, const std::vector<int>& cols, std::size_t i, std::size_t j,
             const BlockContribution& c) {
  if (!c.any) return;
  const int ci = cols[i], cj = cols[j];
  auto mark = [&](int r, int col) { ne.nonzero[std::size_t(r) * ne.blocks + col] = true; };
  if (ci >= 0) {
    ne.block(ci, ci) += c.Hii;
    ne.g.segment<6>(6 * ci) += c.gi;
    mark(ci, ci);
  }
  if (cj >= 0) {
    ne.block(cj, cj) += c.Hjj;
    ne.g.segment<6>(6 * cj) += c.gj;
    mark(cj, cj);
  }
  if (ci >= 0 && cj >= 0) {
    ne.block(ci, cj) += c.Hij;
    ne.block(cj, ci) += c.Hij.transpose();
    mark(ci, cj);
    mark(cj, ci);
  }
}

}  // namespace

Linearization linearize(const PoseGraph& graph) {
  Linearization lin;
  lin.columns = block_columns(graph, lin.free_blocks);
  if (graph.use_feature) {
    for (const FeatureEdge& edge : graph.feature_edges) {
      const Pose3d Ti = graph.nodes[edge.i].pose(), Tj = graph.nodes[edge.j].pose();
      for (int order = 0; order < 2; ++order) {
        const std::size_t a = order == 0 ? edge.i : edge.j;
        const std::size_t b = order == 0 ? edge.j : edge.i;
        for (const Match& m : edge.matches) {
          FeatureRow row;
          row.col_i = lin.columns[a];
          row.col_j = lin.columns[b];
          const auto& pa = kp_point(graph, edge.i, m.index_a);
          const auto& pb = kp_point(graph, edge.j, m.index_b);
          if (order == 0)
            feature_jacobian(Ti, Tj, pa, pb, row.r, row.J_i, row.J_j);
          else
            feature_jacobian(Tj, Ti, pb, pa, row.r, row.J_i, row.J_j);
          row.weight = graph.lambda_feature * huber(row.r.norm(), graph.huber.delta_feature).weight;
          lin.feature.push_back(row);
        }
      }
    }
  }
  if (graph.use_geometric) {
    for (const DenseEdge& edge : graph.dense_edges) {
      const Pose3d A = pair_poses(graph, edge.i, edge.j).i_from_j;
      for (const DenseCorrespondence& c : edge.entries) {
        DenseRow row;
        row.col_i = lin.columns[edge.i];
        row.col_j = lin.columns[edge.j];
        dense_jacobian(A, c, row.r, row.J_i, row.J_j);
        row.weight = graph.lambda_geometric * huber(std::abs(row.r), graph.huber.delta_geometric).weight;
        lin.dense.push_back(row);
      }
    }
  }
  return lin;
}

NormalEquations::NormalEquations(int n)
    : blocks(n), H(std::size_t(n) * n, Matrix6d::Zero()), nonzero(std::size_t(n) * n, false), g(Eigen::VectorXd::Zero(6 * n)) {}

void NormalEquations::apply(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
  out.setZero(6 * blocks);
  for (int r = 0; r < blocks; ++r)
    for (int c = 0; c < blocks; ++c)
      if (nonzero[std::size_t(r) * blocks + c]) out.segment<6>(6 * r).noalias() += block(r, c) * x.segment<6>(6 * c);
}

Eigen::VectorXd NormalEquations::diagonal() const {
  Eigen::VectorXd d(6 * blocks);
  for (int b = 0; b < blocks; ++b) d.segment<6>(6 * b) = block(b, b).diagonal();
  return d;
}

Eigen::MatrixXd NormalEquations::dense() const {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(6 * blocks, 6 * blocks);
  for (int r = 0; r < blocks; ++r)
    for (int c = 0; c < blocks; ++c) M.block<6, 6>(6 * r, 6 * c) = block(r, c);
  return M;
}

NormalEquations normal_equations(const Linearization& lin) {
  NormalEquations ne(lin.free_blocks);
  auto scatter_row = [&](int ci, int cj, const auto& Ji, const auto& Jj, const auto& r, double w) {
    BlockContribution c;
    c.add(Ji, Jj, r, w);
    if (ci >= 0) {
      ne.block(ci, ci) += c.Hii;
      ne.g.segment<6>(6 * ci) += c.gi;
      ne.nonzero[std::size_t(ci) * ne.blocks + ci] = true;
    }
    if (cj >= 0) {
      ne.block(cj, cj) += c.Hjj;
      ne.g.segment<6>(6 * cj) += c.gj;
      ne.nonzero[std::size_t(cj) * ne.blocks + cj] = true;
    }
    if (ci >= 0 && cj >= 0) {
      ne.block(ci, cj) += c.Hij;
      ne.block(cj, ci) += c.Hij.transpose();
      ne.nonzero[std::size_t(ci) * ne.blocks + cj] = true;
      ne.nonzero[std::size_t(cj) * ne.blocks + ci] = true;
    }
  };
  for (const FeatureRow& row : lin.feature) scatter_row(row.col_i, row.col_j, row.J_i, row.J_j, row.r, row.weight);
  for (const DenseRow& row : lin.dense)
    scatter_row(row.col_i, row.col_j, row.J_i, row.J_j, Eigen::Matrix<double, 1, 1>(row.r), row.weight);
  return ne;
}

NormalEquations normal_equations(const PoseGraph& graph, std::vector<int>* columns_out) {
  int free_blocks = 0;
  const std::vector<int> cols = block_columns(graph, free_blocks);
  NormalEquations ne(free_blocks);

  const std::size_t nf = graph.use_feature ? graph.feature_edges.size() : 0;
  const std::size_t nd = graph.use_geometric ? graph.dense_edges.size() : 0;
  std::vector<BlockContribution> parts(nf + nd);
  parallel_for(nf + nd, [&](std::size_t k) {
    BlockContribution& c = parts[k];
    if (k < nf) {
      const FeatureEdge& edge = graph.feature_edges[k];
      const Pose3d Ti = graph.nodes[edge.i].pose(), Tj = graph.nodes[edge.j].pose();
      Eigen::Vector3d r;
      Eigen::Matrix<double, 3, 6> Ji, Jj;
      for (const Match& m : edge.matches) {
        feature_jacobian(Ti, Tj, kp_point(graph, edge.i, m.index_a), kp_point(graph, edge.j, m.index_b), r, Ji, Jj);
        // Both orders of the double sum give the same quadratic form.
        const double w = 2.0 * graph.lambda_feature * huber(r.norm(), graph.huber.delta_feature).weight;
        c.add(Ji, Jj, r, w);
      }
    } else {
      const DenseEdge& edge = graph.dense_edges[k - nf];
      const Pose3d A = pair_poses(graph, edge.i, edge.j).i_from_j;
      double r;
      Eigen::Matrix<double, 1, 6> Ji, Jj;
      for (const DenseCorrespondence& corr : edge.entries) {
        dense_jacobian(A, corr, r, Ji, Jj);
        const double w = graph.lambda_geometric * huber(std::abs(r), graph.huber.delta_geometric).weight;
        c.add(Ji, Jj, Eigen::Matrix<double, 1, 1>(r), w);
      }
    }
  });
  for (std::size_t k = 0; k < nf; ++k) scatter(ne, cols, graph.feature_edges[k].i, graph.feature_edges[k].j, parts[k]);
  for (std::size_t k = 0; k < nd; ++k)
    scatter(ne, cols, graph.dense_edges[k].i, graph.dense_edges[k].j, parts[nf + k]);
  if (columns_out) *columns_out = cols;
  return ne;
}

// ---------------------------------------------------------------------------
// Gauss-Newton

namespace {

bool has_constraints(const PoseGraph& g) {
  if (g.use_feature)
    for (const auto& e : g.feature_edges)
      if (!e.matches.empty()) return true;
  if (g.use_geometric)
    for (const auto& e : g.dense_edges)
      if (!e.entries.empty()) return true;
  return false;
}

}  // namespace

OptimizeReport optimize(PoseGraph& graph, const SolverParams& params) {
  OptimizeReport report;
  if (graph.use_geometric) rebuild_dense_edges(graph);
  if (!has_constraints(graph)) throw UnconstrainedGraphError("pose graph has no correspondences");

  EnergyBreakdown current = total_energy(graph);
  report.energies.push_back(current);

  for (int it = 0; it < params.gn_iters; ++it) {
    std::vector<int> cols;
    const NormalEquations ne = normal_equations(graph, &cols);
    if (ne.blocks == 0) break;
    const PcgResult sol = pcg_solve([&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { ne.apply(x, y); }, -ne.g,
                                    ne.diagonal(), params.pcg_tol, params.pcg_max_iter);
    report.degraded_solve = report.degraded_solve || sol.degraded;
    if (!sol.x.allFinite() || sol.x.norm() < 1e-14) break;

    const std::vector<GraphNode> saved = graph.nodes;
    const std::vector<DenseEdge> saved_dense = graph.dense_edges;
    bool accepted = false;
    double scale = 1.0;
    for (int h = 0; h <= params.max_halvings; ++h, scale *= 0.5) {
      for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        if (cols[i] < 0) continue;
        const Twist6d delta = scale * sol.x.segment<6>(6 * cols[i]);
        graph.nodes[i].xi = boxplus(saved[i].xi, delta);
      }
      if (graph.use_geometric) rebuild_dense_edges(graph);
      const EnergyBreakdown trial = total_energy(graph);
      if (trial.total <= current.total) {
        current = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      graph.nodes = saved;
      graph.dense_edges = saved_dense;
      break;
    }
    ++report.accepted_steps;
    report.energies.push_back(current);
  }
  return report;
}

}  // namespace bt
