/*
 * Copyright 2026 The tignn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "tignn/graph.hpp"

#include "tignn/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tignn {

StateVec NodeState::packed() const {
  StateVec z;
  z << q, v, sigma;
  return z;
}

NodeState NodeState::unpack(const StateVec& z) {
  return {z.segment<3>(kQ), z.segment<3>(kV), z.segment<6>(kSigma)};
}

StateField StateField::rest(const SolidMesh& mesh) {
  StateField s;
  s.z = StateRows::Zero(mesh.node_count(), kStateDim);
  s.q() = mesh.rest_positions;
  return s;
}

void LoadCase::validate(const SolidMesh& mesh) const {
  if (!force_per_node.allFinite()) throw InvalidArgument("load: non-finite force");
  for (int node : loaded_nodes) {
    if (node < 0 || node >= mesh.node_count()) throw InvalidArgument("load: node out of range");
    if (mesh.is_fixed(node)) {
      throw InvalidArgument("load: node " + std::to_string(node) + " is fixed");
    }
  }
  if (first_step < 0 || last_step < first_step) throw InvalidArgument("load: bad step range");
}

NodalLoads NodalLoads::none(int n) {
  return {Points::Zero(n, 3), std::vector<char>(static_cast<std::size_t>(n), 0)};
}

NodalLoads NodalLoads::from_case(const LoadCase& load, int n, int step) {
  NodalLoads out = none(n);
  for (int node : load.loaded_nodes) {
    out.loaded[static_cast<std::size_t>(node)] = 1;
    if (load.active(step)) out.force.row(node) += load.force_per_node.transpose();
  }
  return out;
}

NodalLoads& NodalLoads::operator+=(const NodalLoads& other) {
  force += other.force;
  for (std::size_t i = 0; i < loaded.size(); ++i) loaded[i] = loaded[i] || other.loaded[i];
  return *this;
}

MatrixX Normalization::normalize_nodes(const MatrixX& x) const {
  return (x.rowwise() - node_mean).array().rowwise() / node_std.array();
}

MatrixX Normalization::normalize_edges(const MatrixX& x) const {
  return (x.rowwise() - edge_mean).array().rowwise() / edge_std.array();
}

MatrixX Normalization::normalize_targets(const MatrixX& x) const {
  return x.array().rowwise() / target_scale.array();
}

MatrixX Normalization::denormalize_targets(const MatrixX& x) const {
  return x.array().rowwise() * target_scale.array();
}

nlohmann::json to_json(const Normalization& n) {
  auto vec = [](const RowVectorX& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"node_mean", vec(n.node_mean)},     {"node_std", vec(n.node_std)},
          {"edge_mean", vec(n.edge_mean)},     {"edge_std", vec(n.edge_std)},
          {"target_mean", vec(n.target_mean)}, {"target_scale", vec(n.target_scale)}};
}

Normalization normalization_from_json(const nlohmann::json& j) {
  auto vec = [&](const char* key, int size) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != static_cast<std::size_t>(size))
      throw SchemaViolation(std::string("normalization.") + key + ": expected " + std::to_string(size) + " numbers");
    RowVectorX v(size);
    for (int i = 0; i < size; ++i) v(i) = j[key][static_cast<std::size_t>(i)].get<double>();
    return v;
  };
  Normalization n;
  n.node_mean = vec("node_mean", kNodeFeatures);
  n.node_std = vec("node_std", kNodeFeatures);
  n.edge_mean = vec("edge_mean", kEdgeFeatures);
  n.edge_std = vec("edge_std", kEdgeFeatures);
  n.target_mean = vec("target_mean", kStateDim);
  n.target_scale = vec("target_scale", kStateDim);
  return n;
}

GraphTopology GraphTopology::from_mesh(const SolidMesh& mesh) {
  std::vector<std::pair<int, int>> directed;  // (dst, src)
  for (const auto& [a, b] : element_edges(mesh)) {
    directed.emplace_back(b, a);
    directed.emplace_back(a, b);
  }
  // Within one receiver, order by rest offset (x, y, z of src - dst), then src.
  const auto& x = mesh.rest_positions;
  std::sort(directed.begin(), directed.end(), [&](const auto& l, const auto& r) {
    if (l.first != r.first) return l.first < r.first;
    for (int c = 0; c < 3; ++c) {
      const Scalar a = x(l.second, c) - x(l.first, c), b = x(r.second, c) - x(r.first, c);
      if (a != b) return a < b;
    }
    return l.second < r.second;
  });
  GraphTopology topo;
  topo.senders.reserve(directed.size());
  topo.receivers.reserve(directed.size());
  for (const auto& [dst, src] : directed) {
    topo.senders.push_back(src);
    topo.receivers.push_back(dst);
  }
  return topo;
}

MatrixX raw_node_features(const SolidMesh& mesh, const StateField& state, const NodalLoads& loads) {
  const int n = mesh.node_count();
  if (state.size() != n) throw InvalidArgument("graph: state length does not match mesh");
  MatrixX x = MatrixX::Zero(n, kNodeFeatures);
  x.middleCols<3>(0) = state.v();
  x.middleCols<6>(3) = state.sigma();
  for (int i = 0; i < n; ++i) {
    NodeKind kind = NodeKind::Free;
    if (mesh.is_fixed(i)) {
      kind = NodeKind::Fixed;
    } else if (loads.loaded[static_cast<std::size_t>(i)]) {
      kind = NodeKind::Loaded;
    }
    x(i, 9 + static_cast<int>(kind)) = 1;
  }
  x.middleCols<3>(12) = loads.force;
  return x;
}

MatrixX raw_edge_features(const GraphTopology& topo, const StateField& state) {
  const auto e = static_cast<Eigen::Index>(topo.senders.size());
  MatrixX x(e, kEdgeFeatures);
  for (Eigen::Index k = 0; k < e; ++k) {
    const Vec3 rel = (state.q().row(topo.senders[k]) - state.q().row(topo.receivers[k])).transpose();
    x.row(k) << rel.transpose(), rel.norm();
  }
  return x;
}

SimGraph mesh_to_graph(const SolidMesh& mesh, const GraphTopology& topo, const StateField& state,
                       const NodalLoads& loads, const Normalization& stats) {
  SimGraph g;
  g.n_vertices = mesh.node_count();
  g.node_features = stats.normalize_nodes(raw_node_features(mesh, state, loads));
  g.senders = topo.senders;
  g.receivers = topo.receivers;
  g.edge_features = stats.normalize_edges(raw_edge_features(topo, state));
  return g;
}

SimGraph mesh_to_graph(const SolidMesh& mesh, const StateField& state, const NodalLoads& loads,
                       const Normalization& stats) {
  return mesh_to_graph(mesh, GraphTopology::from_mesh(mesh), state, loads, stats);
}

SimGraph mesh_to_graph(const SolidMesh& mesh, const StateField& state, const LoadCase& load, int step,
                       const Normalization& stats) {
  return mesh_to_graph(mesh, state, NodalLoads::from_case(load, mesh.node_count(), step), stats);
}

SimGraph batch_graphs(std::span<const SimGraph> graphs) {
  SimGraph out;
  Eigen::Index nodes = 0, edges = 0;
  for (const auto& g : graphs) {
    nodes += g.n_vertices;
    edges += g.n_edges();
  }
  out.n_vertices = static_cast<int>(nodes);
  out.node_features.resize(nodes, kNodeFeatures);
  out.edge_features.resize(edges, kEdgeFeatures);
  out.senders.reserve(static_cast<std::size_t>(edges));
  out.receivers.reserve(static_cast<std::size_t>(edges));
  Eigen::Index node_off = 0, edge_off = 0;
  for (const auto& g : graphs) {
    out.node_features.middleRows(node_off, g.n_vertices) = g.node_features;
    out.edge_features.middleRows(edge_off, g.n_edges()) = g.edge_features;
    for (int k = 0; k < g.n_edges(); ++k) {
      out.senders.push_back(g.senders[k] + static_cast<int>(node_off));
      out.receivers.push_back(g.receivers[k] + static_cast<int>(node_off));
    }
    node_off += g.n_vertices;
    edge_off += g.n_edges();
  }
  return out;
}

StateRows finite_difference_rate(const StateField& z, const StateField& z_next, Scalar dt) {
  if (!(dt > 0)) throw InvalidArgument("rate: dt must be > 0");
  return (z_next.z - z.z) / dt;
}

namespace {

// Streaming per-channel moments; two passes would need the data twice.
struct Moments {
  explicit Moments(int channels) : sum(VectorX::Zero(channels)), sum_sq(VectorX::Zero(channels)) {}
  void add(const MatrixX& rows) {
    sum += rows.colwise().sum().transpose();
    sum_sq += rows.array().square().colwise().sum().matrix().transpose();
    count += static_cast<double>(rows.rows());
  }
  RowVectorX mean() const { return (sum / count).transpose(); }
  RowVectorX stddev() const {
    const VectorX m = sum / count;
    VectorX var = (sum_sq / count - m.cwiseAbs2()).cwiseMax(0.0);
    // Cancellation in sum_sq/count - m^2 leaves round-off where the data is
    // constant; treat anything below that noise level as zero spread.
    for (Eigen::Index i = 0; i < var.size(); ++i) {
      const double noise = 1e-12 * std::max(1.0, m(i) * m(i));
      if (var(i) <= noise) var(i) = 0;
    }
    return var.cwiseSqrt().transpose();
  }
  RowVectorX rms() const { return (sum_sq / count).cwiseSqrt().transpose(); }
  VectorX sum, sum_sq;
  double count = 0;
};

RowVectorX replace_zero(RowVectorX s) {
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (!(s(i) > 0)) s(i) = 1;
  return s;
}

}  // namespace

Normalization normalization_stats(const SolidMesh& mesh, std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) throw InvalidArgument("normalization: empty trajectory collection");
  const auto topo = GraphTopology::from_mesh(mesh);
  Moments nodes(kNodeFeatures), edges(kEdgeFeatures), targets(kStateDim);
  for (const auto& traj : trajectories) {
    for (int t = 0; t < static_cast<int>(traj.snapshots.size()); ++t) {
      const auto& snap = traj.snapshots[static_cast<std::size_t>(t)];
      nodes.add(raw_node_features(mesh, snap, NodalLoads::from_case(traj.load, mesh.node_count(), t)));
      edges.add(raw_edge_features(topo, snap));
      if (t + 1 < static_cast<int>(traj.snapshots.size())) {
        targets.add(MatrixX(finite_difference_rate(snap, traj.snapshots[static_cast<std::size_t>(t) + 1], traj.dt)));
      }
    }
  }
  Normalization n;
  n.node_mean = nodes.mean();
  n.node_std = replace_zero(nodes.stddev());
  n.edge_mean = edges.mean();
  n.edge_std = replace_zero(edges.stddev());
  if (targets.count > 0) {
    n.target_mean = targets.mean();
    n.target_scale = replace_zero(targets.rms());
  }
  return n;
}

}  // namespace tignn
