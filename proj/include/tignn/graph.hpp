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
#pragma once

#include "tignn/mesh.hpp"
#include "tignn/state.hpp"

#include <nlohmann/json_fwd.hpp>

#include <span>
#include <vector>

namespace tignn {

// Node features: v(3) sigma(6) kind one-hot {free, fixed, loaded}(3) force(3).
inline constexpr int kNodeFeatures = 15;
// Edge features: q_src - q_dst (3), its norm (1).
inline constexpr int kEdgeFeatures = 4;

enum class NodeKind { Free = 0, Fixed = 1, Loaded = 2 };

// Z-score statistics frozen at training time.
//
// Targets (state rates) are scaled but not shifted: a zero normalized rate
// maps to a zero physical rate, so an all-zero decoder keeps the state put.
// target_scale holds the per-channel RMS; target_mean is kept for reporting.
struct Normalization {
  RowVectorX node_mean = RowVectorX::Zero(kNodeFeatures);
  RowVectorX node_std = RowVectorX::Ones(kNodeFeatures);
  RowVectorX edge_mean = RowVectorX::Zero(kEdgeFeatures);
  RowVectorX edge_std = RowVectorX::Ones(kEdgeFeatures);
  RowVectorX target_mean = RowVectorX::Zero(kStateDim);
  RowVectorX target_scale = RowVectorX::Ones(kStateDim);

  static Normalization identity() { return {}; }

  MatrixX normalize_nodes(const MatrixX& x) const;
  MatrixX normalize_edges(const MatrixX& x) const;
  MatrixX normalize_targets(const MatrixX& x) const;
  MatrixX denormalize_targets(const MatrixX& x) const;
};

nlohmann::json to_json(const Normalization& n);
Normalization normalization_from_json(const nlohmann::json& j);

// Directed graph over mesh nodes. Edges come in both directions for every
// element edge, grouped by ascending dst. Inside a group they follow the
// rest offset src - dst (lexicographic), which does not depend on labels:
// a relabeled mesh sums every node's messages in the same order.
struct SimGraph {
  int n_vertices = 0;
  MatrixX node_features;  // n x 15, normalized
  std::vector<int> senders;
  std::vector<int> receivers;
  MatrixX edge_features;  // e x 4, normalized

  int n_edges() const { return static_cast<int>(senders.size()); }
};

// Connectivity shared by every graph built on one mesh.
struct GraphTopology {
  std::vector<int> senders;
  std::vector<int> receivers;
  static GraphTopology from_mesh(const SolidMesh& mesh);
};

SimGraph mesh_to_graph(const SolidMesh& mesh, const StateField& state, const NodalLoads& loads,
                       const Normalization& stats);
SimGraph mesh_to_graph(const SolidMesh& mesh, const StateField& state, const LoadCase& load, int step,
                       const Normalization& stats);
// Same as above with a precomputed topology (hot path).
SimGraph mesh_to_graph(const SolidMesh& mesh, const GraphTopology& topo, const StateField& state,
                       const NodalLoads& loads, const Normalization& stats);

// Unnormalized feature builders.
MatrixX raw_node_features(const SolidMesh& mesh, const StateField& state, const NodalLoads& loads);
MatrixX raw_edge_features(const GraphTopology& topo, const StateField& state);

// Disjoint union of graphs; node and edge blocks stacked in input order.
SimGraph batch_graphs(std::span<const SimGraph> graphs);

// Per-channel mean and population std over all snapshots of all
// trajectories (targets over consecutive pairs).
Normalization normalization_stats(const SolidMesh& mesh, std::span<const Trajectory> trajectories);

// (z_next - z) / dt for one snapshot pair.
StateRows finite_difference_rate(const StateField& z, const StateField& z_next, Scalar dt);

}  // namespace tignn
