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
#include "tignn/types.hpp"

#include <vector>

namespace tignn {

// Column layout of one state row.
inline constexpr int kQ = 0;
inline constexpr int kV = 3;
inline constexpr int kSigma = 6;

struct NodeState {
  Vec3 q = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec6 sigma = Vec6::Zero();  // Cauchy, Voigt order

  StateVec packed() const;
  static NodeState unpack(const StateVec& z);
};

// One row per node: [q | v | sigma].
struct StateField {
  StateRows z;
  Scalar time = 0;

  int size() const { return static_cast<int>(z.rows()); }
  auto q() { return z.middleCols<3>(kQ); }
  auto q() const { return z.middleCols<3>(kQ); }
  auto v() { return z.middleCols<3>(kV); }
  auto v() const { return z.middleCols<3>(kV); }
  auto sigma() { return z.middleCols<6>(kSigma); }
  auto sigma() const { return z.middleCols<6>(kSigma); }

  NodeState node(int i) const { return NodeState::unpack(z.row(i).transpose()); }
  void set_node(int i, const NodeState& s) { z.row(i) = s.packed().transpose(); }

  // q = rest, v = 0, sigma = 0.
  static StateField rest(const SolidMesh& mesh);
};

// Constant nodal force on a node set for steps in [first_step, last_step).
struct LoadCase {
  std::vector<int> loaded_nodes;
  Vec3 force_per_node = Vec3::Zero();
  int first_step = 0;
  int last_step = 0;

  bool active(int step) const { return step >= first_step && step < last_step; }
  void validate(const SolidMesh& mesh) const;
};

// Per-node external force and loaded flag at one instant. This is what
// enters the graph; load cases, pokes and contact all reduce to it.
struct NodalLoads {
  Points force;
  std::vector<char> loaded;

  static NodalLoads none(int n);
  static NodalLoads from_case(const LoadCase& load, int n, int step);
  NodalLoads& operator+=(const NodalLoads& other);
};

struct Trajectory {
  LoadCase load;
  Scalar dt = 0;
  std::vector<StateField> snapshots;  // nt + 1 entries

  int steps() const { return static_cast<int>(snapshots.size()) - 1; }
};

}  // namespace tignn
