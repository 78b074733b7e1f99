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
#include "tignn/types.hpp"

#include <optional>
#include <span>
#include <vector>

// Pointer picking, prescribed pokes and penalty contact between bodies.
namespace tignn::interaction {

// General 4x4 inverse of mvp applied to (x, y, depth, 1), then w-divide.
// Throws InvalidArgument for a singular mvp and NumericalFailure when the
// recovered w vanishes.
Vec3 unproject(const Vec2& ndc_xy, Scalar depth_ndc, const Mat4& mvp);

// Nodes with |q_i - point| < eps, nearest first; ties go to the lower id.
std::vector<int> pick_nodes(const Vec3& point, const Points& positions, Scalar eps);
std::vector<int> pick_nodes(const Vec3& point, const StateField& state, Scalar eps);

struct RayHit {
  Vec3 point;          // model space
  Scalar t = 0;        // along the unnormalized near-to-far ray
  int triangle = -1;
  Scalar depth_ndc = 0;
};

// Casts the pick ray through ndc_xy against the surface triangles at the
// given positions and returns the nearest hit.
std::optional<RayHit> raycast_surface(const Vec2& ndc_xy, const Mat4& mvp, const SolidMesh& mesh,
                                      const Points& positions);

// Unit model-space direction of the pick ray through ndc_xy (near to far).
Vec3 ray_direction(const Vec2& ndc_xy, const Mat4& mvp);

struct Poke {
  Vec3 model_point = Vec3::Zero();
  std::vector<int> node_ids;
  Vec3 force = Vec3::Zero();  // total, shared equally by node_ids
  int remaining_steps = 0;

  bool active() const { return remaining_steps > 0 && !node_ids.empty(); }
};

// magnitude * direction split over the picked nodes for `duration` steps.
// An empty pick yields no poke.
std::optional<Poke> poke_force(std::span<const int> picked, const Vec3& direction, Scalar magnitude, int duration,
                               const Vec3& model_point = Vec3::Zero());

// Per-node forces of all active pokes; poked nodes are flagged as loaded.
NodalLoads poke_loads(std::span<const Poke> pokes, int node_count);

// Decrements every poke and drops the expired ones.
void advance_pokes(std::vector<Poke>& pokes);

struct ContactForces {
  Points a;
  Points b;
};

// Penalty springs between all node pairs closer than eps, in a common
// frame: magnitude k (eps - d) along (q_a - q_b) / d, equal and opposite.
// Coincident pairs (d < 1e-9) push along their rest separation.
//
// Pair forces are rounded to a power-of-two grid tied to k * eps, so the
// per-body totals are exact and cancel to zero.
ContactForces contact_forces(const Points& qa, const Points& qb, Scalar eps, Scalar k, const Points& rest_a,
                             const Points& rest_b);
ContactForces contact_forces(const StateField& a, const StateField& b, Scalar eps, Scalar k, const Points& rest_a,
                             const Points& rest_b);

}  // namespace tignn::interaction
