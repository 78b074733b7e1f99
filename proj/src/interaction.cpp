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
#include "tignn/interaction.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace tignn::interaction {

Vec3 unproject(const Vec2& ndc_xy, Scalar depth_ndc, const Mat4& mvp) {
  const Eigen::FullPivLU<Mat4> lu(mvp);
  if (!lu.isInvertible()) throw InvalidArgument("unproject: mvp matrix is singular");
  const Vec4 h = lu.inverse() * Vec4(ndc_xy.x(), ndc_xy.y(), depth_ndc, 1);
  if (std::abs(h(3)) < 1e-12) throw NumericalFailure("unproject: degenerate point (w = 0)");
  return h.head<3>() / h(3);
}

std::vector<int> pick_nodes(const Vec3& point, const Points& positions, Scalar eps) {
  if (!(eps > 0)) throw InvalidArgument("pick: eps must be > 0");
  std::vector<std::pair<Scalar, int>> hits;
  for (int i = 0; i < positions.rows(); ++i) {
    const Scalar d = (positions.row(i).transpose() - point).norm();
    if (d < eps) hits.emplace_back(d, i);
  }
  std::sort(hits.begin(), hits.end());
  std::vector<int> ids;
  ids.reserve(hits.size());
  for (const auto& h : hits) ids.push_back(h.second);
  return ids;
}

std::vector<int> pick_nodes(const Vec3& point, const StateField& state, Scalar eps) {
  return pick_nodes(point, Points(state.q()), eps);
}

Vec3 ray_direction(const Vec2& ndc_xy, const Mat4& mvp) {
  return (unproject(ndc_xy, 1, mvp) - unproject(ndc_xy, -1, mvp)).normalized();
}

std::optional<RayHit> raycast_surface(const Vec2& ndc_xy, const Mat4& mvp, const SolidMesh& mesh,
                                      const Points& positions) {
  if (positions.rows() != mesh.node_count()) throw InvalidArgument("raycast: positions do not match mesh");
  const Vec3 origin = unproject(ndc_xy, -1, mvp);
  const Vec3 dir = unproject(ndc_xy, 1, mvp) - origin;
  std::optional<RayHit> best;
  for (Eigen::Index t = 0; t < mesh.surface.rows(); ++t) {
    const Vec3 a = positions.row(mesh.surface(t, 0)).transpose();
    const Vec3 e1 = positions.row(mesh.surface(t, 1)).transpose() - a;
    const Vec3 e2 = positions.row(mesh.surface(t, 2)).transpose() - a;
    const Vec3 p = dir.cross(e2);
    const Scalar det = e1.dot(p);
    if (std::abs(det) < 1e-14 * e1.norm() * e2.norm() * dir.norm()) continue;
    const Vec3 s = origin - a;
    const Scalar u = s.dot(p) / det;
    if (u < 0 || u > 1) continue;
    const Vec3 q = s.cross(e1);
    const Scalar v = dir.dot(q) / det;
    if (v < 0 || u + v > 1) continue;
    const Scalar hit_t = e2.dot(q) / det;
    if (hit_t < 0 || hit_t > 1) continue;
    if (!best || hit_t < best->t) best = RayHit{origin + hit_t * dir, hit_t, static_cast<int>(t), 0};
  }
  if (best) {
    const Vec4 clip = mvp * best->point.homogeneous();
    best->depth_ndc = clip(2) / clip(3);
  }
  return best;
}

std::optional<Poke> poke_force(std::span<const int> picked, const Vec3& direction, Scalar magnitude, int duration,
                               const Vec3& model_point) {
  if (picked.empty()) return std::nullopt;
  if (duration < 0) throw InvalidArgument("poke: duration must be >= 0");
  if (!direction.allFinite() || !std::isfinite(magnitude)) throw InvalidArgument("poke: non-finite force");
  Poke p;
  p.model_point = model_point;
  p.node_ids.assign(picked.begin(), picked.end());
  p.force = magnitude * direction;
  p.remaining_steps = duration;
  return p;
}

NodalLoads poke_loads(std::span<const Poke> pokes, int node_count) {
  NodalLoads out = NodalLoads::none(node_count);
  for (const auto& p : pokes) {
    if (!p.active()) continue;
    const Vec3 share = p.force / static_cast<Scalar>(p.node_ids.size());
    for (int id : p.node_ids) {
      if (id < 0 || id >= node_count) throw InvalidArgument("poke: node id out of range");
      out.force.row(id) += share.transpose();
      out.loaded[static_cast<std::size_t>(id)] = 1;
    }
  }
  return out;
}

void advance_pokes(std::vector<Poke>& pokes) {
  for (auto& p : pokes) p.remaining_steps = std::max(0, p.remaining_steps - 1);
  std::erase_if(pokes, [](const Poke& p) { return !p.active(); });
}

ContactForces contact_forces(const Points& qa, const Points& qb, Scalar eps, Scalar k, const Points& rest_a,
                             const Points& rest_b) {
  if (!(eps > 0) || !(k > 0)) throw InvalidArgument("contact: eps and k must be > 0");
  if (rest_a.rows() != qa.rows() || rest_b.rows() != qb.rows())
    throw InvalidArgument("contact: rest positions do not match states");
  ContactForces out{Points::Zero(qa.rows(), 3), Points::Zero(qb.rows(), 3)};
  if (qa.rows() == 0 || qb.rows() == 0) return out;

  const Scalar quantum = std::ldexp(1.0, std::ilogb(k * eps) - 30);
  const Vec3 lo = qb.colwise().minCoeff().transpose().array() - eps;
  const Vec3 hi = qb.colwise().maxCoeff().transpose().array() + eps;
  for (Eigen::Index i = 0; i < qa.rows(); ++i) {
    const Vec3 xi = qa.row(i).transpose();
    if ((xi.array() < lo.array()).any() || (xi.array() > hi.array()).any()) continue;
    for (Eigen::Index j = 0; j < qb.rows(); ++j) {
      const Vec3 sep = xi - qb.row(j).transpose();
      const Scalar d = sep.norm();
      if (!(d < eps)) continue;
      Vec3 dir;
      if (d < 1e-9) {
        dir = rest_a.row(i).transpose() - rest_b.row(j).transpose();
        dir = dir.norm() > 0 ? Vec3(dir.normalized()) : Vec3::UnitX();
      } else {
        dir = sep / d;
      }
      Vec3 f = k * (eps - d) * dir;
      for (int c = 0; c < 3; ++c) f(c) = std::nearbyint(f(c) / quantum) * quantum;
      out.a.row(i) += f.transpose();
      out.b.row(j) -= f.transpose();
    }
  }
  return out;
}

ContactForces contact_forces(const StateField& a, const StateField& b, Scalar eps, Scalar k, const Points& rest_a,
                             const Points& rest_b) {
  return contact_forces(Points(a.q()), Points(b.q()), eps, k, rest_a, rest_b);
}

}  // namespace tignn::interaction
