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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

// Model/view/projection transforms, Phong shading, colormap and depth test.
namespace tignn::render {

template <typename T>
using V3 = Eigen::Matrix<T, 3, 1>;
template <typename T>
using V4 = Eigen::Matrix<T, 4, 1>;
template <typename T>
using M3 = Eigen::Matrix<T, 3, 3>;
template <typename T>
using M4 = Eigen::Matrix<T, 4, 4>;

template <typename T>
bool is_rotation(const M3<T>& r, T tol = T(1e-12)) {
  return (r.transpose() * r - M3<T>::Identity()).cwiseAbs().maxCoeff() <= tol;
}

template <typename T = Scalar>
struct ModelPose {
  V3<T> translation = V3<T>::Zero();
  M3<T> rotation = M3<T>::Identity();
  V3<T> scale = V3<T>::Ones();

  void validate() const {
    if (!is_rotation(rotation)) throw InvalidArgument("pose: rotation is not orthonormal");
    if (!(scale.array() > T(0)).all()) throw InvalidArgument("pose: scale must be positive");
  }
};

template <typename T = Scalar>
struct Camera {
  T fov = std::numbers::pi_v<T> / 3;  // radians
  T z_near = T(1);
  T z_far = T(1000);
  M3<T> rotation = M3<T>::Identity();
  V3<T> translation = V3<T>::Zero();

  void validate() const {
    if (!(fov > 0 && fov < std::numbers::pi_v<T>)) throw InvalidArgument("camera: fov must lie in (0, pi)");
    if (!(z_near > 0 && z_near < z_far)) throw InvalidArgument("camera: need 0 < z_near < z_far");
    if (!is_rotation(rotation)) throw InvalidArgument("camera: rotation is not orthonormal");
  }
};

template <typename T = Scalar>
struct PhongMaterial {
  T k_a = T(0.3), k_d = T(0.7), k_s = T(0.2);
  T beta = T(16);
  V3<T> i_a = V3<T>::Ones(), i_d = V3<T>::Ones(), i_s = V3<T>::Ones();
};

template <typename T>
M4<T> rigid_matrix(const M3<T>& r, const V3<T>& t) {
  M4<T> m = M4<T>::Identity();
  m.template topLeftCorner<3, 3>() = r;
  m.template topRightCorner<3, 1>() = t;
  return m;
}

// M_m = T R S.
template <typename T>
M4<T> model_matrix(const ModelPose<T>& pose) {
  M4<T> m = M4<T>::Identity();
  m.template topLeftCorner<3, 3>() = pose.rotation * pose.scale.asDiagonal();
  m.template topRightCorner<3, 1>() = pose.translation;
  return m;
}

// T_v R_v: camera frame to world.
template <typename T>
M4<T> pose_matrix(const Camera<T>& cam) {
  return rigid_matrix(cam.rotation, cam.translation);
}

// (T_v R_v)^-1 = [R^T, -R^T t].
template <typename T>
M4<T> view_matrix(const Camera<T>& cam) {
  const M3<T> rt = cam.rotation.transpose();
  return rigid_matrix<T>(rt, -(rt * cam.translation));
}

template <typename T>
M4<T> projection_matrix(const Camera<T>& cam) {
  // Half-angle form of cot(fov/2); exact for fov = pi/2.
  const T c = (T(1) + std::cos(cam.fov)) / std::sin(cam.fov);
  const T n = cam.z_near, f = cam.z_far;
  M4<T> p = M4<T>::Zero();
  p(0, 0) = c;
  p(1, 1) = c;
  p(2, 2) = -(f + n) / (f - n);
  p(2, 3) = -T(2) * f * n / (f - n);
  p(3, 2) = T(-1);
  return p;
}

// Camera at `eye` looking at `target`; the camera looks down its own -z.
template <typename T>
Camera<T> look_at(const V3<T>& eye, const V3<T>& target, const V3<T>& up, T fov, T z_near, T z_far) {
  const V3<T> back = (eye - target).normalized();
  const V3<T> right = up.cross(back).normalized();
  Camera<T> cam;
  cam.rotation.col(0) = right;
  cam.rotation.col(1) = back.cross(right);
  cam.rotation.col(2) = back;
  cam.translation = eye;
  cam.fov = fov;
  cam.z_near = z_near;
  cam.z_far = z_far;
  return cam;
}

template <typename T>
M4<T> mvp_matrix(const Camera<T>& cam, const ModelPose<T>& pose) {
  return projection_matrix(cam) * (view_matrix(cam) * model_matrix(pose));
}

template <typename T>
struct Projected {
  V4<T> clip;
  V3<T> ndc;
};

template <typename T>
Projected<T> project(const M4<T>& mvp, const V3<T>& x) {
  Projected<T> p;
  p.clip = mvp * x.homogeneous();
  if (std::abs(p.clip(3)) < T(1e-12)) throw NumericalFailure("project: point lies on the camera plane (w = 0)");
  p.ndc = p.clip.template head<3>() / p.clip(3);
  return p;
}

// k_a i_a + k_d (l.n) i_d + k_s (r.v)^beta i_s with r = 2 (l.n) n - l.
// Both dot products are clamped at zero; a light behind the surface
// contributes no specular term. The result is clamped to [0, 1].
template <typename T>
V3<T> phong(const PhongMaterial<T>& m, const V3<T>& n, const V3<T>& l, const V3<T>& view) {
  const T ln = l.dot(n);
  const V3<T> r = T(2) * ln * n - l;
  const T diffuse = std::max(T(0), ln);
  const T specular = ln < T(0) ? T(0) : std::pow(std::max(T(0), r.dot(view)), m.beta);
  const V3<T> c = m.k_a * m.i_a + m.k_d * diffuse * m.i_d + m.k_s * specular * m.i_s;
  return c.cwiseMax(T(0)).cwiseMin(T(1));
}

inline constexpr std::array<std::array<double, 3>, 5> kColormapStops{{
    {0.267, 0.005, 0.329},
    {0.229, 0.322, 0.546},
    {0.128, 0.567, 0.551},
    {0.369, 0.789, 0.383},
    {0.993, 0.906, 0.144},
}};

template <typename T>
V3<T> colormap(T value, T lo, T hi) {
  if (!(lo < hi)) throw InvalidArgument("colormap: need lo < hi");
  const T u = (std::clamp(value, lo, hi) - lo) / (hi - lo);
  const T s = u * T(4);
  const int k = std::min(3, static_cast<int>(std::floor(s)));
  const T t = s - T(k);
  const auto& a = kColormapStops[static_cast<std::size_t>(k)];
  const auto& b = kColormapStops[static_cast<std::size_t>(k) + 1];
  V3<T> c;
  for (int i = 0; i < 3; ++i) c(i) = (T(1) - t) * T(a[i]) + t * T(b[i]);
  return c;
}

using DepthGrid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// True where the virtual surface is strictly closer; ties favor the real scene.
Mask depth_mask(const DepthGrid& virtual_depth, const DepthGrid& real_depth);

// --- Offline software rendering -------------------------------------------

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, top row first

  std::uint8_t* pixel(int x, int y) { return &rgb[3 * (static_cast<std::size_t>(y) * width + x)]; }
  const std::uint8_t* pixel(int x, int y) const { return &rgb[3 * (static_cast<std::size_t>(y) * width + x)]; }
};

// Binary P6.
std::string to_ppm(const Image& img);
Image from_ppm(const std::string& bytes);

// NDC (x right, y up) to pixel centers (origin top-left).
Vec2 ndc_to_pixel(const Vec2& ndc, int width, int height);

struct SurfaceView {
  const SolidMesh* mesh = nullptr;
  Points positions;              // model space, one row per node
  std::vector<Scalar> field;     // colormapped per node
  ModelPose<Scalar> pose;
};

struct RenderSettings {
  int width = 512;
  int height = 512;
  Scalar lo = -1, hi = 1;  // colormap range
  PhongMaterial<Scalar> material;
  Vec3 light_dir = Vec3(0.3, 0.5, 1.0).normalized();  // towards the light, world space
  Vec3 background = Vec3(1, 1, 1);
};

// Filled surface triangles with per-vertex Phong-modulated colormap colors,
// interpolated across each triangle and resolved with a z-buffer.
Image render_surfaces(std::span<const SurfaceView> bodies, const Camera<Scalar>& cam, const RenderSettings& s);

}  // namespace tignn::render
