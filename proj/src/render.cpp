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
#include "tignn/render.hpp"

#include <limits>
#include <sstream>

namespace tignn::render {

Mask depth_mask(const DepthGrid& virtual_depth, const DepthGrid& real_depth) {
  if (virtual_depth.rows() != real_depth.rows() || virtual_depth.cols() != real_depth.cols())
    throw InvalidArgument("depth_mask: grid shapes differ");
  return virtual_depth < real_depth;
}

std::string to_ppm(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  return out;
}

Image from_ppm(const std::string& bytes) {
  std::istringstream is(bytes);
  std::string magic;
  int maxval = 0;
  Image img;
  is >> magic >> img.width >> img.height >> maxval;
  if (magic != "P6" || img.width <= 0 || img.height <= 0 || maxval != 255)
    throw SchemaViolation("ppm: expected binary P6 with maxval 255");
  is.get();
  img.rgb.resize(3 * static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
  is.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (is.gcount() != static_cast<std::streamsize>(img.rgb.size())) throw SchemaViolation("ppm: truncated pixel data");
  return img;
}

Vec2 ndc_to_pixel(const Vec2& ndc, int width, int height) {
  return {(ndc.x() + 1) * 0.5 * width, (1 - ndc.y()) * 0.5 * height};
}

namespace {

struct ScreenVertex {
  Vec2 p;
  Scalar depth = 0;
  Vec3 color;
  bool valid = false;
};

Scalar edge(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

}  // namespace

Image render_surfaces(std::span<const SurfaceView> bodies, const Camera<Scalar>& cam, const RenderSettings& s) {
  cam.validate();
  if (s.width < 1 || s.height < 1) throw InvalidArgument("render: image size must be positive");
  Image img{s.width, s.height, {}};
  img.rgb.resize(3 * static_cast<std::size_t>(s.width) * static_cast<std::size_t>(s.height));
  for (std::size_t i = 0; i < img.rgb.size(); ++i)
    img.rgb[i] = static_cast<std::uint8_t>(std::lround(255 * std::clamp(s.background(static_cast<int>(i % 3)), 0.0, 1.0)));
  std::vector<Scalar> zbuf(static_cast<std::size_t>(s.width) * static_cast<std::size_t>(s.height),
                           std::numeric_limits<Scalar>::infinity());

  const M4<Scalar> view_proj = projection_matrix(cam) * view_matrix(cam);
  for (const auto& body : bodies) {
    if (!body.mesh) throw InvalidArgument("render: body without mesh");
    const SolidMesh& mesh = *body.mesh;
    if (body.positions.rows() != mesh.node_count() || body.field.size() != static_cast<std::size_t>(mesh.node_count()))
      throw InvalidArgument("render: body arrays do not match its mesh");
    body.pose.validate();
    const M4<Scalar> model = model_matrix(body.pose);
    const M4<Scalar> mvp = view_proj * model;
    const M3<Scalar> normal_matrix = body.pose.rotation * body.pose.scale.cwiseInverse().asDiagonal();
    const Points normals = vertex_normals(mesh, body.positions);

    std::vector<ScreenVertex> sv(static_cast<std::size_t>(mesh.node_count()));
    for (int i = 0; i < mesh.node_count(); ++i) {
      const Vec3 x = body.positions.row(i).transpose();
      const Vec4 clip = mvp * x.homogeneous();
      if (clip(3) < 1e-12) continue;
      const Vec3 ndc = clip.head<3>() / clip(3);
      auto& v = sv[static_cast<std::size_t>(i)];
      v.p = ndc_to_pixel(ndc.head<2>(), s.width, s.height);
      v.depth = ndc.z();
      v.valid = ndc.z() >= -1 && ndc.z() <= 1;
      const Vec3 world = (model * x.homogeneous()).head<3>();
      Vec3 n = normal_matrix * normals.row(i).transpose();
      if (n.norm() > 0) n.normalize();
      const Vec3 to_eye = (cam.translation - world).normalized();
      v.color = colormap(body.field[static_cast<std::size_t>(i)], s.lo, s.hi).cwiseProduct(
          phong(s.material, n, s.light_dir, to_eye));
    }

    for (Eigen::Index t = 0; t < mesh.surface.rows(); ++t) {
      const auto& a = sv[static_cast<std::size_t>(mesh.surface(t, 0))];
      const auto& b = sv[static_cast<std::size_t>(mesh.surface(t, 1))];
      const auto& c = sv[static_cast<std::size_t>(mesh.surface(t, 2))];
      if (!a.valid || !b.valid || !c.valid) continue;
      const Scalar area = edge(a.p, b.p, c.p);
      if (std::abs(area) < 1e-12) continue;
      const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.p.x(), b.p.x(), c.p.x()}))));
      const int x1 = std::min(s.width - 1, static_cast<int>(std::ceil(std::max({a.p.x(), b.p.x(), c.p.x()}))));
      const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.p.y(), b.p.y(), c.p.y()}))));
      const int y1 = std::min(s.height - 1, static_cast<int>(std::ceil(std::max({a.p.y(), b.p.y(), c.p.y()}))));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const Vec2 p(x + 0.5, y + 0.5);
          const Scalar w0 = edge(b.p, c.p, p) / area;
          const Scalar w1 = edge(c.p, a.p, p) / area;
          const Scalar w2 = 1 - w0 - w1;
          if (w0 < 0 || w1 < 0 || w2 < 0) continue;
          const Scalar z = w0 * a.depth + w1 * b.depth + w2 * c.depth;
          Scalar& zb = zbuf[static_cast<std::size_t>(y) * static_cast<std::size_t>(s.width) + static_cast<std::size_t>(x)];
          if (!(z < zb)) continue;
          zb = z;
          const Vec3 col = (w0 * a.color + w1 * b.color + w2 * c.color).cwiseMax(0.0).cwiseMin(1.0);
          std::uint8_t* px = img.pixel(x, y);
          for (int k = 0; k < 3; ++k) px[k] = static_cast<std::uint8_t>(std::lround(255 * col(k)));
        }
      }
    }
  }
  return img;
}

}  // namespace tignn::render
