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
#include "tignn/io.hpp"
#include "tignn/session.hpp"

#include <Eigen/Geometry>

#include <filesystem>
#include <numbers>

namespace tignn {

using nlohmann::json;

namespace {

Vec3 vec3(const json& j, std::string_view where) {
  const MatrixX m = io::matrix_from_json(json::array({j}), 3, where);
  return m.row(0).transpose();
}

// 3x3 row arrays, or {"axis": [...], "angle_deg": a}.
Mat3 rotation(const json& j, std::string_view where) {
  if (j.is_object()) {
    const Vec3 axis = vec3(j.at("axis"), where);
    if (axis.norm() == 0) throw SchemaViolation(std::string(where) + ": zero rotation axis");
    const Scalar deg = j.at("angle_deg").get<Scalar>();
    Mat3 r = Eigen::AngleAxis<Scalar>(deg * std::numbers::pi / 180, axis.normalized()).toRotationMatrix();
    // Snap round-off so quarter turns stay exact.
    for (int i = 0; i < 9; ++i)
      if (std::abs(r.data()[i]) < 1e-15) r.data()[i] = 0;
    return r;
  }
  const MatrixX m = io::matrix_from_json(j, 3, where);
  if (m.rows() != 3) throw SchemaViolation(std::string(where) + ": rotation must be 3x3");
  return m;
}

json mat3_json(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

json vec3_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

std::string resolve(const std::string& path, const std::string& base) {
  if (path.empty() || path.rfind("beam:", 0) == 0 || base.empty()) return path;
  const std::filesystem::path p(path);
  return p.is_absolute() ? path : (std::filesystem::path(base) / p).lexically_normal().string();
}

}  // namespace

SceneConfig scene_config_from_json(const json& j, const std::string& base_dir) {
  io::expect_schema(j, "scene/1", "scene");
  SceneConfig c;
  c.base_dir = base_dir;
  try {
    for (const auto& b : j.at("bodies")) {
      BodyConfig body;
      body.name = b.at("name").get<std::string>();
      body.mesh = resolve(b.at("mesh").get<std::string>(), base_dir);
      body.checkpoint = resolve(b.at("checkpoint").get<std::string>(), base_dir);
      if (b.contains("pose")) {
        const auto& p = b["pose"];
        if (p.contains("translation")) body.pose.translation = vec3(p["translation"], "pose.translation");
        if (p.contains("rotation")) body.pose.rotation = rotation(p["rotation"], "pose.rotation");
        if (p.contains("scale")) {
          body.pose.scale = p["scale"].is_number() ? Vec3::Constant(p["scale"].get<Scalar>())
                                                   : vec3(p["scale"], "pose.scale");
        }
      }
      c.bodies.push_back(std::move(body));
    }
    if (j.contains("camera")) {
      const auto& cam = j["camera"];
      const Scalar fov = cam.contains("fov_deg") ? cam["fov_deg"].get<Scalar>() * std::numbers::pi / 180
                                                 : cam.value("fov", c.camera.fov);
      const Scalar zn = cam.value("z_near", c.camera.z_near);
      const Scalar zf = cam.value("z_far", c.camera.z_far);
      if (cam.contains("eye")) {
        c.camera = render::look_at<Scalar>(vec3(cam["eye"], "camera.eye"), vec3(cam.at("target"), "camera.target"),
                                           cam.contains("up") ? vec3(cam["up"], "camera.up") : Vec3::UnitY(), fov, zn,
                                           zf);
      } else {
        if (cam.contains("rotation")) c.camera.rotation = rotation(cam["rotation"], "camera.rotation");
        if (cam.contains("translation")) c.camera.translation = vec3(cam["translation"], "camera.translation");
        c.camera.fov = fov;
        c.camera.z_near = zn;
        c.camera.z_far = zf;
      }
    }
    if (j.contains("material")) {
      const auto& m = j["material"];
      c.material.k_a = m.value("k_a", c.material.k_a);
      c.material.k_d = m.value("k_d", c.material.k_d);
      c.material.k_s = m.value("k_s", c.material.k_s);
      c.material.beta = m.value("beta", c.material.beta);
    }
    if (j.contains("light_dir")) c.light_dir = vec3(j["light_dir"], "light_dir").normalized();
    if (j.contains("contact_eps")) c.contact_eps = j["contact_eps"].get<Scalar>();
    if (j.contains("contact_k")) c.contact_k = j["contact_k"].get<Scalar>();
    if (j.contains("pick_eps")) c.pick_eps = j["pick_eps"].get<Scalar>();
    if (j.contains("tick_dt")) c.tick_dt = j["tick_dt"].get<Scalar>();
    c.poke_magnitude = j.value("poke_magnitude", c.poke_magnitude);
    c.poke_duration = j.value("poke_duration", c.poke_duration);
    c.tick_hz = j.value("tick_hz", c.tick_hz);
    const std::string dir = j.value("poke_direction", std::string("ray"));
    if (dir == "ray")
      c.poke_direction = PokeDirection::Ray;
    else if (dir == "normal")
      c.poke_direction = PokeDirection::Normal;
    else
      throw SchemaViolation("scene: poke_direction must be 'ray' or 'normal'");
    const std::string prec = j.value("precision", std::string("float32"));
    if (prec == "float32")
      c.precision = Precision::Float32;
    else if (prec == "float64")
      c.precision = Precision::Float64;
    else
      throw SchemaViolation("scene: precision must be 'float32' or 'float64'");
    c.field_channel = j.value("field_channel", c.field_channel);
    c.field_lo = j.value("field_lo", c.field_lo);
    c.field_hi = j.value("field_hi", c.field_hi);
  } catch (const json::exception& e) {
    throw SchemaViolation(std::string("scene: ") + e.what());
  }
  if (c.bodies.empty()) throw SchemaViolation("scene: 'bodies' is empty");
  if (!(c.tick_hz > 0)) throw SchemaViolation("scene: tick_hz must be > 0");
  return c;
}

json to_json(const SceneConfig& c) {
  json bodies = json::array();
  for (const auto& b : c.bodies) {
    bodies.push_back({{"name", b.name},
                      {"mesh", b.mesh},
                      {"checkpoint", b.checkpoint},
                      {"pose",
                       {{"translation", vec3_json(b.pose.translation)},
                        {"rotation", mat3_json(b.pose.rotation)},
                        {"scale", vec3_json(b.pose.scale)}}}});
  }
  json j = {{"schema", "scene/1"},
            {"bodies", std::move(bodies)},
            {"camera",
             {{"fov", c.camera.fov},
              {"z_near", c.camera.z_near},
              {"z_far", c.camera.z_far},
              {"rotation", mat3_json(c.camera.rotation)},
              {"translation", vec3_json(c.camera.translation)}}},
            {"material", {{"k_a", c.material.k_a}, {"k_d", c.material.k_d}, {"k_s", c.material.k_s}, {"beta", c.material.beta}}},
            {"light_dir", vec3_json(c.light_dir)},
            {"poke_magnitude", c.poke_magnitude},
            {"poke_duration", c.poke_duration},
            {"poke_direction", c.poke_direction == PokeDirection::Ray ? "ray" : "normal"},
            {"tick_hz", c.tick_hz},
            {"precision", c.precision == Precision::Float32 ? "float32" : "float64"},
            {"field_channel", c.field_channel},
            {"field_lo", c.field_lo},
            {"field_hi", c.field_hi}};
  if (c.contact_eps) j["contact_eps"] = *c.contact_eps;
  if (c.contact_k) j["contact_k"] = *c.contact_k;
  if (c.pick_eps) j["pick_eps"] = *c.pick_eps;
  if (c.tick_dt) j["tick_dt"] = *c.tick_dt;
  return j;
}

SceneConfig load_scene_config(const std::string& path) {
  const auto base = std::filesystem::path(path).parent_path().string();
  return scene_config_from_json(io::read_json(path), base);
}

}  // namespace tignn
