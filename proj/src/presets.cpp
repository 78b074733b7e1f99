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
#include "tignn/presets.hpp"

#include <cstdio>
#include <map>

namespace tignn {

using nlohmann::json;

namespace {

struct Ellipsoid {
  Vec3 c, r;
  bool inside(const Vec3& p) const { return ((p - c).array() / r.array()).matrix().squaredNorm() <= 1; }
};

// Body, head, ears and tail; the ground plane is z = 0.
bool in_bunny(const Vec3& p) {
  static const Ellipsoid parts[] = {
      {{0.0, 0.0, 2.2}, {3.0, 2.2, 2.2}},   {{2.6, 0.0, 4.2}, {1.6, 1.5, 1.5}},
      {{2.2, 0.7, 6.1}, {0.6, 0.55, 1.5}},  {{2.2, -0.7, 6.1}, {0.6, 0.55, 1.5}},
      {{-3.0, 0.0, 2.6}, {0.8, 0.8, 0.8}},
  };
  if (p.z() < 0) return false;
  for (const auto& e : parts)
    if (e.inside(p)) return true;
  return false;
}

json data_json(const fem::DatasetConfig& d) {
  return {{"load_positions", d.load_positions}, {"force_magnitude", d.force_magnitude},
          {"nt", d.nt},
          {"dt", d.dt},
          {"split", d.split},
          {"seed", d.seed},
          {"threads", d.threads}};
}

fem::DatasetConfig data_from_json(const json& j, fem::DatasetConfig d) {
  if (!j.is_object()) throw SchemaViolation("data config: expected an object");
  try {
    d.load_positions = j.value("load_positions", d.load_positions);
    d.force_magnitude = j.value("force_magnitude", d.force_magnitude);
    d.nt = j.value("nt", d.nt);
    d.dt = j.value("dt", d.dt);
    d.split = j.value("split", d.split);
    d.seed = j.value("seed", d.seed);
    d.threads = j.value("threads", d.threads);
  } catch (const json::exception& e) {
    throw SchemaViolation(std::string("data config: ") + e.what());
  }
  if (d.nt < 1) throw InvalidArgument("data config: nt must be >= 1");
  if (!(d.dt > 0)) throw InvalidArgument("data config: dt must be > 0");
  if (!(d.split > 0 && d.split < 1)) throw InvalidArgument("data config: split must lie in (0, 1)");
  return d;
}

}  // namespace

std::vector<std::string> preset_names() { return {"beam-desk", "beam-paper", "bunny-desk", "toy"}; }

MaterialParams bunny_material() {
  MaterialParams m;
  m.c10 = 2.6e-1;
  m.c01 = 0;
  m.d1 = 4.9e-2;
  m.density = beam_material().density;
  m.prony = beam_material().prony;
  return m;
}

SolidMesh build_bunny_mesh() {
  constexpr Scalar h = 0.8;
  const Vec3 lo(-4.0, -2.4, 0.0);
  const int nx = 10, ny = 6, nz = 10;  // cells
  auto cell_in = [&](int i, int j, int k) {
    return in_bunny(lo + h * Vec3(i + 0.5, j + 0.5, k + 0.5));
  };

  std::map<std::array<int, 3>, int> ids;
  std::vector<Vec3> nodes;
  auto node = [&](int i, int j, int k) {
    auto [it, inserted] = ids.try_emplace({i, j, k}, static_cast<int>(nodes.size()));
    if (inserted) nodes.push_back(lo + h * Vec3(i, j, k));
    return it->second;
  };

  // Kuhn split around the (0,0,0)-(1,1,1) diagonal; conforming across cells.
  static constexpr int kTets[6][4] = {{0, 1, 2, 6}, {0, 2, 3, 6}, {0, 3, 7, 6},
                                      {0, 7, 4, 6}, {0, 4, 5, 6}, {0, 5, 1, 6}};
  static constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                        {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  std::vector<std::array<int, 4>> tets;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (!cell_in(i, j, k)) continue;
        int c[8];
        for (int v = 0; v < 8; ++v) c[v] = node(i + kCorner[v][0], j + kCorner[v][1], k + kCorner[v][2]);
        for (const auto& t : kTets) {
          std::array<int, 4> e{c[t[0]], c[t[1]], c[t[2]], c[t[3]]};
          const Vec3 a = nodes[e[0]];
          if ((nodes[e[1]] - a).cross(nodes[e[2]] - a).dot(nodes[e[3]] - a) < 0) std::swap(e[2], e[3]);
          tets.push_back(e);
        }
      }

  SolidMesh mesh;
  mesh.kind = ElementKind::Tet4;
  mesh.rest_positions.resize(static_cast<Eigen::Index>(nodes.size()), 3);
  for (std::size_t i = 0; i < nodes.size(); ++i) mesh.rest_positions.row(static_cast<Eigen::Index>(i)) = nodes[i];
  mesh.elements.resize(static_cast<Eigen::Index>(tets.size()), 4);
  for (std::size_t e = 0; e < tets.size(); ++e)
    for (int v = 0; v < 4; ++v) mesh.elements(static_cast<Eigen::Index>(e), v) = tets[e][static_cast<std::size_t>(v)];
  for (int i = 0; i < mesh.node_count(); ++i)
    if (mesh.rest_positions(i, 2) == 0) mesh.fixed_nodes.push_back(i);
  mesh.surface = extract_surface(mesh.kind, mesh.elements);
  mesh.material = bunny_material();
  return mesh;
}

SolidMesh mesh_from_spec(const std::string& spec) {
  if (spec == "bunny") return build_bunny_mesh();
  if (spec.rfind("beam:", 0) == 0) {
    double v[6];
    char tail = 0;
    if (std::sscanf(spec.c_str() + 5, "%lf,%lf,%lf,%lf,%lf,%lf%c", &v[0], &v[1], &v[2], &v[3], &v[4], &v[5], &tail) != 6)
      throw InvalidArgument("mesh spec '" + spec + "': expected beam:H,W,L,nx,ny,nz");
    for (int k = 3; k < 6; ++k)
      if (v[k] != static_cast<int>(v[k])) throw InvalidArgument("mesh spec '" + spec + "': subdivisions must be integers");
    return build_beam_mesh(v[0], v[1], v[2], static_cast<int>(v[3]), static_cast<int>(v[4]), static_cast<int>(v[5]));
  }
  return load_mesh(spec);
}

Preset make_preset(const std::string& name) {
  Preset p;
  p.name = name;
  if (name == "beam-desk") {
    p.mesh_spec = "beam:10,10,40,2,2,8";
    p.data.load_positions = 30;
    p.train.epochs = 2000;
    p.train.model.hidden = 32;
    p.train.model.message_steps = 4;
    p.train.max_seconds = 25 * 60;
    p.train.symmetry_augment = true;
  } else if (name == "beam-paper") {
    p.mesh_spec = "beam:10,10,40,5,5,20";
    p.data.load_positions = 52;
  } else if (name == "bunny-desk") {
    p.mesh_spec = "bunny";
    p.data.load_positions = 100;
    p.data.force_magnitude = 1;
  } else if (name == "toy") {
    p.mesh_spec = "beam:10,10,20,1,1,2";
    p.data.load_positions = 2;
    p.data.nt = 5;
    p.data.split = 0.5;
    p.train.epochs = 1500;
    p.train.batch_size = 1;
    p.train.noise = 0;
    p.train.model.hidden = 16;
    p.train.model.message_steps = 2;
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw InvalidArgument("unknown preset '" + name + "' (known: " + known + ")");
  }
  p.train.dt = p.data.dt;
  p.train.split = p.data.split;
  p.mesh = mesh_from_spec(p.mesh_spec);
  return p;
}

SceneConfig two_beam_scene(const std::string& checkpoint, Scalar gap, const std::string& mesh) {
  const SolidMesh m = mesh_from_spec(mesh);
  const Vec3 lo = m.rest_positions.colwise().minCoeff().transpose();
  const Vec3 hi = m.rest_positions.colwise().maxCoeff().transpose();
  const Vec3 size = hi - lo;

  SceneConfig c;
  BodyConfig a{"beam_a", mesh, checkpoint, {}};
  // B: model z runs along world -x; model x maps to world +z.
  BodyConfig b{"beam_b", mesh, checkpoint, {}};
  b.pose.rotation << 0, 0, -1,
                     0, 1, 0,
                     1, 0, 0;
  // Free end (model z = L) at world x = size.x + gap, centered on A's top element layer.
  const Scalar top = hi.z() - size.z() / 8;
  b.pose.translation = Vec3(hi.x() + gap + size.z(), 0, top - size.x() / 2 - lo.x());
  c.bodies = {a, b};
  const Vec3 center(0.5 * (hi.x() + gap + size.z()), 0.5 * size.y(), 0.5 * hi.z());
  c.camera = render::look_at<Scalar>(center + Vec3(0, -3.2 * size.z(), 0.4 * size.z()), center, Vec3::UnitZ(),
                                     std::numbers::pi / 3, 1, 1000);
  c.poke_direction = PokeDirection::Ray;
  return c;
}

SceneConfig single_body_scene(const std::string& checkpoint, const std::string& mesh) {
  const SolidMesh m = mesh_from_spec(mesh);
  const Vec3 lo = m.rest_positions.colwise().minCoeff().transpose();
  const Vec3 hi = m.rest_positions.colwise().maxCoeff().transpose();
  const Vec3 center = 0.5 * (lo + hi);
  const Scalar extent = (hi - lo).maxCoeff();
  SceneConfig c;
  c.bodies = {{"body", mesh, checkpoint, {}}};
  c.camera = render::look_at<Scalar>(center + Vec3(0.6, -2.0, 0.3) * extent, center, Vec3::UnitZ(),
                                     std::numbers::pi / 3, 1, 1000);
  if (m.material.c10 < 1) {
    c.poke_magnitude = 1;
    c.field_lo = -0.1;
    c.field_hi = 0.1;
  }
  return c;
}

Preset preset_from_json(const json& j) {
  if (!j.is_object()) throw SchemaViolation("config: expected an object");
  Preset p = make_preset(j.value("preset", std::string("beam-desk")));
  try {
    if (j.contains("mesh")) {
      p.mesh_spec = j["mesh"].get<std::string>();
      p.mesh = mesh_from_spec(p.mesh_spec);
    }
    if (j.contains("material")) p.mesh.material = fem::material_from_json(j["material"]);
    if (j.contains("data")) p.data = data_from_json(j["data"], p.data);
    json train = to_json(p.train);
    train["dt"] = p.data.dt;
    train["split"] = p.data.split;
    if (j.contains("train")) {
      if (!j["train"].is_object()) throw SchemaViolation("train config: expected an object");
      train.update(j["train"]);
    }
    p.train = train_config_from_json(train);
  } catch (const json::exception& e) {
    throw SchemaViolation(std::string("config: ") + e.what());
  }
  return p;
}

json to_json(const Preset& p) {
  return {{"preset", p.name},
          {"mesh", p.mesh_spec},
          {"material", fem::material_to_json(p.mesh.material)},
          {"data", data_json(p.data)},
          {"train", to_json(p.train)}};
}

}  // namespace tignn
