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
#include "tignn/mesh.hpp"

#include "tignn/io.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace tignn {

namespace {

// Outward faces in local node numbering.
constexpr std::array<std::array<int, 4>, 6> kHexFaces = {{
    {0, 3, 2, 1},  // zeta = -1
    {4, 5, 6, 7},  // zeta = +1
    {0, 1, 5, 4},  // eta = -1
    {1, 2, 6, 5},  // xi = +1
    {2, 3, 7, 6},  // eta = +1
    {3, 0, 4, 7},  // xi = -1
}};

constexpr std::array<std::array<int, 3>, 4> kTetFaces = {{
    {0, 2, 1}, {0, 1, 3}, {1, 2, 3}, {0, 3, 2},
}};

constexpr std::array<std::array<int, 2>, 12> kHexEdges = {{
    {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

constexpr std::array<std::array<int, 2>, 6> kTetEdges = {{
    {0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3},
}};

}  // namespace

const char* to_string(ElementKind kind) { return kind == ElementKind::Hex8 ? "hex8" : "tet4"; }

void MaterialParams::validate() const {
  if (!(c10 > 0)) throw InvalidArgument("material: c10 must be > 0");
  if (!(c01 >= 0)) throw InvalidArgument("material: c01 must be >= 0");
  if (!(d1 > 0)) throw InvalidArgument("material: d1 must be > 0");
  if (!(density > 0)) throw InvalidArgument("material: density must be > 0");
  Scalar sum = 0;
  for (const auto& t : prony) {
    if (!(t.g > 0 && t.g < 1)) throw InvalidArgument("material: prony g must lie in (0,1)");
    if (!(t.tau > 0)) throw InvalidArgument("material: prony tau must be > 0");
    sum += t.g;
  }
  if (!(sum < 1)) throw InvalidArgument("material: sum of prony g must be < 1");
}

MaterialParams beam_material() {
  MaterialParams m;
  m.c10 = 1.5e5;
  m.c01 = 5e3;
  m.d1 = 1e-7;
  m.density = 1e5;
  m.prony = {{0.3, 0.2}, {0.49, 0.5}};
  return m;
}

bool SolidMesh::is_fixed(int node) const {
  return std::binary_search(fixed_nodes.begin(), fixed_nodes.end(), node);
}

void SolidMesh::validate() const {
  const int n = node_count();
  if (n == 0) throw SchemaViolation("mesh: no nodes");
  if (elements.cols() != nodes_per_element(kind)) {
    throw SchemaViolation(std::string("mesh: elements must have ") +
                          std::to_string(nodes_per_element(kind)) + " nodes for " + to_string(kind));
  }
  for (Eigen::Index e = 0; e < elements.rows(); ++e) {
    for (Eigen::Index k = 0; k < elements.cols(); ++k) {
      const int id = elements(e, k);
      if (id < 0 || id >= n) {
        throw SchemaViolation("mesh: element " + std::to_string(e) + " references node " +
                              std::to_string(id) + " (node count " + std::to_string(n) + ")");
      }
    }
  }
  for (Eigen::Index t = 0; t < surface.rows(); ++t) {
    for (int k = 0; k < 3; ++k) {
      if (surface(t, k) < 0 || surface(t, k) >= n) {
        throw SchemaViolation("mesh: surface triangle " + std::to_string(t) + " out of range");
      }
    }
  }
  for (std::size_t i = 0; i < fixed_nodes.size(); ++i) {
    if (fixed_nodes[i] < 0 || fixed_nodes[i] >= n) {
      throw SchemaViolation("mesh: fixed[" + std::to_string(i) + "] out of range");
    }
  }
  if (!rest_positions.allFinite()) throw SchemaViolation("mesh: non-finite node coordinate");
}

SolidMesh build_beam_mesh(Scalar H, Scalar W, Scalar L, int nx, int ny, int nz) {
  if (!(H > 0 && W > 0 && L > 0)) throw InvalidArgument("beam: dimensions must be positive");
  if (nx < 1 || ny < 1 || nz < 1) throw InvalidArgument("beam: subdivisions must be >= 1");

  SolidMesh mesh;
  mesh.kind = ElementKind::Hex8;
  const int sx = nx + 1, sy = ny + 1, sz = nz + 1;
  auto id = [&](int i, int j, int k) { return i + sx * (j + sy * k); };

  mesh.rest_positions.resize(sx * sy * sz, 3);
  for (int k = 0; k < sz; ++k)
    for (int j = 0; j < sy; ++j)
      for (int i = 0; i < sx; ++i)
        mesh.rest_positions.row(id(i, j, k)) << H * i / nx, W * j / ny, L * k / nz;

  mesh.elements.resize(nx * ny * nz, 8);
  int e = 0;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i, ++e)
        mesh.elements.row(e) << id(i, j, k), id(i + 1, j, k), id(i + 1, j + 1, k), id(i, j + 1, k),
            id(i, j, k + 1), id(i + 1, j, k + 1), id(i + 1, j + 1, k + 1), id(i, j + 1, k + 1);

  for (int j = 0; j < sy; ++j)
    for (int i = 0; i < sx; ++i) mesh.fixed_nodes.push_back(id(i, j, 0));
  std::sort(mesh.fixed_nodes.begin(), mesh.fixed_nodes.end());

  mesh.surface = extract_surface(mesh.kind, mesh.elements);
  mesh.material = beam_material();
  return mesh;
}

Triangles extract_surface(ElementKind kind, const IndexMatrix& elements) {
  // Key: sorted node ids. Value: oriented face + occurrence count.
  std::map<std::vector<int>, std::pair<std::vector<int>, int>> faces;
  std::vector<std::vector<int>> order;  // deterministic output order
  auto add_face = [&](std::vector<int> oriented) {
    std::vector<int> key = oriented;
    std::sort(key.begin(), key.end());
    auto [it, inserted] = faces.try_emplace(key, oriented, 0);
    if (inserted) order.push_back(key);
    ++it->second.second;
  };
  for (Eigen::Index e = 0; e < elements.rows(); ++e) {
    if (kind == ElementKind::Hex8) {
      for (const auto& f : kHexFaces)
        add_face({elements(e, f[0]), elements(e, f[1]), elements(e, f[2]), elements(e, f[3])});
    } else {
      for (const auto& f : kTetFaces) add_face({elements(e, f[0]), elements(e, f[1]), elements(e, f[2])});
    }
  }
  std::vector<std::array<int, 3>> tris;
  for (const auto& key : order) {
    const auto& [face, count] = faces.at(key);
    if (count != 1) continue;
    if (face.size() == 4) {
      tris.push_back({face[0], face[1], face[2]});
      tris.push_back({face[0], face[2], face[3]});
    } else {
      tris.push_back({face[0], face[1], face[2]});
    }
  }
  Triangles out(static_cast<Eigen::Index>(tris.size()), 3);
  for (std::size_t t = 0; t < tris.size(); ++t)
    out.row(static_cast<Eigen::Index>(t)) << tris[t][0], tris[t][1], tris[t][2];
  return out;
}

std::vector<std::pair<int, int>> element_edges(const SolidMesh& mesh) {
  std::vector<std::pair<int, int>> edges;
  auto add = [&](int a, int b) { edges.emplace_back(std::min(a, b), std::max(a, b)); };
  for (Eigen::Index e = 0; e < mesh.elements.rows(); ++e) {
    if (mesh.kind == ElementKind::Hex8) {
      for (const auto& p : kHexEdges) add(mesh.elements(e, p[0]), mesh.elements(e, p[1]));
    } else {
      for (const auto& p : kTetEdges) add(mesh.elements(e, p[0]), mesh.elements(e, p[1]));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<int> surface_nodes(const SolidMesh& mesh) {
  std::vector<int> nodes(mesh.surface.data(), mesh.surface.data() + mesh.surface.size());
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

Points vertex_normals(const SolidMesh& mesh, const Points& positions) {
  Points normals = Points::Zero(positions.rows(), 3);
  for (Eigen::Index t = 0; t < mesh.surface.rows(); ++t) {
    const Vec3 a = positions.row(mesh.surface(t, 0));
    const Vec3 b = positions.row(mesh.surface(t, 1));
    const Vec3 c = positions.row(mesh.surface(t, 2));
    const Vec3 n = (b - a).cross(c - a);  // length = 2 * area
    for (int k = 0; k < 3; ++k) normals.row(mesh.surface(t, k)) += n.transpose();
  }
  for (Eigen::Index i = 0; i < normals.rows(); ++i) {
    const Scalar len = normals.row(i).norm();
    if (len > 0) normals.row(i) /= len;
  }
  return normals;
}

Scalar mean_edge_length(const SolidMesh& mesh) {
  const auto edges = element_edges(mesh);
  if (edges.empty()) return 0;
  Scalar sum = 0;
  for (const auto& [a, b] : edges) sum += (mesh.rest_positions.row(a) - mesh.rest_positions.row(b)).norm();
  return sum / static_cast<Scalar>(edges.size());
}

nlohmann::json mesh_to_json(const SolidMesh& mesh) {
  io::json j;
  j["schema"] = "mesh/1";
  j["element_kind"] = to_string(mesh.kind);
  j["nodes"] = io::to_json(mesh.rest_positions);
  io::json elems = io::json::array();
  for (Eigen::Index e = 0; e < mesh.elements.rows(); ++e) {
    io::json row = io::json::array();
    for (Eigen::Index k = 0; k < mesh.elements.cols(); ++k) row.push_back(mesh.elements(e, k));
    elems.push_back(std::move(row));
  }
  j["elements"] = std::move(elems);
  j["fixed"] = mesh.fixed_nodes;
  io::json surf = io::json::array();
  for (Eigen::Index t = 0; t < mesh.surface.rows(); ++t)
    surf.push_back({mesh.surface(t, 0), mesh.surface(t, 1), mesh.surface(t, 2)});
  j["surface"] = std::move(surf);
  return j;
}

namespace {

IndexMatrix index_rows(const io::json& j, int cols, const std::string& where) {
  if (!j.is_array()) throw SchemaViolation(where + ": expected array");
  IndexMatrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const auto& row = j[r];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(cols)) {
      throw SchemaViolation(where + "[" + std::to_string(r) + "]: expected " + std::to_string(cols) +
                            " indices");
    }
    for (int c = 0; c < cols; ++c) {
      if (!row[c].is_number_integer()) {
        throw SchemaViolation(where + "[" + std::to_string(r) + "][" + std::to_string(c) +
                              "]: not an integer");
      }
      m(static_cast<Eigen::Index>(r), c) = row[c].get<int>();
    }
  }
  return m;
}

}  // namespace

SolidMesh mesh_from_json(const nlohmann::json& j) {
  io::expect_schema(j, "mesh/1", "mesh");
  SolidMesh mesh;
  if (!j.contains("element_kind") || !j["element_kind"].is_string())
    throw SchemaViolation("mesh.element_kind: missing");
  const auto kind = j["element_kind"].get<std::string>();
  if (kind == "hex8") {
    mesh.kind = ElementKind::Hex8;
  } else if (kind == "tet4") {
    mesh.kind = ElementKind::Tet4;
  } else {
    throw SchemaViolation("mesh.element_kind: unknown kind '" + kind + "'");
  }
  if (!j.contains("nodes")) throw SchemaViolation("mesh.nodes: missing");
  mesh.rest_positions = io::matrix_from_json(j["nodes"], 3, "mesh.nodes");
  if (!j.contains("elements") || !j["elements"].is_array()) throw SchemaViolation("mesh.elements: missing");
  const int npe = nodes_per_element(mesh.kind);
  for (std::size_t e = 0; e < j["elements"].size(); ++e) {
    const auto& row = j["elements"][e];
    if (row.is_array() && row.size() != static_cast<std::size_t>(npe)) {
      throw SchemaViolation("mesh.elements[" + std::to_string(e) + "]: has " + std::to_string(row.size()) +
                            " nodes, mixed element kinds are not supported");
    }
  }
  mesh.elements = index_rows(j["elements"], npe, "mesh.elements");
  if (j.contains("fixed")) {
    if (!j["fixed"].is_array()) throw SchemaViolation("mesh.fixed: expected array");
    for (const auto& v : j["fixed"]) {
      if (!v.is_number_integer()) throw SchemaViolation("mesh.fixed: non-integer entry");
      mesh.fixed_nodes.push_back(v.get<int>());
    }
    std::sort(mesh.fixed_nodes.begin(), mesh.fixed_nodes.end());
    mesh.fixed_nodes.erase(std::unique(mesh.fixed_nodes.begin(), mesh.fixed_nodes.end()),
                           mesh.fixed_nodes.end());
  }
  if (j.contains("surface") && !j["surface"].is_null()) {
    mesh.surface = index_rows(j["surface"], 3, "mesh.surface");
  }
  mesh.validate();
  if (mesh.surface.rows() == 0) mesh.surface = extract_surface(mesh.kind, mesh.elements);
  return mesh;
}

SolidMesh load_mesh(const std::string& path) {
  const auto j = io::read_json(path);
  try {
    return mesh_from_json(j);
  } catch (const SchemaViolation& e) {
    throw SchemaViolation(path + ": " + e.what());
  }
}

void save_mesh(const SolidMesh& mesh, const std::string& path) {
  io::write_json_atomic(path, mesh_to_json(mesh));
}

}  // namespace tignn
