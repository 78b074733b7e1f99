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

#include "tignn/material.hpp"
#include "tignn/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tignn {

enum class ElementKind { Hex8, Tet4 };

inline int nodes_per_element(ElementKind kind) { return kind == ElementKind::Hex8 ? 8 : 4; }
const char* to_string(ElementKind kind);

// Rest geometry plus connectivity. Hex8 nodes follow the usual
// (-,-,-) (+,-,-) (+,+,-) (-,+,-) then the same square at +zeta.
struct SolidMesh {
  ElementKind kind = ElementKind::Hex8;
  Points rest_positions;
  IndexMatrix elements;        // n_elements x nodes_per_element
  Triangles surface;           // outward-oriented boundary triangles
  std::vector<int> fixed_nodes;  // sorted, unique
  MaterialParams material;

  int node_count() const { return static_cast<int>(rest_positions.rows()); }
  int element_count() const { return static_cast<int>(elements.rows()); }
  bool is_fixed(int node) const;

  // Throws SchemaViolation naming the first offending entry.
  void validate() const;
};

// Structured cantilever: x in [0,H], y in [0,W], z in [0,L]; the z=0 face is fixed.
SolidMesh build_beam_mesh(Scalar H, Scalar W, Scalar L, int nx, int ny, int nz);

// Boundary faces of the element set, split into outward triangles.
Triangles extract_surface(ElementKind kind, const IndexMatrix& elements);

// Undirected element edges as (a, b) with a < b, sorted and unique.
std::vector<std::pair<int, int>> element_edges(const SolidMesh& mesh);

// Surface nodes, sorted.
std::vector<int> surface_nodes(const SolidMesh& mesh);

// Area-weighted outward normal at each surface node (zero for interior nodes).
Points vertex_normals(const SolidMesh& mesh, const Points& positions);

Scalar mean_edge_length(const SolidMesh& mesh);

// mesh/1 JSON.
nlohmann::json mesh_to_json(const SolidMesh& mesh);
SolidMesh mesh_from_json(const nlohmann::json& j);
SolidMesh load_mesh(const std::string& path);
void save_mesh(const SolidMesh& mesh, const std::string& path);

}  // namespace tignn
