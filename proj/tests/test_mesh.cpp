#include "doctest.h"
#include "helpers.hpp"

#include "tignn/mesh.hpp"
#include "tignn/presets.hpp"

#include <set>

using namespace tignn;

TEST_SUITE("mesh") {

TEST_CASE("beam counts") {
  auto full = build_beam_mesh(10, 10, 40, 5, 5, 20);
  CHECK(full.element_count() == 500);
  CHECK(full.node_count() == 756);
  CHECK(full.fixed_nodes.size() == 36);

  auto brick = build_beam_mesh(1, 1, 1, 1, 1, 1);
  CHECK(brick.element_count() == 1);
  CHECK(brick.node_count() == 8);
  CHECK(brick.fixed_nodes.size() == 4);
  CHECK(brick.surface.rows() == 12);

  auto desk = build_beam_mesh(10, 10, 40, 2, 2, 8);
  CHECK(desk.element_count() == 32);
  CHECK(desk.node_count() == 81);
  for (int id : desk.fixed_nodes) CHECK(desk.rest_positions(id, 2) == 0);
}

TEST_CASE("beam rejects bad arguments") {
  CHECK_THROWS_AS(build_beam_mesh(10, 10, 40, 0, 2, 8), InvalidArgument);
  CHECK_THROWS_AS(build_beam_mesh(-1, 10, 40, 2, 2, 8), InvalidArgument);
}

TEST_CASE("surface is closed and outward") {
  for (const auto& m : {build_beam_mesh(10, 10, 40, 2, 2, 8), build_bunny_mesh()}) {
    // every undirected surface edge appears exactly twice, once per direction
    std::multiset<std::pair<int, int>> directed;
    for (int t = 0; t < m.surface.rows(); ++t)
      for (int k = 0; k < 3; ++k) directed.insert({m.surface(t, k), m.surface(t, (k + 1) % 3)});
    for (const auto& [a, b] : directed) CHECK(directed.count({b, a}) == 1);

    // signed volume from the divergence theorem is positive
    double vol = 0;
    for (int t = 0; t < m.surface.rows(); ++t) {
      Vec3 a = m.rest_positions.row(m.surface(t, 0)), b = m.rest_positions.row(m.surface(t, 1)),
           c = m.rest_positions.row(m.surface(t, 2));
      vol += a.dot(b.cross(c)) / 6;
    }
    CHECK(vol > 0);
  }
}

TEST_CASE("bunny mesh") {
  auto m = build_bunny_mesh();
  CHECK(m.kind == ElementKind::Tet4);
  CHECK(m.node_count() < 400);
  CHECK(!m.fixed_nodes.empty());
  CHECK_NOTHROW(m.validate());
}

TEST_CASE("single tetrahedron fixture") {
  auto m = load_mesh(testing::data_path("tet.json"));
  CHECK(m.node_count() == 4);
  CHECK(m.element_count() == 1);
  CHECK(m.surface.rows() == 4);
  CHECK(m.fixed_nodes == std::vector<int>{0});
}

TEST_CASE("save and load round trip") {
  auto dir = testing::scratch_dir("mesh_rt");
  auto m = build_beam_mesh(10, 10, 40, 2, 2, 8);
  save_mesh(m, (dir / "beam.json").string());
  auto r = load_mesh((dir / "beam.json").string());
  CHECK(r.kind == m.kind);
  CHECK(r.rest_positions == m.rest_positions);
  CHECK(r.elements == m.elements);
  CHECK(r.surface == m.surface);
  CHECK(r.fixed_nodes == m.fixed_nodes);
}

TEST_CASE("element index equal to node count") {
  try {
    load_mesh(testing::data_path("bad_index.json"));
    FAIL("expected a schema violation");
  } catch (const SchemaViolation& e) {
    CHECK(std::string(e.what()).find("element 1") != std::string::npos);
  }
}

TEST_CASE("missing file") { CHECK_THROWS_AS(load_mesh("/nonexistent/mesh.json"), IoError); }

TEST_CASE("element edges") {
  auto brick = build_beam_mesh(1, 1, 1, 1, 1, 1);
  CHECK(element_edges(brick).size() == 12);
  auto tet = load_mesh(testing::data_path("tet.json"));
  CHECK(element_edges(tet).size() == 6);
  CHECK(mean_edge_length(brick) == doctest::Approx(1.0));
}

}  // TEST_SUITE
