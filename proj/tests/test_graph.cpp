#include "doctest.h"
#include "helpers.hpp"

#include "tignn/graph.hpp"

#include <algorithm>
#include <map>
#include <numeric>

using namespace tignn;

namespace {

struct Relabeled {
  SolidMesh mesh;
  StateField state;
  NodalLoads loads;
};

// new id of old node i is perm[i]
Relabeled relabel(const SolidMesh& m, const StateField& s, const NodalLoads& l, const std::vector<int>& perm) {
  Relabeled r;
  r.mesh = m;
  r.state = s;
  r.loads = l;
  for (int i = 0; i < m.node_count(); ++i) {
    r.mesh.rest_positions.row(perm[i]) = m.rest_positions.row(i);
    r.state.z.row(perm[i]) = s.z.row(i);
    r.loads.force.row(perm[i]) = l.force.row(i);
    r.loads.loaded[perm[i]] = l.loaded[i];
  }
  for (int e = 0; e < m.element_count(); ++e)
    for (int k = 0; k < m.elements.cols(); ++k) r.mesh.elements(e, k) = perm[m.elements(e, k)];
  for (int t = 0; t < m.surface.rows(); ++t)
    for (int k = 0; k < 3; ++k) r.mesh.surface(t, k) = perm[m.surface(t, k)];
  for (auto& f : r.mesh.fixed_nodes) f = perm[f];
  std::sort(r.mesh.fixed_nodes.begin(), r.mesh.fixed_nodes.end());
  return r;
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("single hexahedron") {
  auto m = build_beam_mesh(1, 1, 1, 1, 1, 1);
  auto g = mesh_to_graph(m, StateField::rest(m), NodalLoads::none(8), Normalization::identity());
  CHECK(g.n_vertices == 8);
  CHECK(g.n_edges() == 24);
  CHECK(g.node_features.cols() == kNodeFeatures);
  CHECK(g.edge_features.cols() == kEdgeFeatures);
  for (int e = 1; e < g.n_edges(); ++e) {
    CHECK(g.receivers[e - 1] <= g.receivers[e]);
    if (g.receivers[e - 1] == g.receivers[e]) {
      const Vec3 a = m.rest_positions.row(g.senders[e - 1]), b = m.rest_positions.row(g.senders[e]);
      CHECK(std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3));
    }
  }
}

TEST_CASE("edge features are antisymmetric") {
  auto m = build_beam_mesh(10, 10, 40, 2, 2, 8);
  std::mt19937_64 rng(3);
  auto s = testing::random_state(m, rng);
  auto topo = GraphTopology::from_mesh(m);
  auto raw = raw_edge_features(topo, s);
  std::map<std::pair<int, int>, int> idx;
  for (int e = 0; e < static_cast<int>(topo.senders.size()); ++e) idx[{topo.senders[e], topo.receivers[e]}] = e;
  for (const auto& [key, e] : idx) {
    const int r = idx.at({key.second, key.first});
    CHECK((raw.row(e).head<3>() + raw.row(r).head<3>()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(raw(e, 3) == raw(r, 3));
    CHECK(raw(e, 3) == doctest::Approx(raw.row(e).head<3>().norm()));
  }
}

TEST_CASE("translation leaves the graph bit-equal") {
  auto m = build_beam_mesh(10, 10, 40, 2, 2, 8);
  std::mt19937_64 rng(5);
  auto s = testing::random_state(m, rng);
  Normalization stats;
  stats.edge_mean.setConstant(0.1);
  stats.edge_std.setConstant(2.0);
  // dyadic grid
  auto snap = [](StateField st) {
    for (int i = 0; i < st.z.rows(); ++i)
      for (int c = 0; c < 3; ++c) st.z(i, c) = std::ldexp(std::round(std::ldexp(st.z(i, c), 10)), -10);
    return st;
  };
  auto sa = snap(s), sb = snap(s);
  sb.q().rowwise() += Vec3(5, 0, 0).transpose();
  auto a = mesh_to_graph(m, sa, NodalLoads::none(m.node_count()), stats);
  auto b = mesh_to_graph(m, sb, NodalLoads::none(m.node_count()), stats);
  CHECK(a.node_features == b.node_features);
  CHECK(a.edge_features == b.edge_features);
  CHECK(a.senders == b.senders);
}

TEST_CASE("loaded node features") {
  auto m = build_beam_mesh(10, 10, 40, 2, 2, 8);
  LoadCase lc;
  lc.loaded_nodes = {80};
  lc.force_per_node = Vec3(1, -2, 3);
  lc.first_step = 0;
  lc.last_step = 5;
  auto g = mesh_to_graph(m, StateField::rest(m), lc, 0, Normalization::identity());
  CHECK(g.node_features(80, 9) == 0);
  CHECK(g.node_features(80, 10) == 0);
  CHECK(g.node_features(80, 11) == 1);
  CHECK(g.node_features.row(80).tail<3>() == Eigen::RowVector3d(1, -2, 3));
  const int fixed = m.fixed_nodes.front();
  CHECK(g.node_features(fixed, 10) == 1);
  CHECK(g.node_features(40, 9) == 1);
  CHECK(g.node_features.row(40).tail<3>().isZero(0));

  auto late = mesh_to_graph(m, StateField::rest(m), lc, 5, Normalization::identity());
  CHECK(late.node_features(80, 11) == 1);
  CHECK(late.node_features.row(80).tail<3>().isZero(0));
}

TEST_CASE("permutation consistency") {
  auto m = build_beam_mesh(10, 10, 40, 2, 2, 8);
  std::mt19937_64 rng(11);
  auto s = testing::random_state(m, rng);
  auto loads = NodalLoads::none(m.node_count());
  loads.force.row(77) = Vec3(3, 2, 1).transpose();
  loads.loaded[77] = 1;
  std::vector<int> perm(m.node_count());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto r = relabel(m, s, loads, perm);

  auto a = mesh_to_graph(m, s, loads, Normalization::identity());
  auto b = mesh_to_graph(r.mesh, r.state, r.loads, Normalization::identity());
  REQUIRE(a.n_edges() == b.n_edges());
  for (int i = 0; i < m.node_count(); ++i) CHECK(a.node_features.row(i) == b.node_features.row(perm[i]));
  std::map<std::pair<int, int>, RowVectorX> eb;
  for (int e = 0; e < b.n_edges(); ++e) eb[{b.senders[e], b.receivers[e]}] = b.edge_features.row(e);
  for (int e = 0; e < a.n_edges(); ++e) {
    const auto key = std::pair(perm[a.senders[e]], perm[a.receivers[e]]);
    REQUIRE(eb.count(key) == 1);
    CHECK(eb[key] == RowVectorX(a.edge_features.row(e)));
  }
}

TEST_CASE("normalization of identical snapshots") {
  auto m = build_beam_mesh(1, 1, 1, 1, 1, 1);
  Trajectory t;
  t.dt = 0.1;
  t.snapshots = {StateField::rest(m), StateField::rest(m)};
  auto n = normalization_stats(m, std::span(&t, 1));
  CHECK(n.node_std.segment(0, 9) == RowVectorX::Ones(9));
  CHECK(n.target_scale == RowVectorX::Ones(kStateDim));
  CHECK(n.edge_std.allFinite());
}

TEST_CASE("normalization of a channel {0, 2}") {
  auto m = build_beam_mesh(1, 1, 1, 1, 1, 1);
  Trajectory t;
  t.dt = 0.1;
  t.snapshots = {StateField::rest(m), StateField::rest(m)};
  t.snapshots[1].v().col(0).setConstant(2);
  auto n = normalization_stats(m, std::span(&t, 1));
  CHECK(n.node_mean(0) == 1);
  CHECK(n.node_std(0) == 1);
}

TEST_CASE("normalize then denormalize") {
  Normalization n;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.5, 3);
  for (int c = 0; c < kStateDim; ++c) n.target_scale(c) = u(rng);
  MatrixX x = MatrixX::Random(7, kStateDim);
  CHECK((n.denormalize_targets(n.normalize_targets(x)) - x).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("batched graphs stack blocks") {
  auto m = build_beam_mesh(1, 1, 1, 1, 1, 1);
  auto g = mesh_to_graph(m, StateField::rest(m), NodalLoads::none(8), Normalization::identity());
  std::vector<SimGraph> two{g, g};
  auto b = batch_graphs(two);
  CHECK(b.n_vertices == 16);
  CHECK(b.n_edges() == 48);
  CHECK(b.senders[24] == g.senders[0] + 8);
  CHECK(b.receivers[47] == g.receivers[23] + 8);
}

}  // TEST_SUITE
