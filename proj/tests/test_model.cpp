#include "doctest.h"
#include "helpers.hpp"

#include "tignn/model.hpp"

#include <nlohmann/json.hpp>

#include <numeric>

using namespace tignn;

namespace {

SimGraph random_graph(const SolidMesh& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto s = testing::random_state(m, rng, 0.5);
  auto loads = NodalLoads::none(m.node_count());
  loads.force.row(m.node_count() - 1) = Vec3(0.3, -0.2, 0.9).transpose();
  loads.loaded[static_cast<std::size_t>(m.node_count() - 1)] = 1;
  return mesh_to_graph(m, s, loads, Normalization::identity());
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("parameter count by hand") {
  ModelConfig c;
  c.hidden = 1;
  c.message_steps = 0;
  // encoders 15-1-1, 4-1-1; heads 1-1-12 twice, 1-1-66, 1-1-78
  const std::size_t by_hand = (15 + 1 + 1 + 1) + (4 + 1 + 1 + 1) + 2 * (1 + 1 + 12 + 12) + (1 + 1 + 66 + 66) +
                              (1 + 1 + 78 + 78);
  CHECK(by_hand == 369);
  CHECK(parameter_count(c) == by_hand);
  CHECK(TignnModel(c).parameter_count() == by_hand);
  c.message_steps = 1;
  // edge update 3-1-1, node update 2-1-1
  CHECK(parameter_count(c) == by_hand + (3 + 1 + 1 + 1) + (2 + 1 + 1 + 1));
}

TEST_CASE("parameter count grows faster than width") {
  ModelConfig a, b;
  a.hidden = 32;
  b.hidden = 64;
  CHECK(parameter_count(b) > 2 * parameter_count(a));
  CHECK(parameter_count(ModelConfig{}) == 210792);
}

TEST_CASE("zero heads return the dE bias") {
  auto m = build_beam_mesh(10, 10, 40, 2, 2, 8);
  ModelConfig c;
  c.hidden = 8;
  c.message_steps = 2;
  TignnModel model(c);
  for (auto* mlp : {&model.dE_head, &model.dS_head, &model.l_head, &model.m_head})
    for (auto* p : mlp->parameters()) p->value.setZero();
  auto& last = model.dE_head.layers().back().bias.value;
  for (int k = 0; k < kStateDim; ++k) last(0, k) = 0.25 * k - 1;
  auto g = mesh_to_graph(m, StateField::rest(m), NodalLoads::none(m.node_count()), Normalization::identity());
  g.node_features.setZero();
  g.edge_features.setZero();
  auto out = model.forward(g);
  for (int i = 0; i < m.node_count(); ++i) CHECK(out.dE.row(i) == last.row(0));
  CHECK(out.dS.isZero(0));
  CHECK(out.l_params.isZero(0));
}

TEST_CASE("permutation equivariance is bit-exact") {
  auto m = build_beam_mesh(10, 10, 40, 2, 2, 8);
  std::mt19937_64 rng(17);
  auto s = testing::random_state(m, rng, 0.5);
  auto loads = NodalLoads::none(m.node_count());
  loads.force.row(70) = Vec3(1, 2, 3).transpose();
  loads.loaded[70] = 1;

  std::vector<int> perm(static_cast<std::size_t>(m.node_count()));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  SolidMesh pm = m;
  StateField ps = s;
  NodalLoads pl = loads;
  for (int i = 0; i < m.node_count(); ++i) {
    pm.rest_positions.row(perm[i]) = m.rest_positions.row(i);
    ps.z.row(perm[i]) = s.z.row(i);
    pl.force.row(perm[i]) = loads.force.row(i);
    pl.loaded[static_cast<std::size_t>(perm[i])] = loads.loaded[static_cast<std::size_t>(i)];
  }
  for (int e = 0; e < m.element_count(); ++e)
    for (int k = 0; k < 8; ++k) pm.elements(e, k) = perm[m.elements(e, k)];
  for (auto& f : pm.fixed_nodes) f = perm[f];
  std::sort(pm.fixed_nodes.begin(), pm.fixed_nodes.end());

  TignnModel model(ModelConfig{16, 3, 2, 5});
  Normalization stats;
  stats.edge_std.setConstant(3);
  auto a = model.forward(mesh_to_graph(m, s, loads, stats));
  auto b = model.forward(mesh_to_graph(pm, ps, pl, stats));
  int mismatched = 0;
  for (int i = 0; i < m.node_count(); ++i) {
    mismatched += a.dE.row(i) != b.dE.row(perm[i]);
    mismatched += a.dS.row(i) != b.dS.row(perm[i]);
    mismatched += a.l_params.row(i) != b.l_params.row(perm[i]);
    mismatched += a.m_params.row(i) != b.m_params.row(perm[i]);
  }
  CHECK(mismatched == 0);
}

TEST_CASE("rigid translation is bit-exact") {
  auto m = build_beam_mesh(10, 10, 40, 2, 2, 8);
  std::mt19937_64 rng(2);
  auto s = testing::random_state(m, rng, 0.5);
  for (int i = 0; i < s.z.rows(); ++i)
    for (int c = 0; c < 3; ++c) s.z(i, c) = std::ldexp(std::round(std::ldexp(s.z(i, c), 12)), -12);
  auto t = s;
  t.q().rowwise() += Vec3(-3, 8, 16).transpose();
  TignnModel model(ModelConfig{16, 2, 2, 9});
  const auto none = NodalLoads::none(m.node_count());
  auto a = model.forward(mesh_to_graph(m, s, none, Normalization::identity()));
  auto b = model.forward(mesh_to_graph(m, t, none, Normalization::identity()));
  CHECK(a.dE == b.dE);
  CHECK(a.m_params == b.m_params);
}

TEST_CASE("locality: K steps reach K hops") {
  auto m = build_beam_mesh(10, 10, 40, 1, 1, 8);
  auto g = random_graph(m, 3);
  TignnModel model(ModelConfig{8, 2, 2, 4});
  auto base = model.forward(g);
  // perturb the features of the tip node (id n-1); nodes 3+ layers down stay put
  auto h = g;
  h.node_features.row(m.node_count() - 1).array() += 0.5;
  auto moved = model.forward(h);
  for (int i = 0; i < m.node_count(); ++i) {
    const double z = m.rest_positions(i, 2);
    const bool near = z >= 40 - 2 * 5;
    if (!near) CHECK(moved.dE.row(i) == base.dE.row(i));
  }
  CHECK(moved.dE.row(m.node_count() - 1) != base.dE.row(m.node_count() - 1));
}

TEST_CASE("tape forward matches inference") {
  auto m = build_beam_mesh(10, 10, 40, 2, 2, 8);
  auto g = random_graph(m, 8);
  TignnModel model(ModelConfig{12, 2, 2, 3});
  auto plain = model.forward(g);
  nn::Tape tape;
  auto rec = model.forward(tape, g);
  CHECK((tape.value(rec.dE) - plain.dE).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((tape.value(rec.m_params) - plain.m_params).cwiseAbs().maxCoeff() <= 1e-12);

  Inference<float> f32(model);
  auto single = f32.forward(g);
  CHECK((single.dS - plain.dS).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("json round trip") {
  TignnModel model(ModelConfig{6, 2, 2, 11});
  auto back = TignnModel::from_json(model.to_json());
  auto m = build_beam_mesh(10, 10, 40, 1, 1, 2);
  auto g = random_graph(m, 1);
  CHECK(back.forward(g).l_params == model.forward(g).l_params);
}

}  // TEST_SUITE
