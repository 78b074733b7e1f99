#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"

#include "tignn/fem.hpp"
#include "tignn/io.hpp"

#include <random>
#include <set>

using namespace tignn;

namespace {

using namespace oracle;

double rel(const Mat3& a, const Mat3& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

std::vector<Vec6> zero_hist(std::size_t n) { return std::vector<Vec6>(n, Vec6::Zero()); }

}  // namespace

TEST_SUITE("fem") {

TEST_CASE("deformation gradient") {
  auto m = build_beam_mesh(1, 1, 1, 1, 1, 1);
  const std::span<const int> el(m.elements.row(0).data(), 8);
  CHECK((fem::deformation_gradient(m.kind, el, m.rest_positions, m.rest_positions) - Mat3::Identity()).norm() <
        1e-14);
  Points scaled = 2 * m.rest_positions;
  CHECK((fem::deformation_gradient(m.kind, el, m.rest_positions, scaled) - 2 * Mat3::Identity()).norm() < 1e-14);
  Points shear = m.rest_positions;
  shear.col(0) += 0.3 * m.rest_positions.col(1);
  Mat3 expect = Mat3::Identity();
  expect(0, 1) = 0.3;
  CHECK((fem::deformation_gradient(m.kind, el, m.rest_positions, shear) - expect).norm() < 1e-14);

  Points flat = m.rest_positions;
  flat.col(2).setZero();
  CHECK_THROWS_AS(fem::deformation_gradient(m.kind, el, flat, m.rest_positions), DegenerateElement);
}

TEST_CASE("pk2 at the reference and under rotation") {
  const auto mat = beam_material();
  CHECK(fem::pk2_stress(Mat3::Identity(), mat).cwiseAbs().maxCoeff() < 1e-9);
  std::mt19937_64 rng(4);
  const Mat3 R = random_rotation(rng);
  CHECK(fem::pk2_stress(R, mat).cwiseAbs().maxCoeff() < 1e-6);
  Mat3 bad = Mat3::Identity();
  bad(0, 0) = -1;
  CHECK_THROWS_AS(fem::pk2_stress(bad, mat), InvertedElement);
}

TEST_CASE("pk2 against the autodiff oracle, uniaxial") {
  MaterialParams mat = beam_material();
  mat.c01 = 0;
  const double l = 1.2;
  const Mat3 F = Eigen::Vector3d(l, 1 / std::sqrt(l), 1 / std::sqrt(l)).asDiagonal();
  CHECK(rel(fem::pk2_stress(F, mat), oracle_pk2(F, mat)) <= 1e-8);
  // deviatoric part alone (volumetric term switched off by a huge d1)
  MaterialParams iso = mat;
  iso.d1 = 1e300;
  const auto split = fem::pk2_stress_split(F, mat);
  CHECK(rel(split.isochoric, oracle_pk2(F, iso)) <= 1e-8);
}

TEST_CASE("pk2 against the autodiff oracle, random") {
  std::mt19937_64 rng(12);
  for (const auto& mat : {beam_material(), MaterialParams{2.6e-1, 0, 4.9e-2, 1e5, {}}}) {
    double worst = 0;
    for (int k = 0; k < 50; ++k) {
      const Mat3 F = random_deformation(rng);
      worst = std::max(worst, rel(fem::pk2_stress(F, mat), oracle_pk2(F, mat)));
    }
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("strain energy density matches the oracle") {
  std::mt19937_64 rng(8);
  const auto mat = beam_material();
  for (int k = 0; k < 10; ++k) {
    const Mat3 F = random_deformation(rng);
    const Vec6 cv = to_voigt(Mat3(F.transpose() * F));
    Eigen::Matrix<AD, 6, 1> c;
    for (int i = 0; i < 6; ++i) c(i) = AD(cv(i), 6, i);
    CHECK(fem::strain_energy_density(F, mat) == doctest::Approx(psi_of_c(c, mat).value()).epsilon(1e-12));
  }
}

TEST_CASE("objectivity") {
  std::mt19937_64 rng(21);
  const auto mat = beam_material();
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    const Mat3 F = random_deformation(rng);
    const Mat3 S = fem::pk2_stress(F, mat);
    worst = std::max(worst, rel(fem::pk2_stress(random_rotation(rng) * F, mat), S));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("prony without terms") {
  Vec6 s;
  s << 1, 2, 3, 4, 5, 6;
  auto r = fem::prony_update(s, Vec6::Zero(), {}, 0.05, {});
  CHECK(r.total_dev == s);
  CHECK(r.history.empty());
  CHECK_THROWS_AS(fem::prony_update(s, s, {}, 0, {}), InvalidArgument);
}

TEST_CASE("prony long-time limit") {
  const auto terms = beam_material().prony;
  Vec6 s;
  s << 1, -2, 0.5, 0.25, -1, 3;
  auto hist = zero_hist(terms.size());
  Vec6 old = Vec6::Zero(), total;
  for (int k = 0; k < 2000; ++k) {
    auto r = fem::prony_update(s, old, hist, 0.01, terms);
    hist = r.history;
    total = r.total_dev;
    old = s;
  }
  double gsum = 0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    CHECK((hist[i] - terms[i].g * s).norm() <= 1e-6 * s.norm());
    gsum += terms[i].g;
  }
  CHECK((total - (1 - gsum) * s).norm() <= 1e-6 * s.norm());
}

TEST_CASE("prony first step from rest") {
  const std::vector<PronyTerm> terms{{0.3, 0.2}};
  Vec6 s = Vec6::Constant(2);
  const double dt = 0.05, x = dt / 0.2, e = std::exp(-x), a = (1 - e) / x;
  auto r = fem::prony_update(s, Vec6::Zero(), zero_hist(1), dt, terms);
  CHECK((r.history[0] - 0.3 * (1 - a) * s).norm() <= 1e-14);
  CHECK((r.total_dev - (1 - 0.3 * (1 - a)) * s).norm() <= 1e-14);
}

TEST_CASE("prony relaxes under held strain") {
  const auto terms = beam_material().prony;
  Vec6 s = Vec6::Ones();
  auto hist = zero_hist(terms.size());
  Vec6 old = Vec6::Zero();
  double prev = 2;
  for (int k = 0; k < 40; ++k) {
    auto r = fem::prony_update(s, old, hist, 0.05, terms);
    hist = r.history;
    old = s;
    CHECK(r.total_dev(0) < prev);
    prev = r.total_dev(0);
  }
}

TEST_CASE("stability estimate") {
  auto brick = build_beam_mesh(1, 1, 1, 1, 1, 1);
  MaterialParams mat{1.5e5, 0, 1e-7, 1e3, {}};
  const double base = fem::stability_dt(brick, mat);
  CHECK(std::isfinite(base));
  CHECK(base > 0);
  CHECK(base == doctest::Approx(0.003500700210070025).epsilon(1e-12));
  CHECK(base == doctest::Approx(0.5 / std::sqrt((2 / 1e-7 + 4.0 / 3.0 * 3e5) / 1e3)).epsilon(1e-12));

  auto big = build_beam_mesh(2, 2, 2, 1, 1, 1);
  CHECK(fem::stability_dt(big, mat) == doctest::Approx(2 * base).epsilon(1e-12));
  MaterialParams heavy = mat;
  heavy.density *= 4;
  CHECK(fem::stability_dt(brick, heavy) == doctest::Approx(2 * base).epsilon(1e-12));
}

TEST_CASE("zero load keeps the rest state") {
  auto m = build_beam_mesh(10, 10, 40, 2, 2, 8);
  LoadCase lc;
  lc.loaded_nodes = {80};
  lc.last_step = 5;
  auto t = fem::simulate(m, lc, 5, 5e-2);
  REQUIRE(t.snapshots.size() == 6);
  for (const auto& s : t.snapshots) {
    CHECK(s.q() == m.rest_positions);
    CHECK(s.v().isZero(0));
    CHECK(s.sigma().isZero(0));
  }
}

TEST_CASE("tip displacement grows with the load") {
  auto m = build_beam_mesh(10, 10, 40, 2, 2, 8);
  int tip = 0;
  for (int i = 0; i < m.node_count(); ++i)
    if (m.rest_positions(i, 2) == 40 && m.rest_positions(i, 0) == 10 && m.rest_positions(i, 1) == 5) tip = i;
  auto peak = [&](double f) {
    auto t = testing::short_trajectory(m, tip, 10, f);
    double worst = 0;
    for (const auto& s : t.snapshots) worst = std::max(worst, (s.q().row(tip) - m.rest_positions.row(tip)).norm());
    return worst;
  };
  const double a = peak(1e3), b = peak(2e3);
  CHECK(a > 0);
  CHECK(b > a);
  CHECK(b / a == doctest::Approx(2).epsilon(0.05));
}

TEST_CASE("energy audit") {
  auto m = build_beam_mesh(10, 10, 40, 2, 2, 8);
  m.material.prony.clear();
  Points v0 = Points::Zero(m.node_count(), 3);
  for (int i = 0; i < m.node_count(); ++i) v0(i, 0) = 1e-2 * m.rest_positions(i, 2);
  const double h = 0.5 * fem::stability_dt(m, m.material);
  auto audit = fem::energy_audit(m, 300, h, v0);
  const auto total = [&](std::size_t k) { return audit.kinetic[k] + audit.strain[k]; };
  const double e0 = total(0);
  REQUIRE(e0 > 0);
  for (std::size_t k = 100; k < audit.kinetic.size(); k += 100) {
    CHECK(std::abs(total(k) - total(k - 100)) <= 1e-2 * total(k - 100));
    CHECK(total(k) <= e0 * (1 + 1e-2));
  }
  double strain_peak = 0;
  for (double s : audit.strain) strain_peak = std::max(strain_peak, s);
  CHECK(strain_peak > 0.1 * e0);
}

TEST_CASE("dataset counts and split") {
  auto m = build_beam_mesh(10, 10, 40, 2, 2, 8);
  fem::DatasetConfig cfg;
  cfg.load_positions = 30;
  auto ds = fem::generate_dataset(m, cfg);
  CHECK(ds.train.size() == 24);
  CHECK(ds.test.size() == 6);
  for (const auto* part : {&ds.train, &ds.test})
    for (const auto& t : *part) {
      CHECK(t.snapshots.size() == 21);
      REQUIRE(t.load.loaded_nodes.size() == 1);
      CHECK(!m.is_fixed(t.load.loaded_nodes[0]));
      CHECK(t.load.force_per_node.norm() == doctest::Approx(1e5));
    }
  std::set<int> loaded;
  for (const auto* part : {&ds.train, &ds.test})
    for (const auto& t : *part) loaded.insert(t.load.loaded_nodes[0]);
  CHECK(loaded.size() == 30);

  auto [tr, te] = fem::split_indices(30, 0.8, 7);
  std::set<int> all(tr.begin(), tr.end());
  all.insert(te.begin(), te.end());
  CHECK(tr.size() == 24);
  CHECK(te.size() == 6);
  CHECK(all.size() == 30);

  cfg.load_positions = 0;
  CHECK_THROWS_AS(fem::generate_dataset(m, cfg), InvalidArgument);
}

TEST_CASE("dataset file is deterministic and round-trips") {
  auto m = build_beam_mesh(10, 10, 40, 1, 1, 4);
  fem::DatasetConfig cfg;
  cfg.load_positions = 4;
  cfg.nt = 3;
  cfg.split = 0.5;
  auto dir = testing::scratch_dir("dataset");
  save_mesh(m, (dir / "mesh.json").string());
  fem::save_dataset(fem::generate_dataset(m, cfg), (dir / "a.json").string(), "mesh.json");
  fem::save_dataset(fem::generate_dataset(m, cfg), (dir / "b.json").string(), "mesh.json");
  CHECK(io::read_text((dir / "a.json").string()) == io::read_text((dir / "b.json").string()));
  auto back = fem::load_dataset((dir / "a.json").string());
  auto again = fem::generate_dataset(m, cfg);
  REQUIRE(back.train.size() == again.train.size());
  CHECK(back.train[0].snapshots.back().z == again.train[0].snapshots.back().z);
  CHECK(back.test[0].load.loaded_nodes == again.test[0].load.loaded_nodes);
}

}  // TEST_SUITE
