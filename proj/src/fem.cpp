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
#include "tignn/fem.hpp"

#include "tignn/io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace tignn::fem {

namespace {

using ShapeGrad = Eigen::Matrix<Scalar, Eigen::Dynamic, 3>;

constexpr int kHexSign[8][3] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                                {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};

// Shape functions and natural derivatives at a natural point.
void shape_natural(ElementKind kind, const Vec3& xi, VectorX& N, ShapeGrad& dN) {
  if (kind == ElementKind::Hex8) {
    N.resize(8);
    dN.resize(8, 3);
    for (int a = 0; a < 8; ++a) {
      const Scalar sx = kHexSign[a][0], sy = kHexSign[a][1], sz = kHexSign[a][2];
      const Scalar fx = 1 + sx * xi(0), fy = 1 + sy * xi(1), fz = 1 + sz * xi(2);
      N(a) = fx * fy * fz / 8;
      dN(a, 0) = sx * fy * fz / 8;
      dN(a, 1) = fx * sy * fz / 8;
      dN(a, 2) = fx * fy * sz / 8;
    }
  } else {
    N.resize(4);
    N << 1 - xi.sum(), xi(0), xi(1), xi(2);
    dN.resize(4, 3);
    dN << -1, -1, -1, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  }
}

Vec3 natural_centroid(ElementKind kind) {
  return kind == ElementKind::Hex8 ? Vec3::Zero() : Vec3::Constant(0.25);
}

Eigen::Matrix<Scalar, Eigen::Dynamic, 3> gather(const Points& x, std::span<const int> element) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 3> out(static_cast<Eigen::Index>(element.size()), 3);
  for (std::size_t a = 0; a < element.size(); ++a) out.row(static_cast<Eigen::Index>(a)) = x.row(element[a]);
  return out;
}

struct QuadPoint {
  ShapeGrad dNdX;
  VectorX N;
  Scalar weight = 0;  // rest volume represented by this point
};

// Physical gradients at a natural point. Throws on a non-positive Jacobian.
QuadPoint make_point(ElementKind kind, const Eigen::Matrix<Scalar, Eigen::Dynamic, 3>& X, const Vec3& xi,
                     Scalar natural_weight, int element_id) {
  QuadPoint p;
  ShapeGrad dN;
  shape_natural(kind, xi, p.N, dN);
  const Mat3 J = X.transpose() * dN;
  const Scalar det = J.determinant();
  if (!(det > 1e-14 * std::pow(X.cwiseAbs().maxCoeff() + 1e-300, 3))) {
    throw DegenerateElement(element_id, "element " + std::to_string(element_id) +
                                            " has a non-positive rest Jacobian (" + std::to_string(det) + ")");
  }
  p.dNdX = dN * J.inverse();
  p.weight = natural_weight * det;
  return p;
}

struct ElementCache {
  std::vector<QuadPoint> iso;  // isochoric integration points
  QuadPoint centroid;          // volumetric point; weight = element volume
};

ElementCache build_cache(const SolidMesh& mesh, int e) {
  const std::span<const int> elem(mesh.elements.row(e).data(), static_cast<std::size_t>(mesh.elements.cols()));
  const auto X = gather(mesh.rest_positions, elem);
  ElementCache c;
  if (mesh.kind == ElementKind::Hex8) {
    const Scalar g = 1 / std::sqrt(3.0);
    for (int k = 0; k < 8; ++k) {
      c.iso.push_back(make_point(mesh.kind, X, Vec3(kHexSign[k][0] * g, kHexSign[k][1] * g, kHexSign[k][2] * g), 1, e));
    }
    c.centroid = make_point(mesh.kind, X, Vec3::Zero(), 8, e);
  } else {
    c.centroid = make_point(mesh.kind, X, natural_centroid(mesh.kind), 1.0 / 6.0, e);
    c.iso.push_back(c.centroid);
  }
  return c;
}

// F = I + grad u; exact identity at rest.
Mat3 gradient_from(const ShapeGrad& dNdX, const Eigen::Matrix<Scalar, Eigen::Dynamic, 3>& u) {
  return Mat3::Identity() + u.transpose() * dNdX;
}

Scalar wave_speed(const MaterialParams& mat) {
  return std::sqrt((mat.bulk_modulus() + 4.0 / 3.0 * mat.shear_modulus()) / mat.density);
}

Scalar isochoric_energy(const Mat3& F, const MaterialParams& mat) {
  const Mat3 C = F.transpose() * F;
  const Scalar J = F.determinant();
  const Scalar I1 = C.trace();
  const Scalar I2 = 0.5 * (I1 * I1 - (C * C).trace());
  return mat.c10 * (std::pow(J, -2.0 / 3.0) * I1 - 3) + mat.c01 * (std::pow(J, -4.0 / 3.0) * I2 - 3);
}

Scalar volumetric_energy(const Mat3& F, const MaterialParams& mat) {
  const Scalar J = F.determinant();
  return (J - 1) * (J - 1) / mat.d1;
}

// Mutable integrator state for one simulation.
class ExplicitSolver {
 public:
  explicit ExplicitSolver(const SolidMesh& mesh) : mesh_(mesh), mat_(mesh.material) {
    mat_.validate();
    const int ne = mesh.element_count();
    cache_.reserve(static_cast<std::size_t>(ne));
    for (int e = 0; e < ne; ++e) cache_.push_back(build_cache(mesh, e));

    const int n = mesh.node_count();
    mass_ = VectorX::Zero(n);
    node_volume_ = VectorX::Zero(n);
    for (int e = 0; e < ne; ++e) {
      const auto& c = cache_[static_cast<std::size_t>(e)];
      for (const auto& p : c.iso) {
        for (Eigen::Index a = 0; a < mesh.elements.cols(); ++a) {
          mass_(mesh.elements(e, a)) += mat_.density * p.N(a) * p.weight;
        }
      }
      for (Eigen::Index a = 0; a < mesh.elements.cols(); ++a) node_volume_(mesh.elements(e, a)) += c.centroid.weight;
    }

    const std::size_t nterms = mat_.prony.size();
    s_old_.assign(static_cast<std::size_t>(ne), {});
    history_.assign(static_cast<std::size_t>(ne), {});
    for (int e = 0; e < ne; ++e) {
      const auto np = cache_[static_cast<std::size_t>(e)].iso.size();
      s_old_[static_cast<std::size_t>(e)].assign(np, Vec6::Zero());
      history_[static_cast<std::size_t>(e)].assign(np, std::vector<Vec6>(nterms, Vec6::Zero()));
    }
  }

  const VectorX& mass() const { return mass_; }

  // Internal forces at x; advances Prony history when h > 0.
  // Writes per-node Cauchy stress when sigma is non-null.
  Points internal_forces(const Points& x, Scalar h, StateRows* sigma) {
    const int n = mesh_.node_count();
    Points f = Points::Zero(n, 3);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 6, Eigen::RowMajor> acc;
    if (sigma) acc = decltype(acc)::Zero(n, 6);
    const auto npe = static_cast<std::size_t>(mesh_.elements.cols());
    for (int e = 0; e < mesh_.element_count(); ++e) {
      const std::span<const int> elem(mesh_.elements.row(e).data(), npe);
      const ShapeGrad u = gather(x, elem) - gather(mesh_.rest_positions, elem);
      const auto& c = cache_[static_cast<std::size_t>(e)];
      Mat3 cauchy = Mat3::Zero();

      for (std::size_t g = 0; g < c.iso.size(); ++g) {
        const auto& p = c.iso[g];
        const Mat3 F = gradient_from(p.dNdX, u);
        Mat3 S = pk2_stress_split(F, mat_, e).isochoric;
        if (!mat_.prony.empty()) {
          const Vec6 s_new = to_voigt(S);
          auto& s_old = s_old_[static_cast<std::size_t>(e)][g];
          auto& hist = history_[static_cast<std::size_t>(e)][g];
          if (h > 0) {
            auto r = prony_update(s_new, s_old, hist, h, mat_.prony);
            hist = std::move(r.history);
            s_old = s_new;
            S = from_voigt(r.total_dev);
          } else {
            Vec6 total = s_new;
            for (const auto& hi : hist) total -= hi;
            S = from_voigt(total);
          }
        }
        const Mat3 P = F * S;
        scatter_add(f, elem, p.weight * p.dNdX * P.transpose());
        if (sigma) cauchy += p.weight * push_forward(F, S);
      }

      const Mat3 Fc = gradient_from(c.centroid.dNdX, u);
      const Mat3 Sv = pk2_stress_split(Fc, mat_, e).volumetric;
      scatter_add(f, elem, c.centroid.weight * c.centroid.dNdX * (Fc * Sv).transpose());
      if (sigma) {
        cauchy = cauchy / c.centroid.weight + push_forward(Fc, Sv);
        const Vec6 sv = to_voigt(cauchy);
        for (int a : elem) acc.row(a) += c.centroid.weight * sv.transpose();
      }
    }
    if (sigma) {
      for (int i = 0; i < n; ++i) {
        if (node_volume_(i) > 0) sigma->row(i).middleCols<6>(kSigma) = acc.row(i) / node_volume_(i);
      }
    }
    return f;
  }

  Scalar strain_energy(const Points& x) const {
    Scalar total = 0;
    const auto npe = static_cast<std::size_t>(mesh_.elements.cols());
    for (int e = 0; e < mesh_.element_count(); ++e) {
      const std::span<const int> elem(mesh_.elements.row(e).data(), npe);
      const ShapeGrad u = gather(x, elem) - gather(mesh_.rest_positions, elem);
      const auto& c = cache_[static_cast<std::size_t>(e)];
      for (const auto& p : c.iso) total += p.weight * isochoric_energy(gradient_from(p.dNdX, u), mat_);
      total += c.centroid.weight * volumetric_energy(gradient_from(c.centroid.dNdX, u), mat_);
    }
    return total;
  }

  void pin(Points& x, Points& v, Points& a) const {
    for (int i : mesh_.fixed_nodes) {
      x.row(i) = mesh_.rest_positions.row(i);
      v.row(i).setZero();
      a.row(i).setZero();
    }
  }

 private:
  static void scatter_add(Points& f, std::span<const int> elem, const Eigen::Matrix<Scalar, Eigen::Dynamic, 3>& local) {
    for (std::size_t a = 0; a < elem.size(); ++a) f.row(elem[a]) += local.row(static_cast<Eigen::Index>(a));
  }

  const SolidMesh& mesh_;
  MaterialParams mat_;
  std::vector<ElementCache> cache_;
  VectorX mass_;
  VectorX node_volume_;
  std::vector<std::vector<Vec6>> s_old_;
  std::vector<std::vector<std::vector<Vec6>>> history_;
};

}  // namespace

Mat3 deformation_gradient(ElementKind kind, std::span<const int> element, const Points& rest,
                          const Points& current, int element_id) {
  if (static_cast<int>(element.size()) != nodes_per_element(kind))
    throw InvalidArgument("deformation_gradient: wrong node count for element kind");
  const auto X = gather(rest, element);
  const Scalar natural_weight = kind == ElementKind::Hex8 ? 8.0 : 1.0 / 6.0;
  const QuadPoint p = make_point(kind, X, natural_centroid(kind), natural_weight, element_id);
  return gradient_from(p.dNdX, gather(current, element) - X);
}

StressSplit pk2_stress_split(const Mat3& F, const MaterialParams& mat, int element_id) {
  const Scalar J = F.determinant();
  if (!(J > 0)) {
    throw InvertedElement(element_id, -1,
                          "inverted element " + std::to_string(element_id) + " (det F = " + std::to_string(J) + ")");
  }
  const Mat3 C = F.transpose() * F;
  const Mat3 Cinv = C.inverse();
  const Mat3 I = Mat3::Identity();
  const Scalar I1 = C.trace();
  const Scalar I2 = 0.5 * (I1 * I1 - (C * C).trace());
  const Scalar J23 = std::pow(J, -2.0 / 3.0);
  const Scalar J43 = J23 * J23;
  StressSplit s;
  s.isochoric = 2 * mat.c10 * J23 * (I - (I1 / 3) * Cinv) +
                2 * mat.c01 * J43 * (I1 * I - C - (2 * I2 / 3) * Cinv);
  s.volumetric = (2 / mat.d1) * (J - 1) * J * Cinv;
  return s;
}

Mat3 pk2_stress(const Mat3& F, const MaterialParams& mat, int element_id) {
  const auto s = pk2_stress_split(F, mat, element_id);
  return s.isochoric + s.volumetric;
}

Scalar strain_energy_density(const Mat3& F, const MaterialParams& mat) {
  return isochoric_energy(F, mat) + volumetric_energy(F, mat);
}

Mat3 push_forward(const Mat3& F, const Mat3& S) { return F * S * F.transpose() / F.determinant(); }

PronyResult prony_update(const Vec6& s_dev_new, const Vec6& s_dev_old, std::span<const Vec6> history,
                         Scalar dt, std::span<const PronyTerm> prony) {
  if (!(dt > 0)) throw InvalidArgument("prony_update: dt must be > 0");
  if (history.size() != prony.size()) throw InvalidArgument("prony_update: history/term count mismatch");
  PronyResult r;
  r.total_dev = s_dev_new;
  r.history.reserve(prony.size());
  for (std::size_t i = 0; i < prony.size(); ++i) {
    const Scalar x = dt / prony[i].tau;
    const Scalar decay = std::exp(-x);
    const Scalar a = -std::expm1(-x) / x;
    const Vec6 h = decay * history[i] + prony[i].g * ((1 - a) * s_dev_new - (decay - a) * s_dev_old);
    r.total_dev -= h;
    r.history.push_back(h);
  }
  return r;
}

Scalar stability_dt(const SolidMesh& mesh, const MaterialParams& mat) {
  Scalar min_len = std::numeric_limits<Scalar>::infinity();
  const int npe = static_cast<int>(mesh.elements.cols());
  static constexpr int hex_edges[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                           {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  static constexpr int tet_edges[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  for (Eigen::Index e = 0; e < mesh.elements.rows(); ++e) {
    const int count = npe == 8 ? 12 : 6;
    for (int k = 0; k < count; ++k) {
      const auto& p = npe == 8 ? hex_edges[k] : tet_edges[k];
      const Scalar len =
          (mesh.rest_positions.row(mesh.elements(e, p[0])) - mesh.rest_positions.row(mesh.elements(e, p[1]))).norm();
      min_len = std::min(min_len, len);
    }
  }
  return 0.5 * min_len / wave_speed(mat);
}

int substeps_for(const SolidMesh& mesh, Scalar dt) {
  const Scalar bound = stability_dt(mesh, mesh.material);
  return std::max(1, static_cast<int>(std::ceil(dt / bound * (1 - 1e-12))));
}

Trajectory simulate(const SolidMesh& mesh, const LoadCase& load, int nt, Scalar dt, const SimulateOptions& opts) {
  if (nt < 1) throw InvalidArgument("simulate: nt must be >= 1");
  if (!(dt > 0)) throw InvalidArgument("simulate: dt must be > 0");
  if (opts.substeps < 1) throw InvalidArgument("simulate: substeps must be >= 1");
  if (mesh.fixed_nodes.empty()) throw InvalidArgument("simulate: mesh has no fixed nodes");
  load.validate(mesh);
  const Scalar h = dt / opts.substeps;
  const Scalar bound = stability_dt(mesh, mesh.material);
  if (h > bound) {
    throw InvalidArgument("simulate: step " + std::to_string(h) + " exceeds stability bound " +
                          std::to_string(bound));
  }

  ExplicitSolver solver(mesh);
  const int n = mesh.node_count();
  Points x = mesh.rest_positions;
  Points v = Points::Zero(n, 3);
  if (opts.initial_velocity) {
    if (opts.initial_velocity->rows() != n) throw InvalidArgument("simulate: initial velocity size mismatch");
    v = *opts.initial_velocity;
  }
  Points a = Points::Zero(n, 3);
  solver.pin(x, v, a);

  Trajectory traj;
  traj.load = load;
  traj.dt = dt;
  StateField snap = StateField::rest(mesh);
  snap.v() = v;
  traj.snapshots.push_back(snap);

  const Eigen::Array<Scalar, Eigen::Dynamic, 1> inv_mass = solver.mass().array().inverse();
  auto accel = [&](const Points& f_int, int t) {
    Points f = -f_int;
    if (load.active(t)) {
      for (int node : load.loaded_nodes) f.row(node) += load.force_per_node.transpose();
    }
    return Points(f.array().colwise() * inv_mass);
  };

  a = accel(solver.internal_forces(x, 0, nullptr), 0);
  solver.pin(x, v, a);
  long step = 0;
  for (int t = 0; t < nt; ++t) {
    StateRows sigma = StateRows::Zero(n, kStateDim);
    for (int s = 0; s < opts.substeps; ++s, ++step) {
      v += 0.5 * h * a;
      x += h * v;
      solver.pin(x, v, a);
      Points f_int;
      try {
        f_int = solver.internal_forces(x, h, s + 1 == opts.substeps ? &sigma : nullptr);
      } catch (const InvertedElement& e) {
        throw InvertedElement(e.element_id, step,
                              "simulate: element " + std::to_string(e.element_id) + " inverted at step " +
                                  std::to_string(step));
      }
      a = accel(f_int, t);
      v += 0.5 * h * a;
      solver.pin(x, v, a);
    }
    if (!x.allFinite() || !v.allFinite()) throw RolloutDivergence(step, "simulate: non-finite state");
    snap.time = (t + 1) * dt;
    snap.q() = x;
    snap.v() = v;
    snap.sigma() = sigma.middleCols<6>(kSigma);
    traj.snapshots.push_back(snap);
  }
  return traj;
}

EnergyAudit energy_audit(const SolidMesh& mesh, int steps, Scalar h, const Points& initial_velocity) {
  ExplicitSolver solver(mesh);
  const int n = mesh.node_count();
  Points x = mesh.rest_positions;
  Points v = initial_velocity;
  Points a = Points::Zero(n, 3);
  solver.pin(x, v, a);
  const Eigen::Array<Scalar, Eigen::Dynamic, 1> inv_mass = solver.mass().array().inverse();
  auto kinetic = [&] { return 0.5 * (v.rowwise().squaredNorm().array() * solver.mass().array()).sum(); };
  EnergyAudit audit;
  a = Points((-solver.internal_forces(x, 0, nullptr)).array().colwise() * inv_mass);
  solver.pin(x, v, a);
  audit.kinetic.push_back(kinetic());
  audit.strain.push_back(solver.strain_energy(x));
  for (int s = 0; s < steps; ++s) {
    v += 0.5 * h * a;
    x += h * v;
    solver.pin(x, v, a);
    a = Points((-solver.internal_forces(x, h, nullptr)).array().colwise() * inv_mass);
    v += 0.5 * h * a;
    solver.pin(x, v, a);
    audit.kinetic.push_back(kinetic());
    audit.strain.push_back(solver.strain_energy(x));
  }
  return audit;
}

std::pair<std::vector<int>, std::vector<int>> split_indices(int n, Scalar split, std::uint64_t seed) {
  if (!(split > 0 && split < 1)) throw InvalidArgument("split must lie in (0,1)");
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(split * n));
  std::vector<int> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<int> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

Dataset generate_dataset(const SolidMesh& mesh, const DatasetConfig& config) {
  if (config.load_positions < 1) throw InvalidArgument("datagen: load_positions must be >= 1");
  mesh.material.validate();
  std::vector<int> candidates;
  for (int node : surface_nodes(mesh))
    if (!mesh.is_fixed(node)) candidates.push_back(node);
  if (static_cast<int>(candidates.size()) < config.load_positions) {
    throw InvalidArgument("datagen: " + std::to_string(config.load_positions) + " load positions requested but only " +
                          std::to_string(candidates.size()) + " free surface nodes");
  }
  std::mt19937_64 rng(config.seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  candidates.resize(static_cast<std::size_t>(config.load_positions));

  const Points normals = vertex_normals(mesh, mesh.rest_positions);
  std::vector<LoadCase> cases;
  for (int node : candidates) {
    LoadCase lc;
    lc.loaded_nodes = {node};
    lc.force_per_node = -config.force_magnitude * normals.row(node).transpose();
    lc.first_step = 0;
    lc.last_step = config.nt;
    cases.push_back(lc);
  }

  SimulateOptions opts;
  opts.substeps = substeps_for(mesh, config.dt);
  std::vector<Trajectory> results(cases.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      try {
        results[i] = simulate(mesh, cases[i], config.nt, config.dt, opts);
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          try {
            throw NumericalFailure("datagen case " + std::to_string(i) + ": " + e.what());
          } catch (...) {
            failure = std::current_exception();
          }
        }
      }
    }
  };
  unsigned threads = config.threads > 0 ? static_cast<unsigned>(config.threads) : std::thread::hardware_concurrency();
  threads = std::clamp(threads, 1u, static_cast<unsigned>(cases.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  Dataset ds;
  ds.mesh = mesh;
  ds.dt = config.dt;
  const auto [train, test] = split_indices(static_cast<int>(results.size()), config.split, config.seed ^ 0x5bd1e995ull);
  for (int i : train) ds.train.push_back(results[static_cast<std::size_t>(i)]);
  for (int i : test) ds.test.push_back(results[static_cast<std::size_t>(i)]);
  return ds;
}

nlohmann::json material_to_json(const MaterialParams& m) {
  io::json prony = io::json::array();
  for (const auto& t : m.prony) prony.push_back({{"g", t.g}, {"tau", t.tau}});
  return {{"c10", m.c10}, {"c01", m.c01}, {"d1", m.d1}, {"density", m.density}, {"prony", prony}};
}

MaterialParams material_from_json(const nlohmann::json& j) {
  MaterialParams m;
  try {
    m.c10 = j.at("c10").get<double>();
    m.c01 = j.value("c01", 0.0);
    m.d1 = j.at("d1").get<double>();
    m.density = j.at("density").get<double>();
    m.prony.clear();
    if (j.contains("prony")) {
      for (const auto& t : j["prony"]) m.prony.push_back({t.at("g").get<double>(), t.at("tau").get<double>()});
    }
  } catch (const io::json::exception& e) {
    throw SchemaViolation(std::string("material: ") + e.what());
  }
  m.validate();
  return m;
}

nlohmann::json trajectory_to_json(const Trajectory& t) {
  io::json snaps = io::json::array();
  for (const auto& s : t.snapshots) {
    snaps.push_back({{"t", s.time},
                     {"q", io::to_json(MatrixX(s.q()))},
                     {"v", io::to_json(MatrixX(s.v()))},
                     {"sigma", io::to_json(MatrixX(s.sigma()))}});
  }
  return {{"loaded_nodes", t.load.loaded_nodes},
          {"force", {t.load.force_per_node(0), t.load.force_per_node(1), t.load.force_per_node(2)}},
          {"active_steps", {t.load.first_step, t.load.last_step}},
          {"snapshots", std::move(snaps)}};
}

Trajectory trajectory_from_json(const nlohmann::json& j, Scalar dt, int node_count) {
  Trajectory t;
  t.dt = dt;
  try {
    t.load.loaded_nodes = j.at("loaded_nodes").get<std::vector<int>>();
    const auto f = j.at("force").get<std::vector<double>>();
    if (f.size() != 3) throw SchemaViolation("case.force: expected 3 numbers");
    t.load.force_per_node = Vec3(f[0], f[1], f[2]);
    const auto steps = j.at("active_steps").get<std::vector<int>>();
    if (steps.size() != 2) throw SchemaViolation("case.active_steps: expected [first, last)");
    t.load.first_step = steps[0];
    t.load.last_step = steps[1];
    for (const auto& s : j.at("snapshots")) {
      StateField sf;
      sf.time = s.at("t").get<double>();
      sf.z.resize(node_count, kStateDim);
      const auto q = io::matrix_from_json(s.at("q"), 3, "snapshot.q");
      const auto v = io::matrix_from_json(s.at("v"), 3, "snapshot.v");
      const auto sig = io::matrix_from_json(s.at("sigma"), 6, "snapshot.sigma");
      if (q.rows() != node_count || v.rows() != node_count || sig.rows() != node_count)
        throw SchemaViolation("snapshot: node count does not match mesh");
      sf.q() = q;
      sf.v() = v;
      sf.sigma() = sig;
      t.snapshots.push_back(std::move(sf));
    }
  } catch (const io::json::exception& e) {
    throw SchemaViolation(std::string("case: ") + e.what());
  }
  return t;
}

nlohmann::json dataset_to_json(const Dataset& ds, const std::string& mesh_ref) {
  io::json cases = io::json::array();
  auto add = [&](const Trajectory& t, const char* split) {
    auto c = trajectory_to_json(t);
    c["split"] = split;
    cases.push_back(std::move(c));
  };
  for (const auto& t : ds.train) add(t, "train");
  for (const auto& t : ds.test) add(t, "test");
  return {{"schema", "traj/1"},
          {"mesh_ref", mesh_ref},
          {"dt", ds.dt},
          {"material", material_to_json(ds.mesh.material)},
          {"cases", std::move(cases)}};
}

Dataset dataset_from_json(const nlohmann::json& j, const SolidMesh& mesh) {
  io::expect_schema(j, "traj/1", "dataset");
  Dataset ds;
  ds.mesh = mesh;
  try {
    ds.dt = j.at("dt").get<double>();
    ds.mesh.material = material_from_json(j.at("material"));
    std::size_t index = 0;
    for (const auto& c : j.at("cases")) {
      try {
        auto t = trajectory_from_json(c, ds.dt, mesh.node_count());
        (c.value("split", "train") == "test" ? ds.test : ds.train).push_back(std::move(t));
      } catch (const SchemaViolation& e) {
        throw SchemaViolation("cases[" + std::to_string(index) + "]: " + e.what());
      }
      ++index;
    }
  } catch (const io::json::exception& e) {
    throw SchemaViolation(std::string("dataset: ") + e.what());
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path, const std::string& mesh_ref) {
  io::write_json_atomic(path, dataset_to_json(ds, mesh_ref));
}

Dataset load_dataset(const std::string& path) {
  const auto j = io::read_json(path);
  io::expect_schema(j, "traj/1", path);
  if (!j.contains("mesh_ref") || !j["mesh_ref"].is_string()) throw SchemaViolation(path + ": mesh_ref missing");
  std::filesystem::path mesh_path(j["mesh_ref"].get<std::string>());
  if (mesh_path.is_relative()) mesh_path = std::filesystem::path(path).parent_path() / mesh_path;
  const SolidMesh mesh = load_mesh(mesh_path.string());
  return dataset_from_json(j, mesh);
}

}  // namespace tignn::fem
