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
#include "tignn/mesh.hpp"
#include "tignn/state.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

// Explicit-dynamics finite elements used to generate ground-truth trajectories.
namespace tignn::fem {

// Deformation gradient at the element centroid.
// Throws DegenerateElement when the rest Jacobian is not positive.
Mat3 deformation_gradient(ElementKind kind, std::span<const int> element, const Points& rest,
                          const Points& current, int element_id = -1);

struct StressSplit {
  Mat3 isochoric;   // from c10, c01
  Mat3 volumetric;  // from d1
};

// Second Piola-Kirchhoff stress S = 2 dPsi/dC for
//   Psi = c10 (I1b - 3) + c01 (I2b - 3) + (J - 1)^2 / d1.
// Throws InvertedElement when det F <= 0.
Mat3 pk2_stress(const Mat3& F, const MaterialParams& mat, int element_id = -1);
StressSplit pk2_stress_split(const Mat3& F, const MaterialParams& mat, int element_id = -1);

// Strain energy density Psi(F).
Scalar strain_energy_density(const Mat3& F, const MaterialParams& mat);

// Cauchy stress sigma = F S F^T / J.
Mat3 push_forward(const Mat3& F, const Mat3& S);

struct PronyResult {
  Vec6 total_dev;
  std::vector<Vec6> history;
};

// One step of the hereditary integral for G(t) = 1 - sum_i g_i (1 - exp(-t/tau_i)),
// with s_new the instantaneous deviatoric stress, linear in time over the step:
//   e = exp(-dt/tau_i), a = (1 - e) / (dt/tau_i)
//   h_i' = e h_i + g_i ((1 - a) s_new - (e - a) s_old)
//   s_total = s_new - sum_i h_i'
// Held constant, h_i tends to g_i s and s_total to (1 - sum g_i) s.
PronyResult prony_update(const Vec6& s_dev_new, const Vec6& s_dev_old, std::span<const Vec6> history,
                         Scalar dt, std::span<const PronyTerm> prony);

// 0.5 * min element edge length / dilatational wave speed.
Scalar stability_dt(const SolidMesh& mesh, const MaterialParams& mat);

struct SimulateOptions {
  // Integration substeps per snapshot interval. dt / substeps must not
  // exceed stability_dt.
  int substeps = 1;
  // Initial velocity (n x 3); rest if empty.
  std::optional<Points> initial_velocity;
};

// Central-difference integration of M a = f_ext - f_int with lumped mass.
// Fixed nodes are pinned. Snapshots every dt.
Trajectory simulate(const SolidMesh& mesh, const LoadCase& load, int nt, Scalar dt,
                    const SimulateOptions& opts = {});

// Smallest substep count that keeps dt / substeps within stability_dt.
int substeps_for(const SolidMesh& mesh, Scalar dt);

struct EnergyAudit {
  std::vector<Scalar> kinetic;
  std::vector<Scalar> strain;
};

// Same integrator, recording kinetic and stored energy after every substep.
// Intended for verification runs without Prony terms.
EnergyAudit energy_audit(const SolidMesh& mesh, int steps, Scalar h, const Points& initial_velocity);

struct DatasetConfig {
  int load_positions = 30;
  Scalar force_magnitude = 1e5;
  int nt = 20;
  Scalar dt = 5e-2;
  Scalar split = 0.8;
  std::uint64_t seed = 7;
  int threads = 0;  // 0: hardware concurrency
};

struct Dataset {
  SolidMesh mesh;
  Scalar dt = 0;
  std::vector<Trajectory> train;
  std::vector<Trajectory> test;
};

// Deterministic load positions (surface nodes off the fixed set), inward
// normal forces, and a seeded train/test split.
Dataset generate_dataset(const SolidMesh& mesh, const DatasetConfig& config);

// Seeded permutation split: first round(split * n) indices train.
std::pair<std::vector<int>, std::vector<int>> split_indices(int n, Scalar split, std::uint64_t seed);

// traj/1
nlohmann::json dataset_to_json(const Dataset& ds, const std::string& mesh_ref);
Dataset dataset_from_json(const nlohmann::json& j, const SolidMesh& mesh);
void save_dataset(const Dataset& ds, const std::string& path, const std::string& mesh_ref);
Dataset load_dataset(const std::string& path);

nlohmann::json material_to_json(const MaterialParams& m);
MaterialParams material_from_json(const nlohmann::json& j);

nlohmann::json trajectory_to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j, Scalar dt, int node_count);

}  // namespace tignn::fem
