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

#include "tignn/graph.hpp"
#include "tignn/model.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace tignn {

struct TrainConfig {
  int epochs = 2000;
  int batch_size = 8;  // graphs per optimizer step
  Scalar learning_rate = 1e-3;
  Scalar degeneracy_weight = 1e-2;  // lambda_d
  Scalar noise = 1e-1;              // gamma, in units of the RMS one-step increment
  std::uint64_t seed = 1;
  ModelConfig model;
  Scalar dt = 5e-2;
  Scalar split = 0.8;
  // Wall-clock cap in seconds; 0 disables it.
  double max_seconds = 0;
  // Also train on the images of each trajectory under the mesh symmetries.
  bool symmetry_augment = false;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct LossTerms {
  Scalar data = 0;
  Scalar degeneracy = 0;
  Scalar total = 0;
};

// data = mean over nodes and channels of (rate - target)^2 in normalized
// space; degeneracy = mean over nodes of ||L dS||^2 + ||M dE||^2;
// total = data + lambda_d * degeneracy.
LossTerms loss(const GenericOutputs& out, const StateRows& normalized_target, Scalar lambda_d);
LossTerms loss(const GenericOutputs& out, const StateField& z_t, const StateField& z_next, Scalar dt,
               Scalar lambda_d, const Normalization& stats);

// The same loss recorded on a tape for one (possibly batched) graph.
struct LossVars {
  nn::Var data, degeneracy, total;
};
LossVars record_loss(nn::Tape& tape, TignnModel& model, const SimGraph& g, const StateRows& normalized_target,
                     Scalar lambda_d);

struct EpochLoss {
  int epoch = 0;
  Scalar data = 0;
  Scalar degeneracy = 0;
  Scalar total = 0;
};

struct TrainResult {
  std::vector<EpochLoss> history;
  double seconds = 0;
  bool stopped_on_time = false;
};

using EpochCallback = std::function<void(const EpochLoss&)>;

// Shuffled snapshot pairs, Gaussian input noise, Adam. Deterministic for a
// fixed seed. Throws TrainingDivergence naming the epoch and step.
TrainResult train(TignnModel& model, const SolidMesh& mesh, std::span<const Trajectory> trajectories,
                  const Normalization& stats, const TrainConfig& config, const EpochCallback& on_epoch = {});

// Orthogonal map x -> R (x - c) + c that sends the rest mesh onto itself:
// node i lands on node perm[i], fixed nodes on fixed nodes, graph edges on
// graph edges.
struct MeshSymmetry {
  Mat3 matrix;
  Vec3 center;
  std::vector<int> perm;
};

// All such maps among the 48 signed axis permutations about the bounding
// box center, identity first.
std::vector<MeshSymmetry> mesh_symmetries(const SolidMesh& mesh);

// Positions, velocities, stresses and the load case carried through `sym`.
Trajectory transform_trajectory(const Trajectory& t, const MeshSymmetry& sym);

// Autoregressive rollout from `initial` for nt steps.
Trajectory rollout(const TignnModel& model, const SolidMesh& mesh, const StateField& initial, const LoadCase& load,
                   int nt, Scalar dt, const Normalization& stats);

enum class Variable { Q = 0, V = 1, Sigma = 2 };
inline constexpr std::array<const char*, 3> kVariableNames{"q", "v", "sigma"};

struct ErrorReport {
  std::array<std::vector<Scalar>, 3> errors;
  std::array<int, 3> excluded{0, 0, 0};

  ErrorReport& operator+=(const ErrorReport& other);
};

// Relative L2 error per snapshot t >= 1 and variable.
ErrorReport evaluate(const Trajectory& predicted, const Trajectory& truth);

struct BoxStats {
  Scalar lw = 0, lq = 0, med = 0, uq = 0, uw = 0;
};

// Inclusive linear-interpolation quartiles; whiskers at the most extreme
// samples within 1.5 IQR of the quartiles.
BoxStats boxplot_stats(std::span<const Scalar> values);

struct ErrorRow {
  std::string variable;
  std::string split;
  BoxStats stats;
  int n = 0;
  int excluded = 0;
};

std::vector<ErrorRow> error_rows(const ErrorReport& report, const std::string& split);
std::string error_csv(std::span<const ErrorRow> rows);
std::string loss_csv(std::span<const EpochLoss> history);

// Root mean square of the per-node residual sqrt(||L dS||^2 + ||M dE||^2)
// over all snapshot pairs of the given trajectories.
Scalar degeneracy_rms(const TignnModel& model, const SolidMesh& mesh, std::span<const Trajectory> trajectories,
                      const Normalization& stats);

// ckpt/1
struct Checkpoint {
  TignnModel model;
  Normalization stats;
  TrainConfig config;
  Scalar dt = 5e-2;
};

nlohmann::json checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tignn
