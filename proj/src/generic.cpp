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
#include "tignn/generic.hpp"

#include "tignn/graph.hpp"
#include "tignn/model.hpp"

namespace tignn {

StateRows generic_rates(const GenericOutputs& out) {
  const auto n = out.dE.rows();
  StateRows rate(n, kStateDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const StateMat L = assemble_L(out.l_params.row(i).transpose());
    const StateMat A = assemble_factor(out.m_params.row(i).transpose());
    const StateVec dE = out.dE.row(i).transpose();
    const StateVec dS = out.dS.row(i).transpose();
    // Same operation order as the recorded training path.
    const StateVec u = A.transpose() * dS;
    rate.row(i) = (L * dE + A * u).transpose();
  }
  return rate;
}

VectorX degeneracy_sq(const GenericOutputs& out) {
  const auto n = out.dE.rows();
  VectorX r(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ops = assemble_operators(out.l_params.row(i).transpose(), out.m_params.row(i).transpose());
    const auto [rl, rm] = degeneracy_residual(ops, out.dE.row(i).transpose(), out.dS.row(i).transpose());
    r(i) = rl * rl + rm * rm;
  }
  return r;
}

StateField euler_step(const SolidMesh& mesh, const StateField& z, const StateRows& normalized_rate, Scalar dt,
                      const Normalization& stats, long step_index) {
  if (!(dt > 0)) throw InvalidArgument("step: dt must be > 0");
  if (normalized_rate.rows() != z.size() || z.size() != mesh.node_count())
    throw InvalidArgument("step: state, rate and mesh sizes differ");
  StateField next;
  next.time = z.time + dt;
  next.z = z.z + dt * StateRows(normalized_rate.array().rowwise() * stats.target_scale.array());
  for (int i : mesh.fixed_nodes) {
    next.z.row(i).middleCols<3>(kQ) = mesh.rest_positions.row(i);
    next.z.row(i).middleCols<3>(kV).setZero();
  }
  if (!next.z.allFinite()) throw RolloutDivergence(step_index, "rollout diverged at step " + std::to_string(step_index));
  return next;
}

StateField generic_step(const SolidMesh& mesh, const StateField& z, const GenericOutputs& out, Scalar dt,
                        const Normalization& stats, long step_index) {
  return euler_step(mesh, z, generic_rates(out), dt, stats, step_index);
}

}  // namespace tignn
