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

#include "tignn/types.hpp"

#include <utility>

namespace tignn {

struct SolidMesh;
struct StateField;
struct Normalization;
struct GenericOutputs;

// Skew-symmetric L from 66 values filling the strict lower triangle row by
// row: L(1,0), L(2,0), L(2,1), L(3,0), ...; L = lower - lower^T.
template <typename Derived>
StateMat assemble_L(const Eigen::MatrixBase<Derived>& params) {
  StateMat lower = StateMat::Zero();
  int k = 0;
  for (int r = 1; r < kStateDim; ++r)
    for (int c = 0; c < r; ++c) lower(r, c) = params(k++);
  return lower - lower.transpose();
}

// Lower-triangular factor A from 78 values, row by row including the diagonal.
template <typename Derived>
StateMat assemble_factor(const Eigen::MatrixBase<Derived>& params) {
  StateMat A = StateMat::Zero();
  int k = 0;
  for (int r = 0; r < kStateDim; ++r)
    for (int c = 0; c <= r; ++c) A(r, c) = params(k++);
  return A;
}

// M = A A^T: symmetric positive semidefinite by construction.
template <typename Derived>
StateMat assemble_M(const Eigen::MatrixBase<Derived>& params) {
  const StateMat A = assemble_factor(params);
  StateMat M = A * A.transpose();
  // The product is symmetric up to summation order; mirror it so M == M^T bit for bit.
  M.template triangularView<Eigen::StrictlyUpper>() = M.transpose();
  return M;
}

struct GenericOperators {
  StateMat L;
  StateMat M;
};

inline GenericOperators assemble_operators(const Eigen::Ref<const VectorX>& l_params,
                                           const Eigen::Ref<const VectorX>& m_params) {
  return {assemble_L(l_params), assemble_M(m_params)};
}

// dz/dt = L dE + M dS.
inline StateVec generic_rate(const GenericOperators& ops, const StateVec& dE, const StateVec& dS) {
  return ops.L * dE + ops.M * dS;
}

// (||L dS||, ||M dE||); both vanish when the degeneracy conditions hold.
inline std::pair<Scalar, Scalar> degeneracy_residual(const GenericOperators& ops, const StateVec& dE,
                                                     const StateVec& dS) {
  return {(ops.L * dS).norm(), (ops.M * dE).norm()};
}

// Per-node normalized rates L dE + M dS for all nodes (n x 12).
StateRows generic_rates(const GenericOutputs& out);

// Squared residuals ||L dS||^2 + ||M dE||^2 per node.
VectorX degeneracy_sq(const GenericOutputs& out);

// Forward Euler in physical units: z + dt * denormalize(L dE + M dS).
// Fixed nodes are then projected back (q = rest, v = 0).
// Throws RolloutDivergence carrying step_index on a non-finite result.
StateField generic_step(const SolidMesh& mesh, const StateField& z, const GenericOutputs& out, Scalar dt,
                        const Normalization& stats, long step_index = 0);

// Same update from precomputed normalized rates.
StateField euler_step(const SolidMesh& mesh, const StateField& z, const StateRows& normalized_rate, Scalar dt,
                      const Normalization& stats, long step_index = 0);

}  // namespace tignn
