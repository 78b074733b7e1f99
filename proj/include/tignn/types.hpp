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

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tignn {

using Scalar = double;

using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
using Vec4 = Eigen::Matrix<Scalar, 4, 1>;
using Vec6 = Eigen::Matrix<Scalar, 6, 1>;
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
using Mat4 = Eigen::Matrix<Scalar, 4, 4>;

// Row-major dense matrix. One row per item (node, edge, sample).
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;
using IndexMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Triangles = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

// Per-node state z = (q, v, sigma): 3 + 3 + 6.
inline constexpr int kStateDim = 12;
inline constexpr int kSkewParams = kStateDim * (kStateDim - 1) / 2;  // 66
inline constexpr int kPsdParams = kStateDim * (kStateDim + 1) / 2;   // 78

using StateVec = Eigen::Matrix<Scalar, kStateDim, 1>;
using StateMat = Eigen::Matrix<Scalar, kStateDim, kStateDim>;
using StateRows = Eigen::Matrix<Scalar, Eigen::Dynamic, kStateDim, Eigen::RowMajor>;

// Voigt order: xx, yy, zz, xy, yz, xz.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 6, 1> to_voigt(const Eigen::MatrixBase<Derived>& t) {
  Eigen::Matrix<typename Derived::Scalar, 6, 1> v;
  v << t(0, 0), t(1, 1), t(2, 2), t(0, 1), t(1, 2), t(0, 2);
  return v;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 3> from_voigt(const Eigen::MatrixBase<Derived>& v) {
  Eigen::Matrix<typename Derived::Scalar, 3, 3> t;
  t << v(0), v(3), v(5),
       v(3), v(1), v(4),
       v(5), v(4), v(2);
  return t;
}

// Error taxonomy. The CLI maps these onto exit codes.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SchemaViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateElement : NumericalFailure {
  DegenerateElement(int element, const std::string& what)
      : NumericalFailure(what), element_id(element) {}
  int element_id;
};

struct InvertedElement : NumericalFailure {
  InvertedElement(int element, long step, const std::string& what)
      : NumericalFailure(what), element_id(element), step_index(step) {}
  int element_id;
  long step_index;
};

struct RolloutDivergence : NumericalFailure {
  RolloutDivergence(long step, const std::string& what)
      : NumericalFailure(what), step_index(step) {}
  long step_index;
};

struct TrainingDivergence : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

}  // namespace tignn
