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

#include <nlohmann/json_fwd.hpp>

#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

// Dense layers, a recording tape for reverse-mode gradients, and Adam.
namespace tignn::nn {

// Row-major 2-D tensor, one row per item.
using Tensor = MatrixX;

// Throws TrainingDivergence naming `what` if any entry is NaN or infinite.
void check_finite(const Tensor& t, const std::string& what);

// tanh evaluated through the vectorized exponential.
void tanh_inplace(Tensor& x);

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

struct Var {
  int id = -1;
};

// Records a forward computation and replays it backwards once.
//
// Parameters are not copied onto the tape: ops that read a Parameter
// accumulate straight into Parameter::grad during backward().
class Tape {
 public:
  Var input(Tensor value);

  const Tensor& value(Var v) const;
  // Gradient of the backward() seed w.r.t. v; zero-sized until backward().
  const Tensor& grad(Var v) const;

  // y = x * W[:, off:off+cols(x)]^T (+ b).
  Var affine(Var x, Parameter& weight, Parameter* bias, int col_offset = 0);
  Var tanh(Var x);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, Scalar s);
  Var sum(Var a);   // 1x1
  Var mean(Var a);  // 1x1
  Var concat_cols(std::span<const Var> parts);
  Var gather_rows(Var a, std::span<const int> index);
  Var scatter_sum_rows(Var a, std::span<const int> index, int rows);

  // Per-row structured products with a 12x12 operator assembled from the
  // row's parameters: skew L from 66 values, PSD M = A A^T from 78 values.
  Var skew_matvec(Var l_params, Var x);
  Var psd_matvec(Var m_params, Var x);

  // Seeds d(out) = upstream and runs the recorded ops in reverse.
  // A tape can be replayed once; a second call throws std::logic_error.
  void backward(Var out, const Tensor& upstream);
  void backward(Var scalar_out);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&, int)> back;
  };

  Var push(Tensor value, std::function<void(Tape&, int)> back);
  Tensor& grad_ref(int id);
  void check_open() const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

enum class Activation { Tanh, Identity };

struct Linear {
  Parameter weight;  // out x in
  Parameter bias;    // 1 x out
};

// Shared multilayer perceptron; hidden activation, identity output.
class Mlp {
 public:
  Mlp() = default;
  // Glorot-uniform weights, zero biases.
  Mlp(std::string name, std::vector<int> widths, std::mt19937_64& rng, Activation hidden = Activation::Tanh);

  int input_size() const;
  int output_size() const;
  const std::vector<int>& widths() const { return widths_; }
  Activation activation() const { return activation_; }

  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }

  // Plain evaluation.
  Tensor apply(const Tensor& x) const;
  // Continues from the pre-activation output of layer `first - 1`.
  Tensor apply_from(Tensor pre, int first) const;

  // Recorded evaluation. Non-const: backward() writes parameter gradients.
  Var forward(Tape& tape, Var x);
  Var forward_from(Tape& tape, Var pre, int first);

  std::vector<Parameter*> parameters();
  std::size_t parameter_count() const;

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j, const std::string& name);

 private:
  std::vector<int> widths_;
  Activation activation_ = Activation::Tanh;
  std::vector<Linear> layers_;
};

// Convenience wrapper: recorded forward, then backward, for one MLP.
struct MlpTrace {
  Tape tape;
  Var input;
  Var output;
};
MlpTrace mlp_forward(Mlp& net, const Tensor& x);

struct AdamConfig {
  Scalar lr = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;
};

// Bias-corrected Adam. Throws TrainingDivergence on a non-finite gradient.
void adam_step(std::span<Parameter* const> params, AdamState& state);

}  // namespace tignn::nn
