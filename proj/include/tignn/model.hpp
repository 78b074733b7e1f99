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
#include "tignn/nn.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <vector>

namespace tignn {

struct ModelConfig {
  int hidden = 64;      // latent width
  int message_steps = 6;  // K
  int mlp_layers = 2;   // affine layers per MLP
  std::uint64_t seed = 1;
};

// Per-node decoder outputs (normalized space).
struct GenericOutputs {
  MatrixX dE;        // n x 12
  MatrixX dS;        // n x 12
  MatrixX l_params;  // n x 66
  MatrixX m_params;  // n x 78
};

struct ProcessorBlock {
  nn::Mlp edge_update;  // [h_src | h_dst | e] -> hidden
  nn::Mlp node_update;  // [h | sum of incoming e'] -> hidden
};

// Encode-process-decode graph network emitting GENERIC ingredients.
//
// Messages are summed over incoming edges in graph edge order. The first
// edge-update layer is applied blockwise: node blocks at node level and
// then gathered, which is the same affine map as applying it to the
// concatenated edge input.
class TignnModel {
 public:
  TignnModel() = default;
  explicit TignnModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  GenericOutputs forward(const SimGraph& g) const;

  struct Recorded {
    nn::Var dE, dS, l_params, m_params;
  };
  Recorded forward(nn::Tape& tape, const SimGraph& g);

  std::vector<nn::Parameter*> parameters();
  std::size_t parameter_count() const;

  nn::Mlp node_encoder;
  nn::Mlp edge_encoder;
  std::vector<ProcessorBlock> blocks;
  nn::Mlp dE_head;
  nn::Mlp dS_head;
  nn::Mlp l_head;
  nn::Mlp m_head;

  nlohmann::json to_json() const;
  static TignnModel from_json(const nlohmann::json& j);

 private:
  ModelConfig config_;
};

// Inference engine in scalar type T (double or float).
//
// Weights are copied once, transposed and split per input block; all
// intermediate buffers are kept between calls, so repeated forwards on
// graphs of the same size do not allocate.
template <typename T>
class Inference {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Row = Eigen::Matrix<T, 1, Eigen::Dynamic>;

  explicit Inference(const TignnModel& model);

  GenericOutputs forward(const SimGraph& g);

 private:
  struct Dense {
    Mat wt;  // in x out
    Row b;   // empty when the layer carries no bias
  };
  struct Net {
    std::vector<Dense> layers;
    bool tanh = true;
  };
  struct Block {
    Dense src, dst, edge;  // first edge-update layer split by input block
    Net edge_rest;         // remaining edge-update layers
    Dense node_h, node_agg;
    Net node_rest;
  };

  void affine(const Mat& x, const Dense& d, Mat& out) const;
  // Runs layers [first, end) of `net` on the pre-activation held in h; the
  // result is left in h.
  void run_from(const Net& net, std::size_t first, Mat& h);

  ModelConfig config_;
  Net node_encoder_, edge_encoder_;
  std::vector<Block> blocks_;
  Net heads_[4];
  Mat x_, e_, h_, edges_, pre_, ps_, pd_, agg_, tmp_, out_;
};

extern template class Inference<double>;
extern template class Inference<float>;

// Closed-form parameter count for a configuration.
std::size_t parameter_count(const ModelConfig& config);

}  // namespace tignn
