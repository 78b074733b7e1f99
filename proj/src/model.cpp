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
#include "tignn/model.hpp"

#include <nlohmann/json.hpp>

namespace tignn {

namespace {

std::vector<int> widths(int in, int hidden, int out, int layers) {
  std::vector<int> w{in};
  for (int l = 1; l < layers; ++l) w.push_back(hidden);
  w.push_back(out);
  return w;
}

void validate(const ModelConfig& c) {
  if (c.hidden < 1) throw InvalidArgument("model: hidden width must be >= 1");
  if (c.message_steps < 0) throw InvalidArgument("model: message_steps must be >= 0");
  if (c.mlp_layers < 1) throw InvalidArgument("model: mlp_layers must be >= 1");
}

std::size_t mlp_count(const std::vector<int>& w) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) n += static_cast<std::size_t>(w[l] * w[l + 1] + w[l + 1]);
  return n;
}

void check_widths(const SimGraph& g) {
  if (g.node_features.cols() != kNodeFeatures || g.edge_features.cols() != kEdgeFeatures)
    throw InvalidArgument("model: graph feature widths do not match (expected 15 and 4)");
}

template <typename M>
void tanh_in_place(M& x) {
  auto a = x.array();
  a = typename M::Scalar(1) - typename M::Scalar(2) / ((typename M::Scalar(2) * a).exp() + typename M::Scalar(1));
}

}  // namespace

TignnModel::TignnModel(const ModelConfig& config) : config_(config) {
  validate(config);
  std::mt19937_64 rng(config.seed);
  const int h = config.hidden, L = config.mlp_layers;
  node_encoder = nn::Mlp("node_encoder", widths(kNodeFeatures, h, h, L), rng);
  edge_encoder = nn::Mlp("edge_encoder", widths(kEdgeFeatures, h, h, L), rng);
  for (int k = 0; k < config.message_steps; ++k) {
    const std::string p = "block" + std::to_string(k);
    blocks.push_back({nn::Mlp(p + ".edge", widths(3 * h, h, h, L), rng),
                      nn::Mlp(p + ".node", widths(2 * h, h, h, L), rng)});
  }
  dE_head = nn::Mlp("dE_head", widths(h, h, kStateDim, L), rng);
  dS_head = nn::Mlp("dS_head", widths(h, h, kStateDim, L), rng);
  l_head = nn::Mlp("l_head", widths(h, h, kSkewParams, L), rng);
  m_head = nn::Mlp("m_head", widths(h, h, kPsdParams, L), rng);
}

GenericOutputs TignnModel::forward(const SimGraph& g) const { return Inference<double>(*this).forward(g); }

TignnModel::Recorded TignnModel::forward(nn::Tape& tape, const SimGraph& g) {
  check_widths(g);
  const int h = config_.hidden;
  nn::Var H = node_encoder.forward(tape, tape.input(g.node_features));
  nn::Var E = edge_encoder.forward(tape, tape.input(g.edge_features));
  for (auto& block : blocks) {
    auto& first = block.edge_update.layers().front();
    const nn::Var ps = tape.affine(H, first.weight, nullptr, 0);
    const nn::Var pd = tape.affine(H, first.weight, nullptr, h);
    const nn::Var pe = tape.affine(E, first.weight, &first.bias, 2 * h);
    const nn::Var pre = tape.add(tape.add(tape.gather_rows(ps, g.senders), tape.gather_rows(pd, g.receivers)), pe);
    E = tape.add(E, block.edge_update.forward_from(tape, pre, 1));
    const nn::Var agg = tape.scatter_sum_rows(E, g.receivers, g.n_vertices);
    const nn::Var parts[] = {H, agg};
    H = tape.add(H, block.node_update.forward(tape, tape.concat_cols(parts)));
  }
  return {dE_head.forward(tape, H), dS_head.forward(tape, H), l_head.forward(tape, H), m_head.forward(tape, H)};
}

std::vector<nn::Parameter*> TignnModel::parameters() {
  std::vector<nn::Parameter*> out;
  auto add = [&](nn::Mlp& m) {
    for (auto* p : m.parameters()) out.push_back(p);
  };
  add(node_encoder);
  add(edge_encoder);
  for (auto& b : blocks) {
    add(b.edge_update);
    add(b.node_update);
  }
  add(dE_head);
  add(dS_head);
  add(l_head);
  add(m_head);
  return out;
}

std::size_t TignnModel::parameter_count() const {
  std::size_t n = node_encoder.parameter_count() + edge_encoder.parameter_count();
  for (const auto& b : blocks) n += b.edge_update.parameter_count() + b.node_update.parameter_count();
  return n + dE_head.parameter_count() + dS_head.parameter_count() + l_head.parameter_count() +
         m_head.parameter_count();
}

std::size_t parameter_count(const ModelConfig& c) {
  validate(c);
  const int h = c.hidden, L = c.mlp_layers;
  std::size_t n = mlp_count(widths(kNodeFeatures, h, h, L)) + mlp_count(widths(kEdgeFeatures, h, h, L));
  n += static_cast<std::size_t>(c.message_steps) *
       (mlp_count(widths(3 * h, h, h, L)) + mlp_count(widths(2 * h, h, h, L)));
  n += 2 * mlp_count(widths(h, h, kStateDim, L));
  n += mlp_count(widths(h, h, kSkewParams, L)) + mlp_count(widths(h, h, kPsdParams, L));
  return n;
}

nlohmann::json TignnModel::to_json() const {
  nlohmann::json b = nlohmann::json::array();
  for (const auto& blk : blocks) b.push_back({{"edge_update", blk.edge_update.to_json()}, {"node_update", blk.node_update.to_json()}});
  return {{"config",
           {{"hidden", config_.hidden},
            {"message_steps", config_.message_steps},
            {"mlp_layers", config_.mlp_layers},
            {"seed", config_.seed}}},
          {"node_encoder", node_encoder.to_json()},
          {"edge_encoder", edge_encoder.to_json()},
          {"blocks", std::move(b)},
          {"dE_head", dE_head.to_json()},
          {"dS_head", dS_head.to_json()},
          {"l_head", l_head.to_json()},
          {"m_head", m_head.to_json()}};
}

TignnModel TignnModel::from_json(const nlohmann::json& j) {
  TignnModel m;
  try {
    const auto& c = j.at("config");
    m.config_.hidden = c.at("hidden").get<int>();
    m.config_.message_steps = c.at("message_steps").get<int>();
    m.config_.mlp_layers = c.at("mlp_layers").get<int>();
    m.config_.seed = c.at("seed").get<std::uint64_t>();
    validate(m.config_);
    m.node_encoder = nn::Mlp::from_json(j.at("node_encoder"), "node_encoder");
    m.edge_encoder = nn::Mlp::from_json(j.at("edge_encoder"), "edge_encoder");
    int k = 0;
    for (const auto& b : j.at("blocks")) {
      const std::string p = "block" + std::to_string(k++);
      m.blocks.push_back({nn::Mlp::from_json(b.at("edge_update"), p + ".edge"),
                          nn::Mlp::from_json(b.at("node_update"), p + ".node")});
    }
    m.dE_head = nn::Mlp::from_json(j.at("dE_head"), "dE_head");
    m.dS_head = nn::Mlp::from_json(j.at("dS_head"), "dS_head");
    m.l_head = nn::Mlp::from_json(j.at("l_head"), "l_head");
    m.m_head = nn::Mlp::from_json(j.at("m_head"), "m_head");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaViolation(std::string("model: ") + e.what());
  }
  if (static_cast<int>(m.blocks.size()) != m.config_.message_steps)
    throw SchemaViolation("model: block count does not match message_steps");
  const int h = m.config_.hidden;
  if (m.node_encoder.input_size() != kNodeFeatures || m.edge_encoder.input_size() != kEdgeFeatures ||
      m.dE_head.output_size() != kStateDim || m.dS_head.output_size() != kStateDim ||
      m.l_head.output_size() != kSkewParams || m.m_head.output_size() != kPsdParams || m.dE_head.input_size() != h)
    throw SchemaViolation("model: layer widths inconsistent with config");
  return m;
}

template <typename T>
Inference<T>::Inference(const TignnModel& model) : config_(model.config()) {
  const int h = config_.hidden;
  auto dense = [](const Eigen::Ref<const MatrixX>& w, const nn::Tensor* b) {
    Dense d;
    d.wt = w.transpose().template cast<T>();
    if (b) d.b = b->row(0).template cast<T>();
    return d;
  };
  auto net = [&](const nn::Mlp& m, std::size_t first) {
    Net n;
    n.tanh = m.activation() == nn::Activation::Tanh;
    for (std::size_t l = first; l < m.layers().size(); ++l)
      n.layers.push_back(dense(m.layers()[l].weight.value, &m.layers()[l].bias.value));
    return n;
  };
  node_encoder_ = net(model.node_encoder, 0);
  edge_encoder_ = net(model.edge_encoder, 0);
  for (const auto& b : model.blocks) {
    Block blk;
    const auto& e0 = b.edge_update.layers().front();
    blk.src = dense(e0.weight.value.middleCols(0, h), nullptr);
    blk.dst = dense(e0.weight.value.middleCols(h, h), nullptr);
    blk.edge = dense(e0.weight.value.middleCols(2 * h, h), &e0.bias.value);
    blk.edge_rest = net(b.edge_update, 1);
    const auto& n0 = b.node_update.layers().front();
    blk.node_h = dense(n0.weight.value.middleCols(0, h), &n0.bias.value);
    blk.node_agg = dense(n0.weight.value.middleCols(h, h), nullptr);
    blk.node_rest = net(b.node_update, 1);
    blocks_.push_back(std::move(blk));
  }
  heads_[0] = net(model.dE_head, 0);
  heads_[1] = net(model.dS_head, 0);
  heads_[2] = net(model.l_head, 0);
  heads_[3] = net(model.m_head, 0);
}

template <typename T>
void Inference<T>::affine(const Mat& x, const Dense& d, Mat& out) const {
  out.resize(x.rows(), d.wt.cols());
  out.noalias() = x * d.wt;
  if (d.b.size() > 0) out.rowwise() += d.b;
}

template <typename T>
void Inference<T>::run_from(const Net& net, std::size_t first, Mat& h) {
  for (std::size_t l = first; l < net.layers.size(); ++l) {
    if (net.tanh) tanh_in_place(h);
    affine(h, net.layers[l], tmp_);
    h.swap(tmp_);
  }
}

template <typename T>
GenericOutputs Inference<T>::forward(const SimGraph& g) {
  check_widths(g);
  const auto n = static_cast<Eigen::Index>(g.n_vertices);
  const auto m = static_cast<Eigen::Index>(g.senders.size());
  if (g.node_features.rows() != n || g.edge_features.rows() != m || g.receivers.size() != g.senders.size())
    throw InvalidArgument("model: graph arrays are inconsistent");

  // Node and edge rows padded to a multiple of 8; padded rows are dropped.
  auto padded = [](Eigen::Index r) { return (r + 7) / 8 * 8; };
  x_.setZero(padded(n), g.node_features.cols());
  x_.topRows(n) = g.node_features.cast<T>();
  affine(x_, node_encoder_.layers.front(), h_);
  run_from(node_encoder_, 1, h_);
  e_.setZero(padded(m), g.edge_features.cols());
  e_.topRows(m) = g.edge_features.cast<T>();
  affine(e_, edge_encoder_.layers.front(), edges_);
  run_from(edge_encoder_, 1, edges_);

  for (const auto& blk : blocks_) {
    affine(h_, blk.src, ps_);
    affine(h_, blk.dst, pd_);
    affine(edges_, blk.edge, pre_);
    for (Eigen::Index k = 0; k < m; ++k)
      pre_.row(k) += ps_.row(g.senders[static_cast<std::size_t>(k)]) + pd_.row(g.receivers[static_cast<std::size_t>(k)]);
    run_from(blk.edge_rest, 0, pre_);
    edges_ += pre_;

    agg_.setZero(h_.rows(), edges_.cols());
    for (Eigen::Index k = 0; k < m; ++k) agg_.row(g.receivers[static_cast<std::size_t>(k)]) += edges_.row(k);
    affine(h_, blk.node_h, pre_);
    pre_.noalias() += agg_ * blk.node_agg.wt;
    run_from(blk.node_rest, 0, pre_);
    h_ += pre_;
  }

  GenericOutputs out;
  MatrixX* dst[4] = {&out.dE, &out.dS, &out.l_params, &out.m_params};
  for (int k = 0; k < 4; ++k) {
    affine(h_, heads_[k].layers.front(), out_);
    run_from(heads_[k], 1, out_);
    *dst[k] = out_.topRows(n).template cast<Scalar>();
  }
  return out;
}

template class Inference<double>;
template class Inference<float>;

}  // namespace tignn
