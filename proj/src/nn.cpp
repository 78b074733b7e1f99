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
#include "tignn/nn.hpp"

#include "tignn/generic.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>

namespace tignn::nn {

void check_finite(const Tensor& t, const std::string& what) {
  if (!t.allFinite()) throw TrainingDivergence("non-finite values in " + what);
}

void tanh_inplace(Tensor& x) {
  auto a = x.array();
  a = 1.0 - 2.0 / ((2.0 * a).exp() + 1.0);
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::push(Tensor value, std::function<void(Tape&, int)> back) {
  check_open();
  nodes_.push_back({std::move(value), Tensor(), std::move(back)});
  return {static_cast<int>(nodes_.size()) - 1};
}

void Tape::check_open() const {
  if (consumed_) throw std::logic_error("tape: trace already consumed by backward()");
}

Tensor& Tape::grad_ref(int id) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::input(Tensor value) { return push(std::move(value), nullptr); }

const Tensor& Tape::value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value; }

const Tensor& Tape::grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).grad; }

Var Tape::affine(Var x, Parameter& weight, Parameter* bias, int col_offset) {
  const Tensor& xv = value(x);
  if (col_offset < 0 || col_offset + xv.cols() > weight.value.cols()) {
    throw InvalidArgument("affine: input width " + std::to_string(xv.cols()) + " at offset " +
                          std::to_string(col_offset) + " does not fit weight " + std::to_string(weight.value.rows()) +
                          "x" + std::to_string(weight.value.cols()));
  }
  const auto in = xv.cols();
  Tensor y(xv.rows(), weight.value.rows());
  y.noalias() = xv * weight.value.middleCols(col_offset, in).transpose();
  if (bias) y.rowwise() += bias->value.row(0);
  Parameter* w = &weight;
  return push(std::move(y), [x, w, bias, col_offset, in](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Tensor& xv = t.nodes_[static_cast<std::size_t>(x.id)].value;
    if (w->grad.size() == 0) w->zero_grad();
    w->grad.middleCols(col_offset, in).noalias() += g.transpose() * xv;
    if (bias) {
      if (bias->grad.size() == 0) bias->zero_grad();
      bias->grad.row(0) += g.colwise().sum();
    }
    t.grad_ref(x.id).noalias() += g * w->value.middleCols(col_offset, in);
  });
}

Var Tape::tanh(Var x) {
  Tensor y = value(x);
  tanh_inplace(y);
  return push(std::move(y), [x](Tape& t, int self) {
    const auto& node = t.nodes_[static_cast<std::size_t>(self)];
    t.grad_ref(x.id).array() += node.grad.array() * (1.0 - node.value.array().square());
  });
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}
}  // namespace

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  return push(value(a) + value(b), [a, b](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    t.grad_ref(a.id) += g;
    t.grad_ref(b.id) += g;
  });
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  return push(value(a) - value(b), [a, b](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    t.grad_ref(a.id) += g;
    t.grad_ref(b.id) -= g;
  });
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  return push(value(a).cwiseProduct(value(b)), [a, b](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    t.grad_ref(a.id) += g.cwiseProduct(bv);
    t.grad_ref(b.id) += g.cwiseProduct(av);
  });
}

Var Tape::scale(Var a, Scalar s) {
  return push(value(a) * s, [a, s](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    t.grad_ref(a.id) += s * g;
  });
}

Var Tape::sum(Var a) {
  Tensor y(1, 1);
  y(0, 0) = value(a).sum();
  return push(std::move(y), [a](Tape& t, int self) {
    t.grad_ref(a.id).array() += t.nodes_[static_cast<std::size_t>(self)].grad(0, 0);
  });
}

Var Tape::mean(Var a) {
  const auto count = static_cast<Scalar>(value(a).size());
  Tensor y(1, 1);
  y(0, 0) = value(a).sum() / count;
  return push(std::move(y), [a, count](Tape& t, int self) {
    t.grad_ref(a.id).array() += t.nodes_[static_cast<std::size_t>(self)].grad(0, 0) / count;
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols: no inputs");
  const auto rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw InvalidArgument("concat_cols: row count mismatch");
    cols += value(p).cols();
  }
  Tensor y(rows, cols);
  Eigen::Index off = 0;
  for (Var p : parts) {
    y.middleCols(off, value(p).cols()) = value(p);
    off += value(p).cols();
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return push(std::move(y), [ids](Tape& t, int self) {
    Eigen::Index off = 0;
    for (Var p : ids) {
      const auto w = t.value(p).cols();
      t.grad_ref(p.id) += t.nodes_[static_cast<std::size_t>(self)].grad.middleCols(off, w);
      off += w;
    }
  });
}

Var Tape::gather_rows(Var a, std::span<const int> index) {
  const Tensor& av = value(a);
  Tensor y(static_cast<Eigen::Index>(index.size()), av.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= av.rows()) throw InvalidArgument("gather_rows: index out of range");
    y.row(static_cast<Eigen::Index>(k)) = av.row(index[k]);
  }
  std::vector<int> idx(index.begin(), index.end());
  return push(std::move(y), [a, idx = std::move(idx)](Tape& t, int self) {
    Tensor& ga = t.grad_ref(a.id);
    const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    for (std::size_t k = 0; k < idx.size(); ++k) ga.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
  });
}

Var Tape::scatter_sum_rows(Var a, std::span<const int> index, int rows) {
  const Tensor& av = value(a);
  if (static_cast<Eigen::Index>(index.size()) != av.rows()) throw InvalidArgument("scatter_sum_rows: index size");
  Tensor y = Tensor::Zero(rows, av.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= rows) throw InvalidArgument("scatter_sum_rows: index out of range");
    y.row(index[k]) += av.row(static_cast<Eigen::Index>(k));
  }
  std::vector<int> idx(index.begin(), index.end());
  return push(std::move(y), [a, idx = std::move(idx)](Tape& t, int self) {
    Tensor& ga = t.grad_ref(a.id);
    const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    for (std::size_t k = 0; k < idx.size(); ++k) ga.row(static_cast<Eigen::Index>(k)) += g.row(idx[k]);
  });
}

Var Tape::skew_matvec(Var l_params, Var x) {
  const Tensor& lp = value(l_params);
  const Tensor& xv = value(x);
  if (lp.cols() != kSkewParams || xv.cols() != kStateDim || lp.rows() != xv.rows())
    throw InvalidArgument("skew_matvec: expected n x 66 and n x 12");
  Tensor y(xv.rows(), kStateDim);
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const StateMat L = assemble_L(lp.row(i).transpose());
    y.row(i) = (L * xv.row(i).transpose()).transpose();
  }
  return push(std::move(y), [l_params, x](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Tensor& lp = t.value(l_params);
    const Tensor& xv = t.value(x);
    Tensor& gl = t.grad_ref(l_params.id);
    Tensor& gx = t.grad_ref(x.id);
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
      const StateMat L = assemble_L(lp.row(i).transpose());
      const StateVec gi = g.row(i).transpose();
      const StateVec xi = xv.row(i).transpose();
      gx.row(i) += (L.transpose() * gi).transpose();
      int k = 0;
      for (int r = 1; r < kStateDim; ++r)
        for (int c = 0; c < r; ++c, ++k) gl(i, k) += gi(r) * xi(c) - gi(c) * xi(r);
    }
  });
}

Var Tape::psd_matvec(Var m_params, Var x) {
  const Tensor& mp = value(m_params);
  const Tensor& xv = value(x);
  if (mp.cols() != kPsdParams || xv.cols() != kStateDim || mp.rows() != xv.rows())
    throw InvalidArgument("psd_matvec: expected n x 78 and n x 12");
  Tensor y(xv.rows(), kStateDim);
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const StateMat A = assemble_factor(mp.row(i).transpose());
    const StateVec u = A.transpose() * xv.row(i).transpose();
    y.row(i) = (A * u).transpose();
  }
  return push(std::move(y), [m_params, x](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Tensor& mp = t.value(m_params);
    const Tensor& xv = t.value(x);
    Tensor& gm = t.grad_ref(m_params.id);
    Tensor& gx = t.grad_ref(x.id);
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
      const StateMat A = assemble_factor(mp.row(i).transpose());
      const StateVec gi = g.row(i).transpose();
      const StateVec xi = xv.row(i).transpose();
      const StateVec u = A.transpose() * xi;
      const StateVec w = A.transpose() * gi;
      gx.row(i) += (A * w).transpose();
      int k = 0;
      for (int r = 0; r < kStateDim; ++r)
        for (int c = 0; c <= r; ++c, ++k) gm(i, k) += gi(r) * u(c) + xi(r) * w(c);
    }
  });
}

void Tape::backward(Var out, const Tensor& upstream) {
  check_open();
  const Tensor& ov = value(out);
  if (upstream.rows() != ov.rows() || upstream.cols() != ov.cols())
    throw InvalidArgument("backward: upstream gradient shape does not match output");
  consumed_ = true;
  grad_ref(out.id) += upstream;
  for (int id = out.id; id >= 0; --id) {
    auto& node = nodes_[static_cast<std::size_t>(id)];
    if (node.back && node.grad.size() != 0) node.back(*this, id);
  }
}

void Tape::backward(Var scalar_out) {
  if (value(scalar_out).size() != 1) throw InvalidArgument("backward: output is not a scalar");
  backward(scalar_out, Tensor::Ones(1, 1));
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(std::string name, std::vector<int> widths, std::mt19937_64& rng, Activation hidden)
    : widths_(std::move(widths)), activation_(hidden) {
  if (widths_.size() < 2) throw InvalidArgument("mlp: need at least input and output widths");
  for (int w : widths_)
    if (w < 1) throw InvalidArgument("mlp: widths must be positive");
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int in = widths_[l], out = widths_[l + 1];
    const Scalar a = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<Scalar> dist(-a, a);
    Linear layer;
    layer.weight.name = name + ".l" + std::to_string(l) + ".w";
    layer.bias.name = name + ".l" + std::to_string(l) + ".b";
    layer.weight.value.resize(out, in);
    for (Eigen::Index i = 0; i < layer.weight.value.size(); ++i) layer.weight.value.data()[i] = dist(rng);
    layer.bias.value = Tensor::Zero(1, out);
    layer.weight.zero_grad();
    layer.bias.zero_grad();
    layers_.push_back(std::move(layer));
  }
}

int Mlp::input_size() const { return widths_.empty() ? 0 : widths_.front(); }
int Mlp::output_size() const { return widths_.empty() ? 0 : widths_.back(); }

Tensor Mlp::apply(const Tensor& x) const {
  if (x.cols() != input_size()) {
    throw InvalidArgument("mlp: input has " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                          ", expected width " + std::to_string(input_size()));
  }
  Tensor pre(x.rows(), layers_.front().weight.value.rows());
  pre.noalias() = x * layers_.front().weight.value.transpose();
  pre.rowwise() += layers_.front().bias.value.row(0);
  return apply_from(std::move(pre), 1);
}

Tensor Mlp::apply_from(Tensor pre, int first) const {
  Tensor h = std::move(pre);
  for (std::size_t l = static_cast<std::size_t>(first); l <= layers_.size(); ++l) {
    if (l == layers_.size()) break;
    if (activation_ == Activation::Tanh) tanh_inplace(h);
    Tensor next(h.rows(), layers_[l].weight.value.rows());
    next.noalias() = h * layers_[l].weight.value.transpose();
    next.rowwise() += layers_[l].bias.value.row(0);
    h = std::move(next);
  }
  return h;
}

Var Mlp::forward(Tape& tape, Var x) {
  if (tape.value(x).cols() != input_size()) {
    throw InvalidArgument("mlp: input has " + std::to_string(tape.value(x).rows()) + "x" +
                          std::to_string(tape.value(x).cols()) + ", expected width " + std::to_string(input_size()));
  }
  Var pre = tape.affine(x, layers_.front().weight, &layers_.front().bias);
  return forward_from(tape, pre, 1);
}

Var Mlp::forward_from(Tape& tape, Var pre, int first) {
  Var h = pre;
  for (std::size_t l = static_cast<std::size_t>(first); l < layers_.size(); ++l) {
    if (activation_ == Activation::Tanh) h = tape.tanh(h);
    h = tape.affine(h, layers_[l].weight, &layers_[l].bias);
  }
  return h;
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.value.size() + l.bias.value.size());
  return n;
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) {
    const auto& w = l.weight.value;
    const auto& b = l.bias.value;
    layers.push_back({{"weight", std::vector<double>(w.data(), w.data() + w.size())},
                      {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  return {{"widths", widths_},
          {"activation", activation_ == Activation::Tanh ? "tanh" : "identity"},
          {"layers", std::move(layers)}};
}

Mlp Mlp::from_json(const nlohmann::json& j, const std::string& name) {
  Mlp m;
  try {
    m.widths_ = j.at("widths").get<std::vector<int>>();
    m.activation_ = j.at("activation").get<std::string>() == "identity" ? Activation::Identity : Activation::Tanh;
    const auto& layers = j.at("layers");
    if (m.widths_.size() < 2 || layers.size() + 1 != m.widths_.size())
      throw SchemaViolation(name + ": layer count does not match widths");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const int in = m.widths_[l], out = m.widths_[l + 1];
      const auto w = layers[l].at("weight").get<std::vector<double>>();
      const auto b = layers[l].at("bias").get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(in * out) || b.size() != static_cast<std::size_t>(out))
        throw SchemaViolation(name + ".layers[" + std::to_string(l) + "]: wrong weight size");
      Linear layer;
      layer.weight.name = name + ".l" + std::to_string(l) + ".w";
      layer.bias.name = name + ".l" + std::to_string(l) + ".b";
      layer.weight.value = Eigen::Map<const Tensor>(w.data(), out, in);
      layer.bias.value = Eigen::Map<const Tensor>(b.data(), 1, out);
      layer.weight.zero_grad();
      layer.bias.zero_grad();
      m.layers_.push_back(std::move(layer));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaViolation(name + ": " + e.what());
  }
  return m;
}

MlpTrace mlp_forward(Mlp& net, const Tensor& x) {
  MlpTrace tr;
  tr.input = tr.tape.input(x);
  tr.output = net.forward(tr.tape, tr.input);
  return tr;
}

// ---------------------------------------------------------------------------
// Adam

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.m.size() != params.size()) throw InvalidArgument("adam: parameter list changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter* p = params[i];
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols())
      throw InvalidArgument("adam: gradient shape mismatch for " + p->name);
    if (!p->grad.allFinite()) throw TrainingDivergence("non-finite gradient for parameter " + p->name);
  }
  ++state.step;
  const auto& c = state.config;
  const Scalar bc1 = 1 - std::pow(c.beta1, static_cast<Scalar>(state.step));
  const Scalar bc2 = 1 - std::pow(c.beta2, static_cast<Scalar>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter* p = params[i];
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    const auto g = p->grad.array();
    m = c.beta1 * m + (1 - c.beta1) * g;
    v = c.beta2 * v + (1 - c.beta2) * g.square();
    p->value.array() -= c.lr * (m / bc1) / ((v / bc2).sqrt() + c.eps);
  }
}

}  // namespace tignn::nn
