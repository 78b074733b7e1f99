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
#include "tignn/training.hpp"

#include "tignn/generic.hpp"
#include "tignn/io.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace tignn {

void TrainConfig::validate() const {
  if (epochs < 0) throw InvalidArgument("train: epochs must be >= 0");
  if (batch_size < 1) throw InvalidArgument("train: batch_size must be >= 1");
  if (!(learning_rate >= 0)) throw InvalidArgument("train: learning_rate must be >= 0");
  if (!(degeneracy_weight >= 0)) throw InvalidArgument("train: degeneracy_weight must be >= 0");
  if (!(noise >= 0)) throw InvalidArgument("train: noise must be >= 0");
  if (!(dt > 0)) throw InvalidArgument("train: dt must be > 0");
  if (!(split > 0 && split < 1)) throw InvalidArgument("train: split must lie in (0, 1)");
  if (model.hidden < 1 || model.message_steps < 0 || model.mlp_layers < 1)
    throw InvalidArgument("train: invalid model shape");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"degeneracy_weight", c.degeneracy_weight},
          {"noise", c.noise},
          {"seed", c.seed},
          {"hidden", c.model.hidden},
          {"message_steps", c.model.message_steps},
          {"mlp_layers", c.model.mlp_layers},
          {"model_seed", c.model.seed},
          {"dt", c.dt},
          {"split", c.split},
          {"max_seconds", c.max_seconds},
          {"symmetry_augment", c.symmetry_augment}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  if (!j.is_object()) throw SchemaViolation("train config: expected an object");
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.degeneracy_weight = j.value("degeneracy_weight", c.degeneracy_weight);
    c.noise = j.value("noise", c.noise);
    c.seed = j.value("seed", c.seed);
    c.model.hidden = j.value("hidden", c.model.hidden);
    c.model.message_steps = j.value("message_steps", c.model.message_steps);
    c.model.mlp_layers = j.value("mlp_layers", c.model.mlp_layers);
    c.model.seed = j.value("model_seed", c.model.seed);
    c.dt = j.value("dt", c.dt);
    c.split = j.value("split", c.split);
    c.max_seconds = j.value("max_seconds", c.max_seconds);
    c.symmetry_augment = j.value("symmetry_augment", c.symmetry_augment);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaViolation(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

LossTerms loss(const GenericOutputs& out, const StateRows& normalized_target, Scalar lambda_d) {
  if (normalized_target.rows() != out.dE.rows()) throw InvalidArgument("loss: target rows do not match outputs");
  LossTerms t;
  const StateRows rate = generic_rates(out);
  t.data = (rate - normalized_target).squaredNorm() / static_cast<Scalar>(rate.size());
  t.degeneracy = degeneracy_sq(out).mean();
  t.total = t.data + lambda_d * t.degeneracy;
  return t;
}

LossTerms loss(const GenericOutputs& out, const StateField& z_t, const StateField& z_next, Scalar dt,
               Scalar lambda_d, const Normalization& stats) {
  return loss(out, stats.normalize_targets(finite_difference_rate(z_t, z_next, dt)), lambda_d);
}

LossVars record_loss(nn::Tape& tape, TignnModel& model, const SimGraph& g, const StateRows& normalized_target,
                     Scalar lambda_d) {
  const auto r = model.forward(tape, g);
  const nn::Var target = tape.input(normalized_target);
  const nn::Var rate = tape.add(tape.skew_matvec(r.l_params, r.dE), tape.psd_matvec(r.m_params, r.dS));
  const nn::Var diff = tape.sub(rate, target);
  const nn::Var data = tape.mean(tape.mul(diff, diff));
  const nn::Var rl = tape.skew_matvec(r.l_params, r.dS);
  const nn::Var rm = tape.psd_matvec(r.m_params, r.dE);
  // Entry means times 12 give per-node sums of squares averaged over nodes.
  const nn::Var deg = tape.scale(tape.add(tape.mean(tape.mul(rl, rl)), tape.mean(tape.mul(rm, rm))), kStateDim);
  const nn::Var total = tape.add(data, tape.scale(deg, lambda_d));
  return {data, deg, total};
}

namespace {

struct Sample {
  int trajectory;
  int step;
};

// Perturbs q, v and sigma of free nodes by gamma times the RMS one-step
// increment of each channel.
void add_noise(StateField& z, const SolidMesh& mesh, const Normalization& stats, Scalar gamma, Scalar dt,
               std::mt19937_64& rng) {
  std::normal_distribution<Scalar> normal(0.0, 1.0);
  const RowVectorX scale = gamma * dt * stats.target_scale;
  for (int i = 0; i < z.size(); ++i) {
    if (mesh.is_fixed(i)) continue;
    for (int c = 0; c < kStateDim; ++c) z.z(i, c) += scale(c) * normal(rng);
  }
}

}  // namespace

std::vector<MeshSymmetry> mesh_symmetries(const SolidMesh& mesh) {
  const int n = mesh.node_count();
  const Vec3 lo = mesh.rest_positions.colwise().minCoeff().transpose();
  const Vec3 hi = mesh.rest_positions.colwise().maxCoeff().transpose();
  const Vec3 center = 0.5 * (lo + hi);
  const Scalar tol = 1e-9 * std::max((hi - lo).maxCoeff(), Scalar(1));

  // Nodes sorted by coordinates for lookup.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](const Vec3& a, const Vec3& b) {
    for (int c = 0; c < 3; ++c)
      if (std::abs(a(c) - b(c)) > tol) return a(c) < b(c);
    return false;
  };
  auto point = [&](int i) -> Vec3 { return mesh.rest_positions.row(i).transpose(); };
  std::sort(order.begin(), order.end(), [&](int a, int b) { return less(point(a), point(b)); });
  auto find = [&](const Vec3& x) {
    auto it = std::lower_bound(order.begin(), order.end(), x, [&](int i, const Vec3& v) { return less(point(i), v); });
    return it != order.end() && !less(x, point(*it)) ? *it : -1;
  };

  const GraphTopology topo = GraphTopology::from_mesh(mesh);
  std::set<std::pair<int, int>> edges;
  for (std::size_t k = 0; k < topo.senders.size(); ++k) edges.insert({topo.senders[k], topo.receivers[k]});

  std::vector<MeshSymmetry> out;
  std::array<int, 3> axes{0, 1, 2};
  do {
    for (int signs = 0; signs < 8; ++signs) {
      MeshSymmetry sym;
      sym.center = center;
      sym.matrix.setZero();
      for (int r = 0; r < 3; ++r) sym.matrix(r, axes[static_cast<std::size_t>(r)]) = (signs >> r) & 1 ? -1 : 1;
      sym.perm.resize(static_cast<std::size_t>(n));
      bool ok = true;
      for (int i = 0; i < n && ok; ++i) {
        const int j = find(sym.matrix * (point(i) - center) + center);
        sym.perm[static_cast<std::size_t>(i)] = j;
        ok = j >= 0 && mesh.is_fixed(i) == mesh.is_fixed(j);
      }
      for (auto it = edges.begin(); ok && it != edges.end(); ++it)
        ok = edges.count({sym.perm[static_cast<std::size_t>(it->first)], sym.perm[static_cast<std::size_t>(it->second)]}) > 0;
      if (!ok) continue;
      if (sym.matrix.isIdentity(0))
        out.insert(out.begin(), std::move(sym));
      else
        out.push_back(std::move(sym));
    }
  } while (std::next_permutation(axes.begin(), axes.end()));
  return out;
}

Trajectory transform_trajectory(const Trajectory& t, const MeshSymmetry& sym) {
  const Mat3& R = sym.matrix;
  Trajectory out;
  out.dt = t.dt;
  out.load = t.load;
  for (auto& i : out.load.loaded_nodes) i = sym.perm[static_cast<std::size_t>(i)];
  out.load.force_per_node = R * t.load.force_per_node;
  for (const auto& s : t.snapshots) {
    StateField z = s;
    for (int i = 0; i < s.size(); ++i) {
      const auto j = sym.perm[static_cast<std::size_t>(i)];
      z.z.row(j).segment<3>(kQ) = (R * (s.z.row(i).segment<3>(kQ).transpose() - sym.center) + sym.center).transpose();
      z.z.row(j).segment<3>(kV) = (R * s.z.row(i).segment<3>(kV).transpose()).transpose();
      const Mat3 sigma = from_voigt(Vec6(s.z.row(i).segment<6>(kSigma).transpose()));
      z.z.row(j).segment<6>(kSigma) = to_voigt(Mat3(R * sigma * R.transpose())).transpose();
    }
    out.snapshots.push_back(std::move(z));
  }
  return out;
}

TrainResult train(TignnModel& model, const SolidMesh& mesh, std::span<const Trajectory> given,
                  const Normalization& stats, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  std::vector<Trajectory> images;
  if (config.symmetry_augment) {
    const auto syms = mesh_symmetries(mesh);
    for (const auto& t : given)
      for (std::size_t k = 1; k < syms.size(); ++k) images.push_back(transform_trajectory(t, syms[k]));
    images.insert(images.begin(), given.begin(), given.end());
  }
  const std::span<const Trajectory> trajectories = config.symmetry_augment ? std::span<const Trajectory>(images) : given;
  std::vector<Sample> samples;
  for (int k = 0; k < static_cast<int>(trajectories.size()); ++k) {
    const auto& t = trajectories[static_cast<std::size_t>(k)];
    for (const auto& s : t.snapshots)
      if (s.size() != mesh.node_count()) throw InvalidArgument("train: trajectory does not match mesh");
    for (int step = 0; step < t.steps(); ++step) samples.push_back({k, step});
  }
  if (samples.empty()) throw InvalidArgument("train: empty training split");

  const auto start = std::chrono::steady_clock::now();
  const GraphTopology topo = GraphTopology::from_mesh(mesh);
  const int n = mesh.node_count();
  std::mt19937_64 rng(config.seed);
  auto params = model.parameters();
  nn::AdamState adam;
  adam.config.lr = config.learning_rate;

  TrainResult result;
  std::vector<SimGraph> graphs;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(samples.begin(), samples.end(), rng);
    EpochLoss acc;
    acc.epoch = epoch;
    for (std::size_t b = 0; b < samples.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t e = std::min(samples.size(), b + static_cast<std::size_t>(config.batch_size));
      graphs.clear();
      StateRows target(static_cast<Eigen::Index>((e - b) * static_cast<std::size_t>(n)), kStateDim);
      for (std::size_t k = b; k < e; ++k) {
        const auto& traj = trajectories[static_cast<std::size_t>(samples[k].trajectory)];
        const int step = samples[k].step;
        StateField z = traj.snapshots[static_cast<std::size_t>(step)];
        if (config.noise > 0) add_noise(z, mesh, stats, config.noise, traj.dt, rng);
        graphs.push_back(mesh_to_graph(mesh, topo, z, NodalLoads::from_case(traj.load, n, step), stats));
        target.middleRows(static_cast<Eigen::Index>((k - b) * static_cast<std::size_t>(n)), n) =
            stats.normalize_targets(finite_difference_rate(z, traj.snapshots[static_cast<std::size_t>(step) + 1], traj.dt));
      }
      const SimGraph batch = graphs.size() == 1 ? graphs.front() : batch_graphs(graphs);

      for (auto* p : params) p->zero_grad();
      nn::Tape tape;
      const LossVars lv = record_loss(tape, model, batch, target, config.degeneracy_weight);
      const Scalar total = tape.value(lv.total)(0, 0);
      if (!std::isfinite(total))
        throw TrainingDivergence("training diverged at epoch " + std::to_string(epoch) + ", step " +
                                 std::to_string(b / static_cast<std::size_t>(config.batch_size)));
      tape.backward(lv.total);
      nn::adam_step(params, adam);

      const auto w = static_cast<Scalar>(e - b);
      acc.data += w * tape.value(lv.data)(0, 0);
      acc.degeneracy += w * tape.value(lv.degeneracy)(0, 0);
      acc.total += w * total;
    }
    const auto count = static_cast<Scalar>(samples.size());
    acc.data /= count;
    acc.degeneracy /= count;
    acc.total /= count;
    result.history.push_back(acc);
    if (on_epoch) on_epoch(acc);
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (config.max_seconds > 0 && result.seconds > config.max_seconds && epoch < config.epochs) {
      result.stopped_on_time = true;
      break;
    }
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

Trajectory rollout(const TignnModel& model, const SolidMesh& mesh, const StateField& initial, const LoadCase& load,
                   int nt, Scalar dt, const Normalization& stats) {
  if (nt < 0) throw InvalidArgument("rollout: nt must be >= 0");
  if (initial.size() != mesh.node_count()) throw InvalidArgument("rollout: initial state does not match mesh");
  const GraphTopology topo = GraphTopology::from_mesh(mesh);
  Trajectory traj;
  traj.load = load;
  traj.dt = dt;
  traj.snapshots.reserve(static_cast<std::size_t>(nt) + 1);
  traj.snapshots.push_back(initial);
  for (int step = 0; step < nt; ++step) {
    const StateField& z = traj.snapshots.back();
    const SimGraph g = mesh_to_graph(mesh, topo, z, NodalLoads::from_case(load, mesh.node_count(), step), stats);
    traj.snapshots.push_back(generic_step(mesh, z, model.forward(g), dt, stats, step));
  }
  return traj;
}

ErrorReport& ErrorReport::operator+=(const ErrorReport& other) {
  for (int v = 0; v < 3; ++v) {
    errors[v].insert(errors[v].end(), other.errors[v].begin(), other.errors[v].end());
    excluded[v] += other.excluded[v];
  }
  return *this;
}

ErrorReport evaluate(const Trajectory& predicted, const Trajectory& truth) {
  if (predicted.snapshots.size() != truth.snapshots.size())
    throw InvalidArgument("evaluate: trajectories differ in length");
  ErrorReport report;
  constexpr int offset[3] = {kQ, kV, kSigma};
  constexpr int width[3] = {3, 3, 6};
  for (std::size_t t = 1; t < truth.snapshots.size(); ++t) {
    const auto& p = predicted.snapshots[t].z;
    const auto& x = truth.snapshots[t].z;
    if (p.rows() != x.rows()) throw InvalidArgument("evaluate: snapshot " + std::to_string(t) + " sizes differ");
    for (int v = 0; v < 3; ++v) {
      const Scalar denom = x.middleCols(offset[v], width[v]).norm();
      if (denom < 1e-12) {
        ++report.excluded[v];
        continue;
      }
      report.errors[v].push_back((p.middleCols(offset[v], width[v]) - x.middleCols(offset[v], width[v])).norm() /
                                 denom);
    }
  }
  return report;
}

BoxStats boxplot_stats(std::span<const Scalar> values) {
  if (values.empty()) throw InvalidArgument("boxplot: empty sample");
  std::vector<Scalar> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  auto quantile = [&](Scalar p) {
    const Scalar pos = p * static_cast<Scalar>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    const Scalar frac = pos - static_cast<Scalar>(lo);
    return frac == 0 ? s[lo] : s[lo] + frac * (s[hi] - s[lo]);
  };
  BoxStats b;
  b.lq = quantile(0.25);
  b.med = quantile(0.5);
  b.uq = quantile(0.75);
  const Scalar iqr = b.uq - b.lq;
  const Scalar lo_fence = b.lq - 1.5 * iqr, hi_fence = b.uq + 1.5 * iqr;
  b.lw = *std::find_if(s.begin(), s.end(), [&](Scalar x) { return x >= lo_fence; });
  b.uw = *std::find_if(s.rbegin(), s.rend(), [&](Scalar x) { return x <= hi_fence; });
  return b;
}

std::vector<ErrorRow> error_rows(const ErrorReport& report, const std::string& split) {
  std::vector<ErrorRow> rows;
  for (int v = 0; v < 3; ++v) {
    ErrorRow r{kVariableNames[static_cast<std::size_t>(v)], split, {}, static_cast<int>(report.errors[v].size()),
               report.excluded[v]};
    if (!report.errors[v].empty()) r.stats = boxplot_stats(report.errors[v]);
    rows.push_back(r);
  }
  return rows;
}

namespace {

std::string num(Scalar x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

}  // namespace

std::string error_csv(std::span<const ErrorRow> rows) {
  std::ostringstream os;
  os << "variable,split,lw,lq,med,uq,uw,n,excluded\n";
  for (const auto& r : rows)
    os << r.variable << ',' << r.split << ',' << num(r.stats.lw) << ',' << num(r.stats.lq) << ','
       << num(r.stats.med) << ',' << num(r.stats.uq) << ',' << num(r.stats.uw) << ',' << r.n << ',' << r.excluded
       << '\n';
  return os.str();
}

std::string loss_csv(std::span<const EpochLoss> history) {
  std::ostringstream os;
  os << "epoch,data_term,degeneracy_term,total\n";
  for (const auto& h : history)
    os << h.epoch << ',' << num(h.data) << ',' << num(h.degeneracy) << ',' << num(h.total) << '\n';
  return os.str();
}

Scalar degeneracy_rms(const TignnModel& model, const SolidMesh& mesh, std::span<const Trajectory> trajectories,
                      const Normalization& stats) {
  const GraphTopology topo = GraphTopology::from_mesh(mesh);
  Scalar sum = 0;
  long count = 0;
  for (const auto& traj : trajectories) {
    for (int step = 0; step < traj.steps(); ++step) {
      const SimGraph g = mesh_to_graph(mesh, topo, traj.snapshots[static_cast<std::size_t>(step)],
                                       NodalLoads::from_case(traj.load, mesh.node_count(), step), stats);
      const VectorX r = degeneracy_sq(model.forward(g));
      sum += r.sum();
      count += r.size();
    }
  }
  if (count == 0) throw InvalidArgument("degeneracy_rms: no snapshot pairs");
  return std::sqrt(sum / static_cast<Scalar>(count));
}

nlohmann::json checkpoint_to_json(const Checkpoint& c) {
  const nlohmann::json cfg = to_json(c.config);
  return {{"schema", "ckpt/1"},
          {"model", c.model.to_json()},
          {"normalization", to_json(c.stats)},
          {"train_config", cfg},
          {"config_hash", io::hex64(io::fnv1a(cfg.dump()))},
          {"seed", c.config.seed},
          {"dt", c.dt}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  io::expect_schema(j, "ckpt/1", "checkpoint");
  Checkpoint c;
  try {
    c.model = TignnModel::from_json(j.at("model"));
    c.stats = normalization_from_json(j.at("normalization"));
    c.config = train_config_from_json(j.at("train_config"));
    c.dt = j.at("dt").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaViolation(std::string("checkpoint: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw SchemaViolation(std::string("checkpoint: ") + e.what());
  }
  if (!(c.dt > 0)) throw SchemaViolation("checkpoint: dt must be > 0");
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) { io::write_json_atomic(path, checkpoint_to_json(c)); }

Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_json(io::read_json(path)); }

}  // namespace tignn
