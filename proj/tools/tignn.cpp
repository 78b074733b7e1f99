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
// tignn: datagen | train | eval | render | serve

#include "tignn/fem.hpp"
#include "tignn/io.hpp"
#include "tignn/platform.hpp"
#include "tignn/presets.hpp"
#include "tignn/render.hpp"
#include "tignn/server.hpp"
#include "tignn/session.hpp"
#include "tignn/training.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tignn;

namespace {

enum Exit { kOk = 0, kConfigError = 2, kNumericalError = 3, kIoError = 4 };

struct Common {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

class Manifest {
 public:
  Manifest(std::string command, const Common& c) : command_(std::move(command)), out_(c.out) {
    doc_ = {{"schema", "manifest/1"}, {"command", command_}, {"version", kVersion}};
    if (c.seed) doc_["seed"] = *c.seed;
  }
  json& operator[](const char* key) { return doc_[key]; }
  void input(const std::string& role, const std::string& path) { doc_["inputs"][role] = path; }
  void output(const std::string& role, const std::string& path) { doc_["outputs"][role] = path; }
  void write() {
    doc_["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const std::string path = (fs::path(out_) / (command_ + ".manifest.json")).string();
    io::write_json_atomic(path, doc_, 2);
  }

 private:
  std::string command_, out_;
  json doc_ = json::object();
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Preset load_preset(const Common& c) {
  json doc = c.config.empty() ? json::object() : io::read_json(c.config);
  if (!c.preset.empty()) doc["preset"] = c.preset;
  Preset p = preset_from_json(doc);
  if (c.seed) {
    p.data.seed = *c.seed;
    p.train.seed = *c.seed;
    p.train.model.seed = *c.seed;
  }
  return p;
}

std::string out_path(const Common& c, const std::string& name) {
  fs::create_directories(c.out);
  return (fs::path(c.out) / name).string();
}

int cmd_datagen(const Common& c) {
  const Preset p = load_preset(c);
  Manifest m("datagen", c);
  m["config"] = to_json(p);
  std::cerr << "datagen: " << p.name << ", " << p.mesh.node_count() << " nodes, " << p.data.load_positions
            << " cases, nt " << p.data.nt << ", substeps " << fem::substeps_for(p.mesh, p.data.dt) << "\n";
  const fem::Dataset ds = fem::generate_dataset(p.mesh, p.data);
  const std::string mesh_file = out_path(c, "mesh.json");
  const std::string data_file = out_path(c, "dataset.json");
  save_mesh(p.mesh, mesh_file);
  fem::save_dataset(ds, data_file, "mesh.json");
  m.output("mesh", mesh_file);
  m.output("dataset", data_file);
  m["counts"] = {{"train", ds.train.size()}, {"test", ds.test.size()}};
  m.write();
  std::cout << data_file << "\n";
  return kOk;
}

int cmd_train(const Common& c, const std::string& data_file) {
  Preset p = load_preset(c);
  const fem::Dataset ds = fem::load_dataset(data_file);
  p.train.dt = ds.dt;
  Manifest m("train", c);
  m["config"] = to_json(p.train);
  m.input("dataset", data_file);

  const Normalization stats = normalization_stats(ds.mesh, ds.train);
  TignnModel model(p.train.model);
  std::cerr << "train: " << ds.train.size() << " trajectories, " << model.parameter_count() << " parameters, "
            << p.train.epochs << " epochs\n";
  const TrainResult r = train(model, ds.mesh, ds.train, stats, p.train, [](const EpochLoss& e) {
    if (e.epoch % 10 == 0)
      std::fprintf(stderr, "epoch %5d  data %.6e  degeneracy %.6e\n", e.epoch, e.data, e.degeneracy);
  });

  const Checkpoint ckpt{model, stats, p.train, ds.dt};
  const std::string ckpt_file = out_path(c, "checkpoint.json");
  const std::string loss_file = out_path(c, "loss.csv");
  save_checkpoint(ckpt, ckpt_file);
  io::write_text_atomic(loss_file, loss_csv(r.history));
  m.output("checkpoint", ckpt_file);
  m.output("loss", loss_file);
  m["epochs_run"] = r.history.size();
  m["stopped_on_time"] = r.stopped_on_time;
  m["train_seconds"] = r.seconds;
  m.write();
  std::cout << ckpt_file << "\n";
  return kOk;
}

int cmd_eval(const Common& c, const std::string& ckpt_file, const std::string& data_file) {
  const Checkpoint ckpt = load_checkpoint(ckpt_file);
  const fem::Dataset ds = fem::load_dataset(data_file);
  Manifest m("eval", c);
  m.input("checkpoint", ckpt_file);
  m.input("dataset", data_file);

  std::vector<ErrorRow> rows;
  for (const auto& [split, trajs] : {std::pair{"train", &ds.train}, std::pair{"test", &ds.test}}) {
    ErrorReport report;
    for (const auto& t : *trajs)
      report += evaluate(rollout(ckpt.model, ds.mesh, t.snapshots.front(), t.load, t.steps(), t.dt, ckpt.stats), t);
    for (auto& r : error_rows(report, split)) rows.push_back(r);
    m["degeneracy_rms"][split] = degeneracy_rms(ckpt.model, ds.mesh, *trajs, ckpt.stats);
  }
  const std::string csv = error_csv(rows);
  const std::string csv_file = out_path(c, "errors.csv");
  io::write_text_atomic(csv_file, csv);
  m.output("errors", csv_file);
  m.write();
  std::cout << csv;
  return kOk;
}

int cmd_render(const Common& c, const std::string& ckpt_file, const std::string& data_file, int case_index,
               bool no_load, const std::string& scene_file, int size) {
  const Checkpoint ckpt = load_checkpoint(ckpt_file);
  const fem::Dataset ds = fem::load_dataset(data_file);
  std::vector<const Trajectory*> all;
  for (const auto& t : ds.test) all.push_back(&t);
  for (const auto& t : ds.train) all.push_back(&t);
  if (case_index < 0 || case_index >= static_cast<int>(all.size()))
    throw InvalidArgument("render: case " + std::to_string(case_index) + " out of range (0.." +
                          std::to_string(all.size() - 1) + ", test cases first)");
  const Trajectory& truth = *all[static_cast<std::size_t>(case_index)];
  const LoadCase load = no_load ? LoadCase{} : truth.load;

  SceneConfig scene = scene_file.empty() ? single_body_scene(ckpt_file, "beam:10,10,40,2,2,8")
                                         : load_scene_config(scene_file);
  if (scene_file.empty()) {
    const Vec3 lo = ds.mesh.rest_positions.colwise().minCoeff().transpose();
    const Vec3 hi = ds.mesh.rest_positions.colwise().maxCoeff().transpose();
    const Vec3 center = 0.5 * (lo + hi);
    const Scalar extent = (hi - lo).maxCoeff();
    scene.camera = render::look_at<Scalar>(center + Vec3(0.6, -2.0, 0.3) * extent, center, Vec3::UnitZ(),
                                           std::numbers::pi / 3, 1, 1000);
  }
  const Trajectory pred = rollout(ckpt.model, ds.mesh, truth.snapshots.front(), load, truth.steps(), truth.dt, ckpt.stats);

  Scalar peak = 0;
  for (const auto& s : truth.snapshots) peak = std::max(peak, s.sigma().col(scene.field_channel).cwiseAbs().maxCoeff());
  render::RenderSettings rs;
  rs.width = rs.height = size;
  rs.lo = scene_file.empty() ? -(peak > 0 ? peak : 1) : scene.field_lo;
  rs.hi = scene_file.empty() ? (peak > 0 ? peak : 1) : scene.field_hi;
  rs.material = scene.material;
  rs.light_dir = scene.light_dir;

  Manifest m("render", c);
  m.input("checkpoint", ckpt_file);
  m.input("dataset", data_file);
  m["case"] = case_index;
  m["no_load"] = no_load;
  m["field_range"] = {rs.lo, rs.hi};
  json frames = json::array();
  for (std::size_t k = 0; k < pred.snapshots.size(); ++k) {
    const auto& s = pred.snapshots[k];
    render::SurfaceView view;
    view.mesh = &ds.mesh;
    view.positions = Points(s.q());
    view.field.assign(s.sigma().col(scene.field_channel).data(),
                      s.sigma().col(scene.field_channel).data() + s.size());
    const render::Image img = render::render_surfaces(std::span(&view, 1), scene.camera, rs);
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03zu.ppm", k);
    const std::string path = out_path(c, name);
    io::write_text_atomic(path, render::to_ppm(img));
    frames.push_back(path);
  }
  m["outputs"]["frames"] = frames;
  m.write();
  std::cout << frames.size() << " frames in " << c.out << "\n";
  return kOk;
}

int cmd_serve(const Common& c, const std::string& scene_file, const std::string& ckpt_file, int port,
              const std::string& replay_file, const std::string& host) {
  SceneConfig scene;
  if (!scene_file.empty()) {
    scene = load_scene_config(scene_file);
  } else {
    if (ckpt_file.empty()) throw InvalidArgument("serve: need --scene or --checkpoint");
    const std::string which = c.preset.empty() ? "two-beam-scene" : c.preset;
    if (which == "two-beam-scene")
      scene = two_beam_scene(ckpt_file);
    else
      scene = single_body_scene(ckpt_file, make_preset(which).mesh_spec);
  }
  Manifest m("serve", c);
  m["config"] = to_json(scene);
  Session session(scene);

  if (!replay_file.empty()) {
    const ReplayScript script = replay_from_json(io::read_json(replay_file));
    const ReplayResult r = replay(session, script);
    std::string stream;
    for (const auto& line : r.stream) stream += line + "\n";
    const std::string stream_file = out_path(c, "stream.jsonl");
    io::write_text_atomic(stream_file, stream);
    m.input("replay", replay_file);
    m.output("stream", stream_file);
    m["digest"] = io::hex64(r.digest);
    m["max_contact_imbalance"] = r.max_contact_imbalance;
    m.write();
    std::cout << io::hex64(r.digest) << "\n";
    return kOk;
  }

  ServeOptions opt;
  opt.host = host;
  opt.port = static_cast<unsigned short>(port);
  opt.log = &std::cerr;
  fs::create_directories(c.out);
  serve(session, opt);
  m["ticks"] = session.tick_index();
  m["port"] = port;
  m.write();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Thermodynamics-informed graph network simulator for viscoelastic solids"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON config (preset overrides)");
    sub->add_option("--preset", common.preset, "Named preset");
    sub->add_option("--seed", common.seed, "Seed for data, training and model init");
    sub->add_option("--out", common.out, "Output directory")->capture_default_str();
  };

  std::string data_file, ckpt_file, scene_file, replay_file, host = "127.0.0.1";
  int case_index = 0, port = 8765, size = 512;
  bool no_load = false;

  auto* datagen = app.add_subcommand("datagen", "Run the FEM oracle and write a traj/1 dataset");
  add_common(datagen);
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset");
  add_common(train_cmd);
  train_cmd->add_option("--data", data_file, "traj/1 dataset")->required();
  auto* eval = app.add_subcommand("eval", "Roll out a checkpoint and write boxplot error rows");
  add_common(eval);
  eval->add_option("--checkpoint", ckpt_file, "ckpt/1 file")->required();
  eval->add_option("--data", data_file, "traj/1 dataset")->required();
  auto* render_cmd = app.add_subcommand("render", "Render a rollout to PPM frames");
  add_common(render_cmd);
  render_cmd->add_option("--checkpoint", ckpt_file, "ckpt/1 file")->required();
  render_cmd->add_option("--data", data_file, "traj/1 dataset")->required();
  render_cmd->add_option("--case", case_index, "Load case (test cases first)")->capture_default_str();
  render_cmd->add_flag("--no-load", no_load, "Roll out without the external load");
  render_cmd->add_option("--scene", scene_file, "scene/1 file for camera and colormap");
  render_cmd->add_option("--size", size, "Image width and height")->capture_default_str()->check(CLI::Range(16, 4096));
  auto* serve_cmd = app.add_subcommand("serve", "Run the interactive session over WebSocket");
  add_common(serve_cmd);
  serve_cmd->add_option("--scene", scene_file, "scene/1 file");
  serve_cmd->add_option("--checkpoint", ckpt_file, "Checkpoint for preset scenes");
  serve_cmd->add_option("--port", port, "TCP port")->capture_default_str()->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--replay", replay_file, "replay/1 script: run offline and write the frame stream")
      ;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*datagen) return cmd_datagen(common);
    if (*train_cmd) return cmd_train(common, data_file);
    if (*eval) return cmd_eval(common, ckpt_file, data_file);
    if (*render_cmd) return cmd_render(common, ckpt_file, data_file, case_index, no_load, scene_file, size);
    if (*serve_cmd) return cmd_serve(common, scene_file, ckpt_file, port, replay_file, host);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const SchemaViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoError;
  }
  return kOk;
}
