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

#include "tignn/interaction.hpp"
#include "tignn/render.hpp"
#include "tignn/training.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tignn {

inline constexpr const char* kWireSchema = "wire/1";

enum class Precision { Float32, Float64 };
enum class PokeDirection { Ray, Normal };

struct BodyConfig {
  std::string name;
  std::string mesh;        // mesh/1 path, "beam:H,W,L,nx,ny,nz" or "bunny"
  std::string checkpoint;  // ckpt/1 path
  render::ModelPose<Scalar> pose;
};

// scene/1
struct SceneConfig {
  std::vector<BodyConfig> bodies;
  render::Camera<Scalar> camera;
  render::PhongMaterial<Scalar> material;
  Vec3 light_dir = Vec3(0.3, 0.5, 1.0).normalized();
  std::optional<Scalar> contact_eps;  // default 0.5 * mean rest edge length
  std::optional<Scalar> contact_k;    // default 2 * poke_magnitude / eps
  Scalar poke_magnitude = 1e5;
  int poke_duration = 10;
  std::optional<Scalar> pick_eps;  // default 0.75 * mean rest edge length
  PokeDirection poke_direction = PokeDirection::Ray;
  std::optional<Scalar> tick_dt;  // default: checkpoint dt
  Scalar tick_hz = 30;            // wall-clock pacing of serve
  Precision precision = Precision::Float32;
  int field_channel = 0;  // Voigt channel colored in frames (0 = sigma_xx)
  Scalar field_lo = -1e4, field_hi = 1e4;

  // Relative paths in body entries are resolved against base_dir.
  std::string base_dir;
};

SceneConfig scene_config_from_json(const nlohmann::json& j, const std::string& base_dir = "");
nlohmann::json to_json(const SceneConfig& c);
SceneConfig load_scene_config(const std::string& path);

// One simulated solid: mesh, model, pose, state and active pokes.
struct Body {
  std::string name;
  SolidMesh mesh;
  GraphTopology topology;
  std::shared_ptr<const Checkpoint> checkpoint;
  render::ModelPose<Scalar> pose;
  StateField state;
  std::vector<interaction::Poke> pokes;
  Points last_contact;  // model-frame contact force of the last tick
};

// Scene state plus the tick loop and message handling. Not thread-safe:
// one thread owns a Session.
class Session {
 public:
  explicit Session(const SceneConfig& config);
  // Bodies built directly (tests, in-process replay).
  Session(const SceneConfig& config, std::vector<Body> bodies);
  ~Session();

  const SceneConfig& config() const { return config_; }
  const std::vector<Body>& bodies() const { return bodies_; }
  std::vector<Body>& bodies() { return bodies_; }
  long tick_index() const { return tick_; }
  Scalar tick_dt() const { return tick_dt_; }
  Scalar contact_eps() const { return contact_eps_; }
  Scalar contact_k() const { return contact_k_; }
  Scalar pick_eps() const { return pick_eps_; }

  nlohmann::json hello() const;
  nlohmann::json frame() const;

  // Parses and applies one wire message; returns the replies to its sender.
  std::vector<nlohmann::json> handle_message(std::string_view text);
  std::vector<nlohmann::json> handle_message(const nlohmann::json& msg);

  // Contact, pokes, learned step, poke expiry; returns the new frame. On
  // rollout divergence the scene is reset and an error message is queued
  // in `notices`.
  nlohmann::json tick(std::vector<nlohmann::json>* notices = nullptr);

  void reset();

  // Sum of all contact forces of the last tick, in world coordinates.
  Vec3 last_contact_total() const { return contact_total_; }
  Scalar last_contact_magnitude() const { return contact_magnitude_; }

 private:
  struct Engine;
  void init();
  std::optional<nlohmann::json> poke(const Vec2& ndc);

  SceneConfig config_;
  std::vector<Body> bodies_;
  std::vector<std::unique_ptr<Engine>> engines_;
  long tick_ = 0;
  Scalar tick_dt_ = 0;
  Scalar contact_eps_ = 0, contact_k_ = 0, pick_eps_ = 0;
  Vec3 contact_total_ = Vec3::Zero();
  Scalar contact_magnitude_ = 0;
};

nlohmann::json wire_error(std::string_view code, std::string_view text);

// replay/1: {"schema", "ticks", "events": [{"tick", "message"}]}. Events
// for tick t are delivered before the t-th tick.
struct ReplayEvent {
  long tick = 0;
  nlohmann::json message;
};
struct ReplayScript {
  long ticks = 0;
  std::vector<ReplayEvent> events;
};

ReplayScript replay_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ReplayScript& s);

struct ReplayResult {
  std::vector<std::string> stream;  // every outgoing message, serialized, in order
  std::uint64_t digest = 0;         // FNV-1a over the stream
  Scalar max_contact_imbalance = 0; // max per-tick |sum of contact forces|
  Scalar max_contact_magnitude = 0;
  std::vector<double> tick_ms;
};

ReplayResult replay(Session& session, const ReplayScript& script);

}  // namespace tignn
