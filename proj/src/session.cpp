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
#include "tignn/session.hpp"

#include "tignn/generic.hpp"
#include "tignn/io.hpp"
#include "tignn/presets.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

namespace tignn {

using nlohmann::json;

namespace {

constexpr const char* kFieldNames[6] = {"sigma_xx", "sigma_yy", "sigma_zz", "sigma_xy", "sigma_yz", "sigma_xz"};

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json mat_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json pose_json(const render::ModelPose<Scalar>& p) {
  return {{"translation", vec_json(p.translation)}, {"rotation", mat_json(p.rotation)}, {"scale", vec_json(p.scale)}};
}

json camera_json(const render::Camera<Scalar>& c) {
  return {{"fov", c.fov},
          {"z_near", c.z_near},
          {"z_far", c.z_far},
          {"rotation", mat_json(c.rotation)},
          {"translation", vec_json(c.translation)},
          {"view", mat_json(render::view_matrix(c))},
          {"projection", mat_json(render::projection_matrix(c))}};
}

Vec3 point_of(const Points& p, Eigen::Index i) { return p.row(i).transpose(); }

Points transform_points(const Mat4& m, const Points& p) {
  Points out(p.rows(), 3);
  for (Eigen::Index i = 0; i < p.rows(); ++i) out.row(i) = (m * point_of(p, i).homogeneous()).head<3>().transpose();
  return out;
}

}  // namespace

json wire_error(std::string_view code, std::string_view text) {
  return {{"type", "error"}, {"schema", kWireSchema}, {"code", code}, {"text", text}};
}

struct Session::Engine {
  std::optional<Inference<float>> f32;
  std::optional<Inference<double>> f64;

  GenericOutputs forward(const SimGraph& g) { return f32 ? f32->forward(g) : f64->forward(g); }
};

Session::Session(const SceneConfig& config) : config_(config) {
  std::map<std::string, std::shared_ptr<const Checkpoint>> cache;
  for (const auto& b : config.bodies) {
    Body body;
    body.name = b.name;
    body.mesh = mesh_from_spec(b.mesh);
    auto& ckpt = cache[b.checkpoint];
    if (!ckpt) ckpt = std::make_shared<Checkpoint>(load_checkpoint(b.checkpoint));
    body.checkpoint = ckpt;
    body.pose = b.pose;
    bodies_.push_back(std::move(body));
  }
  init();
}

Session::Session(const SceneConfig& config, std::vector<Body> bodies) : config_(config), bodies_(std::move(bodies)) {
  init();
}

Session::~Session() = default;

void Session::init() {
  if (bodies_.empty()) throw InvalidArgument("scene: no bodies");
  config_.camera.validate();
  if (config_.field_channel < 0 || config_.field_channel > 5) throw InvalidArgument("scene: field channel must be 0..5");
  if (!(config_.field_lo < config_.field_hi)) throw InvalidArgument("scene: field range needs lo < hi");
  if (config_.poke_duration < 0) throw InvalidArgument("scene: poke duration must be >= 0");
  Scalar edge_sum = 0;
  for (auto& b : bodies_) {
    if (!b.checkpoint) throw InvalidArgument("scene: body '" + b.name + "' has no checkpoint");
    b.pose.validate();
    b.mesh.validate();
    b.topology = GraphTopology::from_mesh(b.mesh);
    b.state = StateField::rest(b.mesh);
    b.last_contact = Points::Zero(b.mesh.node_count(), 3);
    edge_sum += mean_edge_length(b.mesh);
    auto engine = std::make_unique<Engine>();
    if (config_.precision == Precision::Float32)
      engine->f32.emplace(b.checkpoint->model);
    else
      engine->f64.emplace(b.checkpoint->model);
    engines_.push_back(std::move(engine));
  }
  const Scalar mean_edge = edge_sum / static_cast<Scalar>(bodies_.size());
  tick_dt_ = config_.tick_dt.value_or(bodies_.front().checkpoint->dt);
  if (!(tick_dt_ > 0)) throw InvalidArgument("scene: tick_dt must be > 0");
  contact_eps_ = config_.contact_eps.value_or(0.5 * mean_edge);
  contact_k_ = config_.contact_k.value_or(2 * config_.poke_magnitude / contact_eps_);
  pick_eps_ = config_.pick_eps.value_or(0.75 * mean_edge);
  if (!(contact_eps_ > 0) || !(contact_k_ > 0) || !(pick_eps_ > 0))
    throw InvalidArgument("scene: contact eps, contact k and pick eps must be > 0");
}

void Session::reset() {
  for (auto& b : bodies_) {
    b.state = StateField::rest(b.mesh);
    b.pokes.clear();
    b.last_contact.setZero();
  }
  contact_total_.setZero();
  contact_magnitude_ = 0;
}

json Session::hello() const {
  json bodies = json::array();
  json vectors = json::array();
  const Mat4 vp = render::projection_matrix(config_.camera) * render::view_matrix(config_.camera);
  for (std::size_t k = 0; k < bodies_.size(); ++k) {
    const auto& b = bodies_[k];
    json surface = json::array();
    for (Eigen::Index t = 0; t < b.mesh.surface.rows(); ++t)
      surface.push_back({b.mesh.surface(t, 0), b.mesh.surface(t, 1), b.mesh.surface(t, 2)});
    const Mat4 model = render::model_matrix(b.pose);
    bodies.push_back({{"name", b.name},
                      {"node_count", b.mesh.node_count()},
                      {"element_kind", to_string(b.mesh.kind)},
                      {"rest_positions", io::to_json(b.mesh.rest_positions)},
                      {"surface", std::move(surface)},
                      {"fixed", b.mesh.fixed_nodes},
                      {"pose", pose_json(b.pose)},
                      {"model_matrix", mat_json(model)}});
    const Mat4 mvp = vp * model;
    const int n = b.mesh.node_count();
    for (int i : {0, n / 2, n - 1}) {
      const Vec4 clip = mvp * point_of(b.mesh.rest_positions, i).homogeneous();
      if (std::abs(clip(3)) < 1e-12) continue;
      const Vec3 ndc = clip.head<3>() / clip(3);
      vectors.push_back({{"body", k},
                         {"model", vec_json(point_of(b.mesh.rest_positions, i))},
                         {"clip", {clip(0), clip(1), clip(2), clip(3)}},
                         {"ndc", vec_json(ndc)}});
    }
  }
  json stops = json::array();
  for (const auto& s : render::kColormapStops) stops.push_back({s[0], s[1], s[2]});
  const auto& m = config_.material;
  return {{"type", "hello"},
          {"schema", kWireSchema},
          {"tick", tick_},
          {"tick_dt", tick_dt_},
          {"bodies", std::move(bodies)},
          {"camera", camera_json(config_.camera)},
          {"light",
           {{"direction", vec_json(config_.light_dir)},
            {"k_a", m.k_a},
            {"k_d", m.k_d},
            {"k_s", m.k_s},
            {"beta", m.beta}}},
          {"colormap",
           {{"field", kFieldNames[config_.field_channel]},
            {"lo", config_.field_lo},
            {"hi", config_.field_hi},
            {"stops", std::move(stops)}}},
          {"test_vectors", std::move(vectors)}};
}

json Session::frame() const {
  json bodies = json::array();
  for (const auto& b : bodies_) {
    json colors = json::array();
    json field = json::array();
    for (int i = 0; i < b.state.size(); ++i) {
      const Scalar f = b.state.z(i, kSigma + config_.field_channel);
      const Vec3 c = render::colormap(f, config_.field_lo, config_.field_hi);
      colors.push_back({c.x(), c.y(), c.z()});
      field.push_back(f);
    }
    bodies.push_back({{"name", b.name},
                      {"positions", io::to_json(Points(b.state.q()))},
                      {"colors", std::move(colors)},
                      {"field", std::move(field)}});
  }
  return {{"type", "frame"},
          {"schema", kWireSchema},
          {"tick", tick_},
          {"time", static_cast<Scalar>(tick_) * tick_dt_},
          {"bodies", std::move(bodies)}};
}

std::vector<json> Session::handle_message(std::string_view text) {
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::parse_error& e) {
    json err = wire_error("malformed_json", "parse error at byte " + std::to_string(e.byte) + ": " + e.what());
    err["byte"] = e.byte;
    return {err};
  }
  return handle_message(msg);
}

std::vector<json> Session::handle_message(const json& msg) {
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
    return {wire_error("bad_message", "message must be an object with a string 'type'")};
  if (msg.value("schema", std::string()) != kWireSchema)
    return {wire_error("bad_schema", std::string("expected schema '") + kWireSchema + "'")};
  const std::string type = msg["type"];
  try {
    if (type == "poke") {
      const auto& xy = msg.at("ndc_xy");
      if (!xy.is_array() || xy.size() != 2 || !xy[0].is_number() || !xy[1].is_number())
        return {wire_error("bad_message", "poke.ndc_xy must be two numbers")};
      const Vec2 ndc(xy[0].get<double>(), xy[1].get<double>());
      if (!ndc.allFinite()) return {wire_error("bad_message", "poke.ndc_xy must be finite")};
      const auto reply = poke(ndc);
      return {*reply};
    }
    if (type == "camera") {
      const auto& ex = msg.contains("extrinsics") ? msg.at("extrinsics") : msg;
      render::Camera<Scalar> cam = config_.camera;
      const auto rot = io::matrix_from_json(ex.at("rotation"), 3, "camera.rotation");
      const auto tr = io::matrix_from_json(json::array({ex.at("translation")}), 3, "camera.translation");
      if (rot.rows() != 3) return {wire_error("invalid_camera", "rotation must be 3x3")};
      cam.rotation = rot;
      cam.translation = tr.row(0).transpose();
      cam.fov = msg.value("fov", cam.fov);
      cam.z_near = msg.value("z_near", cam.z_near);
      cam.z_far = msg.value("z_far", cam.z_far);
      if (!render::is_rotation(cam.rotation, 1e-9)) return {wire_error("invalid_camera", "rotation is not orthonormal")};
      try {
        cam.validate();
      } catch (const InvalidArgument&) {
        // nearest rotation
        const Eigen::JacobiSVD<Mat3> svd(cam.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
        cam.rotation = svd.matrixU() * svd.matrixV().transpose();
        cam.validate();
      }
      config_.camera = cam;
      return {};
    }
    if (type == "reset") {
      reset();
      return {frame()};
    }
    if (type == "hello") return {hello()};
  } catch (const json::exception& e) {
    return {wire_error("bad_message", e.what())};
  } catch (const SchemaViolation& e) {
    return {wire_error("bad_message", e.what())};
  } catch (const InvalidArgument& e) {
    return {wire_error("bad_message", e.what())};
  } catch (const NumericalFailure& e) {
    return {wire_error("numerical", e.what())};
  }
  return {wire_error("unknown_type", "unknown message type '" + type + "'")};
}

std::optional<json> Session::poke(const Vec2& ndc) {
  const Mat4 vp = render::projection_matrix(config_.camera) * render::view_matrix(config_.camera);
  int best = -1;
  interaction::RayHit hit;
  Mat4 best_mvp;
  for (std::size_t k = 0; k < bodies_.size(); ++k) {
    const Mat4 mvp = vp * render::model_matrix(bodies_[k].pose);
    const auto h = interaction::raycast_surface(ndc, mvp, bodies_[k].mesh, Points(bodies_[k].state.q()));
    if (h && (best < 0 || h->depth_ndc < hit.depth_ndc)) {
      best = static_cast<int>(k);
      hit = *h;
      best_mvp = mvp;
    }
  }
  if (best < 0) return json{{"type", "noop"}, {"schema", kWireSchema}, {"reason", "no_hit"}};
  Body& body = bodies_[static_cast<std::size_t>(best)];
  const Vec3 point = interaction::unproject(ndc, hit.depth_ndc, best_mvp);
  std::vector<int> picked = interaction::pick_nodes(point, Points(body.state.q()), pick_eps_);
  std::erase_if(picked, [&](int i) { return body.mesh.is_fixed(i); });
  if (picked.empty()) return json{{"type", "noop"}, {"schema", kWireSchema}, {"reason", "no_free_nodes"}};
  Vec3 dir;
  if (config_.poke_direction == PokeDirection::Ray) {
    dir = interaction::ray_direction(ndc, best_mvp);
  } else {
    dir = -vertex_normals(body.mesh, Points(body.state.q())).row(picked.front()).transpose();
    if (dir.norm() == 0) dir = interaction::ray_direction(ndc, best_mvp);
    dir.normalize();
  }
  auto p = interaction::poke_force(picked, dir, config_.poke_magnitude, config_.poke_duration, point);
  if (p && p->active()) body.pokes.push_back(*p);
  return json{{"type", "poke_ack"},
              {"schema", kWireSchema},
              {"body", body.name},
              {"nodes", picked},
              {"point", vec_json(point)},
              {"force", vec_json(p ? p->force : Vec3::Zero())}};
}

json Session::tick(std::vector<json>* notices) {
  const std::size_t nb = bodies_.size();
  std::vector<Points> world(nb), rest_world(nb), contact(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    const Mat4 m = render::model_matrix(bodies_[k].pose);
    world[k] = transform_points(m, Points(bodies_[k].state.q()));
    rest_world[k] = transform_points(m, bodies_[k].mesh.rest_positions);
    contact[k] = Points::Zero(bodies_[k].mesh.node_count(), 3);
  }
  contact_total_.setZero();
  contact_magnitude_ = 0;
  for (std::size_t a = 0; a < nb; ++a) {
    for (std::size_t b = a + 1; b < nb; ++b) {
      const auto cf = interaction::contact_forces(world[a], world[b], contact_eps_, contact_k_, rest_world[a], rest_world[b]);
      contact[a] += cf.a;
      contact[b] += cf.b;
      contact_total_ += cf.a.colwise().sum().transpose() + cf.b.colwise().sum().transpose();
      contact_magnitude_ += cf.a.rowwise().norm().sum();
    }
  }

  try {
    for (std::size_t k = 0; k < nb; ++k) {
      Body& b = bodies_[k];
      const int n = b.mesh.node_count();
      NodalLoads loads = interaction::poke_loads(b.pokes, n);
      b.last_contact = contact[k] * b.pose.rotation;  // rows: R^T f
      for (int i = 0; i < n; ++i) {
        if (contact[k].row(i).squaredNorm() == 0) continue;
        loads.force.row(i) += b.last_contact.row(i);
        loads.loaded[static_cast<std::size_t>(i)] = 1;
      }
      const Normalization& stats = b.checkpoint->stats;
      const SimGraph g = mesh_to_graph(b.mesh, b.topology, b.state, loads, stats);
      b.state = euler_step(b.mesh, b.state, generic_rates(engines_[k]->forward(g)), tick_dt_, stats, tick_);
    }
  } catch (const RolloutDivergence& e) {
    reset();
    if (notices) {
      json err = wire_error("rollout_divergence", e.what());
      err["tick"] = tick_;
      notices->push_back(std::move(err));
    }
  }
  for (auto& b : bodies_) {
    interaction::advance_pokes(b.pokes);
    b.state.time = static_cast<Scalar>(tick_ + 1) * tick_dt_;
  }
  ++tick_;
  return frame();
}

ReplayScript replay_from_json(const json& j) {
  io::expect_schema(j, "replay/1", "replay script");
  ReplayScript s;
  try {
    s.ticks = j.at("ticks").get<long>();
    for (const auto& e : j.at("events")) s.events.push_back({e.at("tick").get<long>(), e.at("message")});
  } catch (const json::exception& e) {
    throw SchemaViolation(std::string("replay script: ") + e.what());
  }
  if (s.ticks < 0) throw SchemaViolation("replay script: ticks must be >= 0");
  std::stable_sort(s.events.begin(), s.events.end(), [](const auto& a, const auto& b) { return a.tick < b.tick; });
  return s;
}

json to_json(const ReplayScript& s) {
  json events = json::array();
  for (const auto& e : s.events) events.push_back({{"tick", e.tick}, {"message", e.message}});
  return {{"schema", "replay/1"}, {"ticks", s.ticks}, {"events", std::move(events)}};
}

ReplayResult replay(Session& session, const ReplayScript& script) {
  ReplayResult r;
  std::uint64_t h = io::fnv1a("");
  auto emit = [&](const json& m) {
    r.stream.push_back(m.dump());
    h = io::fnv1a(r.stream.back() + "\n", h);
  };
  emit(session.hello());
  std::size_t next = 0;
  for (long t = 0; t < script.ticks; ++t) {
    while (next < script.events.size() && script.events[next].tick <= t) {
      const auto& m = script.events[next++].message;
      const auto replies = m.is_string() ? session.handle_message(std::string_view(m.get_ref<const std::string&>()))
                                         : session.handle_message(m);
      for (const auto& reply : replies) emit(reply);
    }
    std::vector<json> notices;
    const auto start = std::chrono::steady_clock::now();
    const json f = session.tick(&notices);
    r.tick_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    for (const auto& n : notices) emit(n);
    emit(f);
    r.max_contact_imbalance = std::max(r.max_contact_imbalance, session.last_contact_total().norm());
    r.max_contact_magnitude = std::max(r.max_contact_magnitude, session.last_contact_magnitude());
  }
  r.digest = h;
  return r;
}

}  // namespace tignn
