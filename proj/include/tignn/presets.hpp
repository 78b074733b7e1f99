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

#include "tignn/fem.hpp"
#include "tignn/session.hpp"
#include "tignn/training.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace tignn {

// Mesh, dataset and training settings of one named experiment.
struct Preset {
  std::string name;
  std::string mesh_spec;  // "beam:H,W,L,nx,ny,nz" or "bunny"
  SolidMesh mesh;
  fem::DatasetConfig data;
  TrainConfig train;
};

// beam-desk, beam-paper, bunny-desk, toy.
std::vector<std::string> preset_names();
Preset make_preset(const std::string& name);

// Hyperelastic constants of the bunny example, same density as the beams.
MaterialParams bunny_material();

// Voxel bunny split into tetrahedra (under 400 nodes), bottom layer fixed.
SolidMesh build_bunny_mesh();

// "beam:H,W,L,nx,ny,nz" or "bunny".
SolidMesh mesh_from_spec(const std::string& spec);

// Two desk beams at 90 degrees: A stands along +z from the origin; B lies
// along -x with its free end facing A's tip across `gap`.
SceneConfig two_beam_scene(const std::string& checkpoint, Scalar gap = 10,
                           const std::string& mesh = "beam:10,10,40,2,2,8");

// One body viewed from the side.
SceneConfig single_body_scene(const std::string& checkpoint, const std::string& mesh);

// Dataset/training config document: {"preset"?, "data": {...}, "train": {...}}.
// Keys absent from the document keep the preset (or default) values.
Preset preset_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Preset& p);

}  // namespace tignn
