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

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>

namespace tignn::io {

using json = nlohmann::json;

std::string read_text(const std::string& path);

// Writes to a sibling temporary and renames over the target.
void write_text_atomic(const std::string& path, std::string_view text);

json read_json(const std::string& path);
void write_json_atomic(const std::string& path, const json& j, int indent = -1);

// Fails with SchemaViolation unless j["schema"] == expected.
void expect_schema(const json& j, std::string_view expected, std::string_view where);

json to_json(const MatrixX& m);
json to_json(const Points& p);
MatrixX matrix_from_json(const json& j, int cols, std::string_view where);

// 64-bit FNV-1a; used for config hashes and frame-stream digests.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull);
std::string hex64(std::uint64_t v);

}  // namespace tignn::io
