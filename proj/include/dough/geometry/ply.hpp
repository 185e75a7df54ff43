// Copyright 2026 The DoughPlan Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <iosfwd>

#include "dough/geometry/point_cloud.hpp"

namespace dough {

/// ASCII PLY, one "x y z" line per vertex, no faces.
void write_ply(std::ostream& os, const PointCloud& pc);
void write_ply(const std::filesystem::path& path, const PointCloud& pc);

/// Reads ASCII PLY vertex x/y/z; other vertex properties are skipped.
/// Throws std::runtime_error on malformed input.
PointCloud read_ply(std::istream& is);
PointCloud read_ply(const std::filesystem::path& path);

}  // namespace dough
