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

#include "dough/geometry/ply.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dough {

void write_ply(std::ostream& os, const PointCloud& pc) {
  os << "ply\n"
     << "format ascii 1.0\n"
     << "element vertex " << pc.size() << "\n"
     << "property double x\n"
     << "property double y\n"
     << "property double z\n"
     << "end_header\n";
  os << std::setprecision(17);
  for (const auto& p : pc) os << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
}

void write_ply(const std::filesystem::path& path, const PointCloud& pc) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_ply(os, pc);
}

PointCloud read_ply(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("ply", 0) != 0) {
    throw std::runtime_error("not a PLY file");
  }
  std::size_t n_vertices = 0;
  bool in_vertex = false;
  bool ascii = false;
  std::vector<std::string> props;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (word == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      in_vertex = name == "vertex";
      if (in_vertex) n_vertices = count;
    } else if (word == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      props.push_back(name);
    } else if (word == "end_header") {
      break;
    }
  }
  if (!ascii) throw std::runtime_error("only ASCII PLY is supported");
  int ix = -1, iy = -1, iz = -1;
  for (std::size_t k = 0; k < props.size(); ++k) {
    if (props[k] == "x") ix = static_cast<int>(k);
    if (props[k] == "y") iy = static_cast<int>(k);
    if (props[k] == "z") iz = static_cast<int>(k);
  }
  if (ix < 0 || iy < 0 || iz < 0) throw std::runtime_error("PLY lacks x/y/z");

  std::vector<Vec3> points;
  points.reserve(n_vertices);
  std::vector<double> values(props.size());
  for (std::size_t v = 0; v < n_vertices; ++v) {
    if (!std::getline(is, line)) throw std::runtime_error("PLY truncated");
    std::istringstream ls(line);
    for (auto& value : values) {
      if (!(ls >> value)) throw std::runtime_error("PLY vertex row malformed");
    }
    points.emplace_back(values[ix], values[iy], values[iz]);
  }
  return PointCloud(std::move(points));
}

PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_ply(is);
}

}  // namespace dough
