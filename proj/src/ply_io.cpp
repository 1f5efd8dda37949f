// Copyright 2026 The BlockSplat Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "blocksplat/ply_io.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace blocksplat {
namespace {

constexpr std::array<const char*, 14> kRequired = {
    "x",       "y",       "z",       "f_dc_0", "f_dc_1", "f_dc_2",
    "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1",
    "rot_2",   "rot_3"};

size_t TypeSize(const std::string& type) {
  static const std::map<std::string, size_t> sizes = {
      {"char", 1},   {"uchar", 1},  {"int8", 1},    {"uint8", 1},
      {"short", 2},  {"ushort", 2}, {"int16", 2},   {"uint16", 2},
      {"int", 4},    {"uint", 4},   {"int32", 4},   {"uint32", 4},
      {"float", 4},  {"float32", 4}, {"double", 8}, {"float64", 8}};
  const auto it = sizes.find(type);
  if (it == sizes.end()) {
    throw Error(ErrorCode::kUnknownAttribute, "unsupported PLY type " + type);
  }
  return it->second;
}

double Decode(const std::string& type, const unsigned char* p) {
  auto load = [p](auto v) {
    std::memcpy(&v, p, sizeof(v));
    return static_cast<double>(v);
  };
  if (type == "float" || type == "float32") return load(float{});
  if (type == "double" || type == "float64") return load(double{});
  if (type == "char" || type == "int8") return load(int8_t{});
  if (type == "uchar" || type == "uint8") return load(uint8_t{});
  if (type == "short" || type == "int16") return load(int16_t{});
  if (type == "ushort" || type == "uint16") return load(uint16_t{});
  if (type == "int" || type == "int32") return load(int32_t{});
  return load(uint32_t{});
}

struct Property {
  std::string name;
  std::string type;
  size_t offset = 0;
};

}  // namespace

void WritePly(const GaussianSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << set.size() << '\n';
  for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0",
                           "f_dc_1", "f_dc_2", "opacity", "scale_0",
                           "scale_1", "scale_2", "rot_0", "rot_1", "rot_2",
                           "rot_3"}) {
    out << "property float " << name << '\n';
  }
  out << "end_header\n";
  std::vector<float> row(17);
  for (size_t i = 0; i < set.size(); ++i) {
    const Vec3& p = set.positions[i];
    const Vec3& c = set.colors[i];
    const Vec3& s = set.log_scales[i];
    const Vec4& q = set.rotations[i];
    const double values[17] = {p[0], p[1], p[2], 0.0, 0.0, 0.0,
                               (c[0] - 0.5) / kShC0, (c[1] - 0.5) / kShC0,
                               (c[2] - 0.5) / kShC0, set.opacity_logits[i],
                               s[0], s[1], s[2], q[0], q[1], q[2], q[3]};
    for (int k = 0; k < 17; ++k) row[k] = static_cast<float>(values[k]);
    out.write(reinterpret_cast<const char*>(row.data()), 17 * sizeof(float));
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed " + path.string());
}

GaussianSet ReadPly(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, path.string());

  std::string line;
  std::getline(in, line);
  if (line != "ply") {
    throw Error(ErrorCode::kMalformedRecord, "not a PLY file: " + path.string());
  }
  size_t vertex_count = 0;
  bool in_vertex = false;
  bool seen_vertex = false;
  std::vector<Property> props;
  size_t stride = 0;
  while (true) {
    if (!std::getline(in, line)) {
      throw Error(ErrorCode::kTruncatedFile, "PLY header not terminated");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "end_header") break;
    if (word == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "binary_little_endian") {
        throw Error(ErrorCode::kMalformedRecord,
                    "only binary_little_endian PLY is supported");
      }
    } else if (word == "element") {
      std::string name;
      size_t count = 0;
      ss >> name >> count;
      if (seen_vertex && name != "vertex") {
        // Elements after vertex are ignored; they never precede it in splat
        // files.
        in_vertex = false;
        continue;
      }
      if (name != "vertex") {
        throw Error(ErrorCode::kMalformedRecord,
                    "element '" + name + "' before vertex");
      }
      vertex_count = count;
      in_vertex = seen_vertex = true;
    } else if (word == "property" && in_vertex) {
      Property p;
      ss >> p.type;
      if (p.type == "list") {
        throw Error(ErrorCode::kUnknownAttribute, "list vertex property");
      }
      ss >> p.name;
      p.offset = stride;
      stride += TypeSize(p.type);
      props.push_back(p);
    }
  }

  std::map<std::string, const Property*> by_name;
  for (const auto& p : props) by_name[p.name] = &p;
  std::array<const Property*, kRequired.size()> cols{};
  for (size_t k = 0; k < kRequired.size(); ++k) {
    const auto it = by_name.find(kRequired[k]);
    if (it == by_name.end()) {
      throw Error(ErrorCode::kUnknownAttribute,
                  std::string("missing vertex property ") + kRequired[k]);
    }
    cols[k] = it->second;
  }

  GaussianSet set;
  set.reserve(vertex_count);
  std::vector<unsigned char> row(stride);
  for (size_t i = 0; i < vertex_count; ++i) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(stride));
    if (static_cast<size_t>(in.gcount()) != stride) {
      throw Error(ErrorCode::kTruncatedFile,
                  "PLY ends at vertex " + std::to_string(i) + " of " +
                      std::to_string(vertex_count));
    }
    double v[kRequired.size()];
    for (size_t k = 0; k < kRequired.size(); ++k) {
      v[k] = Decode(cols[k]->type, row.data() + cols[k]->offset);
    }
    set.push_back(Vec3(v[0], v[1], v[2]), Vec4(v[10], v[11], v[12], v[13]),
                  Vec3(v[7], v[8], v[9]), v[6],
                  Vec3(v[3], v[4], v[5]) * kShC0 + Vec3::Constant(0.5));
  }
  return set;
}

}  // namespace blocksplat
