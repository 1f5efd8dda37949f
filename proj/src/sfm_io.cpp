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

#include "blocksplat/sfm_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "blocksplat/image_io.hpp"

namespace blocksplat {
namespace fs = std::filesystem;

namespace {

constexpr int kSimplePinholeId = 0;
constexpr int kPinholeId = 1;
constexpr uint64_t kInvalidPoint3D = std::numeric_limits<uint64_t>::max();

const char* kColmapModelNames[] = {
    "SIMPLE_PINHOLE", "PINHOLE",         "SIMPLE_RADIAL",
    "RADIAL",         "OPENCV",          "OPENCV_FISHEYE",
    "FULL_OPENCV",    "FOV",             "SIMPLE_RADIAL_FISHEYE",
    "RADIAL_FISHEYE", "THIN_PRISM_FISHEYE"};

[[noreturn]] void Malformed(const fs::path& file, const std::string& where,
                            const std::string& what) {
  throw Error(ErrorCode::kMalformedRecord,
              file.filename().string() + " at " + where + ": " + what);
}

CameraIntrinsics MakeIntrinsics(const std::string& model, int64_t width,
                                int64_t height,
                                const std::vector<double>& params,
                                const fs::path& file,
                                const std::string& where) {
  CameraIntrinsics k;
  k.width = static_cast<int>(width);
  k.height = static_cast<int>(height);
  if (model == "SIMPLE_PINHOLE") {
    if (params.size() != 3) Malformed(file, where, "SIMPLE_PINHOLE needs 3 params");
    k.fx = k.fy = params[0];
    k.cx = params[1];
    k.cy = params[2];
  } else if (model == "PINHOLE") {
    if (params.size() != 4) Malformed(file, where, "PINHOLE needs 4 params");
    k.fx = params[0];
    k.fy = params[1];
    k.cx = params[2];
    k.cy = params[3];
  } else {
    throw Error(ErrorCode::kUnsupportedCameraModel, model);
  }
  try {
    k.Validate();
  } catch (const Error& e) {
    Malformed(file, where, e.what());
  }
  return k;
}

// ---------------------------------------------------------------------------
// Text layout

std::vector<std::pair<size_t, std::string>> DataLines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, path.string());
  std::vector<std::pair<size_t, std::string>> lines;
  std::string line;
  size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line[first] == '#') continue;
    lines.emplace_back(number, line);
  }
  return lines;
}

bool IsBlank(const std::string& s) {
  return s.find_first_not_of(" \t") == std::string::npos;
}

void ParseCamerasText(const fs::path& path, SparseModel& model) {
  for (const auto& [number, line] : DataLines(path)) {
    if (IsBlank(line)) continue;
    const std::string where = "line " + std::to_string(number);
    std::istringstream ss(line);
    int id;
    std::string name;
    int64_t w, h;
    if (!(ss >> id >> name >> w >> h)) Malformed(path, where, "bad camera");
    std::vector<double> params;
    double p;
    while (ss >> p) params.push_back(p);
    if (!ss.eof()) Malformed(path, where, "bad camera params");
    model.cameras[id] = MakeIntrinsics(name, w, h, params, path, where);
  }
}

void ParseImagesText(const fs::path& path, SparseModel& model) {
  const auto lines = DataLines(path);
  size_t i = 0;
  while (i < lines.size()) {
    if (IsBlank(lines[i].second)) {
      ++i;
      continue;
    }
    const std::string where = "line " + std::to_string(lines[i].first);
    std::istringstream ss(lines[i].second);
    ViewRecord v;
    Vec4 q;
    Vec3 t;
    if (!(ss >> v.view_id >> q[0] >> q[1] >> q[2] >> q[3] >> t[0] >> t[1] >>
          t[2] >> v.intrinsics_id >> v.image_path)) {
      Malformed(path, where, "bad image header");
    }
    v.pose.rotation = QuaternionToRotation(q);
    v.pose.translation = t;
    ++i;
    // The observation line may be empty but must be present.
    if (i < lines.size()) {
      std::istringstream obs(lines[i].second);
      double x, y;
      int64_t pid;
      while (obs >> x >> y >> pid) {
        if (pid >= 0) v.visible_point_ids.insert(pid);
      }
      if (!obs.eof()) {
        Malformed(path, "line " + std::to_string(lines[i].first),
                  "bad observation triple");
      }
      ++i;
    }
    model.views[v.view_id] = std::move(v);
  }
}

void ParsePointsText(const fs::path& path, SparseModel& model) {
  for (const auto& [number, line] : DataLines(path)) {
    if (IsBlank(line)) continue;
    const std::string where = "line " + std::to_string(number);
    std::istringstream ss(line);
    SparsePoint p;
    int r, g, b;
    double err;
    if (!(ss >> p.point_id >> p.position[0] >> p.position[1] >>
          p.position[2] >> r >> g >> b >> err)) {
      Malformed(path, where, "bad point header");
    }
    p.color = Vec3(r, g, b) / 255.0;
    int image_id, idx;
    while (ss >> image_id >> idx) p.observing_view_ids.insert(image_id);
    if (!ss.eof()) Malformed(path, where, "bad track");
    model.points[p.point_id] = std::move(p);
  }
}

// ---------------------------------------------------------------------------
// Binary layout

class BinaryReader {
 public:
  explicit BinaryReader(const fs::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kMissingFile, path.string());
    bytes_.assign(std::istreambuf_iterator<char>(in), {});
  }

  template <typename T>
  T Read() {
    if (offset_ + sizeof(T) > bytes_.size()) {
      Malformed(path_, "offset " + std::to_string(offset_), "truncated");
    }
    T v;
    std::memcpy(&v, bytes_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return v;
  }

  std::string ReadCString() {
    std::string s;
    while (true) {
      const char c = Read<char>();
      if (c == '\0') break;
      s.push_back(c);
    }
    return s;
  }

  size_t offset() const { return offset_; }
  bool done() const { return offset_ == bytes_.size(); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  std::vector<char> bytes_;
  size_t offset_ = 0;
};

void ParseCamerasBinary(const fs::path& path, SparseModel& model) {
  BinaryReader r(path);
  const auto n = r.Read<uint64_t>();
  for (uint64_t i = 0; i < n; ++i) {
    const std::string where = "offset " + std::to_string(r.offset());
    const auto id = r.Read<uint32_t>();
    const auto model_id = r.Read<int32_t>();
    const auto w = r.Read<uint64_t>();
    const auto h = r.Read<uint64_t>();
    if (model_id != kSimplePinholeId && model_id != kPinholeId) {
      const bool known = model_id >= 0 && model_id < 11;
      throw Error(ErrorCode::kUnsupportedCameraModel,
                  known ? kColmapModelNames[model_id]
                        : "model_id " + std::to_string(model_id));
    }
    std::vector<double> params(model_id == kPinholeId ? 4 : 3);
    for (auto& p : params) p = r.Read<double>();
    model.cameras[static_cast<int>(id)] =
        MakeIntrinsics(kColmapModelNames[model_id], static_cast<int64_t>(w),
                       static_cast<int64_t>(h), params, path, where);
  }
  if (!r.done()) Malformed(path, "offset " + std::to_string(r.offset()), "trailing bytes");
}

void ParseImagesBinary(const fs::path& path, SparseModel& model) {
  BinaryReader r(path);
  const auto n = r.Read<uint64_t>();
  for (uint64_t i = 0; i < n; ++i) {
    ViewRecord v;
    v.view_id = static_cast<int>(r.Read<uint32_t>());
    Vec4 q;
    for (int k = 0; k < 4; ++k) q[k] = r.Read<double>();
    Vec3 t;
    for (int k = 0; k < 3; ++k) t[k] = r.Read<double>();
    v.pose.rotation = QuaternionToRotation(q);
    v.pose.translation = t;
    v.intrinsics_id = static_cast<int>(r.Read<uint32_t>());
    v.image_path = r.ReadCString();
    const auto n2d = r.Read<uint64_t>();
    for (uint64_t k = 0; k < n2d; ++k) {
      r.Read<double>();
      r.Read<double>();
      const auto pid = r.Read<uint64_t>();
      if (pid != kInvalidPoint3D) {
        v.visible_point_ids.insert(static_cast<int64_t>(pid));
      }
    }
    model.views[v.view_id] = std::move(v);
  }
  if (!r.done()) Malformed(path, "offset " + std::to_string(r.offset()), "trailing bytes");
}

void ParsePointsBinary(const fs::path& path, SparseModel& model) {
  BinaryReader r(path);
  const auto n = r.Read<uint64_t>();
  for (uint64_t i = 0; i < n; ++i) {
    SparsePoint p;
    p.point_id = static_cast<int64_t>(r.Read<uint64_t>());
    for (int k = 0; k < 3; ++k) p.position[k] = r.Read<double>();
    for (int k = 0; k < 3; ++k) p.color[k] = r.Read<uint8_t>() / 255.0;
    r.Read<double>();  // reprojection error
    const auto track = r.Read<uint64_t>();
    for (uint64_t k = 0; k < track; ++k) {
      p.observing_view_ids.insert(static_cast<int>(r.Read<uint32_t>()));
      r.Read<uint32_t>();
    }
    model.points[p.point_id] = std::move(p);
  }
  if (!r.done()) Malformed(path, "offset " + std::to_string(r.offset()), "trailing bytes");
}

template <typename T>
void Put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

uint8_t ToByte(double c) {
  return static_cast<uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

bool AllExist(const fs::path& dir, const char* ext) {
  for (const char* stem : {"cameras", "images", "points3D"}) {
    if (!fs::exists(dir / (std::string(stem) + ext))) return false;
  }
  return true;
}

}  // namespace

void CameraIntrinsics::Validate() const {
  const bool ok = width >= 1 && height >= 1 && fx > 0.0 && fy > 0.0 &&
                  cx >= 0.0 && cx < width && cy >= 0.0 && cy < height;
  if (!ok) {
    throw Error(ErrorCode::kInvalidArgument, "invalid pinhole intrinsics");
  }
}

CameraIntrinsics CameraIntrinsics::Downsampled(int factor) const {
  if (factor <= 1) return *this;
  CameraIntrinsics k = *this;
  k.width = width / factor;
  k.height = height / factor;
  k.fx = fx / factor;
  k.fy = fy / factor;
  k.cx = cx / factor;
  k.cy = cy / factor;
  return k;
}

const CameraIntrinsics& SparseModel::CameraFor(const ViewRecord& v) const {
  const auto it = cameras.find(v.intrinsics_id);
  if (it == cameras.end()) {
    throw Error(ErrorCode::kMalformedRecord,
                "view " + std::to_string(v.view_id) + " references camera " +
                    std::to_string(v.intrinsics_id));
  }
  return it->second;
}

void SparseModel::CheckVisibilitySymmetry() const {
  for (const auto& [pid, p] : points) {
    if (p.observing_view_ids.empty()) {
      throw Error(ErrorCode::kVisibilityAsymmetry,
                  "point " + std::to_string(pid) + " has an empty track");
    }
    for (int vid : p.observing_view_ids) {
      const auto it = views.find(vid);
      if (it == views.end() || !it->second.visible_point_ids.count(pid)) {
        throw Error(ErrorCode::kVisibilityAsymmetry,
                    "point " + std::to_string(pid) + " lists view " +
                        std::to_string(vid));
      }
    }
  }
  for (const auto& [vid, v] : views) {
    for (int64_t pid : v.visible_point_ids) {
      const auto it = points.find(pid);
      if (it == points.end() || !it->second.observing_view_ids.count(vid)) {
        throw Error(ErrorCode::kVisibilityAsymmetry,
                    "view " + std::to_string(vid) + " lists point " +
                        std::to_string(pid));
      }
    }
  }
}

SparseModel ParseSparseModel(const fs::path& dir, SfmFormat format) {
  if (format == SfmFormat::kAuto) {
    if (AllExist(dir, ".bin")) {
      format = SfmFormat::kBinary;
    } else if (AllExist(dir, ".txt")) {
      format = SfmFormat::kText;
    } else {
      throw Error(ErrorCode::kMissingFile,
                  "no complete COLMAP model in " + dir.string());
    }
  }
  SparseModel model;
  if (format == SfmFormat::kText) {
    ParseCamerasText(dir / "cameras.txt", model);
    ParseImagesText(dir / "images.txt", model);
    ParsePointsText(dir / "points3D.txt", model);
  } else {
    ParseCamerasBinary(dir / "cameras.bin", model);
    ParseImagesBinary(dir / "images.bin", model);
    ParsePointsBinary(dir / "points3D.bin", model);
  }
  for (const auto& [id, v] : model.views) model.CameraFor(v);
  for (const auto& [id, p] : model.points) {
    if (!p.position.allFinite()) {
      throw Error(ErrorCode::kMalformedRecord,
                  "point " + std::to_string(id) + " is not finite");
    }
  }
  model.CheckVisibilitySymmetry();
  return model;
}

void WriteSparseModel(const SparseModel& model, const fs::path& dir,
                      SfmFormat format) {
  fs::create_directories(dir);
  // Point2D index of each (view, point) observation, shared by both files.
  std::map<std::pair<int, int64_t>, uint32_t> obs_index;
  for (const auto& [vid, v] : model.views) {
    uint32_t k = 0;
    for (int64_t pid : v.visible_point_ids) obs_index[{vid, pid}] = k++;
  }

  if (format != SfmFormat::kBinary) {
    std::ofstream cams(dir / "cameras.txt");
    cams.precision(17);
    cams << "# Camera list with one line of data per camera:\n";
    for (const auto& [id, k] : model.cameras) {
      cams << id << " PINHOLE " << k.width << ' ' << k.height << ' ' << k.fx
           << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << '\n';
    }
    std::ofstream imgs(dir / "images.txt");
    imgs.precision(17);
    imgs << "# Image list with two lines of data per image:\n";
    for (const auto& [vid, v] : model.views) {
      const Vec4 q = RotationToQuaternion(v.pose.rotation);
      const Vec3& t = v.pose.translation;
      imgs << vid << ' ' << q[0] << ' ' << q[1] << ' ' << q[2] << ' ' << q[3]
           << ' ' << t[0] << ' ' << t[1] << ' ' << t[2] << ' '
           << v.intrinsics_id << ' ' << v.image_path << '\n';
      bool first = true;
      for (int64_t pid : v.visible_point_ids) {
        imgs << (first ? "" : " ") << "0 0 " << pid;
        first = false;
      }
      imgs << '\n';
    }
    std::ofstream pts(dir / "points3D.txt");
    pts.precision(17);
    pts << "# 3D point list with one line of data per point:\n";
    for (const auto& [pid, p] : model.points) {
      pts << pid << ' ' << p.position[0] << ' ' << p.position[1] << ' '
          << p.position[2] << ' ' << int(ToByte(p.color[0])) << ' '
          << int(ToByte(p.color[1])) << ' ' << int(ToByte(p.color[2]))
          << " 0";
      for (int vid : p.observing_view_ids) {
        const auto it = obs_index.find({vid, pid});
        pts << ' ' << vid << ' ' << (it == obs_index.end() ? 0 : it->second);
      }
      pts << '\n';
    }
    return;
  }

  std::ofstream cams(dir / "cameras.bin", std::ios::binary);
  Put<uint64_t>(cams, model.cameras.size());
  for (const auto& [id, k] : model.cameras) {
    Put<uint32_t>(cams, static_cast<uint32_t>(id));
    Put<int32_t>(cams, kPinholeId);
    Put<uint64_t>(cams, static_cast<uint64_t>(k.width));
    Put<uint64_t>(cams, static_cast<uint64_t>(k.height));
    for (double p : {k.fx, k.fy, k.cx, k.cy}) Put<double>(cams, p);
  }
  std::ofstream imgs(dir / "images.bin", std::ios::binary);
  Put<uint64_t>(imgs, model.views.size());
  for (const auto& [vid, v] : model.views) {
    Put<uint32_t>(imgs, static_cast<uint32_t>(vid));
    const Vec4 q = RotationToQuaternion(v.pose.rotation);
    for (int k = 0; k < 4; ++k) Put<double>(imgs, q[k]);
    for (int k = 0; k < 3; ++k) Put<double>(imgs, v.pose.translation[k]);
    Put<uint32_t>(imgs, static_cast<uint32_t>(v.intrinsics_id));
    imgs.write(v.image_path.c_str(),
               static_cast<std::streamsize>(v.image_path.size() + 1));
    Put<uint64_t>(imgs, v.visible_point_ids.size());
    for (int64_t pid : v.visible_point_ids) {
      Put<double>(imgs, 0.0);
      Put<double>(imgs, 0.0);
      Put<uint64_t>(imgs, static_cast<uint64_t>(pid));
    }
  }
  std::ofstream pts(dir / "points3D.bin", std::ios::binary);
  Put<uint64_t>(pts, model.points.size());
  for (const auto& [pid, p] : model.points) {
    Put<uint64_t>(pts, static_cast<uint64_t>(pid));
    for (int k = 0; k < 3; ++k) Put<double>(pts, p.position[k]);
    for (int k = 0; k < 3; ++k) Put<uint8_t>(pts, ToByte(p.color[k]));
    Put<double>(pts, 0.0);
    Put<uint64_t>(pts, p.observing_view_ids.size());
    for (int vid : p.observing_view_ids) {
      const auto it = obs_index.find({vid, pid});
      Put<uint32_t>(pts, static_cast<uint32_t>(vid));
      Put<uint32_t>(pts, it == obs_index.end() ? 0u : it->second);
    }
  }
}

Mat3 QuaternionToRotation(const Vec4& wxyz) {
  const Vec4 q = wxyz.normalized();
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

Vec4 RotationToQuaternion(const Mat3& rotation) {
  const Eigen::Quaterniond q(rotation);
  Vec4 out(q.w(), q.x(), q.y(), q.z());
  if (out[0] < 0.0) out = -out;
  return out;
}

DepthPrior LoadDepthPrior(const fs::path& path, const ViewRecord& view,
                          const CameraIntrinsics& intrinsics) {
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kUnreadableFile, "missing depth " + path.string());
  }
  DepthPrior prior;
  prior.view_id = view.view_id;
  prior.source = DepthSource::kFile;
  const auto ext = path.extension().string();
  if (ext == ".pfm" || ext == ".PFM") {
    prior.depth = ReadPfm(path);
  } else {
    Image raw = LoadPng16Gray(path);
    fs::path sidecar = path;
    sidecar.replace_extension(".json");
    std::ifstream in(sidecar);
    if (!in) {
      throw Error(ErrorCode::kUnreadableFile,
                  "missing scale sidecar " + sidecar.string());
    }
    double scale = 0.0;
    try {
      scale = nlohmann::json::parse(in).at("scale").get<double>();
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kUnreadableFile,
                  "bad sidecar " + sidecar.string() + ": " + e.what());
    }
    for (double& v : raw.data) v *= scale;
    prior.depth = std::move(raw);
  }
  if (prior.depth.width != intrinsics.width ||
      prior.depth.height != intrinsics.height) {
    throw Error(ErrorCode::kDimensionMismatch,
                "depth " + path.string() + " is " +
                    std::to_string(prior.depth.width) + "x" +
                    std::to_string(prior.depth.height));
  }
  for (double& v : prior.depth.data) {
    if (!std::isfinite(v) || v <= 0.0) v = 0.0;
  }
  return prior;
}

}  // namespace blocksplat
