#include "depthproj/scene_io.hpp"

#include <fstream>
#include <sstream>

#include "depthproj/image_io.hpp"
#include "json.hpp"

namespace depthproj {

using nlohmann::json;

namespace {

Eigen::Vector3d vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error("expected a 3-vector, got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::Vector2d vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw Error("expected a 2-vector, got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>()};
}

json to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }
json to_json(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }

// "pose": {"rotation": 3x3 rows, "translation": [x,y,z]} or
// {"look_at": [x,y,z], "down": [x,y,z], "translation": ...}.
Eigen::Isometry3d parse_pose(const json& j) {
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
  if (j.is_null()) return pose;
  const Eigen::Vector3d t = j.contains("translation") ? vec3(j.at("translation")) : Eigen::Vector3d::Zero();
  if (j.contains("rotation")) {
    const auto& r = j.at("rotation");
    if (!r.is_array() || r.size() != 3) throw Error("pose rotation must be 3 rows");
    Eigen::Matrix3d m;
    for (int i = 0; i < 3; ++i) m.row(i) = vec3(r[static_cast<std::size_t>(i)]).transpose();
    pose.linear() = m;
  } else if (j.contains("look_at")) {
    const Eigen::Vector3d down = j.contains("down") ? vec3(j.at("down")) : Eigen::Vector3d::UnitY();
    pose.linear() = look_rotation(vec3(j.at("look_at")) - t, down);
  }
  pose.translation() = t;
  return pose;
}

json pose_json(const Eigen::Isometry3d& pose) {
  json rows = json::array();
  for (int i = 0; i < 3; ++i) rows.push_back(to_json(Eigen::Vector3d(pose.linear().row(i).transpose())));
  return {{"rotation", rows}, {"translation", to_json(Eigen::Vector3d(pose.translation()))}};
}

PinholeDevice parse_device(const json& j) {
  PinholeDevice d;
  const auto& res = j.at("resolution");
  d.resolution = {res.at(0).get<int>(), res.at(1).get<int>()};
  const auto f = j.at("focal");
  if (f.is_number()) {
    d.intrinsics.fx = d.intrinsics.fy = f.get<double>();
  } else {
    const auto fv = vec2(f);
    d.intrinsics.fx = fv.x();
    d.intrinsics.fy = fv.y();
  }
  if (j.contains("principal")) {
    const auto c = vec2(j.at("principal"));
    d.intrinsics.cx = c.x();
    d.intrinsics.cy = c.y();
  } else {
    d.intrinsics.cx = d.resolution.width / 2.0;
    d.intrinsics.cy = d.resolution.height / 2.0;
  }
  d.pose = parse_pose(j.value("pose", json()));
  return d;
}

json device_json(const PinholeDevice& d) {
  return {{"resolution", {d.resolution.width, d.resolution.height}},
          {"focal", {d.intrinsics.fx, d.intrinsics.fy}},
          {"principal", {d.intrinsics.cx, d.intrinsics.cy}},
          {"pose", pose_json(d.pose)}};
}

Raster<double> parse_inline_depths(const json& rows) {
  if (!rows.is_array() || rows.empty() || !rows[0].is_array()) throw Error("depth values must be a 2-D array");
  Raster<double> depths(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t y = 0; y < rows.size(); ++y) {
    if (rows[y].size() != rows[0].size()) throw Error("ragged depth values");
    for (std::size_t x = 0; x < rows[y].size(); ++x) {
      depths(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) = rows[y][x].get<double>();
    }
  }
  return depths;
}

SurfaceModel parse_surface(const json& j, const std::filesystem::path& base) {
  SurfaceModel s;
  s.id = j.at("id").get<int>();
  s.layer = j.value("layer", 0);
  s.albedo = j.value("albedo", 1.0);
  const std::string type = j.at("type").get<std::string>();
  if (type == "plane") {
    s.geometry = PlaneGeometry{vec3(j.at("point")), vec3(j.at("normal"))};
  } else if (type == "depth_map") {
    HeightField hf;
    if (j.contains("values")) {
      hf.depths = parse_inline_depths(j.at("values"));
    } else {
      std::filesystem::path file = j.at("file").get<std::string>();
      if (file.is_relative()) file = base / file;
      hf.depths = load_depth_map(file, j.value("scale", 1.0));
    }
    hf.origin = vec2(j.at("origin"));
    hf.spacing = j.at("spacing").get<double>();
    hf.world_from_local = parse_pose(j.value("pose", json()));
    s.geometry = std::move(hf);
  } else {
    throw Error("unknown surface type '" + type + "'");
  }
  return s;
}

}  // namespace

Raster<double> load_depth_map(const std::filesystem::path& path, double scale) {
  if (!std::filesystem::exists(path)) throw Error("depth map " + path.string() + " does not exist");
  if (path.extension() == ".png") {
    auto img = read_png(path);
    return img.pixels * scale;
  }
  std::ifstream in(path);
  if (!in) throw Error("cannot open depth map " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> row;
    for (double v; ls >> v;) row.push_back(v * scale);
    if (!ls.eof()) throw Error("non-numeric entry in depth map " + path.string());
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("depth map " + path.string() + " is empty");
  Raster<double> depths(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t y = 0; y < rows.size(); ++y) {
    if (rows[y].size() != rows[0].size()) throw Error("ragged depth map " + path.string());
    for (std::size_t x = 0; x < rows[y].size(); ++x) {
      depths(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) = rows[y][x];
    }
  }
  return depths;
}

SceneDescription parse_scene(std::istream& in, const std::filesystem::path& base) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(std::string("scene is not valid JSON: ") + e.what());
  }
  SceneDescription scene;
  try {
    scene.camera.device = parse_device(j.at("camera"));
    for (const auto& p : j.at("projectors")) {
      ProjectorModel proj;
      proj.id = static_cast<int>(scene.projectors.size());
      proj.id = p.value("id", proj.id);
      proj.device = parse_device(p);
      if (p.contains("gamma")) {
        proj.gamma.clear();
        for (const auto& g : p.at("gamma")) {
          proj.gamma.push_back({g.value("a", 1.0), g.value("b", 1.0), g.value("c", 0.0)});
        }
      }
      scene.projectors.push_back(std::move(proj));
    }
    int next_id = 0;
    for (auto s : j.at("surfaces")) {
      if (!s.contains("id")) s["id"] = next_id;
      scene.surfaces.push_back(parse_surface(s, base));
      ++next_id;
    }
    for (const auto& t : j.value("targets", json::array())) {
      scene.targets.push_back({t.at("surface").get<int>(), t.at("source").get<std::string>()});
    }
    if (j.contains("bounds")) {
      scene.bounds.lower = j["bounds"].value("a", 0.0);
      scene.bounds.upper = j["bounds"].value("b", 255.0);
    }
    scene.reference_distance = j.value("reference_distance", 1.0);
    if (j.contains("calibration")) {
      const auto& c = j["calibration"];
      scene.calibration.contrast_floor = c.value("contrast_floor", scene.calibration.contrast_floor);
      scene.calibration.hole_fill_quorum = c.value("hole_fill_quorum", scene.calibration.hole_fill_quorum);
      scene.calibration.hole_fill_iterations = c.value("hole_fill_iterations", scene.calibration.hole_fill_iterations);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed scene: ") + e.what());
  }
  try {
    scene.prepare();
  } catch (const std::invalid_argument& e) {
    throw Error(std::string("invalid scene: ") + e.what());
  }
  return scene;
}

SceneDescription load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scene file " + path.string());
  return parse_scene(in, path.parent_path());
}

void save_scene(const SceneDescription& scene, std::ostream& out) {
  json j;
  j["camera"] = device_json(scene.camera.device);
  j["projectors"] = json::array();
  for (const auto& p : scene.projectors) {
    json pj = device_json(p.device);
    pj["id"] = p.id;
    pj["gamma"] = json::array();
    for (const auto& g : p.gamma) pj["gamma"].push_back({{"a", g.a}, {"b", g.b}, {"c", g.c}});
    j["projectors"].push_back(pj);
  }
  j["surfaces"] = json::array();
  for (const auto& s : scene.surfaces) {
    json sj = {{"id", s.id}, {"layer", s.layer}, {"albedo", s.albedo}};
    if (const auto* plane = std::get_if<PlaneGeometry>(&s.geometry)) {
      sj["type"] = "plane";
      sj["point"] = to_json(plane->point);
      sj["normal"] = to_json(plane->normal);
    } else {
      const auto& hf = std::get<HeightField>(s.geometry);
      sj["type"] = "depth_map";
      json rows = json::array();
      for (Eigen::Index y = 0; y < hf.depths.rows(); ++y) {
        json row = json::array();
        for (Eigen::Index x = 0; x < hf.depths.cols(); ++x) row.push_back(hf.depths(y, x));
        rows.push_back(row);
      }
      sj["values"] = rows;
      sj["origin"] = to_json(hf.origin);
      sj["spacing"] = hf.spacing;
      sj["pose"] = pose_json(hf.world_from_local);
    }
    j["surfaces"].push_back(sj);
  }
  j["targets"] = json::array();
  for (const auto& t : scene.targets) j["targets"].push_back({{"surface", t.surface}, {"source", t.source}});
  j["bounds"] = {{"a", scene.bounds.lower}, {"b", scene.bounds.upper}};
  j["reference_distance"] = scene.reference_distance;
  j["calibration"] = {{"contrast_floor", scene.calibration.contrast_floor},
                      {"hole_fill_quorum", scene.calibration.hole_fill_quorum},
                      {"hole_fill_iterations", scene.calibration.hole_fill_iterations}};
  out << j.dump(2) << '\n';
}

void save_scene(const SceneDescription& scene, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  save_scene(scene, out);
}

}  // namespace depthproj
