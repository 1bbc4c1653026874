#include "rigid_recover/scene_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "rigid_recover/errors.hpp"
#include "rigid_recover/tolerances.hpp"

namespace rigid {

using nlohmann::json;

namespace {

bool is_scalar_array(const json& v) {
  return std::all_of(v.begin(), v.end(), [](const json& e) { return !e.is_structured(); });
}

void write(const json& v, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (v.type()) {
    case json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [k, e] : v.items()) {
        if (!first) out += ",\n";
        first = false;
        out += inner + json(k).dump() + ": ";
        write(e, indent + 1, out);
      }
      out += "\n" + pad + "}";
      return;
    }
    case json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      if (is_scalar_array(v)) {
        out += "[";
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (i) out += ", ";
          write(v[i], indent, out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        write(v[i], indent + 1, out);
      }
      out += "\n" + pad + "]";
      return;
    }
    case json::value_t::number_float: {
      const double d = v.get<double>();
      if (!std::isfinite(d)) {
        out += "null";
        return;
      }
      std::string s = fmt::format("{:.17g}", d);
      // keep it a float on re-parse ("-0" would come back as integer 0)
      if (s.find_first_of(".e") == std::string::npos) s += ".0";
      out += s;
      return;
    }
    default:
      out += v.dump();
  }
}

[[noreturn]] void schema(const std::string& pointer, const std::string& what) {
  throw Error(ErrorCode::SchemaError, pointer + ": " + what);
}

void expect_keys(const json& obj, const std::string& ptr, const std::set<std::string>& required,
                 const std::set<std::string>& optional = {}) {
  if (!obj.is_object()) schema(ptr.empty() ? "/" : ptr, "expected an object");
  for (const auto& k : required) {
    if (!obj.contains(k)) schema(ptr + "/" + k, "missing");
  }
  for (const auto& [k, v] : obj.items()) {
    if (!required.count(k) && !optional.count(k)) schema(ptr + "/" + k, "unknown key");
  }
}

std::vector<double> numbers(const json& v, const std::string& ptr, std::size_t n) {
  if (!v.is_array() || v.size() != n) schema(ptr, fmt::format("expected an array of {} numbers", n));
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!v[i].is_number()) schema(fmt::format("{}/{}", ptr, i), "expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

// JSON pointer escaping of one reference token.
std::string token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

}  // namespace

std::string dump_canonical(const json& value) {
  std::string out;
  write(value, 0, out);
  out += "\n";
  return out;
}

SceneFile scene_file_from(const Scene& scene) {
  SceneFile f;
  f.projection = scene.projection;
  f.body = scene.body;
  f.poses = scene.poses;
  f.observations = scene.observations;
  return f;
}

json body_to_json(const RigidBodyModel& body) {
  json out = json::object();
  for (const auto& p : body.points()) out[p.label] = {p.position.x(), p.position.y(), p.position.z()};
  return out;
}

json pose_to_json(const PoseParams& pose) {
  json r = json::array();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r.push_back(pose.rotation(i, j));
  }
  return {{"rotation", r}, {"translation", {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

json scene_to_json(const SceneFile& scene) {
  json out;
  out["format_version"] = "1";
  out["projection"] = to_string(scene.projection);
  if (scene.body) out["body"] = body_to_json(*scene.body);
  if (!scene.poses.empty()) {
    out["poses"] = json::array();
    for (const auto& p : scene.poses) out["poses"].push_back(pose_to_json(p));
  }
  out["observations"] = json::array();
  for (const auto& obs : scene.observations) {
    json pts = json::object();
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (obs.kind == ProjectionKind::Orthogonal) {
        pts[obs.labels[i]] = {obs.image[i].x(), obs.image[i].y()};
      } else {
        pts[obs.labels[i]] = {obs.rays[i].x(), obs.rays[i].y(), obs.rays[i].z()};
      }
    }
    out["observations"].push_back({{"frame", obs.frame}, {"points", pts}});
  }
  return out;
}

SceneFile scene_from_json(const json& root) {
  expect_keys(root, "", {"format_version", "projection", "observations"}, {"body", "poses"});
  if (!root["format_version"].is_string() || root["format_version"] != "1") {
    schema("/format_version", "expected \"1\"");
  }
  SceneFile scene;
  if (!root["projection"].is_string()) schema("/projection", "expected a string");
  try {
    scene.projection = projection_from_string(root["projection"].get<std::string>());
  } catch (const Error&) {
    schema("/projection", "expected \"orthogonal\" or \"perspective\"");
  }
  const bool persp = scene.projection == ProjectionKind::Perspective;

  if (root.contains("body")) {
    const json& b = root["body"];
    if (!b.is_object()) schema("/body", "expected an object");
    std::vector<BodyPoint> pts;
    for (const auto& [label, v] : b.items()) {
      auto x = numbers(v, "/body/" + token(label), 3);
      pts.push_back({label, Eigen::Vector3d(x[0], x[1], x[2])});
    }
    scene.body = RigidBodyModel(std::move(pts));
  }

  if (root.contains("poses")) {
    const json& ps = root["poses"];
    if (!ps.is_array()) schema("/poses", "expected an array");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const std::string ptr = fmt::format("/poses/{}", i);
      expect_keys(ps[i], ptr, {"rotation", "translation"});
      auto r = numbers(ps[i]["rotation"], ptr + "/rotation", 9);
      auto t = numbers(ps[i]["translation"], ptr + "/translation", 3);
      PoseParams p;
      for (int a = 0; a < 3; ++a) {
        for (int c = 0; c < 3; ++c) p.rotation(a, c) = r[static_cast<std::size_t>(3 * a + c)];
      }
      p.translation = Eigen::Vector3d(t[0], t[1], t[2]);
      if (!p.is_proper_rotation(kTolerances.orthonormality)) {
        throw Error(ErrorCode::InvariantError, fmt::format("rotation of pose {} is not orthonormal", i + 1), i);
      }
      scene.poses.push_back(p);
    }
  }

  const json& os = root["observations"];
  if (!os.is_array() || os.empty()) schema("/observations", "expected a non-empty array");
  std::set<int> frames;
  for (std::size_t i = 0; i < os.size(); ++i) {
    const std::string ptr = fmt::format("/observations/{}", i);
    expect_keys(os[i], ptr, {"frame", "points"});
    if (!os[i]["frame"].is_number_integer() || os[i]["frame"].get<long long>() < 1) {
      schema(ptr + "/frame", "expected a positive integer");
    }
    FrameObservation obs;
    obs.kind = scene.projection;
    obs.frame = os[i]["frame"].get<int>();
    if (!frames.insert(obs.frame).second) schema(ptr + "/frame", "duplicate frame");
    const json& pts = os[i]["points"];
    if (!pts.is_object()) schema(ptr + "/points", "expected an object");
    for (const auto& [label, v] : pts.items()) {
      auto x = numbers(v, ptr + "/points/" + token(label), persp ? 3 : 2);
      obs.labels.push_back(label);
      if (persp) {
        Eigen::Vector3d ray(x[0], x[1], x[2]);
        if (std::abs(ray.norm() - 1.0) > kTolerances.unit_ray) {
          throw Error(ErrorCode::InvariantError,
                      fmt::format("ray of label {} in frame {} is not a unit vector", label, obs.frame), i,
                      ray.norm());
        }
        obs.rays.push_back(ray);
      } else {
        obs.image.emplace_back(x[0], x[1]);
      }
    }
    scene.observations.push_back(std::move(obs));
  }
  if (!scene.poses.empty() && scene.poses.size() != scene.observations.size()) {
    schema("/poses", "one pose per observed frame required");
  }
  return scene;
}

std::string dump_scene(const SceneFile& scene) { return dump_canonical(scene_to_json(scene)); }

SceneFile parse_scene(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return scene_from_json(root);
}

SceneFile load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str());
}

void save_scene(const SceneFile& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out << dump_scene(scene);
  if (!out) throw Error(ErrorCode::InvalidArgument, "write failed: " + path);
}

}  // namespace rigid
