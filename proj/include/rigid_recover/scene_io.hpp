#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "rigid_recover/geometry.hpp"
#include "rigid_recover/synth.hpp"

namespace rigid {

// On-disk scene. Body and poses are optional ground truth; observations are
// what the solvers read.
struct SceneFile {
  ProjectionKind projection = ProjectionKind::Orthogonal;
  std::optional<RigidBodyModel> body;
  std::vector<PoseParams> poses;
  std::vector<FrameObservation> observations;
};

SceneFile scene_file_from(const Scene& scene);

// Canonical text: sorted keys and labels, 17 significant digits, trailing newline.
std::string dump_canonical(const nlohmann::json& value);

nlohmann::json scene_to_json(const SceneFile& scene);
SceneFile scene_from_json(const nlohmann::json& value);

std::string dump_scene(const SceneFile& scene);
// Throws ParseError, SchemaError (message starts with the JSON pointer) or InvariantError.
SceneFile parse_scene(const std::string& text);

SceneFile load_scene(const std::string& path);
void save_scene(const SceneFile& scene, const std::string& path);

nlohmann::json body_to_json(const RigidBodyModel& body);
nlohmann::json pose_to_json(const PoseParams& pose);

}  // namespace rigid
