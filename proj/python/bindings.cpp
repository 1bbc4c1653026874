#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <sstream>

#include "rigid_recover/cli.hpp"
#include "rigid_recover/feasibility.hpp"
#include "rigid_recover/ortho_solver.hpp"
#include "rigid_recover/persp_solver.hpp"
#include "rigid_recover/scene_io.hpp"
#include "rigid_recover/synth.hpp"

namespace py = pybind11;
using namespace rigid;

namespace {

PyObject* g_error_type = nullptr;

RigidBodyModel body_from_dict(const std::map<std::string, Eigen::Vector3d>& pts) {
  std::vector<BodyPoint> out;
  for (const auto& [k, v] : pts) out.push_back({k, v});
  return RigidBodyModel(std::move(out));
}

std::map<std::string, Eigen::Vector3d> body_to_dict(const RigidBodyModel& b) {
  std::map<std::string, Eigen::Vector3d> out;
  for (const auto& p : b.points()) out[p.label] = p.position;
  return out;
}

py::dict report_dict(const FeasibilityReport& r) {
  py::dict d;
  d["points"] = r.instance.points;
  d["lines"] = r.instance.lines;
  d["frames"] = r.instance.frames;
  d["projection"] = to_string(r.instance.projection);
  d["dof"] = r.dof;
  d["info"] = r.info;
  d["margin"] = r.margin;
  d["verdict"] = to_string(r.verdict);
  return d;
}

const char* handed(Handedness h) { return h == Handedness::Proper ? "proper" : "reflected"; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Rigid structure and motion recovery from point correspondences";
  m.attr("__version__") = "0.1.0";

  g_error_type = PyErr_NewException("rigid_recover._core.RigidError", PyExc_RuntimeError, nullptr);
  m.add_object("RigidError", py::handle(g_error_type));
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_steal<py::object>(PyObject_CallFunction(g_error_type, "s", e.what()));
      inst.attr("code") = std::string(to_string(e.code()));
      inst.attr("index") = e.index() ? py::cast(*e.index()) : py::none();
      inst.attr("value") = e.value() ? py::cast(*e.value()) : py::none();
      PyErr_SetObject(g_error_type, inst.ptr());
    }
  });

  py::class_<RigidBodyModel>(m, "Body")
      .def(py::init(&body_from_dict), py::arg("points"))
      .def_property_readonly("labels", &RigidBodyModel::labels)
      .def_property_readonly("positions", [](const RigidBodyModel& b) -> Eigen::MatrixXd { return b.matrix().transpose(); })
      .def("position", &RigidBodyModel::position, py::arg("label"))
      .def("to_dict", &body_to_dict)
      .def("__len__", &RigidBodyModel::size);

  py::class_<PoseParams>(m, "Pose")
      .def(py::init([](const Eigen::Matrix3d& r, const Eigen::Vector3d& t) { return PoseParams{r, t}; }),
           py::arg("rotation") = Eigen::Matrix3d::Identity(), py::arg("translation") = Eigen::Vector3d::Zero())
      .def_readwrite("rotation", &PoseParams::rotation)
      .def_readwrite("translation", &PoseParams::translation)
      .def("apply", &PoseParams::apply);

  py::class_<FrameObservation>(m, "Observation")
      .def_property_readonly("projection", [](const FrameObservation& o) { return to_string(o.kind); })
      .def_readonly("frame", &FrameObservation::frame)
      .def_readonly("labels", &FrameObservation::labels)
      .def_readonly("image", &FrameObservation::image)
      .def_readonly("rays", &FrameObservation::rays);

  py::class_<SceneFile>(m, "Scene")
      .def_property_readonly("projection", [](const SceneFile& s) { return to_string(s.projection); })
      .def_readonly("body", &SceneFile::body)
      .def_readonly("poses", &SceneFile::poses)
      .def_readonly("observations", &SceneFile::observations);

  m.def(
      "dof_balance",
      [](int points, int lines, int frames, const std::string& projection) {
        return report_dict(dof_balance({points, lines, frames, projection_from_string(projection)}));
      },
      py::arg("points"), py::arg("lines"), py::arg("frames"), py::arg("projection"));
  m.def("reference_table", [] {
    py::list out;
    for (const auto& r : feasibility_table(reference_instances())) out.append(report_dict(r));
    return out;
  });

  m.def(
      "generate",
      [](int n_points, int n_frames, const std::string& projection, std::uint64_t seed, double body_scale,
         double max_rotation, double max_translation, double noise_sigma) {
        SynthSpec s;
        s.n_points = n_points;
        s.n_frames = n_frames;
        s.projection = projection_from_string(projection);
        s.seed = seed;
        s.body_scale = body_scale;
        s.motion = {max_rotation, max_translation};
        s.noise_sigma = noise_sigma;
        return scene_file_from(generate(s));
      },
      py::arg("n_points") = 4, py::arg("n_frames") = 2, py::arg("projection") = "orthogonal", py::arg("seed") = 0,
      py::arg("body_scale") = 1.0, py::arg("max_rotation") = 3.141592653589793, py::arg("max_translation") = 1.0,
      py::arg("noise_sigma") = 0.0);

  m.def("project_orthogonal", &project_orthogonal, py::arg("body"), py::arg("pose"), py::arg("frame") = 1);
  m.def("project_perspective", &project_perspective, py::arg("body"), py::arg("camera"), py::arg("frame") = 1);
  m.def("shape_distance", &shape_distance);
  m.def("mirror_body", &mirror_body);
  m.def("procrustes_align", [](const Eigen::Matrix3Xd& src, const Eigen::Matrix3Xd& dst) {
    const Alignment a = procrustes_align(src, dst);
    return py::make_tuple(a.pose, a.rms);
  });

  py::class_<RecoveryResult>(m, "OrthoSolution")
      .def_property_readonly("lengths",
                             [](const RecoveryResult& r) {
                               std::map<std::string, double> out;
                               for (const auto& [k, v] : r.lengths.entries()) out[k.name()] = v;
                               return out;
                             })
      .def_readonly("structures", &RecoveryResult::structures)
      .def_readonly("motions", &RecoveryResult::motions)
      .def_readonly("mirror_flag", &RecoveryResult::mirror_flag)
      .def_readonly("mirror_structures", &RecoveryResult::mirror_structures)
      .def_readonly("residual", &RecoveryResult::residual)
      .def_readonly("isolated", &RecoveryResult::isolated);

  m.def(
      "recover_orthogonal",
      [](const std::string& config, const std::vector<FrameObservation>& frames) {
        return recover_orthogonal(ortho_config_from_string(config), frames);
      },
      py::arg("config"), py::arg("frames"));

  py::class_<PerspectiveSolution>(m, "PerspSolution")
      .def_readonly("body", &PerspectiveSolution::body)
      .def_readonly("camera1", &PerspectiveSolution::camera1)
      .def_readonly("camera2", &PerspectiveSolution::camera2)
      .def_readonly("relative", &PerspectiveSolution::relative)
      .def_property_readonly("theta1", [](const PerspectiveSolution& s) { return s.vars.pose.theta1; })
      .def_property_readonly("theta2", [](const PerspectiveSolution& s) { return s.vars.pose.theta2; })
      .def_property_readonly("phi2", [](const PerspectiveSolution& s) { return s.vars.pose.phi2; })
      .def_property_readonly("handedness",
                             [](const PerspectiveSolution& s) {
                               return py::make_tuple(handed(s.handedness.first), handed(s.handedness.second));
                             })
      .def_readonly("residual", &PerspectiveSolution::residual);

  m.def(
      "solve_five_point",
      [](const FrameObservation& a, const FrameObservation& b) { return solve_five_point_two_frame(a, b); },
      py::arg("first"), py::arg("second"));

  py::class_<AmbiguityFamily>(m, "Family")
      .def_readonly("grid", &AmbiguityFamily::grid)
      .def_property_readonly("thetas",
                             [](const AmbiguityFamily& f) {
                               std::vector<double> out;
                               for (const auto& s : f.samples) out.push_back(s.theta1);
                               return out;
                             })
      .def_property_readonly("bodies",
                             [](const AmbiguityFamily& f) {
                               std::vector<RigidBodyModel> out;
                               for (const auto& s : f.samples) out.push_back(s.body);
                               return out;
                             })
      .def_property_readonly("residuals",
                             [](const AmbiguityFamily& f) {
                               std::vector<double> out;
                               for (const auto& s : f.samples) out.push_back(s.residual);
                               return out;
                             })
      .def_property_readonly("failures",
                             [](const AmbiguityFamily& f) {
                               py::list out;
                               for (const auto& [i, c] : f.failures) out.append(py::make_tuple(i, std::string(to_string(c))));
                               return out;
                             })
      .def_readonly("break_index", &AmbiguityFamily::break_index)
      .def("max_pairwise_shape_distance", &AmbiguityFamily::max_pairwise_shape_distance)
      .def("demonstrates_distinct_bodies", &AmbiguityFamily::demonstrates_distinct_bodies);

  m.def(
      "trace_ambiguity_family",
      [](const FrameObservation& a, const FrameObservation& b, const std::vector<double>& grid) {
        return trace_ambiguity_family(a, b, grid);
      },
      py::arg("first"), py::arg("second"), py::arg("grid"));

  m.def(
      "anchor_theta1",
      [](const SceneFile& s) {
        if (!s.body || s.poses.size() < 2 || s.observations.empty()) {
          throw Error(ErrorCode::InvalidArgument, "scene carries no ground truth");
        }
        return anchor_scene(*s.body, s.poses[0], s.poses[1], default_meet_labels(s.observations[0])).vars.pose.theta1;
      },
      py::arg("scene"));

  m.def("dump_scene", &dump_scene);
  m.def("parse_scene", &parse_scene);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int rc = run_cli(args, out, err);
        return py::make_tuple(rc, out.str(), err.str());
      },
      py::arg("args"));
}
