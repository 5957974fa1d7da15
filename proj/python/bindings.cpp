#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "scenu/cli.hpp"
#include "scenu/derive.hpp"
#include "scenu/dsl.hpp"
#include "scenu/evaluation.hpp"
#include "scenu/geometry.hpp"
#include "scenu/json_io.hpp"
#include "scenu/physics.hpp"
#include "scenu/validate.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

using Xyz = std::tuple<double, double, double>;
using Xy = std::tuple<double, double>;
// center, yaw, (length, width, height)
using BoxSpec = std::tuple<Xyz, double, Xyz>;
// center, heading, length, width
using FootprintSpec = std::tuple<Xy, double, double, double>;

scenu::Vec3 vec(const Xyz& v) { return {std::get<0>(v), std::get<1>(v), std::get<2>(v)}; }

scenu::RunConfig config_with(const std::vector<std::string>& overrides) {
  auto cfg = scenu::RunConfig::defaults();
  for (const auto& o : overrides) scenu::apply_override(cfg, o);
  return cfg;
}

scenu::Box box(const BoxSpec& b) {
  const auto& [c, yaw, e] = b;
  return scenu::make_box(vec(c), scenu::rotation_from_yaw(yaw), {std::get<0>(e), std::get<1>(e), std::get<2>(e)});
}

scenu::Footprint footprint(const FootprintSpec& f) {
  const auto& [c, heading, length, width] = f;
  return scenu::make_footprint({std::get<0>(c), std::get<1>(c)}, heading, length, width);
}

std::optional<scenu::ScenarioAnticipation> maybe_anticipation(const std::optional<std::string>& text) {
  if (!text) return std::nullopt;
  return scenu::anticipation_from_json(json::parse(*text));
}

json diagnostics(const std::vector<scenu::Diagnostic>& ds) {
  json out = json::array();
  for (const auto& d : ds) out.push_back({{"line", d.line}, {"column", d.column}, {"message", d.message}});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Scenario understanding: annotation model, derivation, anticipation and scoring.";

  static py::exception<scenu::Error> error(m, "ScenuError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const scenu::Error& e) {
      py::set_error(error, e.what());
    } catch (const json::exception& e) {
      py::set_error(error, e.what());
    }
  });

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = scenu::run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command-line tool in-process. Returns (exit_code, stdout, stderr).");

  m.def(
      "validate",
      [](const std::string& json_text) { return scenu::to_json(scenu::validate_document(json_text)).dump(); },
      py::arg("json_text"));

  m.def(
      "parse_dsl",
      [](const std::string& text) {
        const auto r = scenu::parse_annotation_text(text);
        json out{{"ok", r.ok()}, {"errors", diagnostics(r.errors)}};
        if (r.ok()) {
          out["description"] = scenu::to_json(r.value->description);
          out["anticipation"] = r.value->anticipation ? scenu::to_json(*r.value->anticipation) : json(nullptr);
          out["actions"] = scenu::to_json(r.value->actions);
          out["warnings"] = diagnostics(r.value->warnings);
        }
        return out.dump();
      },
      py::arg("text"));

  m.def(
      "serialize_dsl",
      [](const std::string& description, const std::optional<std::string>& anticipation) {
        const auto d = scenu::description_from_json(json::parse(description));
        const auto a = maybe_anticipation(anticipation);
        return scenu::serialize(d, a ? &*a : nullptr);
      },
      py::arg("description"), py::arg("anticipation") = py::none());

  m.def(
      "derive",
      [](const std::string& log_text, const std::string& context, const std::vector<std::string>& overrides) {
        const auto log = scenu::parse_trajectory_log(log_text);
        if (!log.ok()) throw scenu::Error("trajectory log: " + scenu::to_string(log.errors.front()));
        const auto scene = scenu::scene_context_from_json(json::parse(context));
        return scenu::dump(scenu::to_json(scenu::derive_description(*log.value, scene, config_with(overrides))));
      },
      py::arg("log_text"), py::arg("context"), py::arg("overrides") = std::vector<std::string>{});

  m.def(
      "anticipate",
      [](const std::string& description, const std::vector<std::string>& overrides) {
        const auto d = scenu::description_from_json(json::parse(description));
        return scenu::dump(scenu::to_json(scenu::anticipate(d, config_with(overrides))));
      },
      py::arg("description"), py::arg("overrides") = std::vector<std::string>{});

  m.def(
      "score",
      [](const std::string& gt, const std::optional<std::string>& gt_anticipation, const std::string& candidate,
         const std::optional<std::string>& candidate_anticipation, const std::vector<std::string>& overrides) {
        const auto cfg = config_with(overrides);
        const auto g = scenu::description_from_json(json::parse(gt));
        const auto c = scenu::description_from_json(json::parse(candidate));
        const auto ga = maybe_anticipation(gt_anticipation);
        const auto ca = maybe_anticipation(candidate_anticipation);
        const auto s = scenu::score_understanding(g, ga ? &*ga : nullptr, c, ca ? &*ca : nullptr, cfg.scoring);
        return scenu::dump(scenu::to_json(s, g.id, c.id, scenu::config_hash(cfg)));
      },
      py::arg("gt"), py::arg("gt_anticipation") = py::none(), py::arg("candidate"),
      py::arg("candidate_anticipation") = py::none(), py::arg("overrides") = std::vector<std::string>{});

  m.def(
      "decide",
      [](const std::string& description, const std::optional<std::string>& anticipation, const std::string& task,
         const std::vector<std::string>& overrides) {
        const auto d = scenu::description_from_json(json::parse(description));
        const auto a = maybe_anticipation(anticipation);
        scenu::TaskSpec spec;
        const auto kind = scenu::parse_enum<scenu::TaskKind>(task);
        if (!kind) throw scenu::Error("unknown task '" + task + "'");
        spec.kind = *kind;
        return scenu::to_json(scenu::decide(d, a ? &*a : nullptr, spec, config_with(overrides))).dump();
      },
      py::arg("description"), py::arg("anticipation") = py::none(), py::arg("task") = "decision",
      py::arg("overrides") = std::vector<std::string>{});

  m.def(
      "config_hash",
      [](const std::vector<std::string>& overrides) { return scenu::config_hash(config_with(overrides)); },
      py::arg("overrides") = std::vector<std::string>{});

  m.def(
      "classify_directional_relation",
      [](const Xyz& ref, double heading, const Xyz& target) {
        std::vector<std::string> out;
        for (auto r : scenu::classify_directional_relation(vec(ref), heading, vec(target))) {
          out.emplace_back(scenu::to_string(r));
        }
        return out;
      },
      py::arg("ref"), py::arg("heading"), py::arg("target"));

  m.def(
      "surface_distance", [](const BoxSpec& a, const BoxSpec& b) { return scenu::surface_distance(box(a), box(b)); },
      py::arg("a"), py::arg("b"), "Boxes are (center_xyz, yaw, (length, width, height)).");

  m.def(
      "occlusion_state",
      [](const Xy& viewpoint, const FootprintSpec& target, const std::vector<FootprintSpec>& occluders) {
        std::vector<scenu::Footprint> occ;
        for (const auto& o : occluders) occ.push_back(footprint(o));
        const auto r =
            scenu::occlusion_state({std::get<0>(viewpoint), std::get<1>(viewpoint)}, footprint(target), occ);
        return py::make_tuple(std::string(scenu::to_string(r.state)), r.blocked_fraction);
      },
      py::arg("viewpoint"), py::arg("target"), py::arg("occluders"),
      "Footprints are (center_xy, heading, length, width).");

  m.def("rss_longitudinal_safe_distance", &scenu::rss_longitudinal_safe_distance, py::arg("v_rear"),
        py::arg("v_front"), py::arg("rho"), py::arg("a_max"), py::arg("b_min"), py::arg("b_max"));
}
