#pragma once

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stepkit/pipeline.hpp"

namespace stepkit {

using Json = nlohmann::json;

namespace detail {

inline Vec3 parse_vec3(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() ||
      !j[2].is_number())
    throw ParseError(where + " must be an array of 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline Json vec3_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace detail

/// Scenario schema:
/// {
///   "surfaces": [ { "vertices": [[x,y,z], ...] } ],
///   "heightmap": { "origin": [x,y], "resolution": r, "dims": [nx,ny], "data": [...] },
///   "pre_segmented": false,
///   "start": { "pose": [x,y,yaw] | [x,y,z,roll,pitch,yaw], "feet": [[x,y,z] x4] },
///   "commands": [ { "t": 0.0, "vx": 0.1, "vy": 0.0, "yaw_rate": 0.0 } ],
///   "default_ground_z": 0.0
/// }
/// Raw surfaces run through process_surfaces unless pre_segmented is set.
inline Scene load_scenario(const std::string& path, const SegmentationConfig& seg = {},
                           double h_ref = kNominalHeight) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError("scenario " + path + ": " + e.what());
  }

  Scene scene;
  scene.default_ground_z = j.value("default_ground_z", 0.0);

  std::vector<RawSurface> raw;
  if (j.contains("surfaces")) {
    if (!j["surfaces"].is_array()) throw ParseError("'surfaces' must be an array");
    for (std::size_t i = 0; i < j["surfaces"].size(); ++i) {
      const Json& js = j["surfaces"][i];
      if (!js.contains("vertices") || !js["vertices"].is_array())
        throw ParseError("surface " + std::to_string(i) + ": missing 'vertices' array");
      RawSurface rs;
      for (std::size_t v = 0; v < js["vertices"].size(); ++v) {
        rs.vertices.push_back(detail::parse_vec3(
            js["vertices"][v],
            "surface " + std::to_string(i) + " vertex " + std::to_string(v)));
      }
      if (rs.vertices.size() < 3)
        throw ValidationError("surface " + std::to_string(i) + ": fewer than 3 vertices");
      raw.push_back(std::move(rs));
    }
  }

  if (j.value("pre_segmented", false)) {
    int id = 0;
    for (const auto& rs : raw) {
      const Polygon2 xy = project_xy(rs.vertices);
      if (!is_simple(xy)) throw ValidationError("pre-segmented surface is not simple");
      scene.surfaces.push_back(make_surface(id++, rs.vertices, seg.plane_tol));
      scene.obstacles.push_back(
          {scene.surfaces.back().contour_xy(), scene.surfaces.back().plane});
    }
  } else {
    // Optional safety rectangle under the start pose, exempt from the overlap
    // subtraction (off by default).
    std::optional<RawSurface> floor;
    if (j.value("safety_floor", false)) {
      double fx = 0.0, fy = 0.0;
      if (j.contains("start") && j["start"].contains("pose")) {
        fx = j["start"]["pose"][0].get<double>();
        fy = j["start"]["pose"][1].get<double>();
      }
      double fz = scene.default_ground_z;
      RawSurface rs;
      rs.vertices = {Vec3(fx - 0.6, fy - 0.4, fz), Vec3(fx + 0.6, fy - 0.4, fz),
                     Vec3(fx + 0.6, fy + 0.4, fz), Vec3(fx - 0.6, fy + 0.4, fz)};
      floor = rs;
    }
    SegmentationResult res = process_surfaces(raw, seg, floor ? &*floor : nullptr);
    scene.surfaces = std::move(res.surfaces);
    scene.obstacles = std::move(res.obstacles);
  }

  if (j.contains("heightmap")) {
    const Json& jh = j["heightmap"];
    HeightmapGrid grid;
    const Json& origin = jh.at("origin");
    grid.origin = Vec2(origin.at(0).get<double>(), origin.at(1).get<double>());
    grid.resolution = jh.at("resolution").get<double>();
    grid.nx = jh.at("dims").at(0).get<int>();
    grid.ny = jh.at("dims").at(1).get<int>();
    grid.data = jh.at("data").get<std::vector<double>>();
    if (!grid.valid()) throw ValidationError("heightmap grid is invalid");
    scene.heightmap = std::move(grid);
  }

  // Start state: defaults to the origin at nominal height over the terrain.
  Vec3 base(0.0, 0.0, 0.0);
  double yaw = 0.0;
  Vec3 rpy_extra = Vec3::Zero();
  bool explicit_z = false;
  if (j.contains("start") && j["start"].contains("pose")) {
    const Json& pose = j["start"]["pose"];
    if (pose.size() == 3) {
      base.x() = pose[0].get<double>();
      base.y() = pose[1].get<double>();
      yaw = pose[2].get<double>();
    } else if (pose.size() == 6) {
      base = Vec3(pose[0].get<double>(), pose[1].get<double>(), pose[2].get<double>());
      rpy_extra = Vec3(pose[3].get<double>(), pose[4].get<double>(), 0.0);
      yaw = pose[5].get<double>();
      explicit_z = true;
    } else {
      throw ParseError("start.pose must have 3 or 6 entries");
    }
  }
  const ElevationSource terrain = scene.terrain();
  if (!explicit_z) base.z() = elevation(terrain, base.x(), base.y()) + h_ref;
  RobotState start = nominal_state(base, yaw, 0.0);
  start.base.rpy.x() = rpy_extra.x();
  start.base.rpy.y() = rpy_extra.y();
  start.h_ref = h_ref;
  for (Foot f : kAllFeet) {
    Vec3 p = start.foot(f);
    p.z() = elevation(terrain, p.x(), p.y());
    start.foot(f) = p;
  }
  if (j.contains("start") && j["start"].contains("feet")) {
    const Json& feet = j["start"]["feet"];
    if (feet.size() != 4) throw ParseError("start.feet must list 4 positions");
    for (std::size_t i = 0; i < 4; ++i)
      start.foot_positions[i] = detail::parse_vec3(feet[i], "start.feet[" + std::to_string(i) + "]");
  }
  scene.start = start;

  if (j.contains("commands")) {
    for (const Json& jc : j["commands"]) {
      CommandSetpoint c;
      c.t = jc.value("t", 0.0);
      c.vx = jc.value("vx", 0.0);
      c.vy = jc.value("vy", 0.0);
      c.yaw_rate = jc.value("yaw_rate", 0.0);
      scene.commands.push_back(c);
    }
    std::sort(scene.commands.begin(), scene.commands.end(),
              [](const CommandSetpoint& a, const CommandSetpoint& b) { return a.t < b.t; });
  }
  return scene;
}

inline Json surfaces_json(const std::vector<Surface>& surfaces) {
  Json out = Json::array();
  for (const Surface& s : surfaces) {
    Json js;
    js["id"] = s.id;
    js["plane"] = {s.plane.a, s.plane.b, s.plane.c};
    js["vertices"] = Json::array();
    for (const auto& v : s.vertices) js["vertices"].push_back(detail::vec3_json(v));
    out.push_back(std::move(js));
  }
  return out;
}

inline void save_surfaces(const std::string& path, const SegmentationResult& result) {
  Json j;
  j["surfaces"] = surfaces_json(result.surfaces);
  j["diagnostics"] = result.diagnostics;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(1) << "\n";
}

inline Json plan_json(const SurfacePlan& plan) {
  Json j;
  j["status"] = plan.status == MipStatus::Optimal
                    ? "optimal"
                    : (plan.status == MipStatus::Timeout ? "timeout" : "infeasible");
  j["objective"] = plan.objective;
  j["solve_time_s"] = plan.stats.solve_time_s;
  j["nodes"] = plan.stats.nodes;
  j["phases"] = Json::array();
  for (const auto& e : plan.entries) {
    Json je;
    je["phase"] = e.phase;
    je["foot"] = foot_name(e.foot);
    je["surface_id"] = e.surface_id;
    je["position"] = detail::vec3_json(e.position);
    j["phases"].push_back(std::move(je));
  }
  return j;
}

inline Json curve_json(const BezierCurve& c) {
  Json j;
  j["duration"] = c.duration;
  j["control_points"] = Json::array();
  for (const auto& p : c.control_points) j["control_points"].push_back(detail::vec3_json(p));
  return j;
}

inline void export_trace_json(const RolloutTrace& trace, const std::string& path) {
  Json j;
  j["status"] = trace.status == RolloutStatus::Completed
                    ? "completed"
                    : (trace.status == RolloutStatus::Infeasible ? "infeasible" : "timeout");
  j["message"] = trace.message;
  j["warnings"] = trace.warnings;
  j["ticks"] = Json::array();
  for (const auto& r : trace.ticks) {
    Json jr;
    jr["t"] = r.t;
    jr["command"] = {r.command.vx, r.command.vy, r.command.yaw_rate};
    jr["base_raw"] = {r.base_raw.position.x(),  r.base_raw.position.y(),
                      r.base_raw.position.z(),  r.base_raw.rpy.x(),
                      r.base_raw.rpy.y(),       r.base_raw.rpy.z()};
    jr["base_filtered"] = {r.base_filtered.position.x(), r.base_filtered.position.y(),
                           r.base_filtered.position.z(), r.base_filtered.rpy.x(),
                           r.base_filtered.rpy.y(),      r.base_filtered.rpy.z()};
    jr["plan_index"] = r.plan_index;
    jr["over_budget"] = r.over_budget;
    jr["stage_ms"] = {r.stage_ms.plan_ms, r.stage_ms.footstep_ms, r.stage_ms.swing_ms};
    for (Foot f : kAllFeet) {
      Json jf;
      jf["position"] = detail::vec3_json(r.foot_positions[std::size_t(f)]);
      jf["target"] = detail::vec3_json(r.footstep_targets[std::size_t(f)]);
      jf["surface"] = r.foot_surface[std::size_t(f)];
      jf["swinging"] = r.swinging[std::size_t(f)];
      jr[foot_name(f)] = std::move(jf);
    }
    j["ticks"].push_back(std::move(jr));
  }
  j["contacts"] = Json::array();
  for (const auto& c : trace.contacts) {
    Json jc;
    jc["t"] = c.t;
    jc["phase"] = c.phase;
    jc["foot"] = foot_name(c.foot);
    jc["surface_id"] = c.surface_id;
    jc["position"] = detail::vec3_json(c.position);
    j["contacts"].push_back(std::move(jc));
  }
  j["plans"] = Json::array();
  for (const auto& p : trace.plans) {
    Json jp = plan_json(p.plan);
    jp["t"] = p.t;
    jp["created_phase"] = p.created_phase;
    j["plans"].push_back(std::move(jp));
  }
  j["curves"] = Json::array();
  for (const auto& c : trace.curves) {
    Json jc = curve_json(c.curve);
    jc["t"] = c.t;
    jc["foot"] = foot_name(c.foot);
    j["curves"].push_back(std::move(jc));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(1) << "\n";
}

/// One row per tick, flat columns.
inline void export_trace_csv(const RolloutTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "t,vx,vy,yaw_rate,base_x,base_y,base_z,roll,pitch,yaw,filt_x,filt_y,filt_z";
  for (Foot f : kAllFeet) {
    const std::string n = foot_name(f);
    out << "," << n << "_x," << n << "_y," << n << "_z," << n << "_surface," << n << "_swing";
  }
  out << ",plan_ms,footstep_ms,swing_ms,over_budget\n";
  for (const auto& r : trace.ticks) {
    out << r.t << ',' << r.command.vx << ',' << r.command.vy << ',' << r.command.yaw_rate << ','
        << r.base_raw.position.x() << ',' << r.base_raw.position.y() << ','
        << r.base_raw.position.z() << ',' << r.base_raw.rpy.x() << ',' << r.base_raw.rpy.y()
        << ',' << r.base_raw.rpy.z() << ',' << r.base_filtered.position.x() << ','
        << r.base_filtered.position.y() << ',' << r.base_filtered.position.z();
    for (Foot f : kAllFeet) {
      const auto& p = r.foot_positions[std::size_t(f)];
      out << ',' << p.x() << ',' << p.y() << ',' << p.z() << ','
          << r.foot_surface[std::size_t(f)] << ',' << int(r.swinging[std::size_t(f)]);
    }
    out << ',' << r.stage_ms.plan_ms << ',' << r.stage_ms.footstep_ms << ','
        << r.stage_ms.swing_ms << ',' << int(r.over_budget) << "\n";
  }
}

namespace detail {

struct SvgMapper {
  double min_x = 0.0, min_y = 0.0, scale = 1.0, height = 0.0;
  double x(double wx) const { return (wx - min_x) * scale + 20.0; }
  double y(double wy) const { return height - ((wy - min_y) * scale) + 20.0; }
};

inline const char* height_color(double z, double z_min, double z_max) {
  static const char* palette[] = {"#dfe8f1", "#c0d4e8", "#9fbede", "#7da7d4",
                                  "#5c90c9", "#3c79bd", "#2a5f9e"};
  if (z_max - z_min < 1e-9) return palette[0];
  const double f = std::clamp((z - z_min) / (z_max - z_min), 0.0, 1.0);
  return palette[int(f * 6.0)];
}

}  // namespace detail

/// Top-down view of the surfaces, footsteps and base path, plus a side view
/// of the recorded swing profiles.
inline void export_trace_svg(const RolloutTrace& trace, const std::vector<Surface>& surfaces,
                             const std::string& path) {
  double min_x = 1e9, max_x = -1e9, min_y = 1e9, max_y = -1e9;
  double z_min = 1e9, z_max = -1e9;
  for (const auto& s : surfaces) {
    for (const auto& v : s.vertices) {
      min_x = std::min(min_x, v.x());
      max_x = std::max(max_x, v.x());
      min_y = std::min(min_y, v.y());
      max_y = std::max(max_y, v.y());
      z_min = std::min(z_min, v.z());
      z_max = std::max(z_max, v.z());
    }
  }
  for (const auto& r : trace.ticks) {
    min_x = std::min(min_x, r.base_raw.position.x());
    max_x = std::max(max_x, r.base_raw.position.x());
    min_y = std::min(min_y, r.base_raw.position.y());
    max_y = std::max(max_y, r.base_raw.position.y());
  }
  if (min_x > max_x) {
    min_x = min_y = -1.0;
    max_x = max_y = 1.0;
    z_min = 0.0;
    z_max = 1.0;
  }
  const double span_x = std::max(max_x - min_x, 0.5);
  const double span_y = std::max(max_y - min_y, 0.5);
  const double scale = 500.0 / std::max(span_x, span_y);
  detail::SvgMapper m{min_x, min_y, scale, span_y * scale};

  const double top_h = span_y * scale + 40.0;
  const double side_h = 220.0;
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << span_x * scale + 40.0
      << "' height='" << top_h + side_h << "'>\n";
  for (const auto& s : surfaces) {
    svg << "<polygon points='";
    for (const auto& v : s.vertices) svg << m.x(v.x()) << "," << m.y(v.y()) << " ";
    svg << "' fill='" << detail::height_color(s.mean_height(), z_min, z_max)
        << "' stroke='#456' stroke-width='1'/>\n";
  }
  auto path_from = [](const std::vector<Vec2>& pts) {
    std::ostringstream d;
    for (std::size_t i = 0; i < pts.size(); ++i)
      d << (i == 0 ? "M" : " L") << pts[i].x() << " " << pts[i].y();
    return d.str();
  };
  if (!trace.ticks.empty()) {
    std::vector<Vec2> pts;
    for (const auto& r : trace.ticks)
      pts.emplace_back(m.x(r.base_raw.position.x()), m.y(r.base_raw.position.y()));
    svg << "<path d='" << path_from(pts)
        << "' fill='none' stroke='#d4572a' stroke-width='1.5'/>\n";
  }
  for (const auto& c : trace.contacts) {
    svg << "<circle cx='" << m.x(c.position.x()) << "' cy='" << m.y(c.position.y())
        << "' r='3' fill='#207520' fill-opacity='0.8'/>\n";
  }

  // Side view (x-z) of surfaces and swing curves.
  const double z_span = std::max(z_max - z_min + 0.4, 0.8);
  const double side_scale = std::min((span_x * scale) / std::max(span_x, 1e-6), 180.0 / z_span);
  auto sx = [&](double wx) { return (wx - min_x) * scale + 20.0; };
  auto sy = [&](double wz) { return top_h + side_h - 20.0 - (wz - z_min + 0.2) * side_scale; };
  for (const auto& s : surfaces) {
    double lo = 1e9, hi = -1e9, z = s.mean_height();
    for (const auto& v : s.vertices) {
      lo = std::min(lo, v.x());
      hi = std::max(hi, v.x());
    }
    svg << "<line x1='" << sx(lo) << "' y1='" << sy(z) << "' x2='" << sx(hi) << "' y2='"
        << sy(z) << "' stroke='#456' stroke-width='2'/>\n";
  }
  for (const auto& c : trace.curves) {
    std::vector<Vec2> pts;
    for (int k = 0; k <= 20; ++k) {
      const Vec3 p = c.curve.position(c.curve.duration * double(k) / 20.0);
      pts.emplace_back(sx(p.x()), sy(p.z()));
    }
    svg << "<path d='" << path_from(pts)
        << "' fill='none' stroke='#888' stroke-width='0.6' stroke-opacity='0.5'/>\n";
  }
  for (const auto& c : trace.contacts) {
    svg << "<circle cx='" << sx(c.position.x()) << "' cy='" << sy(c.position.z())
        << "' r='2.5' fill='#207520'/>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << svg.str();
}

}  // namespace stepkit
