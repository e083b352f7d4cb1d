// Terrain-aware contact planning toolkit: segment terrain, plan contact
// surfaces, roll out plans kinematically and benchmark the solvers.
#include <CLI11.hpp>

#include <algorithm>
#include <iostream>

#include "stepkit/io.hpp"

using namespace stepkit;

namespace {

constexpr int kExitCompleted = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitTimeout = 3;
constexpr int kExitIo = 4;

std::vector<RawSurface> load_raw_surfaces(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("parse error: ") + e.what());
  }
  std::vector<RawSurface> out;
  for (std::size_t i = 0; i < j.value("surfaces", Json::array()).size(); ++i) {
    const Json& js = j["surfaces"][i];
    RawSurface rs;
    for (const auto& v : js.at("vertices"))
      rs.vertices.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(),
                               v.at(2).get<double>());
    out.push_back(std::move(rs));
  }
  return out;
}

Vec2 parse_vel(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) return Vec2(std::stod(text), 0.0);
  return Vec2(std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1)));
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stepkit - terrain-aware contact planning toolkit"};
  app.require_subcommand(1);

  // --- segment ---
  auto* segment = app.add_subcommand("segment", "post-process raw terrain polygons");
  std::string seg_in, seg_out, seg_svg;
  SegmentationConfig seg_cfg;
  segment->add_option("--in", seg_in, "raw terrain JSON")->required();
  segment->add_option("--out", seg_out, "output surfaces JSON")->required();
  segment->add_option("--margin", seg_cfg.inner_margin, "inner safety margin [m]");
  segment->add_option("--outer", seg_cfg.outer_margin, "outer obstacle margin [m]");
  segment->add_option("--min-area", seg_cfg.min_area, "minimum piece area [m^2]");
  segment->add_option("--svg", seg_svg, "render the surfaces to SVG");

  // --- plan ---
  auto* plan_cmd = app.add_subcommand("plan", "solve the surface-selection MIP once");
  std::string plan_scenario, plan_out = "plan.json", plan_gait = "walk", plan_vel = "0.1,0";
  double plan_yaw_rate = 0.0;
  int plan_horizon = 0;
  double box_x = -1.0, box_y = -1.0;
  double plan_timeout = 0.25;
  plan_cmd->add_option("--scenario", plan_scenario, "scenario JSON")->required();
  plan_cmd->add_option("--out", plan_out, "plan JSON output");
  plan_cmd->add_option("--gait", plan_gait, "walk or trot");
  plan_cmd->add_option("--vel", plan_vel, "commanded velocity vx,vy [m/s]");
  plan_cmd->add_option("--yaw-rate", plan_yaw_rate, "commanded yaw rate [rad/s]");
  plan_cmd->add_option("--horizon", plan_horizon, "override the gait horizon");
  plan_cmd->add_option("--box-x", box_x, "kinematic box half reach in x [m]");
  plan_cmd->add_option("--box-y", box_y, "kinematic box half reach in y [m]");
  plan_cmd->add_option("--timeout", plan_timeout, "MIP budget [s]");

  // --- rollout ---
  auto* roll_cmd = app.add_subcommand("rollout", "run the kinematic gait rollout");
  std::string roll_scenario, roll_out = "trace.json", roll_svg, roll_csv, roll_gait = "walk";
  double roll_duration = 30.0;
  bool roll_async = false;
  roll_cmd->add_option("--scenario", roll_scenario, "scenario JSON")->required();
  roll_cmd->add_option("--duration", roll_duration, "simulated time [s]");
  roll_cmd->add_option("--gait", roll_gait, "walk or trot");
  roll_cmd->add_option("--out", roll_out, "trace JSON output");
  roll_cmd->add_option("--svg", roll_svg, "render the trace to SVG");
  roll_cmd->add_option("--csv", roll_csv, "per-tick CSV output");
  roll_cmd->add_flag("--async-plan", roll_async, "plan with one-phase latency");

  // --- bench ---
  auto* bench_cmd = app.add_subcommand("bench", "timing statistics for the planning stages");
  std::string bench_suite = "table2", bench_scenario = "scenarios/staircase7.json";
  int bench_repeat = 50;
  bench_cmd->add_option("--suite", bench_suite, "benchmark suite (table2)");
  bench_cmd->add_option("--scenario", bench_scenario, "scenario JSON");
  bench_cmd->add_option("--repeat", bench_repeat, "number of solves");

  // --- swing demo ---
  auto* swing_cmd = app.add_subcommand("swing", "swing-trajectory demo");
  std::string swing_out = "swing_demo.svg";
  bool swing_demo = false;
  swing_cmd->add_flag("--demo", swing_demo, "render a family of swing curves");
  swing_cmd->add_option("--out", swing_out, "SVG output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*segment) {
      const auto raw = load_raw_surfaces(seg_in);
      const SegmentationResult result = process_surfaces(raw, seg_cfg);
      save_surfaces(seg_out, result);
      for (const auto& d : result.diagnostics) std::cerr << "note: " << d << "\n";
      std::cout << result.surfaces.size() << " surfaces written to " << seg_out << "\n";
      if (!seg_svg.empty()) export_trace_svg(RolloutTrace{}, result.surfaces, seg_svg);
      return kExitCompleted;
    }

    if (*plan_cmd) {
      const Scene scene = load_scenario(plan_scenario);
      GaitPattern gait = GaitPattern::by_name(plan_gait);
      if (plan_horizon > 0) gait.horizon = plan_horizon;
      KinematicBox box;
      if (box_x > 0.0) {
        box.lower.x() = -box_x;
        box.upper.x() = box_x;
      }
      if (box_y > 0.0) {
        box.lower.y() = -box_y;
        box.upper.y() = box_y;
      }
      SelectionConfig cfg;
      cfg.timeout_s = plan_timeout;
      const Vec2 vel = parse_vel(plan_vel);
      SurfacePlan plan;
      try {
        plan = plan_surfaces(scene.start, vel, plan_yaw_rate, gait, scene.surfaces,
                             scene.terrain(), box, cfg);
      } catch (const NoReachableSurface& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
      }
      std::ofstream out(plan_out);
      if (!out) throw IoError("cannot write " + plan_out);
      out << plan_json(plan).dump(1) << "\n";
      std::cout << "plan status: "
                << (plan.status == MipStatus::Optimal
                        ? "optimal"
                        : (plan.status == MipStatus::Timeout ? "timeout" : "infeasible"))
                << ", " << plan.stats.nodes << " nodes, " << plan.stats.solve_time_s * 1e3
                << " ms\n";
      if (plan.status == MipStatus::Infeasible) return kExitInfeasible;
      if (plan.status == MipStatus::Timeout) return kExitTimeout;
      return kExitCompleted;
    }

    if (*roll_cmd) {
      const Scene scene = load_scenario(roll_scenario);
      PipelineConfig cfg;
      cfg.gait = GaitPattern::by_name(roll_gait);
      cfg.plan_async = roll_async;
      const RolloutTrace trace = rollout(scene, cfg, roll_duration);
      export_trace_json(trace, roll_out);
      if (!roll_csv.empty()) export_trace_csv(trace, roll_csv);
      if (!roll_svg.empty()) export_trace_svg(trace, scene.surfaces, roll_svg);
      std::cout << "rollout "
                << (trace.status == RolloutStatus::Completed
                        ? "completed"
                        : (trace.status == RolloutStatus::Infeasible ? "infeasible" : "timeout"))
                << ": " << trace.ticks.size() << " ticks, " << trace.contacts.size()
                << " contacts";
      if (!trace.message.empty()) std::cout << " (" << trace.message << ")";
      std::cout << "\n";
      if (trace.status == RolloutStatus::Infeasible) return kExitInfeasible;
      if (trace.status == RolloutStatus::Timeout) return kExitTimeout;
      return kExitCompleted;
    }

    if (*bench_cmd) {
      if (bench_suite != "table2") throw ValidationError("unknown suite: " + bench_suite);
      const Scene scene = load_scenario(bench_scenario);
      double min_x = 1e9, max_x = -1e9;
      for (const auto& s : scene.surfaces)
        for (const auto& v : s.vertices) {
          min_x = std::min(min_x, v.x());
          max_x = std::max(max_x, v.x());
        }
      std::vector<double> mip_ms, pre_ms, foot_ms, swing_ms;
      const GaitPattern gait = GaitPattern::walk();
      SelectionConfig cfg;
      cfg.timeout_s = 10.0;
      const ElevationSource terrain = scene.terrain();
      for (int i = 0; i < bench_repeat; ++i) {
        const double f = double(i) / double(std::max(1, bench_repeat - 1));
        const double x = scene.start.base.position.x() +
                         f * (max_x - 0.6 - scene.start.base.position.x());
        RobotState s = nominal_state(Vec3(x, 0.0, 0.0), 0.0, 0.0);
        s.base.position.z() = elevation(terrain, x, 0.0) + s.h_ref;
        for (Foot foot : kAllFeet) {
          Vec3 p = s.foot(foot);
          p.z() = elevation(terrain, p.x(), p.y());
          s.foot(foot) = p;
        }
        const auto t0 = std::chrono::steady_clock::now();
        const auto configs = extrapolate_configs(s, Vec2(0.1, 0), 0.0, gait, terrain, cfg);
        std::vector<ContactSlot> slots;
        try {
          slots = preselect_surfaces(configs, gait, KinematicBox{}, scene.surfaces);
        } catch (const NoReachableSurface&) {
          continue;
        }
        const auto t1 = std::chrono::steady_clock::now();
        pre_ms.push_back(std::chrono::duration<double>(t1 - t0).count() * 1e3);
        const MiqpProblem problem = build_selection_miqp(slots, scene.surfaces, KinematicBox{},
                                                         Vec2(0.1, 0), 0.0, gait, cfg);
        const MipSolution sol = solve_miqp(problem, cfg.timeout_s);
        mip_ms.push_back(sol.stats.solve_time_s * 1e3);

        if (sol.status == MipStatus::Optimal) {
          const Surface& surf = scene.surfaces[std::size_t(sol.assignment[0] >= 0 ? 0 : 0)];
          const auto t2 = std::chrono::steady_clock::now();
          (void)optimize_footstep(Vec2(x + 0.3, 0.234), surf, KinematicBox{},
                                  s.hip_position(Foot::LF, HipGeometry{}), 0.0);
          const auto t3 = std::chrono::steady_clock::now();
          foot_ms.push_back(std::chrono::duration<double>(t3 - t2).count() * 1e3);
          const ReferenceTrajectory ref = reference_trajectory(
              s.foot(Foot::LF), Vec3::Zero(), Vec3::Zero(),
              s.foot(Foot::LF) + Vec3(0.06, 0, 0.0), gait.step_duration, kDefaultApex);
          const auto set = active_halfspaces(ref, scene.obstacles);
          const SwingFit fit = fit_bezier(ref, set);
          (void)fit;
          const auto t4 = std::chrono::steady_clock::now();
          swing_ms.push_back(std::chrono::duration<double>(t4 - t3).count() * 1e3);
        }
      }
      auto print_stat = [](const char* name, std::vector<double> v) {
        if (v.empty()) return;
        const double med = median(v);
        const double mx = *std::max_element(v.begin(), v.end());
        const double mn = *std::min_element(v.begin(), v.end());
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= double(v.size());
        std::printf("%-14s mean %8.3f ms  median %8.3f ms  min %8.3f ms  max %8.3f ms\n", name,
                    mean, med, mn, mx);
      };
      print_stat("pre-selection", pre_ms);
      print_stat("mip", mip_ms);
      print_stat("footstep", foot_ms);
      print_stat("swing", swing_ms);
      return kExitCompleted;
    }

    if (*swing_cmd) {
      if (!swing_demo) throw ValidationError("swing: only --demo is available");
      RolloutTrace trace;
      std::vector<Surface> surfaces;
      // Flat swing, a stair tread and a 20 cm obstacle crossing.
      struct Case {
        Vec3 goal;
        double obstacle_h;
      };
      const std::vector<Case> cases = {{Vec3(0.3, 0, 0.0), 0.0},
                                       {Vec3(0.29, 0, 0.17), 0.0},
                                       {Vec3(0.6, 0, 0.0), 0.2}};
      int id = 0;
      for (const auto& c : cases) {
        std::vector<ObstacleContour> obstacles;
        if (c.obstacle_h > 0.0) {
          ObstacleContour obs;
          obs.contour = {Vec2(0.2, -0.5), Vec2(0.4, -0.5), Vec2(0.4, 0.5), Vec2(0.2, 0.5)};
          obs.plane = PlaneCoeffs{0, 0, c.obstacle_h};
          obstacles.push_back(obs);
          Polygon3 block = {Vec3(0.2, -0.5, c.obstacle_h), Vec3(0.4, -0.5, c.obstacle_h),
                            Vec3(0.4, 0.5, c.obstacle_h), Vec3(0.2, 0.5, c.obstacle_h)};
          surfaces.push_back(make_surface(id++, block));
        }
        const ReferenceTrajectory ref = reference_trajectory(
            Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), c.goal, 0.6, kDefaultApex);
        const auto set = active_halfspaces(ref, obstacles);
        const SwingFit fit = fit_bezier(ref, set);
        if (fit.status == QpStatus::Optimal) trace.curves.push_back({0.0, Foot::LF, fit.curve});
      }
      export_trace_svg(trace, surfaces, swing_out);
      std::cout << trace.curves.size() << " curves written to " << swing_out << "\n";
      return kExitCompleted;
    }
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  }
  return kExitCompleted;
}
