#include "screekit/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Geometry>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "screekit/error.hpp"

namespace screekit {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kTieTolerance = 1e-12;

}  // namespace

std::vector<std::string> PlotSpec::validate() const {
  if (!(std::isfinite(width) && width > 0.0) || !(std::isfinite(height) && height > 0.0)) {
    fail(ErrorKind::usage, "plot width and height must be > 0");
  }
  if (!origin.allFinite() || !std::isfinite(orientation)) fail(ErrorKind::usage, "plot pose must be finite");
  std::vector<std::string> warnings;
  if (width * height < kMinPlotArea) {
    warnings.push_back(fmt::format("plot '{}' covers {:g} m^2, below the {:g} m^2 survey minimum", name,
                                   width * height, kMinPlotArea));
  }
  return warnings;
}

Eigen::Vector2d PlotSpec::to_local(const Eigen::Vector2d& p) const {
  return origin + Eigen::Rotation2Dd(orientation) * p;
}

PlotSpec load_plot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "", "cannot open plot file");
  PlotSpec plot;
  try {
    const auto doc = nlohmann::json::parse(in);
    plot.name = doc.value("name", std::string{});
    plot.width = doc.at("width").get<double>();
    plot.height = doc.at("height").get<double>();
    if (doc.contains("origin")) {
      const auto& o = doc.at("origin");
      if (!o.is_array() || o.size() != 2) throw ParseError(path.string(), 0, "origin", "expected 2 values");
      plot.origin = {o[0].get<double>(), o[1].get<double>()};
    }
    plot.orientation = doc.value("orientation", 0.0);
    if (doc.contains("latitude")) plot.latitude = doc.at("latitude").get<double>();
    if (doc.contains("longitude")) plot.longitude = doc.at("longitude").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, "", std::string("invalid plot document: ") + e.what());
  }
  return plot;
}

WaypointGrid grid_waypoints(const PlotSpec& plot, double spacing) {
  plot.validate();
  if (!(std::isfinite(spacing) && spacing > 0.0)) fail(ErrorKind::usage, "grid spacing must be > 0");
  if (spacing > std::min(plot.width, plot.height)) {
    fail(ErrorKind::usage, fmt::format("grid degenerate: spacing {:g} m exceeds the plot's smaller side ({:g} m)",
                                       spacing, std::min(plot.width, plot.height)));
  }
  WaypointGrid grid;
  grid.spacing = spacing;
  // The small epsilon keeps exact multiples (4.0 / 1.0) from flooring down.
  grid.cols = static_cast<int>(std::floor(plot.width / spacing + 1e-9));
  grid.rows = static_cast<int>(std::floor(plot.height / spacing + 1e-9));
  grid.margin = {0.5 * (plot.width - grid.cols * spacing), 0.5 * (plot.height - grid.rows * spacing)};
  grid.waypoints.reserve(static_cast<std::size_t>(grid.rows * grid.cols));
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      grid.waypoints.emplace_back(grid.margin.x() + (c + 0.5) * spacing, grid.margin.y() + (r + 0.5) * spacing);
    }
  }
  return grid;
}

SerpentineOrder serpentine_order(int rows, int cols, double spacing) {
  if (rows < 1 || cols < 1) fail(ErrorKind::usage, "grid must have at least one row and one column");
  SerpentineOrder s;
  s.order.reserve(static_cast<std::size_t>(rows * cols));
  for (int r = 0; r < rows; ++r) {
    for (int k = 0; k < cols; ++k) {
      const int c = (r % 2 == 0) ? k : cols - 1 - k;
      s.order.push_back(r * cols + c);
    }
  }
  s.length = static_cast<double>(rows * cols - 1) * spacing;
  return s;
}

MissionPlan mission_with_return(const WaypointGrid& grid, const SerpentineOrder& order,
                                const Eigen::Vector2d& start_point, double dwell, double speed,
                                const std::string& plot_name) {
  if (order.order.empty()) fail(ErrorKind::usage, "cannot plan a mission over an empty grid");
  if (!(dwell >= 0.0)) fail(ErrorKind::usage, "dwell must be >= 0");
  if (!(speed > 0.0)) fail(ErrorKind::usage, "travel speed must be > 0");

  const Eigen::Vector2d lo = grid.box_min();
  const Eigen::Vector2d hi = grid.box_max();
  const bool inside = start_point.x() >= lo.x() && start_point.x() <= hi.x() && start_point.y() >= lo.y() &&
                      start_point.y() <= hi.y();
  if (inside) {
    // Suggest leaving the box through its nearest side, half a cell out.
    const double to_left = start_point.x() - lo.x();
    const double to_right = hi.x() - start_point.x();
    const double to_bottom = start_point.y() - lo.y();
    const double to_top = hi.y() - start_point.y();
    const double m = std::min({to_left, to_right, to_bottom, to_top});
    Eigen::Vector2d suggestion = start_point;
    const double out = 0.5 * grid.spacing;
    if (m == to_left) suggestion.x() = lo.x() - out;
    else if (m == to_right) suggestion.x() = hi.x() + out;
    else if (m == to_bottom) suggestion.y() = lo.y() - out;
    else suggestion.y() = hi.y() + out;
    fail(ErrorKind::usage, fmt::format("start point ({:g}, {:g}) lies inside the waypoint grid; try ({:g}, {:g})",
                                       start_point.x(), start_point.y(), suggestion.x(), suggestion.y()));
  }

  std::vector<int> visit = order.order;
  const Eigen::Vector2d first = grid.waypoints[static_cast<std::size_t>(visit.front())];
  const Eigen::Vector2d last = grid.waypoints[static_cast<std::size_t>(visit.back())];
  const double d_first = (first - start_point).norm();
  const double d_last = (last - start_point).norm();
  bool reverse = d_last < d_first - kTieTolerance;
  if (std::abs(d_last - d_first) <= kTieTolerance) reverse = visit.back() < visit.front();
  if (reverse) std::reverse(visit.begin(), visit.end());

  MissionPlan plan;
  plan.plot_name = plot_name;
  plan.spacing = grid.spacing;
  plan.rows = grid.rows;
  plan.cols = grid.cols;
  plan.start_point = start_point;
  plan.dwell = dwell;
  plan.speed = speed;

  double grid_length = 0.0;
  for (std::size_t k = 0; k < visit.size(); ++k) {
    PlanWaypoint wp;
    wp.grid_index = visit[k];
    wp.position = grid.waypoints[static_cast<std::size_t>(visit[k])];
    wp.dwell = dwell;
    if (k > 0) grid_length += (wp.position - plan.waypoints.back().position).norm();
    plan.waypoints.push_back(wp);
  }
  for (std::size_t k = 0; k < plan.waypoints.size(); ++k) {
    Eigen::Vector2d dir;
    if (k + 1 < plan.waypoints.size()) {
      dir = plan.waypoints[k + 1].position - plan.waypoints[k].position;
    } else if (k > 0) {
      plan.waypoints[k].heading = plan.waypoints[k - 1].heading;
      continue;
    } else {
      dir = plan.waypoints[k].position - start_point;
    }
    plan.waypoints[k].heading = std::atan2(dir.y(), dir.x());
  }

  plan.grid_length = grid_length;
  plan.total_length = (plan.waypoints.front().position - start_point).norm() + grid_length +
                      (plan.waypoints.back().position - start_point).norm();
  plan.duration = plan.total_length / speed + dwell * static_cast<double>(plan.waypoints.size());
  return plan;
}

std::vector<Eigen::Vector2d> local_waypoints(const PlotSpec& plot, const MissionPlan& plan) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(plan.waypoints.size());
  for (const auto& wp : plan.waypoints) out.push_back(plot.to_local(wp.position));
  return out;
}

std::string plan_to_json(const MissionPlan& plan) {
  ordered_json doc;
  doc["plot"] = plan.plot_name;
  doc["spacing"] = plan.spacing;
  doc["rows"] = plan.rows;
  doc["cols"] = plan.cols;
  doc["start"] = ordered_json::array({plan.start_point.x(), plan.start_point.y()});
  doc["dwell"] = plan.dwell;
  doc["speed"] = plan.speed;
  doc["grid_length"] = plan.grid_length;
  doc["total_length"] = plan.total_length;
  doc["duration"] = plan.duration;
  auto& wps = doc["waypoints"] = ordered_json::array();
  for (const auto& wp : plan.waypoints) {
    ordered_json w;
    w["grid_index"] = wp.grid_index;
    w["x"] = wp.position.x();
    w["y"] = wp.position.y();
    w["heading"] = wp.heading;
    w["dwell"] = wp.dwell;
    wps.push_back(std::move(w));
  }
  return doc.dump(2) + "\n";
}

MissionPlan plan_from_json(const std::string& text) {
  MissionPlan plan;
  try {
    const auto doc = nlohmann::json::parse(text);
    plan.plot_name = doc.at("plot").get<std::string>();
    plan.spacing = doc.at("spacing").get<double>();
    plan.rows = doc.at("rows").get<int>();
    plan.cols = doc.at("cols").get<int>();
    plan.start_point = {doc.at("start").at(0).get<double>(), doc.at("start").at(1).get<double>()};
    plan.dwell = doc.at("dwell").get<double>();
    plan.speed = doc.at("speed").get<double>();
    plan.grid_length = doc.at("grid_length").get<double>();
    plan.total_length = doc.at("total_length").get<double>();
    plan.duration = doc.at("duration").get<double>();
    for (const auto& w : doc.at("waypoints")) {
      PlanWaypoint wp;
      wp.grid_index = w.at("grid_index").get<int>();
      wp.position = {w.at("x").get<double>(), w.at("y").get<double>()};
      wp.heading = w.at("heading").get<double>();
      wp.dwell = w.at("dwell").get<double>();
      plan.waypoints.push_back(wp);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("", 0, "", std::string("invalid plan document: ") + e.what());
  }
  if (plan.waypoints.empty()) throw ParseError("", 0, "waypoints", "plan has no waypoints");
  return plan;
}

std::string plan_to_csv(const MissionPlan& plan) {
  std::string out = "index,x,y,heading,dwell\n";
  for (std::size_t k = 0; k < plan.waypoints.size(); ++k) {
    const auto& wp = plan.waypoints[k];
    out += fmt::format("{},{},{},{},{}\n", k, wp.position.x(), wp.position.y(), wp.heading, wp.dwell);
  }
  return out;
}

void export_plan(const MissionPlan& plan, const std::filesystem::path& path) {
  if (plan.waypoints.empty()) fail(ErrorKind::usage, "refusing to export an empty plan");
  std::ofstream out(path);
  if (!out) fail(ErrorKind::parse, "cannot write plan file: " + path.string());
  out << (path.extension() == ".csv" ? plan_to_csv(plan) : plan_to_json(plan));
  if (!out) fail(ErrorKind::parse, "cannot write plan file: " + path.string());
}

MissionPlan import_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "", "cannot open plan file");
  std::stringstream buf;
  buf << in.rdbuf();
  return plan_from_json(buf.str());
}

}  // namespace screekit
