#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace screekit {

inline constexpr double kDefaultSpacing = 1.0;      // m
inline constexpr double kDefaultDwell = 3.0;        // s
inline constexpr double kDefaultTravelSpeed = 0.8;  // m/s
inline constexpr double kMinPlotArea = 16.0;        // m^2

/// Rectangular plot. The plot frame has its origin at the plot corner `origin`
/// (local frame) and its x-axis rotated by `orientation`.
struct PlotSpec {
  std::string name;
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();
  double width = 0.0;   // along plot x
  double height = 0.0;  // along plot y
  double orientation = 0.0;
  std::optional<double> latitude;
  std::optional<double> longitude;

  /// Throws on non-positive size; returns warnings (area below protocol minimum).
  std::vector<std::string> validate() const;

  [[nodiscard]] Eigen::Vector2d to_local(const Eigen::Vector2d& plot_point) const;
};

PlotSpec load_plot(const std::filesystem::path& path);

struct WaypointGrid {
  int rows = 0;
  int cols = 0;
  double spacing = 0.0;
  Eigen::Vector2d margin = Eigen::Vector2d::Zero();
  std::vector<Eigen::Vector2d> waypoints;  // plot frame, row-major (row = y index)

  [[nodiscard]] Eigen::Vector2d box_min() const { return margin; }
  [[nodiscard]] Eigen::Vector2d box_max() const {
    return margin + Eigen::Vector2d(cols * spacing, rows * spacing);
  }
};

/// Cell-centre waypoints of a floor(width/d) x floor(height/d) grid centred in
/// the plot. Throws Error(usage) "grid degenerate" when d exceeds either side.
WaypointGrid grid_waypoints(const PlotSpec& plot, double spacing = kDefaultSpacing);

struct SerpentineOrder {
  std::vector<int> order;  // row-major indices in visit order
  double length = 0.0;
};

/// Boustrophedon order: even rows left to right, odd rows right to left.
SerpentineOrder serpentine_order(int rows, int cols, double spacing);

struct PlanWaypoint {
  int grid_index = 0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();  // plot frame
  double heading = 0.0;                                 // rad, plot frame
  double dwell = 0.0;                                   // s
};

struct MissionPlan {
  std::string plot_name;
  double spacing = 0.0;
  int rows = 0;
  int cols = 0;
  Eigen::Vector2d start_point = Eigen::Vector2d::Zero();
  double dwell = 0.0;
  double speed = kDefaultTravelSpeed;
  std::vector<PlanWaypoint> waypoints;  // visit order
  double grid_length = 0.0;             // serpentine part only
  double total_length = 0.0;            // including both connector legs
  double duration = 0.0;                // total_length / speed + dwell per waypoint
};

/// start -> nearer serpentine end -> all waypoints -> start. Ties prefer the
/// row-major first waypoint. Throws when the start lies inside the grid box.
MissionPlan mission_with_return(const WaypointGrid& grid, const SerpentineOrder& order,
                                const Eigen::Vector2d& start_point, double dwell = kDefaultDwell,
                                double speed = kDefaultTravelSpeed, const std::string& plot_name = {});

/// Waypoint positions mapped into the local frame of `plot`.
std::vector<Eigen::Vector2d> local_waypoints(const PlotSpec& plot, const MissionPlan& plan);

std::string plan_to_json(const MissionPlan& plan);
MissionPlan plan_from_json(const std::string& text);
std::string plan_to_csv(const MissionPlan& plan);

void export_plan(const MissionPlan& plan, const std::filesystem::path& path);
MissionPlan import_plan(const std::filesystem::path& path);

}  // namespace screekit
