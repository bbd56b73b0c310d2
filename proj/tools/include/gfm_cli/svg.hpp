#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "gfm/traj_gen.hpp"

namespace gfm::cli {

struct PlotOptions {
    std::string title;
    std::size_t max_trajectories = 0;  // 0 = all
    int width = 720;
    int height = 540;
};

/// Static SVG 1.1 of every trajectory as a polyline coloured by time, with
/// the recorded final weights as dots and forecasts (keyed by trajectory
/// index) as crosses. D = 2 plots the raw coordinates; D > 2 plots the first
/// two principal coordinates of all recorded rows.
std::string trajectory_svg(const traj::TrajectoryDataset& ds,
                           const std::map<std::size_t, std::vector<double>>& forecasts,
                           const PlotOptions& options);

/// Top-two principal axes (unit vectors, deterministic sign) and the mean of
/// the given rows.
struct Projection {
    std::vector<double> mean;
    std::vector<double> axis1;
    std::vector<double> axis2;
};
Projection principal_axes(const traj::TrajectoryDataset& ds);

}  // namespace gfm::cli
