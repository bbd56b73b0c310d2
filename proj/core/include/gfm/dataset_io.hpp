#pragma once

#include <filesystem>
#include <string>

#include "gfm/traj_gen.hpp"

namespace gfm::io {

/// GFMT layout (all integers little-endian):
///   bytes 0-3   magic "GFMT"
///   bytes 4-7   u32 version = 1
///   bytes 8-19  u32 N, T, D
///   then N*T*D float32 values, row-major (trajectory, step, weight).
/// Metadata lives in a sibling JSON file (same stem, ".json" extension).
inline constexpr char kDatasetMagic[4] = {'G', 'F', 'M', 'T'};
inline constexpr std::uint32_t kDatasetVersion = 1;

std::filesystem::path metadata_path(const std::filesystem::path& data_path);

void save_dataset(const traj::TrajectoryDataset& ds, const std::filesystem::path& path);
traj::TrajectoryDataset load_dataset(const std::filesystem::path& path);

/// Metadata as pretty JSON text (the sidecar contents).
std::string metadata_json(const traj::TrajectoryDataset& ds);

}  // namespace gfm::io
