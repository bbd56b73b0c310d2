#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gfm/baselines.hpp"
#include "gfm/flow.hpp"

namespace gfm::io {

/// Checkpoint layout:
///   bytes 0-7   magic "GFMCKPT1"
///   bytes 8-15  u64 little-endian length L of the JSON header
///   L bytes     UTF-8 JSON header (always carries "kind" and "param_count")
///   then param_count float64 values, little-endian.
inline constexpr char kCheckpointMagic[8] = {'G', 'F', 'M', 'C', 'K', 'P', 'T', '1'};

struct GfmCheckpoint {
    flow::VectorFieldNet net;
    flow::GfmConfig config;
    std::vector<double> loss_curve;
};

void save_checkpoint(const GfmCheckpoint& ckpt, const std::filesystem::path& path);
GfmCheckpoint load_gfm_checkpoint(const std::filesystem::path& path);

void save_checkpoint(const baselines::BaselineModel& model, const std::filesystem::path& path);
baselines::BaselineModel load_baseline_checkpoint(const std::filesystem::path& path);

/// "gfm", "lfd2", "introspection" or "dlinear", read from the header only.
std::string checkpoint_kind(const std::filesystem::path& path);

}  // namespace gfm::io
