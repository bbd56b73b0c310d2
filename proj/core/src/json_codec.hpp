#pragma once

// JSON encoders for library types. Internal to gfm_core so the public headers
// stay free of the JSON dependency.

#include <json.hpp>

#include "gfm/flow.hpp"
#include "gfm/optimizers.hpp"
#include "gfm/smallnet.hpp"
#include "gfm/traj_gen.hpp"

namespace gfm::detail {

using nlohmann::json;

json to_json(const nn::NetSpec& spec);
nn::NetSpec net_spec_from_json(const json& j);

json to_json(const optim::OptimizerConfig& c);
optim::OptimizerConfig optimizer_from_json(const json& j);

json to_json(const traj::DatasetMeta& meta);
traj::DatasetMeta dataset_meta_from_json(const json& j);

json to_json(const flow::GfmConfig& c);
flow::GfmConfig gfm_config_from_json(const json& j);

json to_json(const flow::ForecastOptions& o);
flow::ForecastOptions forecast_options_from_json(const json& j);

}  // namespace gfm::detail
