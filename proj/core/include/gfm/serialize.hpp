#pragma once

// JSON text for configuration types, for callers that embed them in their
// own documents.

#include <string>
#include <string_view>

#include "gfm/flow.hpp"
#include "gfm/optimizers.hpp"
#include "gfm/smallnet.hpp"

namespace gfm {

std::string to_json_text(const nn::NetSpec& spec);
std::string to_json_text(const optim::OptimizerConfig& cfg);
std::string to_json_text(const flow::GfmConfig& cfg);
std::string to_json_text(const flow::ForecastOptions& opts);

flow::GfmConfig gfm_config_from_json_text(std::string_view text);
flow::ForecastOptions forecast_options_from_json_text(std::string_view text);

}  // namespace gfm
