#include "gfm/serialize.hpp"

#include "gfm/errors.hpp"
#include "json_codec.hpp"

namespace gfm {

namespace {

detail::json parse(std::string_view text, const char* what) {
    try {
        return detail::json::parse(text);
    } catch (const detail::json::parse_error& e) {
        throw FormatError(std::string(what) + ": " + e.what(), e.byte);
    }
}

}  // namespace

std::string to_json_text(const nn::NetSpec& spec) { return detail::to_json(spec).dump(); }
std::string to_json_text(const optim::OptimizerConfig& cfg) { return detail::to_json(cfg).dump(); }
std::string to_json_text(const flow::GfmConfig& cfg) { return detail::to_json(cfg).dump(); }
std::string to_json_text(const flow::ForecastOptions& opts) { return detail::to_json(opts).dump(); }

flow::GfmConfig gfm_config_from_json_text(std::string_view text) {
    const auto j = parse(text, "gfm config");
    try {
        return detail::gfm_config_from_json(j);
    } catch (const detail::json::exception& e) {
        throw FormatError(std::string("gfm config: ") + e.what(), 0);
    }
}

flow::ForecastOptions forecast_options_from_json_text(std::string_view text) {
    const auto j = parse(text, "forecast options");
    try {
        return detail::forecast_options_from_json(j);
    } catch (const detail::json::exception& e) {
        throw FormatError(std::string("forecast options: ") + e.what(), 0);
    }
}

}  // namespace gfm
