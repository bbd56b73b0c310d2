#include "gfm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "gfm/errors.hpp"
#include "json_codec.hpp"

namespace gfm::io {

namespace {

static_assert(std::numeric_limits<double>::is_iec559, "checkpoints store IEEE-754 binary64");

constexpr std::size_t kPrefix = 16;

void put_u64(std::string& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

std::uint64_t get_u64(const std::string& in, std::size_t offset) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + b])) << (8 * b);
    }
    return v;
}

void write_checkpoint(const std::filesystem::path& path, const detail::json& header,
                      const std::vector<double>& params) {
    const std::string text = header.dump();
    std::string bytes(kCheckpointMagic, 8);
    put_u64(bytes, text.size());
    bytes += text;
    for (double v : params) put_u64(bytes, std::bit_cast<std::uint64_t>(v));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

struct RawCheckpoint {
    detail::json header;
    std::vector<double> params;
};

RawCheckpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (bytes.size() < kPrefix) throw FormatError("checkpoint shorter than its fixed prefix", bytes.size());
    if (std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
        throw FormatError("bad magic, expected \"GFMCKPT1\"", 0);
    }
    const std::uint64_t len = get_u64(bytes, 8);
    if (len > bytes.size() - kPrefix) throw FormatError("checkpoint header runs past end of file", 8);

    RawCheckpoint raw;
    try {
        raw.header = detail::json::parse(bytes.substr(kPrefix, len));
    } catch (const detail::json::parse_error& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what(), kPrefix + e.byte);
    }
    std::uint64_t count = 0;
    try {
        count = raw.header.at("param_count").get<std::uint64_t>();
    } catch (const detail::json::exception& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what(), kPrefix);
    }
    const std::size_t payload_at = kPrefix + len;
    if (bytes.size() - payload_at != count * 8) {
        throw FormatError("checkpoint payload holds " + std::to_string(bytes.size() - payload_at) +
                              " bytes but param_count requires " + std::to_string(count * 8),
                          payload_at);
    }
    raw.params.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        raw.params[k] = std::bit_cast<double>(get_u64(bytes, payload_at + 8 * k));
    }
    return raw;
}

}  // namespace

void save_checkpoint(const GfmCheckpoint& ckpt, const std::filesystem::path& path) {
    if (ckpt.net.params.size() != nn::param_count(ckpt.net.spec)) {
        throw ShapeError("vector field parameters do not match its spec");
    }
    detail::json header{{"kind", "gfm"},
                        {"spec", detail::to_json(ckpt.net.spec)},
                        {"config", detail::to_json(ckpt.config)},
                        {"seed", ckpt.config.seed},
                        {"loss_curve", ckpt.loss_curve},
                        {"param_count", ckpt.net.params.size()}};
    write_checkpoint(path, header, ckpt.net.params);
}

GfmCheckpoint load_gfm_checkpoint(const std::filesystem::path& path) {
    RawCheckpoint raw = read_checkpoint(path);
    GfmCheckpoint ckpt;
    try {
        if (raw.header.at("kind").get<std::string>() != "gfm") {
            throw FormatError("checkpoint kind is not gfm", 0);
        }
        ckpt.net.spec = detail::net_spec_from_json(raw.header.at("spec"));
        ckpt.config = detail::gfm_config_from_json(raw.header.at("config"));
        ckpt.loss_curve = raw.header.at("loss_curve").get<std::vector<double>>();
    } catch (const detail::json::exception& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what(), kPrefix);
    }
    if (raw.params.size() != nn::param_count(ckpt.net.spec)) {
        throw FormatError("checkpoint param_count disagrees with its network spec", kPrefix);
    }
    ckpt.net.params = std::move(raw.params);
    return ckpt;
}

void save_checkpoint(const baselines::BaselineModel& model, const std::filesystem::path& path) {
    if (model.params.size() != baselines::param_count(model.kind, model.dim, model.n)) {
        throw ShapeError("baseline parameters do not match its kind and shape");
    }
    detail::json header{{"kind", std::string(baselines::to_string(model.kind))},
                        {"dim", model.dim},
                        {"n", model.n},
                        {"m", model.m},
                        {"loss_curve", model.loss_curve},
                        {"param_count", model.params.size()}};
    write_checkpoint(path, header, model.params);
}

baselines::BaselineModel load_baseline_checkpoint(const std::filesystem::path& path) {
    RawCheckpoint raw = read_checkpoint(path);
    baselines::BaselineModel model;
    try {
        const auto kind = raw.header.at("kind").get<std::string>();
        if (kind == "gfm") throw FormatError("checkpoint holds a gfm model, not a baseline", 0);
        model.kind = baselines::parse_baseline(kind);
        model.dim = raw.header.at("dim").get<std::size_t>();
        model.n = raw.header.at("n").get<std::size_t>();
        model.m = raw.header.at("m").get<std::size_t>();
        model.loss_curve = raw.header.at("loss_curve").get<std::vector<double>>();
    } catch (const detail::json::exception& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what(), kPrefix);
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what(), kPrefix);
    }
    if (raw.params.size() != baselines::param_count(model.kind, model.dim, model.n)) {
        throw FormatError("checkpoint param_count disagrees with the baseline shape", kPrefix);
    }
    model.params = std::move(raw.params);
    return model;
}

std::string checkpoint_kind(const std::filesystem::path& path) {
    const RawCheckpoint raw = read_checkpoint(path);
    try {
        return raw.header.at("kind").get<std::string>();
    } catch (const detail::json::exception& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what(), kPrefix);
    }
}

}  // namespace gfm::io
