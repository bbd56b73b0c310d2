#include "gfm/dataset_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "gfm/errors.hpp"
#include "json_codec.hpp"

namespace gfm::io {

namespace {

static_assert(std::numeric_limits<float>::is_iec559, "GFMT stores IEEE-754 binary32");

constexpr std::size_t kHeaderSize = 20;

void put_u32(std::string& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& in, std::size_t offset) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + b])) << (8 * b);
    }
    return v;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

std::filesystem::path metadata_path(const std::filesystem::path& data_path) {
    auto p = data_path;
    p.replace_extension(".json");
    return p;
}

std::string metadata_json(const traj::TrajectoryDataset& ds) {
    auto j = detail::to_json(ds.meta);
    j["format"] = "GFMT";
    j["version"] = kDatasetVersion;
    j["shape"] = {ds.count(), ds.length(), ds.dim()};
    return j.dump(2) + "\n";
}

void save_dataset(const traj::TrajectoryDataset& ds, const std::filesystem::path& path) {
    constexpr auto u32_max = std::numeric_limits<std::uint32_t>::max();
    if (ds.count() > u32_max || ds.length() > u32_max || ds.dim() > u32_max) {
        throw std::invalid_argument("dataset dimensions exceed the u32 header fields");
    }
    std::string bytes;
    bytes.reserve(kHeaderSize + ds.data().size() * 4);
    bytes.append(kDatasetMagic, 4);
    put_u32(bytes, kDatasetVersion);
    put_u32(bytes, static_cast<std::uint32_t>(ds.count()));
    put_u32(bytes, static_cast<std::uint32_t>(ds.length()));
    put_u32(bytes, static_cast<std::uint32_t>(ds.dim()));
    for (double v : ds.data()) put_u32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    write_file(path, bytes);
    write_file(metadata_path(path), metadata_json(ds));
}

traj::TrajectoryDataset load_dataset(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 4) throw FormatError("file too short for GFMT magic", bytes.size());
    if (std::memcmp(bytes.data(), kDatasetMagic, 4) != 0) throw FormatError("bad magic, expected \"GFMT\"", 0);
    if (bytes.size() < kHeaderSize) throw FormatError("truncated GFMT header", bytes.size());
    const auto version = get_u32(bytes, 4);
    if (version != kDatasetVersion) {
        throw FormatError("unsupported GFMT version " + std::to_string(version), 4);
    }
    const std::uint64_t n = get_u32(bytes, 8);
    const std::uint64_t t = get_u32(bytes, 12);
    const std::uint64_t d = get_u32(bytes, 16);
    if (n == 0 || t == 0 || d == 0) throw FormatError("GFMT header has a zero dimension", 8);
    const std::uint64_t payload = n * t * d * 4;
    if (bytes.size() - kHeaderSize != payload) {
        throw FormatError("payload holds " + std::to_string(bytes.size() - kHeaderSize) +
                              " bytes but header N*T*D requires " + std::to_string(payload),
                          kHeaderSize + std::min<std::uint64_t>(payload, bytes.size() - kHeaderSize));
    }

    traj::TrajectoryDataset ds(n, t, d);
    for (std::size_t k = 0; k < ds.data().size(); ++k) {
        ds.data()[k] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, kHeaderSize + 4 * k)));
    }

    const auto meta_file = metadata_path(path);
    const std::string meta_text = read_file(meta_file);
    detail::json j;
    try {
        j = detail::json::parse(meta_text);
    } catch (const detail::json::parse_error& e) {
        throw FormatError(meta_file.string() + ": " + e.what(), e.byte);
    }
    try {
        const auto shape = j.at("shape").get<std::vector<std::uint64_t>>();
        if (shape != std::vector<std::uint64_t>{n, t, d}) {
            throw FormatError(meta_file.string() + ": shape disagrees with the GFMT header", 0);
        }
        ds.meta = detail::dataset_meta_from_json(j);
    } catch (const detail::json::exception& e) {
        throw FormatError(meta_file.string() + ": " + e.what(), 0);
    }
    return ds;
}

}  // namespace gfm::io
