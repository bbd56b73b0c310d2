#include <doctest.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "fd_oracle.hpp"
#include "gfm/checkpoint.hpp"
#include "gfm/errors.hpp"

using namespace gfm;
namespace fs = std::filesystem;

namespace {

std::vector<char> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<char>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

io::GfmCheckpoint sample_gfm() {
    flow::GfmConfig cfg;
    cfg.hidden = {4, 3};
    cfg.beta = 0.1;
    cfg.zeta = 10.0;
    cfg.seed = 12;
    return {flow::make_vector_field(2, cfg), cfg, {3.5, 1.25, 0.1}};
}

}  // namespace

TEST_CASE("gfm checkpoint round trip") {
    const auto dir = gfm_test::scratch_dir("ckpt_gfm");
    const auto ckpt = sample_gfm();
    io::save_checkpoint(ckpt, dir / "a.ckpt");
    const auto bytes = read_bytes(dir / "a.ckpt");
    CHECK(std::memcmp(bytes.data(), "GFMCKPT1", 8) == 0);
    CHECK(io::checkpoint_kind(dir / "a.ckpt") == "gfm");

    const auto loaded = io::load_gfm_checkpoint(dir / "a.ckpt");
    CHECK(loaded.net.spec == ckpt.net.spec);
    CHECK(loaded.net.params == ckpt.net.params);
    CHECK(loaded.config == ckpt.config);
    CHECK(loaded.loss_curve == ckpt.loss_curve);
    io::save_checkpoint(loaded, dir / "b.ckpt");
    CHECK(read_bytes(dir / "b.ckpt") == bytes);
}

TEST_CASE("baseline checkpoint round trip") {
    const auto dir = gfm_test::scratch_dir("ckpt_baseline");
    for (const auto kind : {baselines::BaselineKind::lfd2, baselines::BaselineKind::introspection,
                            baselines::BaselineKind::dlinear}) {
        auto model = baselines::init_baseline(kind, 3, 4, 19, 5);
        model.loss_curve = {2.0, 1.0};
        const auto path = dir / (std::string(baselines::to_string(kind)) + ".ckpt");
        io::save_checkpoint(model, path);
        CHECK(io::checkpoint_kind(path) == baselines::to_string(kind));
        CHECK(io::load_baseline_checkpoint(path) == model);
        CHECK_THROWS_AS(io::load_gfm_checkpoint(path), FormatError);
    }
}

TEST_CASE("corrupt checkpoints") {
    const auto dir = gfm_test::scratch_dir("ckpt_bad");
    io::save_checkpoint(sample_gfm(), dir / "a.ckpt");
    const auto good = read_bytes(dir / "a.ckpt");

    SUBCASE("missing") {
        CHECK_THROWS_AS(io::load_gfm_checkpoint(dir / "none.ckpt"), IoError);
    }
    SUBCASE("bad magic") {
        auto bytes = good;
        bytes[3] = 'x';
        write_bytes(dir / "a.ckpt", bytes);
        CHECK_THROWS_AS(io::load_gfm_checkpoint(dir / "a.ckpt"), FormatError);
    }
    SUBCASE("header length past the end") {
        auto bytes = good;
        const std::uint64_t len = 1u << 30;
        std::memcpy(bytes.data() + 8, &len, 8);
        write_bytes(dir / "a.ckpt", bytes);
        try {
            io::load_gfm_checkpoint(dir / "a.ckpt");
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.offset() == 8);
        }
    }
    SUBCASE("truncated payload") {
        write_bytes(dir / "a.ckpt", std::vector<char>(good.begin(), good.end() - 8));
        CHECK_THROWS_AS(io::load_gfm_checkpoint(dir / "a.ckpt"), FormatError);
    }
    SUBCASE("gfm checkpoint is not a baseline") {
        CHECK_THROWS_AS(io::load_baseline_checkpoint(dir / "a.ckpt"), FormatError);
    }
}
