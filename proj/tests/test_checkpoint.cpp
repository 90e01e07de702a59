#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "foredif/checkpoint.hpp"
#include "foredif/common.hpp"
#include "foredif/rng.hpp"

using namespace foredif;

namespace {

ArchConfig tiny_arch() {
    ArchConfig a;
    a.vit_blocks = 1;
    a.dit_blocks = 1;
    a.hidden = 32;
    a.heads = 2;
    a.patch = 4;
    a.grid = 8;
    a.frames_obs = 2;
    a.frames_pred = 2;
    a.mlp_ratio = 2.0f;
    return a;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("checkpoint round trip is bitwise and keeps frozen flags") {
    ModelBundle m = build_model(tiny_arch(), Variant::ForeDiffStage2, 5);
    Rng rng(6);
    for (auto& p : m.params) {
        for (int64_t i = 0; i < p.tensor.numel(); ++i) {
            p.tensor.data()[i] = static_cast<float>(rng.normal());
        }
    }
    m.freeze_predictive();

    std::string path = temp_path("foredif_test_ckpt.fdck");
    save_checkpoint(path, m);

    CheckpointMeta meta = load_checkpoint_meta(path);
    CHECK(meta.variant == Variant::ForeDiffStage2);
    CHECK(meta.arch == m.arch);
    CHECK_FALSE(meta.frozen.empty());

    ModelBundle loaded = load_checkpoint(path);
    REQUIRE(loaded.params.size() == m.params.size());
    for (size_t i = 0; i < m.params.size(); ++i) {
        CHECK(loaded.params[i].name == m.params[i].name);
        CHECK(loaded.params[i].frozen == m.params[i].frozen);
        for (int64_t j = 0; j < m.params[i].tensor.numel(); ++j) {
            CHECK(loaded.params[i].tensor.data()[j] == m.params[i].tensor.data()[j]);
        }
    }
    CHECK(loaded.predictive_digest() == m.predictive_digest());
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint corruption is rejected") {
    ModelBundle m = build_model(tiny_arch(), Variant::ForeDiffStage1, 7);
    std::string path = temp_path("foredif_test_ckpt_bad.fdck");
    save_checkpoint(path, m);

    std::FILE* f = std::fopen(path.c_str(), "r+b");
    REQUIRE(f != nullptr);
    std::fseek(f, 300, SEEK_SET);
    int c = std::fgetc(f);
    std::fseek(f, 300, SEEK_SET);
    std::fputc(c ^ 0x40, f);
    std::fclose(f);

    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint with the wrong magic is rejected") {
    std::string path = temp_path("foredif_test_not_ckpt");
    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("definitely not a checkpoint", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    std::filesystem::remove(path);
}
