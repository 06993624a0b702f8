// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "hdrsplat/checkpoint.hpp"
#include "hdrsplat/config.hpp"
#include "hdrsplat/image.hpp"
#include "hdrsplat/manifest.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace hdrsplat;

namespace {

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "hdrsplat_io_test";
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

} // namespace

TEST_CASE("pfm round-trip is bit-exact") {
    std::mt19937 rng(1);
    std::uniform_real_distribution<float> u(-10.0f, 1e6f);
    Image img(13, 7);
    for (auto& v : img.data)
        v = u(rng);
    const auto path = temp_dir() / "roundtrip.pfm";
    write_pfm(path, img);
    const Image back = read_pfm(path);
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    CHECK(back.data == img.data);
}

TEST_CASE("png stores 8-bit quantized values") {
    Image img(4, 4);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = static_cast<float>(i) / (img.data.size() - 1);
    const auto path = temp_dir() / "roundtrip.png";
    write_png(path, img);
    const Image back = read_png(path);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const float expected = std::round(img.data[i] * 255.0f) / 255.0f;
        CHECK(back.data[i] == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("config serializes, parses and hashes") {
    TrainConfig cfg;
    cfg.iterations = 123;
    cfg.lr_tone = 7e-4;
    cfg.cell = "rnn";
    cfg.pixel_level = false;
    cfg.data_dir = "some/dir";

    const auto path = temp_dir() / "config.toml";
    std::ofstream(path) << cfg.serialize();

    TrainConfig loaded;
    loaded.apply_file(path);
    CHECK(loaded.iterations == 123);
    CHECK(loaded.lr_tone == doctest::Approx(7e-4));
    CHECK(loaded.cell == "rnn");
    CHECK(loaded.pixel_level == false);
    CHECK(loaded.data_dir == "some/dir");
    CHECK(loaded.hash() == cfg.hash());

    loaded.apply("iterations", "999");
    CHECK(loaded.iterations == 999);
    CHECK(loaded.hash() != cfg.hash());
    CHECK_THROWS_AS(loaded.apply("not_a_key", "1"), ContractViolation);

    TrainConfig bad;
    bad.lambda = 1.5;
    CHECK_THROWS_AS(bad.validate(), ContractViolation);
}

TEST_CASE("manifest round-trips byte-identically") {
    Manifest m;
    m.base_dir = temp_dir();
    for (int i = 0; i < 4; ++i) {
        FrameRecord f;
        f.ldr_path = "ldr/frame" + std::to_string(i) + ".png";
        f.time = i / 3.0;
        f.exposure = 0.125 * (1 + i);
        f.camera_id = i % 2;
        f.camera = Camera{};
        f.split = i == 3 ? "test" : "train";
        m.frames.push_back(f);
        // matching ground-truth HDR row
        FrameRecord h;
        h.hdr_path = "hdr/frame" + std::to_string(i) + ".pfm";
        h.time = f.time;
        h.camera_id = f.camera_id;
        h.camera = f.camera;
        h.split = f.split;
        m.frames.push_back(h);
    }
    // records must exist on disk for a checked load
    std::filesystem::create_directories(m.base_dir / "ldr");
    std::filesystem::create_directories(m.base_dir / "hdr");
    Image dummy(2, 2, 0.5f);
    for (const auto& f : m.frames) {
        if (f.is_ldr())
            write_png(m.resolve(f.ldr_path), dummy);
        if (f.is_hdr())
            write_pfm(m.resolve(f.hdr_path), dummy);
    }

    const auto path = temp_dir() / "manifest.json";
    m.save(path);
    const std::string first = slurp(path);

    const Manifest loaded = Manifest::load(path);
    REQUIRE(loaded.frames.size() == m.frames.size());
    const auto path2 = temp_dir() / "manifest2.json";
    loaded.save(path2);
    CHECK(slurp(path2) == first);
    CHECK(loaded.dataset_hash() == m.dataset_hash());

    CHECK(loaded.unique_times().size() == 4);

    SUBCASE("missing file fails a checked load") {
        std::filesystem::remove(m.resolve(m.frames[0].ldr_path));
        CHECK_THROWS_AS(Manifest::load(path), ManifestError);
        write_png(m.resolve(m.frames[0].ldr_path), dummy);
    }
}

TEST_CASE("checkpoint save/load/save is byte-identical") {
    std::mt19937 rng(7);
    Checkpoint ck;
    ck.iteration = 1234;
    ck.seed = 99;
    ck.config_text = "iterations = 10\n";
    ck.config_hash = fnv1a(ck.config_text);
    ck.skip_count = 2;
    ck.cloud = testing::random_test_cloud<float>(8, 42);
    ck.tone.window_k = 5;
    ck.tone.curves.context_dim = 2;
    ck.tone.curves.hidden = 8;
    ck.tone.curves.init(rng);
    ck.tone.drcl.kind = CellKind::kGru;
    ck.tone.drcl.context_dim = 2;
    ck.tone.drcl.init(rng);
    ck.tone.bank.resize(6);
    for (int i = 0; i < 5; ++i)
        ck.tone.bank.update(i, {0.1f * i, 0.2f, 0.3f});
    ck.timestamps = {0.0, 0.25, 0.5, 0.75, 0.9, 1.0};
    ck.adam["position"].ensure(8 * 4);
    ck.adam["position"].m[3] = 0.5f;
    ck.adam["position"].step = 17;

    const auto p1 = temp_dir() / "ck1.ckpt";
    const auto p2 = temp_dir() / "ck2.ckpt";
    ck.save(p1);
    const Checkpoint loaded = Checkpoint::load(p1);
    loaded.save(p2);
    CHECK(slurp(p1) == slurp(p2));

    CHECK(loaded.iteration == ck.iteration);
    CHECK(loaded.seed == ck.seed);
    CHECK(loaded.cloud.mean4 == ck.cloud.mean4);
    CHECK(loaded.cloud.sh == ck.cloud.sh);
    CHECK(loaded.tone.curves.channels[1].w2 == ck.tone.curves.channels[1].w2);
    CHECK(loaded.tone.bank.entries == ck.tone.bank.entries);
    CHECK(loaded.tone.bank.initialized == ck.tone.bank.initialized);
    CHECK(loaded.timestamps == ck.timestamps);
    CHECK(loaded.adam.at("position").m[3] == 0.5f);
    CHECK(loaded.adam.at("position").step == 17);
}
