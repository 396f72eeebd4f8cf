#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "doctest.h"
#include "pivot/config.hpp"

using namespace pivot;
namespace fs = std::filesystem;

TEST_CASE("serialization is canonical: equal configs hash equal") {
    RunConfig a, b;
    CHECK(a.serialize() == b.serialize());
    CHECK(a.hash() == b.hash());
}

TEST_CASE("every value change moves the hash") {
    RunConfig base;
    RunConfig c = base;
    c.seed = 8;
    CHECK(c.hash() != base.hash());
    c = base;
    c.encoder.grid = 6;
    CHECK(c.hash() != base.hash());
    c = base;
    c.train.lr_stage1 = 2e-4;
    CHECK(c.hash() != base.hash());
    c = base;
    c.track.prompt_enabled = false;
    CHECK(c.hash() != base.hash());
}

TEST_CASE("overrides parse typed values and reject unknown keys") {
    RunConfig cfg;
    apply_config_override("encoder.grid=6", cfg);
    CHECK(cfg.encoder.grid == 6);
    apply_config_override("train.lr_stage1=0.001", cfg);
    CHECK(cfg.train.lr_stage1 == doctest::Approx(0.001));
    apply_config_override("track.prompt_enabled=false", cfg);
    CHECK(!cfg.track.prompt_enabled);
    apply_config_override("encoder.name=toy", cfg);
    CHECK(cfg.encoder.name == "toy");
    apply_config_override("run.seed=99", cfg);
    CHECK(cfg.seed == 99);
    CHECK_THROWS_AS(apply_config_override("encoder.nonsense=1", cfg), std::runtime_error);
    CHECK_THROWS_AS(apply_config_override("no_equals_sign", cfg), std::runtime_error);
}

TEST_CASE("config files round-trip through serialize and parse") {
    RunConfig cfg;
    cfg.encoder.grid = 8;
    cfg.encoder.input_resolution = 64;
    cfg.train.stage1_epochs = 3;
    cfg.track.scale_factor = 4.5;
    cfg.synth.master_seed = 77;
    cfg.seed = 13;
    cfg.output_dir = "elsewhere";

    const fs::path file =
        fs::temp_directory_path() / ("cfg_test_" + std::to_string(::getpid()) + ".ini");
    {
        std::ofstream f(file);
        f << cfg.serialize();
    }
    RunConfig back;
    parse_config_file(file.string(), back);
    fs::remove(file);
    CHECK(back.serialize() == cfg.serialize());
    CHECK(back.hash() == cfg.hash());
}

TEST_CASE("unknown keys in a config file name the offending key") {
    const fs::path file =
        fs::temp_directory_path() / ("cfg_bad_" + std::to_string(::getpid()) + ".ini");
    {
        std::ofstream f(file);
        f << "[encoder]\nbogus_key=1\n";
    }
    bool threw = false;
    try {
        RunConfig cfg;
        parse_config_file(file.string(), cfg);
    } catch (const std::runtime_error& e) {
        threw = true;
        CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
    }
    fs::remove(file);
    CHECK(threw);
}

TEST_CASE("parsing a missing file throws") {
    RunConfig cfg;
    CHECK_THROWS_AS(parse_config_file("/nonexistent/p.ini", cfg), std::runtime_error);
}

TEST_CASE("fnv1a matches the published reference values") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}
