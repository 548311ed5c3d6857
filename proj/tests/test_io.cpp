#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "mstream/config.hpp"
#include "mstream/errors.hpp"
#include "mstream/motion_io.hpp"
#include "mstream/synth.hpp"

using namespace mstream;

TEST_SUITE("io") {

TEST_CASE("motion file round-trip is bit-exact") {
    SplitMix64 rng(3);
    std::vector<double> data(5 * 6);
    for (double& v : data) v = rng.symmetric() * std::pow(10.0, double(rng.next() % 40) - 20.0);
    data[0] = 0.1;
    data[1] = -0.0;
    data[2] = 1e300;
    data[3] = 5e-324;
    const MotionSequence m(6, data, 30.0);
    std::stringstream buf;
    write_motion(buf, m, 3);
    const MotionFile back = read_motion(buf);
    CHECK(back.motion == m);
    CHECK(back.motion.fps() == 30.0);
    CHECK(back.joint_count == 3);
    CHECK(std::signbit(back.motion.frame(0)[1]));
}

TEST_CASE("motion header and rows use the documented text form") {
    const MotionSequence m(4, {0.1, 1, 2, 3});
    std::stringstream buf;
    write_motion(buf, m, 22);
    CHECK(buf.str() == "{\"kind\":\"motion\",\"d\":4,\"fps\":20.0,\"joint_count\":22,\"frame_count\":1}\n0.1 1 2 3\n");
}

TEST_CASE("joints file round-trip keeps the warm-up count") {
    const auto j = testutil::random_joints(7, 3, 4);
    std::stringstream buf;
    write_joints(buf, j, 2);
    const JointsFile back = read_joints(buf);
    CHECK(back.joints == j);
    CHECK(back.warmup_frames == 2);
}

TEST_CASE("parse errors carry line numbers") {
    auto fails_with = [](const std::string& text, const std::string& fragment) {
        std::stringstream in(text);
        try {
            read_motion(in);
        } catch (const DataError& e) {
            CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
            return;
        }
        FAIL("no DataError for: " << text);
    };
    const std::string h = "{\"kind\":\"motion\",\"d\":4,\"fps\":20,\"frame_count\":2}\n";
    fails_with("", "line 1: missing header");
    fails_with("not json\n", "line 1: header is not valid JSON");
    fails_with("{\"kind\":\"joints\"}\n", "line 1: header kind");
    fails_with(h + "1 2 3 4\n1 2 x 4\n", "line 3: cannot parse number 'x'");
    fails_with(h + "1 2 3 4\n1 2 3\n", "line 3: expected 4 numbers, found 3");
    fails_with(h + "1 2 3 4\n", "frame_count=2 but file has 1");
    fails_with(h + "1 2 3 4\n1 2 3 4\n1 2 3 4\n", "line 4: more frame rows");
    fails_with(h + "1 2 3 4\n1 2 3 inf\n", "line 3");
    fails_with("{\"kind\":\"motion\",\"d\":-4,\"frame_count\":0}\n", "non-negative integer");
}

TEST_CASE("blank lines are skipped") {
    std::stringstream in("{\"kind\":\"motion\",\"d\":4,\"frame_count\":1}\n\n1 2 3 4\n\n");
    CHECK(read_motion(in).motion.size() == 1);
}

TEST_CASE("synth motion is seeded and smooth") {
    const auto a = synth_motion(100, 8, 5);
    CHECK(a == synth_motion(100, 8, 5));
    CHECK_FALSE(a == synth_motion(100, 8, 6));
    for (std::size_t t = 1; t < 100; ++t) {
        for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(a.frame(t)[c] - a.frame(t - 1)[c]) < 0.6);
    }
}

}  // TEST_SUITE

TEST_SUITE("config") {

TEST_CASE("config file sections overlay the defaults") {
    const auto j = nlohmann::json::parse(R"({
        "backend": {"name": "toy", "seed": 9, "frame_width": 16, "noise": 0.1},
        "pipeline": {"window": 40, "stride": 2, "mode": "naive", "warmup": "repeat"},
        "styles": [{"name": "calm", "vec": []}, {"name": "wild", "seed": 4}],
        "default_style": "wild",
        "listen": "0.0.0.0:9000"
    })");
    const AppConfig c = app_config_from_json(j);
    CHECK(c.backend.toy.seed == 9);
    CHECK(c.backend.toy.frame_width == 16);
    CHECK(c.backend.toy.channels == 32);
    CHECK(c.pipeline.window == 40);
    CHECK(c.pipeline.reencode == 30);
    CHECK(c.pipeline.mode == PipelineMode::naive);
    CHECK(c.pipeline.warmup == WarmupMode::repeat);
    CHECK(c.listen == "0.0.0.0:9000");
    auto be = make_backend(c.backend);
    const StyleCatalog cat = build_catalog(c.styles, c.default_style, *be);
    CHECK(cat.default_embedding().label == "wild");
    CHECK(cat.default_embedding().vec == seeded_style(4, 16));
    CHECK(cat.find("calm")->vec == std::vector<double>(16, 0.0));
}

TEST_CASE("config errors are ConfigErrors") {
    using nlohmann::json;
    CHECK_THROWS_WITH_AS(app_config_from_json(json::parse(R"({"pipeline":{"strid":3}})")),
                         doctest::Contains("unknown key 'strid'"), ConfigError);
    CHECK_THROWS_AS(app_config_from_json(json::parse(R"({"pipeline":{"stride":-3}})")), ConfigError);
    CHECK_THROWS_AS(app_config_from_json(json::parse(R"({"pipeline":{"mode":"fast"}})")), ConfigError);
    CHECK_THROWS_AS(app_config_from_json(json::parse(R"({"backend":{"noise":"loud"}})")), ConfigError);
    auto be = make_toy_backend(testutil::small_toy());
    CHECK_THROWS_AS(build_catalog({}, "", *be), ConfigError);
    CHECK_THROWS_AS(build_catalog({StyleSpec{"x", std::vector<double>{1.0}, std::nullopt, {}}}, "", *be), ConfigError);
    CHECK_THROWS_AS(build_catalog(builtin_styles(), "missing", *be), ConfigError);
    CHECK_THROWS_AS(load_app_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("environment overrides address and seed") {
    AppConfig c;
    apply_env_overrides(c, [](const char* name) -> const char* {
        if (std::string(name) == "MSTREAM_LISTEN") return "127.0.0.1:1234";
        if (std::string(name) == "MSTREAM_SEED") return "77";
        return nullptr;
    });
    CHECK(c.listen == "127.0.0.1:1234");
    CHECK(c.backend.toy.seed == 77);
    CHECK(c.pipeline.seed == 77);
    CHECK_THROWS_AS(apply_env_overrides(c, [](const char*) -> const char* { return "x1"; }), ConfigError);
}

TEST_CASE("style catalog loads motion files relative to the config") {
    const auto dir = std::filesystem::temp_directory_path() / "mstream_cfg_test";
    std::filesystem::create_directories(dir);
    auto be = make_toy_backend(testutil::small_toy());
    const auto m = testutil::random_motion(5, 12, 3);
    write_motion_file(dir / "s.motion", m);
    const StyleCatalog cat = build_catalog({StyleSpec{"m", std::nullopt, std::nullopt, "s.motion"}}, "", *be, dir);
    CHECK(cat.find("m")->vec == be->style_embed(m).vec);
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
