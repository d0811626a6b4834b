#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "specbox/config.hpp"
#include "specbox/io.hpp"
#include "specbox/waveforms.hpp"
#include "testutil.hpp"

using namespace specbox;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("specbox_test_" + hex64(Rng(static_cast<std::uint64_t>(
                                             std::chrono::steady_clock::now()
                                                 .time_since_epoch()
                                                 .count()))
                                            .bits()));
        fs::create_directories(path);
    }
    ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
};

} // namespace

TEST_CASE("iq files round trip with their sidecar") {
    TempDir dir;
    TransmissionSchedule sched;
    sched.span = 2e-3;
    FrameSpec f;
    f.cls = RatClass::Wifi;
    f.t_start = 0.5e-3;
    f.duration = 1e-3;
    f.f_center = 10e6;
    f.bandwidth = 20e6;
    f.seed = 3;
    sched.frames.push_back(f);
    const auto rec = render_schedule(sched);

    const auto path = dir.path / "capture.iq";
    write_iq(path, rec);
    REQUIRE(fs::exists(dir.path / "capture.meta.json"));

    const auto back = read_iq(path);
    REQUIRE(back.samples == rec.samples);
    REQUIRE(back.sample_rate == rec.sample_rate);
    REQUIRE(back.meta.at("schedule_hash") == rec.meta.at("schedule_hash"));
    const auto sched_back = back.meta.at("schedule").get<TransmissionSchedule>();
    REQUIRE(sched_back.hash() == sched.hash());
}

TEST_CASE("iq file size must be a whole number of complex samples") {
    TempDir dir;
    const auto path = dir.path / "bad.iq";
    write_text_file(path, "123456");  // 6 bytes
    REQUIRE_THROWS_AS(read_iq(path), ParseError);
}

TEST_CASE("matrix dump round trips with axes") {
    TempDir dir;
    Spectrogram spec;
    spec.rows = 3;
    spec.cols = 4;
    spec.axes = SpectrogramAxes{0.0, 20e6, 0.0, 1.5e-3, 0, 4, 0, 3};
    spec.power_db = {-1, -2, -3, -4, -5, -6, -7, -8, -9, -10, -11, -12};
    const auto path = dir.path / "spec.mat";
    write_matrix(path, spec);
    const auto back = read_matrix(path);
    REQUIRE(back.rows == spec.rows);
    REQUIRE(back.cols == spec.cols);
    REQUIRE(back.power_db == spec.power_db);
    REQUIRE(back.axes == spec.axes);

    write_text_file(dir.path / "junk.mat", "nope");
    REQUIRE_THROWS_AS(read_matrix(dir.path / "junk.mat"), ParseError);
}

TEST_CASE("pgm export writes a valid header and payload") {
    TempDir dir;
    GrayImage img;
    img.width = 3;
    img.height = 2;
    img.pixels = {0, 128, 255, 1, 2, 3};
    write_pgm(dir.path / "img.pgm", img);
    const auto text = read_text_file(dir.path / "img.pgm");
    REQUIRE(text.rfind("P5\n3 2\n255\n", 0) == 0);
    REQUIRE(text.size() == 11 + 6);
}

TEST_CASE("csv writer quotes awkward fields") {
    CsvWriter csv({"a", "b"});
    csv.row({"1,5", "plain"});
    csv.row({"say \"hi\"", "2"});
    REQUIRE(csv.str() == "a,b\n\"1,5\",plain\n\"say \"\"hi\"\"\",2\n");
}

TEST_CASE("toml subset parses tables, arrays and scalars") {
    const std::string text = R"(# experiment
[band]
sample_rate = 20e6
span = 0.05

[sweep.snr]
points_db = [-13, -3, 12, 29, 35]
images = 20
label = "fig5"
enabled = true

[detector]
rules.cut_ms = 2.5
)";
    const auto cfg = parse_toml(text);
    REQUIRE(cfg.at("band").at("sample_rate").get<double>() == 20e6);
    REQUIRE(cfg.at("band").at("span").get<double>() == 0.05);
    REQUIRE(cfg.at("sweep").at("snr").at("points_db").size() == 5);
    REQUIRE(cfg.at("sweep").at("snr").at("points_db")[0].get<double>() == -13.0);
    REQUIRE(cfg.at("sweep").at("snr").at("images").get<int>() == 20);
    REQUIRE(cfg.at("sweep").at("snr").at("label").get<std::string>() == "fig5");
    REQUIRE(cfg.at("sweep").at("snr").at("enabled").get<bool>() == true);
    REQUIRE(cfg.at("detector").at("rules").at("cut_ms").get<double>() == 2.5);
}

TEST_CASE("toml errors carry line numbers") {
    try {
        parse_toml("[ok]\nkey 5\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        REQUIRE(e.line == 2);
    }
    REQUIRE_THROWS_AS(parse_toml("[unclosed\n"), ParseError);
    REQUIRE_THROWS_AS(parse_toml("x = [1, 2\n"), ParseError);
    REQUIRE_THROWS_AS(parse_toml("x = @@\n"), ParseError);
}

TEST_CASE("load_config accepts json too") {
    TempDir dir;
    write_json_file(dir.path / "cfg.json", json{{"band", {{"span", 0.05}}}});
    const auto cfg = load_config(dir.path / "cfg.json");
    REQUIRE(cfg.at("band").at("span").get<double>() == 0.05);

    write_text_file(dir.path / "cfg.toml", "[band]\nspan = 0.05\n");
    const auto cfg2 = load_config(dir.path / "cfg.toml");
    REQUIRE(cfg2 == cfg);
}

TEST_CASE("file hashes are stable and content sensitive") {
    TempDir dir;
    write_text_file(dir.path / "a.txt", "hello");
    write_text_file(dir.path / "b.txt", "hello");
    write_text_file(dir.path / "c.txt", "hellp");
    REQUIRE(hash_file(dir.path / "a.txt") == hash_file(dir.path / "b.txt"));
    REQUIRE(hash_file(dir.path / "a.txt") != hash_file(dir.path / "c.txt"));
}
