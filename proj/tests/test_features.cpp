#include <catch2/catch_amalgamated.hpp>

#include "specbox/features.hpp"
#include "testutil.hpp"

using namespace specbox;

namespace {

SpectrogramAxes paper_axes() {
    return SpectrogramAxes{0.0, 20e6, 0.0, 96 * 519.2e-6, 0, 104, 0, 96};
}

SpectrogramAxes round_axes() {
    // I_t = 0.5 ms, I_f = 200 kHz, 50 ms span
    return SpectrogramAxes{0.0, 20e6, 0.0, 50e-3, 0, 100, 0, 100};
}

} // namespace

TEST_CASE("full-image box reproduces the axes extents") {
    const auto axes = paper_axes();
    const BoundingBox box{0, 104, 0, 96, RatClass::Lte};
    const auto f = extract_box_features(box, axes);
    REQUIRE_THAT(f.b_w, Catch::Matchers::WithinRel(axes.f2 - axes.f1, 1e-12));
    REQUIRE_THAT(f.fd, Catch::Matchers::WithinRel(axes.t2 - axes.t1, 1e-12));
    REQUIRE_THAT(f.f_c, Catch::Matchers::WithinRel((axes.f1 + axes.f2) / 2.0, 1e-12));
}

TEST_CASE("frequency formulas match the hand evaluation") {
    const auto axes = paper_axes();
    const BoundingBox box{26, 78, 19, 27, RatClass::Lte};
    const auto f = extract_box_features(box, axes);
    REQUIRE_THAT(f.b_w, Catch::Matchers::WithinRel(10e6, 1e-6));
    REQUIRE_THAT(f.f_c, Catch::Matchers::WithinRel(10e6, 1e-6));
    REQUIRE_THAT(f.fd, Catch::Matchers::WithinAbs(8 * 519.2e-6, 1e-9));  // ~4.154 ms
}

TEST_CASE("degenerate boxes are rejected") {
    const auto axes = paper_axes();
    REQUIRE_THROWS_AS(extract_box_features({10, 10, 0, 5, RatClass::Lte}, axes),
                      DegenerateBox);
}

TEST_CASE("set features: five 4 ms frames in a 50 ms span") {
    const auto axes = round_axes();
    std::vector<BoundingBox> boxes;
    for (int k = 0; k < 5; ++k)
        boxes.push_back({0, 50, k * 20, k * 20 + 8, RatClass::Lte});  // 8 rows = 4 ms
    const auto s = extract_set_features(boxes, axes);
    REQUIRE(s.stats.frame_count == 5);
    REQUIRE_THAT(s.stats.mean_fd, Catch::Matchers::WithinRel(4e-3, 1e-12));
    REQUIRE_THAT(s.cwt, Catch::Matchers::WithinRel(30e-3, 1e-12));
    REQUIRE(s.fi.has_value());
    REQUIRE_THAT(*s.fi, Catch::Matchers::WithinRel(6e-3, 1e-12));
    REQUIRE_FALSE(s.cwt_clamped);
}

TEST_CASE("set features: empty and full cases") {
    const auto axes = round_axes();
    const auto empty = extract_set_features({}, axes);
    REQUIRE(empty.stats.frame_count == 0);
    REQUIRE_THAT(empty.cwt, Catch::Matchers::WithinRel(50e-3, 1e-12));
    REQUIRE_FALSE(empty.fi.has_value());

    const auto full = extract_set_features({{0, 100, 0, 100, RatClass::Lte}}, axes);
    REQUIRE_THAT(full.cwt, Catch::Matchers::WithinAbs(0.0, 1e-15));
    REQUIRE(full.fi.has_value());
    REQUIRE_THAT(*full.fi, Catch::Matchers::WithinAbs(0.0, 1e-15));
}

TEST_CASE("overlapping boxes clamp cwt to zero with a flag") {
    const auto axes = round_axes();
    std::vector<BoundingBox> boxes;
    for (int k = 0; k < 3; ++k) boxes.push_back({0, 50, 0, 90, RatClass::Lte});
    const auto s = extract_set_features(boxes, axes);
    REQUIRE(s.cwt == 0.0);
    REQUIRE(s.cwt_clamped);
}

TEST_CASE("count times mean duration plus cwt equals the span") {
    Rng rng(12);
    const auto axes = round_axes();
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<BoundingBox> boxes;
        const auto n = static_cast<int>(rng.uniform_int(1, 6));
        int row = 0;
        for (int k = 0; k < n && row < 95; ++k) {
            const int h = static_cast<int>(rng.uniform_int(1, std::min(8, 99 - row)));
            boxes.push_back({0, 50, row, row + h, RatClass::Lte});
            row += h + 2;
        }
        const auto s = extract_set_features(boxes, axes);
        if (s.cwt_clamped) continue;
        const double total =
            static_cast<double>(s.stats.frame_count) * s.stats.mean_fd + s.cwt;
        REQUIRE_THAT(total, Catch::Matchers::WithinRel(axes.t2 - axes.t1, 1e-12));
    }
}

TEST_CASE("closed-form features equal a pixel-count oracle") {
    Rng rng(1312);
    for (int trial = 0; trial < 500; ++trial) {
        SpectrogramAxes axes;
        axes.f1 = rng.uniform(0.0, 1e6);
        axes.f2 = axes.f1 + rng.uniform(1e6, 40e6);
        axes.t1 = 0.0;
        axes.t2 = rng.uniform(1e-3, 100e-3);
        axes.x_max = static_cast<int>(rng.uniform_int(4, 512));
        axes.y_max = static_cast<int>(rng.uniform_int(4, 512));

        BoundingBox b;
        b.x_min = static_cast<int>(rng.uniform_int(0, axes.x_max - 2));
        b.x_max = static_cast<int>(rng.uniform_int(b.x_min + 1, axes.x_max - 1));
        b.y_min = static_cast<int>(rng.uniform_int(0, axes.y_max - 2));
        b.y_max = static_cast<int>(rng.uniform_int(b.y_min + 1, axes.y_max - 1));

        const auto f = extract_box_features(b, axes);
        // oracle: count occupied columns/rows one by one
        int cols = 0;
        for (int c = b.x_min; c < b.x_max; ++c) ++cols;
        int rows = 0;
        for (int r = b.y_min; r < b.y_max; ++r) ++rows;
        REQUIRE(f.b_w == static_cast<double>(cols) * axes.i_f());
        REQUIRE(f.fd == static_cast<double>(rows) * axes.i_t());
    }
}

TEST_CASE("deviation percentages") {
    const auto axes = paper_axes();
    FrameSpec truth;
    truth.cls = RatClass::Lte;
    truth.t_start = 10e-3;
    truth.duration = 4e-3;
    truth.f_center = 10e6;
    truth.bandwidth = 10e6;

    SECTION("exact match gives zero deviation") {
        ExtractedFeatures ex{10e6, 10e6, 4e-3};
        const auto d = feature_deviation(ex, truth, 20e6);
        REQUIRE_THAT(d.b_w.pct, Catch::Matchers::WithinAbs(0.0, 1e-12));
        REQUIRE_THAT(d.f_c.pct, Catch::Matchers::WithinAbs(0.0, 1e-12));
        REQUIRE_THAT(d.fd.pct, Catch::Matchers::WithinAbs(0.0, 1e-12));
    }

    SECTION("a one-pixel bandwidth error costs I_f over the true bandwidth") {
        ExtractedFeatures ex{10e6 + axes.i_f(), 10e6, 4e-3};
        const auto d = feature_deviation(ex, truth, 20e6);
        REQUIRE_THAT(d.b_w.pct,
                     Catch::Matchers::WithinRel(axes.i_f() / 10e6 * 100.0, 1e-9));
    }

    SECTION("a five percent duration error reads as five percent") {
        ExtractedFeatures ex{10e6, 10e6, 4e-3 * 1.05};
        const auto d = feature_deviation(ex, truth, 20e6);
        REQUIRE_THAT(d.fd.pct, Catch::Matchers::WithinAbs(5.0, 1e-9));
    }

    SECTION("zero truth reports an absolute flagged deviation") {
        const auto d = deviation_pct(3.0, 0.0, 0.0);
        REQUIRE(d.absolute);
        REQUIRE_THAT(d.pct, Catch::Matchers::WithinAbs(3.0, 1e-12));
    }
}
