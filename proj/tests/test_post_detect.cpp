#include <cmath>

#include "doctest.h"

#include "cocopipe/post_detect.hpp"
#include "support.hpp"

using namespace cocopipe;
using namespace testsupport;

namespace {

BitMask horizontal_bar(int height, int width, int x0, int x1, int y0, int y1) {
    BitMask mask(height, width);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            mask.set(x, y);
        }
    }
    return mask;
}

double angle_between_deg(Vec2 a, Vec2 b) {
    const double dot = std::abs(a.x * b.x + a.y * b.y);  // axes are sign-free
    const double clipped = std::min(1.0, dot / (std::hypot(a.x, a.y) * std::hypot(b.x, b.y)));
    return std::acos(clipped) * 180.0 / 3.14159265358979323846;
}

}  // namespace

TEST_CASE("estimate_orientation recovers the elongation axis") {
    SUBCASE("horizontal bar") {
        const BitMask bar = horizontal_bar(100, 200, 10, 190, 40, 60);
        const Orientation o = estimate_orientation(bar);
        CHECK(o.axis.x == doctest::Approx(1.0));
        CHECK(o.axis.y == doctest::Approx(0.0));
        CHECK(o.centroid.x == doctest::Approx(99.5));
        CHECK(o.centroid.y == doctest::Approx(49.5));
    }
    SUBCASE("vertical bar canonicalizes to +y") {
        BitMask bar(60, 40);
        for (int y = 5; y < 55; ++y) {
            for (int x = 18; x < 22; ++x) bar.set(x, y);
        }
        const Orientation o = estimate_orientation(bar);
        CHECK(o.axis.x == doctest::Approx(0.0));
        CHECK(o.axis.y == doctest::Approx(1.0));
    }
    SUBCASE("rotated ellipses recover the generation angle within 2 degrees") {
        std::mt19937_64 rng(314159);
        for (int trial = 0; trial < 30; ++trial) {
            const double theta = uniform(rng, -85.0, 85.0);
            const double a = uniform(rng, 30.0, 45.0);
            const BitMask mask =
                ellipse_mask(128, 128, 64.0, 64.0, a, a / uniform(rng, 2.0, 3.0), theta);
            const Orientation o = estimate_orientation(mask);
            const Vec2 expected{std::cos(theta * 3.14159265358979323846 / 180.0),
                                std::sin(theta * 3.14159265358979323846 / 180.0)};
            CHECK(angle_between_deg(o.axis, expected) < 2.0);
        }
    }
    SUBCASE("translation moves the centroid, not the axis") {
        const BitMask base = ellipse_mask(128, 128, 40.0, 40.0, 30.0, 12.0, 25.0);
        const BitMask moved = ellipse_mask(128, 128, 80.0, 70.0, 30.0, 12.0, 25.0);
        const Orientation ob = estimate_orientation(base);
        const Orientation om = estimate_orientation(moved);
        CHECK(angle_between_deg(ob.axis, om.axis) < 0.1);
        CHECK(om.centroid.x - ob.centroid.x == doctest::Approx(40.0).epsilon(0.02));
        CHECK(om.centroid.y - ob.centroid.y == doctest::Approx(30.0).epsilon(0.02));
    }
    SUBCASE("isotropic masks are degenerate") {
        BitMask square(40, 40);
        for (int y = 10; y < 30; ++y) {
            for (int x = 10; x < 30; ++x) square.set(x, y);
        }
        try {
            estimate_orientation(square);
            FAIL("expected degeneracy error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Degeneracy);
        }
        CHECK_THROWS_AS(estimate_orientation(BitMask(16, 16)), Error);  // empty
    }
}

TEST_CASE("verify_configuration classifies outer-keypoint placement") {
    const Vec2 axis{1.0, 0.0};
    const Vec2 centroid{0.0, 0.0};
    // Two keypoints barely above the axis, one far below: the dissenter.
    const std::vector<Vec2> kps{{1.0, 0.1}, {-1.0, 0.1}, {0.0, -2.0}};

    SUBCASE("expected side negative: correct") {
        const ConfigVerdict v =
            verify_configuration(axis, centroid, kps, ExpectedSide::Negative);
        CHECK(v.outer_index == 2);
        CHECK(v.placement == Placement::Correct);
        CHECK(v.axis == axis);
    }
    SUBCASE("expected side positive: incorrect") {
        const ConfigVerdict v =
            verify_configuration(axis, centroid, kps, ExpectedSide::Positive);
        CHECK(v.outer_index == 2);
        CHECK(v.placement == Placement::Incorrect);
    }
    SUBCASE("mirrored scene flips the verdict") {
        const std::vector<Vec2> mirrored{{1.0, -0.1}, {-1.0, -0.1}, {0.0, 2.0}};
        const ConfigVerdict v =
            verify_configuration(axis, centroid, mirrored, ExpectedSide::Positive);
        CHECK(v.outer_index == 2);
        CHECK(v.placement == Placement::Correct);
    }
    SUBCASE("collinear keypoints are undecidable") {
        const std::vector<Vec2> flat{{1.0, 0.0}, {-1.0, 0.1}, {0.0, -2.0}};
        try {
            verify_configuration(axis, centroid, flat, ExpectedSide::Negative);
            FAIL("expected ambiguity error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Ambiguity);
            CHECK(std::string(e.what()).rfind("configuration undecidable: ", 0) == 0);
        }
    }
    SUBCASE("balanced sides are undecidable") {
        const std::vector<Vec2> balanced{{1.0, 1.0}, {-1.0, 1.0}, {1.0, -1.0},
                                         {-1.0, -1.0}};
        CHECK_THROWS_AS(
            verify_configuration(axis, centroid, balanced, ExpectedSide::Negative),
            Error);
    }
    SUBCASE("mask overload derives axis and centroid from the moments") {
        const BitMask bar = horizontal_bar(100, 200, 10, 190, 40, 60);
        // Dissenter above the bar's centroid row (y < 49.5 is the negative
        // side for axis (1,0): cross = 1*(y - 49.5)).
        const std::vector<Vec2> pts{{90.0, 55.0}, {100.0, 52.0}, {110.0, 30.0}};
        const ConfigVerdict v = verify_configuration(bar, pts, ExpectedSide::Negative);
        CHECK(v.outer_index == 2);
        CHECK(v.placement == Placement::Correct);
        CHECK(verify_configuration(bar, pts, ExpectedSide::Positive).placement ==
              Placement::Incorrect);
    }
}

TEST_CASE("depth_from_mask averages valid pixels only") {
    DepthMap depth(8, 6);
    BitMask mask(6, 8);
    mask.set(1, 1);
    mask.set(2, 1);
    mask.set(3, 1);
    depth.set(1, 1, 100);
    depth.set(2, 1, 0);   // no-data inside the mask
    depth.set(3, 1, 200);
    depth.set(5, 5, 999); // valid but outside the mask

    const DepthReport r = depth_from_mask(depth, mask);
    CHECK(r.method == "mask_average");
    CHECK(r.value == doctest::Approx(150.0));
    CHECK(r.min == 100.0);
    CHECK(r.max == 200.0);
    CHECK(r.sample_count == 2);
    CHECK(r.range_width() == doctest::Approx(100.0));

    SUBCASE("all-invalid coverage is a depth error") {
        BitMask hole(6, 8);
        hole.set(2, 1);
        CHECK_THROWS_WITH_AS(depth_from_mask(depth, hole),
                             doctest::Contains("no valid depth"), Error);
    }
    SUBCASE("dimension mismatch is an input error") {
        try {
            depth_from_mask(depth, BitMask(6, 9));
            FAIL("expected input error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Input);
        }
    }
}

TEST_CASE("depth_from_keypoint reads the nearest pixel with median fallback") {
    DepthMap depth(10, 10);
    for (int y = 0; y < 10; ++y) {
        for (int x = 0; x < 10; ++x) {
            depth.set(x, y, static_cast<std::uint16_t>(100 + x));
        }
    }

    SUBCASE("rounds half up to the nearest pixel") {
        CHECK(depth_from_keypoint(depth, {3.2, 4.0}).value == 103.0);
        CHECK(depth_from_keypoint(depth, {3.5, 4.0}).value == 104.0);  // half rounds up
        CHECK(depth_from_keypoint(depth, {3.49, 4.0}).value == 103.0);
        const DepthReport direct = depth_from_keypoint(depth, {3.2, 4.0});
        CHECK(direct.method == "keypoint");
        CHECK(direct.sample_count == 1);
        CHECK(direct.min == direct.max);
    }
    SUBCASE("edge coordinates clamp onto the last pixel") {
        CHECK(depth_from_keypoint(depth, {10.0, 9.7}).value == 109.0);
        CHECK_THROWS_WITH_AS(depth_from_keypoint(depth, {10.2, 5.0}),
                             doctest::Contains("outside"), Error);
        CHECK_THROWS_AS(depth_from_keypoint(depth, {-0.1, 5.0}), Error);
    }
    SUBCASE("a zero reading falls back to the 5x5 window median") {
        depth.set(5, 5, 0);
        const DepthReport r = depth_from_keypoint(depth, {5.0, 5.0});
        // Window columns 3..7 have values 103..107, five rows each, minus
        // the dead center pixel: the median of the 24 survivors is 105.
        CHECK(r.value == doctest::Approx(105.0));
        CHECK(r.min == 103.0);
        CHECK(r.max == 107.0);
        CHECK(r.sample_count == 24);
    }
    SUBCASE("an even-sized window takes the mean of the middle two") {
        DepthMap tiny(3, 1);
        tiny.set(0, 0, 10);
        tiny.set(1, 0, 0);
        tiny.set(2, 0, 11);
        const DepthReport r = depth_from_keypoint(tiny, {1.0, 0.0});
        CHECK(r.value == doctest::Approx(10.5));
        CHECK(r.sample_count == 2);
    }
    SUBCASE("an all-zero window is a depth error") {
        DepthMap dead(10, 10);
        CHECK_THROWS_WITH_AS(depth_from_keypoint(dead, {5.0, 5.0}),
                             doctest::Contains("5x5"), Error);
    }
}

TEST_CASE("compare_depth_methods contrasts mask and keypoint ranges") {
    SUBCASE("constant depth gives equal values and ratio 1") {
        DepthMap depth(20, 20);
        for (int y = 0; y < 20; ++y) {
            for (int x = 0; x < 20; ++x) depth.set(x, y, 468);
        }
        const BitMask mask = horizontal_bar(20, 20, 2, 18, 8, 12);
        const DepthComparison cmp =
            compare_depth_methods(depth, mask, {{5.0, 10.0}, {10.0, 10.0}, {15.0, 10.0}});
        CHECK(cmp.mask.value == doctest::Approx(468.0));
        CHECK(cmp.keypoint.value == doctest::Approx(468.0));
        CHECK(cmp.mask.range_width() == 0.0);
        CHECK(cmp.keypoint.range_width() == 0.0);
        CHECK(cmp.range_ratio == doctest::Approx(1.0));
    }
    SUBCASE("a tilted plane inflates the mask range but not the keypoint range") {
        // Depth rises along x; the mask spans the whole slope while the
        // keypoints cluster near the middle.
        DepthMap depth(200, 100);
        for (int y = 0; y < 100; ++y) {
            for (int x = 0; x < 200; ++x) {
                depth.set(x, y, static_cast<std::uint16_t>(418 + std::lround(0.5 * x)));
            }
        }
        const BitMask mask = horizontal_bar(100, 200, 10, 190, 40, 60);
        const std::vector<Vec2> kps{{96.0, 55.0}, {100.0, 50.0}, {104.0, 45.0}};
        const DepthComparison cmp = compare_depth_methods(depth, mask, kps);

        CHECK(cmp.mask.method == "mask_average");
        CHECK(cmp.keypoint.method == "keypoint");
        CHECK(cmp.mask.range_width() == doctest::Approx(90.0));   // 423..513
        CHECK(cmp.keypoint.range_width() == doctest::Approx(4.0));  // 466..470
        CHECK(cmp.keypoint.value == doctest::Approx((466.0 + 468.0 + 470.0) / 3.0));
        CHECK(cmp.keypoint.sample_count == 3);
        CHECK(cmp.range_ratio == doctest::Approx(22.5));
        CHECK(cmp.range_ratio >= 5.0);

        // Aggregate invariants: the mean reading sits inside the range.
        CHECK(cmp.keypoint.min <= cmp.keypoint.value);
        CHECK(cmp.keypoint.value <= cmp.keypoint.max);
        CHECK(cmp.mask.min <= cmp.mask.value);
        CHECK(cmp.mask.value <= cmp.mask.max);
    }
    SUBCASE("zero keypoint spread with nonzero mask spread is an infinite ratio") {
        DepthMap depth(20, 20);
        for (int y = 0; y < 20; ++y) {
            for (int x = 0; x < 20; ++x) depth.set(x, y, 400);
        }
        depth.set(0, 0, 500);  // widen the mask range only
        BitMask mask(20, 20);
        mask.set(0, 0);
        mask.set(5, 5);
        const DepthComparison cmp = compare_depth_methods(depth, mask, {{10.0, 10.0}});
        CHECK(cmp.mask.range_width() == doctest::Approx(100.0));
        CHECK(cmp.keypoint.range_width() == 0.0);
        CHECK(std::isinf(cmp.range_ratio));
    }
    SUBCASE("no keypoints is an input error") {
        DepthMap depth(4, 4);
        CHECK_THROWS_WITH_AS(compare_depth_methods(depth, BitMask(4, 4), {}),
                             doctest::Contains("no keypoints"), Error);
    }
    SUBCASE("keypoint readings on a random field stay inside the mask extremes") {
        // When every keypoint sits on a valid pixel inside the mask, each
        // reading is one of the mask's samples, so the keypoint range is a
        // sub-range of the mask range.
        std::mt19937_64 rng(8088);
        for (int trial = 0; trial < 20; ++trial) {
            DepthMap depth(30, 30);
            for (int y = 0; y < 30; ++y) {
                for (int x = 0; x < 30; ++x) {
                    depth.set(x, y, static_cast<std::uint16_t>(uniform_int(rng, 1, 2000)));
                }
            }
            BitMask mask(30, 30);
            std::vector<Vec2> kps;
            for (int i = 0; i < 5; ++i) {
                const int x = uniform_int(rng, 2, 27);
                const int y = uniform_int(rng, 2, 27);
                mask.set(x, y);
                kps.push_back({static_cast<double>(x), static_cast<double>(y)});
            }
            const DepthComparison cmp = compare_depth_methods(depth, mask, kps);
            CHECK(cmp.keypoint.min >= cmp.mask.min);
            CHECK(cmp.keypoint.max <= cmp.mask.max);
            CHECK(cmp.range_ratio >= 1.0);
        }
    }
}

TEST_CASE("expected-side names round-trip") {
    CHECK(parse_expected_side("positive") == ExpectedSide::Positive);
    CHECK(parse_expected_side("negative") == ExpectedSide::Negative);
    CHECK(expected_side_name(ExpectedSide::Positive) == std::string("positive"));
    CHECK(expected_side_name(ExpectedSide::Negative) == std::string("negative"));
    CHECK(placement_name(Placement::Correct) == std::string("correct"));
    try {
        parse_expected_side("sideways");
        FAIL("expected config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }
}
