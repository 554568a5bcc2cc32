#include "cocopipe/post_detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cocopipe {

Orientation estimate_orientation(const BitMask& mask) {
    const Moments m = mask_moments(mask);
    return {principal_axis(m), m.centroid};
}

ConfigVerdict verify_configuration(Vec2 axis, Vec2 centroid,
                                   const std::vector<Vec2>& keypoints,
                                   ExpectedSide expected_side) {
    std::size_t outer = 0;
    try {
        outer = outer_keypoint(axis, centroid, keypoints);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Ambiguity) {
            throw Error(ErrorKind::Ambiguity,
                        std::string("configuration undecidable: ") + e.what());
        }
        throw;
    }
    const Vec2& kp = keypoints[outer];
    const double s = axis.x * (kp.y - centroid.y) - axis.y * (kp.x - centroid.x);
    const bool on_positive_side = s > 0.0;
    const bool matches = (expected_side == ExpectedSide::Positive) == on_positive_side;
    return {axis, outer, matches ? Placement::Correct : Placement::Incorrect};
}

ConfigVerdict verify_configuration(const BitMask& mask,
                                   const std::vector<Vec2>& keypoints,
                                   ExpectedSide expected_side) {
    const Orientation o = estimate_orientation(mask);
    return verify_configuration(o.axis, o.centroid, keypoints, expected_side);
}

DepthReport depth_from_mask(const DepthMap& depth, const BitMask& mask) {
    if (depth.width != mask.width || depth.height != mask.height) {
        throw Error(ErrorKind::Input,
                    "depth_from_mask: dimension mismatch, depth " +
                        std::to_string(depth.width) + "x" + std::to_string(depth.height) +
                        " vs mask " + std::to_string(mask.width) + "x" +
                        std::to_string(mask.height));
    }
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::int64_t count = 0;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            const std::uint16_t v = depth.at(x, y);
            if (v == 0) continue;  // no-data pixel
            sum += v;
            lo = std::min(lo, static_cast<double>(v));
            hi = std::max(hi, static_cast<double>(v));
            ++count;
        }
    }
    if (count == 0) {
        throw Error(ErrorKind::Depth, "no valid depth under mask");
    }
    return {"mask_average", sum / static_cast<double>(count), lo, hi, count};
}

DepthReport depth_from_keypoint(const DepthMap& depth, Vec2 kp) {
    if (kp.x < 0.0 || kp.x > depth.width || kp.y < 0.0 || kp.y > depth.height) {
        throw Error(ErrorKind::Input,
                    "depth_from_keypoint: point (" + std::to_string(kp.x) + ", " +
                        std::to_string(kp.y) + ") outside the depth map");
    }
    // round half up; edge coordinates land on the last pixel
    const int px = std::min(static_cast<int>(std::floor(kp.x + 0.5)), depth.width - 1);
    const int py = std::min(static_cast<int>(std::floor(kp.y + 0.5)), depth.height - 1);

    const std::uint16_t direct = depth.at(px, py);
    if (direct > 0) {
        const double v = direct;
        return {"keypoint", v, v, v, 1};
    }

    std::vector<double> window;
    for (int wy = py - 2; wy <= py + 2; ++wy) {
        for (int wx = px - 2; wx <= px + 2; ++wx) {
            if (wx < 0 || wx >= depth.width || wy < 0 || wy >= depth.height) continue;
            const std::uint16_t v = depth.at(wx, wy);
            if (v > 0) window.push_back(v);
        }
    }
    if (window.empty()) {
        throw Error(ErrorKind::Depth,
                    "no valid depth in the 5x5 window around the keypoint");
    }
    std::sort(window.begin(), window.end());
    const std::size_t n = window.size();
    const double median =
        n % 2 ? window[n / 2] : (window[n / 2 - 1] + window[n / 2]) / 2.0;
    return {"keypoint", median, window.front(), window.back(),
            static_cast<std::int64_t>(n)};
}

DepthComparison compare_depth_methods(const DepthMap& depth, const BitMask& mask,
                                      const std::vector<Vec2>& keypoints) {
    if (keypoints.empty()) {
        throw Error(ErrorKind::Input, "compare_depth_methods: no keypoints given");
    }
    DepthComparison cmp;
    cmp.mask = depth_from_mask(depth, mask);

    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const Vec2& kp : keypoints) {
        const double reading = depth_from_keypoint(depth, kp).value;
        sum += reading;
        lo = std::min(lo, reading);
        hi = std::max(hi, reading);
    }
    cmp.keypoint = {"keypoint", sum / static_cast<double>(keypoints.size()), lo, hi,
                    static_cast<std::int64_t>(keypoints.size())};

    const double mask_width = cmp.mask.range_width();
    const double kp_width = cmp.keypoint.range_width();
    if (kp_width > 0.0) {
        cmp.range_ratio = mask_width / kp_width;
    } else {
        cmp.range_ratio =
            mask_width > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    }
    return cmp;
}

const char* placement_name(Placement p) {
    return p == Placement::Correct ? "correct" : "incorrect";
}

const char* expected_side_name(ExpectedSide s) {
    return s == ExpectedSide::Positive ? "positive" : "negative";
}

ExpectedSide parse_expected_side(const std::string& name) {
    if (name == "positive") return ExpectedSide::Positive;
    if (name == "negative") return ExpectedSide::Negative;
    throw Error(ErrorKind::Config,
                "expected side must be 'positive' or 'negative', got '" + name + "'");
}

}  // namespace cocopipe
