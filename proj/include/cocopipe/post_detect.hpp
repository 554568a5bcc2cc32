#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cocopipe/errors.hpp"
#include "cocopipe/geometry.hpp"

namespace cocopipe {

// Per-pixel depth in millimeters, aligned to an RGB frame; 0 = no data.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> values;  // row-major

    DepthMap() = default;
    DepthMap(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0) {}

    std::uint16_t at(int x, int y) const {
        return values[static_cast<std::size_t>(y) * width + x];
    }
    void set(int x, int y, std::uint16_t mm) {
        values[static_cast<std::size_t>(y) * width + x] = mm;
    }

    bool operator==(const DepthMap&) const = default;
};

// 16-bit single-channel PNG, sample value = millimeters, 0 = invalid.
DepthMap read_depth_png(const std::string& path);
void write_depth_png(const std::string& path, const DepthMap& depth);

struct DepthReport {
    std::string method;  // "mask_average" or "keypoint"
    double value = 0.0;  // millimeters
    double min = 0.0;
    double max = 0.0;
    std::int64_t sample_count = 0;

    double range_width() const { return max - min; }

    bool operator==(const DepthReport&) const = default;
};

struct Orientation {
    Vec2 axis;  // unit vector, canonicalized (ax > 0, or ax == 0 and ay > 0)
    Vec2 centroid;

    bool operator==(const Orientation&) const = default;
};

enum class Placement { Correct, Incorrect };
enum class ExpectedSide { Positive, Negative };

struct ConfigVerdict {
    Vec2 axis;
    std::size_t outer_index = 0;
    Placement placement = Placement::Incorrect;

    bool operator==(const ConfigVerdict&) const = default;
};

struct DepthComparison {
    DepthReport mask;      // method "mask_average"
    DepthReport keypoint;  // method "keypoint", aggregated over all points
    double range_ratio = 1.0;  // mask range width / keypoint range width; 0/0 -> 1
};

// Principal axis and centroid of the mask's second-order moments.
// Throws the underlying Geometry/Degeneracy errors for empty or isotropic masks.
Orientation estimate_orientation(const BitMask& mask);

// Placement is correct iff the outer keypoint's cross-product sign against
// the mask axis matches expected_side. Ambiguous scenes throw an Ambiguity
// error whose message starts with "configuration undecidable".
ConfigVerdict verify_configuration(Vec2 axis, Vec2 centroid,
                                   const std::vector<Vec2>& keypoints,
                                   ExpectedSide expected_side);
ConfigVerdict verify_configuration(const BitMask& mask,
                                   const std::vector<Vec2>& keypoints,
                                   ExpectedSide expected_side);

// Mean depth over set mask pixels with value > 0; range over those samples.
DepthReport depth_from_mask(const DepthMap& depth, const BitMask& mask);

// Depth at the nearest pixel (round half up). A 0 reading falls back to the
// median of valid values in the surrounding 5x5 window.
DepthReport depth_from_keypoint(const DepthMap& depth, Vec2 kp);

// Runs both methods; the keypoint report aggregates one reading per point
// (value = mean, range = spread of the readings).
DepthComparison compare_depth_methods(const DepthMap& depth, const BitMask& mask,
                                      const std::vector<Vec2>& keypoints);

const char* placement_name(Placement p);
const char* expected_side_name(ExpectedSide s);
ExpectedSide parse_expected_side(const std::string& name);

}  // namespace cocopipe
