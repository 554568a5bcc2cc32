#pragma once

#include <array>
#include <string>
#include <vector>

#include "cocopipe/coco.hpp"
#include "cocopipe/geometry.hpp"

namespace cocopipe {

// One polygon drawn on a task image; coordinates are Label Studio
// percentages in [0, 100].
struct PolygonResult {
    std::string label;
    std::vector<Vec2> points;

    bool operator==(const PolygonResult&) const = default;
};

struct KeypointResult {
    std::string label;
    double x = 0.0;  // percent
    double y = 0.0;  // percent

    bool operator==(const KeypointResult&) const = default;
};

struct LabelTask {
    std::string image_ref;
    int original_width = 0;
    int original_height = 0;
    std::vector<PolygonResult> polygon_results;
    std::vector<KeypointResult> keypoint_results;

    bool operator==(const LabelTask&) const = default;
};

// User-supplied category schema: polygon label -> keypoint names + skeleton.
struct CategorySpec {
    std::string name;
    std::vector<std::string> keypoint_names;
    std::vector<std::array<int, 2>> skeleton;

    bool operator==(const CategorySpec&) const = default;
};

// Parses a Label Studio JSON-MIN export: an array of task records carrying
// an "image" reference, "polygon" results and "keypoint"/"keypointlabels"
// results, plus original_width/original_height (top-level or per result).
std::vector<LabelTask> parse_jsonmin(const std::string& text);

// Category schema file: JSON list of {name, keypoints: [names], skeleton: [[i,j],...]}.
std::vector<CategorySpec> parse_category_specs(const std::string& text);

std::vector<Vec2> percent_to_pixels(const std::vector<Vec2>& points, int width, int height);

// Outer bounds of the ring's vertices as [x, y, w, h].
std::array<double, 4> bbox_from_polygon(const Ring& ring);

// Assigns every keypoint to exactly one polygon instance: first the polygon
// whose rasterized mask contains the point, otherwise the polygon with the
// smallest point-to-boundary distance (ties break toward the earlier
// instance). Within an instance the keypoints are ordered by the category's
// keypoint_names; names without a matching result stay (0,0,0). Returns one
// keypoint list (pixel coordinates) per polygon instance, in input order.
std::vector<std::vector<Keypoint>> associate_keypoints(
    const LabelTask& task, const std::vector<CategorySpec>& specs);

// Builds the combined dataset: one image per task, one annotation per
// polygon instance carrying segmentation, derived bbox, shoelace area and
// the associated keypoints.
CocoDataset convert(const std::vector<LabelTask>& tasks,
                    const std::vector<CategorySpec>& specs);

}  // namespace cocopipe
