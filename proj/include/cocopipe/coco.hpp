#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cocopipe/errors.hpp"
#include "cocopipe/geometry.hpp"

namespace cocopipe {

using Json = nlohmann::ordered_json;

// Flat polygon rings, COCO-style: each ring is [x1, y1, x2, y2, ...].
using PolygonRings = std::vector<std::vector<double>>;
using Segmentation = std::variant<PolygonRings, Rle>;

struct CocoImage {
    int id = 0;
    std::string file_name;
    int width = 0;
    int height = 0;

    bool operator==(const CocoImage&) const = default;
};

struct CocoCategory {
    int id = 0;
    std::string name;
    std::string supercategory;
    std::vector<std::string> keypoint_names;
    std::vector<std::array<int, 2>> skeleton;  // 1-based indices into keypoint_names

    bool operator==(const CocoCategory&) const = default;
};

struct CocoAnnotation {
    int id = 0;
    int image_id = 0;
    int category_id = 0;
    std::array<double, 4> bbox{};  // x, y, w, h; x,y = top-left
    double area = 0.0;
    Segmentation segmentation = PolygonRings{};
    std::vector<Keypoint> keypoints;
    int num_keypoints = 0;
    int iscrowd = 0;

    bool operator==(const CocoAnnotation&) const = default;
};

struct CocoDataset {
    std::vector<CocoImage> images;
    std::vector<CocoAnnotation> annotations;
    std::vector<CocoCategory> categories;
    Json info = Json::object();  // free-form; unknown top-level keys land here

    const CocoImage* find_image(int id) const;
    const CocoCategory* find_category(int id) const;
    const CocoAnnotation* find_annotation(int id) const;

    bool operator==(const CocoDataset&) const = default;
};

struct Violation {
    std::string record_kind;  // "image" | "category" | "annotation"
    int record_id = 0;
    std::string rule;
    std::string message;

    bool operator==(const Violation&) const = default;
};

class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<Violation> violations);

    const std::vector<Violation>& violations() const { return violations_; }

private:
    std::vector<Violation> violations_;
};

// Parses a COCO JSON document. Unknown top-level keys are preserved into
// info; unknown per-record keys are dropped with a warning. Missing ids are
// assigned densely in encounter order. Dangling image/category references
// are schema errors.
CocoDataset parse_dataset(const std::string& text,
                          std::vector<std::string>* warnings = nullptr);

// Emits canonical COCO JSON: records in ascending id order, floating values
// at two decimal places. Refuses datasets with validation violations.
std::string serialize_dataset(const CocoDataset& ds);

// One violation per broken invariant; empty exactly when the dataset is valid.
std::vector<Violation> validate(const CocoDataset& ds);

Json violation_to_json(const Violation& v);

// Rasterizes an annotation's segmentation at the given image dimensions;
// decodes RLE directly.
BitMask annotation_mask(const CocoAnnotation& ann, int width, int height);

}  // namespace cocopipe
