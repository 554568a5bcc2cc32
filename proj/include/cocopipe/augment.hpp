#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cocopipe/coco.hpp"
#include "cocopipe/errors.hpp"
#include "cocopipe/geometry.hpp"
#include "cocopipe/imageio.hpp"
#include "cocopipe/rng.hpp"

namespace cocopipe {

// Row-major 2x3 affine: x' = a*x + b*y + c, y' = d*x + e*y + f.
struct Affine {
    double a = 1.0, b = 0.0, c = 0.0;
    double d = 0.0, e = 1.0, f = 0.0;

    Vec2 apply(Vec2 p) const {
        return {a * p.x + b * p.y + c, d * p.x + e * p.y + f};
    }

    bool operator==(const Affine&) const = default;
};

// second ∘ first: applies `first`, then `second`.
Affine compose(const Affine& second, const Affine& first);
std::optional<Affine> invert(const Affine& m);

struct Rotate {
    double degrees = 0.0;
};
struct Scale {
    double factor = 1.0;
};
struct Translate {
    double dx = 0.0;
    double dy = 0.0;
};
struct HFlip {};
struct VFlip {};
struct Crop {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
};
struct Resize {
    int width = 0;
    int height = 0;
};

using TransformKind = std::variant<Rotate, Scale, Translate, HFlip, VFlip, Crop, Resize>;

struct TransformSpec {
    TransformKind kind;
    double probability = 1.0;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    int multiplicity = 0;
    std::vector<TransformSpec> transforms;
    double min_area = 16.0;  // dropped-sliver threshold, px²
};

// JSON object {"seed": int, "multiplicity": int,
//   "transforms": [{"kind": "...", "params": {...}, "probability": float}]}.
PipelineConfig parse_pipeline_config(const std::string& text);

// Matrix plus the output frame it maps into (crop/resize change the frame).
struct AffinePlan {
    Affine matrix;
    int out_width = 0;
    int out_height = 0;
};

// rotate/scale act about the image center; hflip x -> w - x; vflip y -> h - y;
// crop shifts by (-x, -y) into a (w, h) frame; resize scales into (w, h).
AffinePlan affine_of(const TransformSpec& spec, int width, int height);

// One inclusion draw per transform in list order (include iff u < probability),
// composing the included matrices with the frame evolving through crop/resize.
AffinePlan plan_pipeline(const std::vector<TransformSpec>& transforms, int width,
                         int height, Rng& rng);

// Applies the matrix to every non-padding point; points landing outside the
// closed [0,w]x[0,h] frame become (0,0,0). Padding stays untouched.
FlatPoints transform_points(const FlatPoints& points, const Affine& m, int new_width,
                            int new_height);

// Polygon round trip: rings -> keypoints -> transformed -> rings, then clipped
// to the frame; bbox and area recomputed; keypoints re-resolved with
// out-of-frame -> v 0. Returns nothing when the clipped area drops below
// min_area. RLE segmentation is not augmentable.
std::optional<CocoAnnotation> transform_annotation(const CocoAnnotation& ann,
                                                   const Affine& m, int new_width,
                                                   int new_height,
                                                   double min_area = 16.0);

// Inverse-mapping warp, bilinear interpolation, constant-0 border.
ImageRaster warp_image(const ImageRaster& img, const Affine& m, int new_width,
                       int new_height);

using ImageLoader = std::function<ImageRaster(const CocoImage&)>;

struct AugmentResult {
    CocoDataset dataset;  // originals plus augmented copies, fresh dense ids
    std::vector<std::pair<std::string, ImageRaster>> images;  // augmented copies only
};

// Expands the dataset by config.multiplicity copies per image. Deterministic
// for fixed (dataset, images, config) regardless of worker count; jobs 0
// means hardware concurrency.
AugmentResult augment_dataset(const CocoDataset& ds, const ImageLoader& loader,
                              const PipelineConfig& config, int jobs = 0);

}  // namespace cocopipe
