#include "cocopipe/augment.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <thread>
#include <unordered_map>

namespace cocopipe {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};

double num_param(const Json& params, const char* key, const std::string& context) {
    auto it = params.find(key);
    if (it == params.end() || !it->is_number()) {
        throw Error(ErrorKind::Config,
                    context + ": missing numeric param '" + std::string(key) + "'");
    }
    return it->get<double>();
}

int int_param(const Json& params, const char* key, const std::string& context) {
    auto it = params.find(key);
    if (it == params.end() || !it->is_number_integer()) {
        throw Error(ErrorKind::Config,
                    context + ": missing integer param '" + std::string(key) + "'");
    }
    return it->get<int>();
}

void reject_unknown_keys(const Json& object, std::initializer_list<const char*> known,
                         const std::string& context) {
    for (const auto& [key, value] : object.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (key == k) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw Error(ErrorKind::Config, context + ": unknown key '" + key + "'");
        }
    }
}

TransformSpec parse_transform(const Json& entry, int index) {
    const std::string context = "transform " + std::to_string(index);
    if (!entry.is_object() || !entry.contains("kind") || !entry.at("kind").is_string()) {
        throw Error(ErrorKind::Config, context + ": missing 'kind'");
    }
    reject_unknown_keys(entry, {"kind", "params", "probability"}, context);

    TransformSpec spec;
    if (entry.contains("probability")) {
        if (!entry.at("probability").is_number()) {
            throw Error(ErrorKind::Config, context + ": probability must be a number");
        }
        spec.probability = entry.at("probability").get<double>();
        if (spec.probability < 0.0 || spec.probability > 1.0) {
            throw Error(ErrorKind::Config, context + ": probability outside [0,1]");
        }
    }

    const Json params = entry.value("params", Json::object());
    if (!params.is_object()) {
        throw Error(ErrorKind::Config, context + ": params must be an object");
    }
    const std::string kind = entry.at("kind").get<std::string>();
    const std::string kctx = context + " (" + kind + ")";
    if (kind == "rotate") {
        reject_unknown_keys(params, {"degrees"}, kctx);
        spec.kind = Rotate{num_param(params, "degrees", kctx)};
    } else if (kind == "scale") {
        reject_unknown_keys(params, {"factor"}, kctx);
        const double factor = num_param(params, "factor", kctx);
        if (!(factor > 0.0)) {
            throw Error(ErrorKind::Config, kctx + ": scale factor must be > 0");
        }
        spec.kind = Scale{factor};
    } else if (kind == "translate") {
        reject_unknown_keys(params, {"dx", "dy"}, kctx);
        Translate t;
        if (params.contains("dx")) t.dx = num_param(params, "dx", kctx);
        if (params.contains("dy")) t.dy = num_param(params, "dy", kctx);
        spec.kind = t;
    } else if (kind == "hflip") {
        reject_unknown_keys(params, {}, kctx);
        spec.kind = HFlip{};
    } else if (kind == "vflip") {
        reject_unknown_keys(params, {}, kctx);
        spec.kind = VFlip{};
    } else if (kind == "crop") {
        reject_unknown_keys(params, {"x", "y", "w", "h"}, kctx);
        Crop c{num_param(params, "x", kctx), num_param(params, "y", kctx),
               num_param(params, "w", kctx), num_param(params, "h", kctx)};
        if (std::lround(c.w) < 1 || std::lround(c.h) < 1) {
            throw Error(ErrorKind::Config, kctx + ": crop region must have positive size");
        }
        spec.kind = c;
    } else if (kind == "resize") {
        reject_unknown_keys(params, {"width", "height"}, kctx);
        Resize r{int_param(params, "width", kctx), int_param(params, "height", kctx)};
        if (r.width < 1 || r.height < 1) {
            throw Error(ErrorKind::Config, kctx + ": resize dims must be >= 1");
        }
        spec.kind = r;
    } else {
        throw Error(ErrorKind::Config, context + ": unknown transform kind '" + kind + "'");
    }
    return spec;
}

}  // namespace

Affine compose(const Affine& second, const Affine& first) {
    return {second.a * first.a + second.b * first.d,
            second.a * first.b + second.b * first.e,
            second.a * first.c + second.b * first.f + second.c,
            second.d * first.a + second.e * first.d,
            second.d * first.b + second.e * first.e,
            second.d * first.c + second.e * first.f + second.f};
}

std::optional<Affine> invert(const Affine& m) {
    const double det = m.a * m.e - m.b * m.d;
    if (std::abs(det) < 1e-12) return std::nullopt;
    return Affine{m.e / det,  -m.b / det, (m.b * m.f - m.e * m.c) / det,
                  -m.d / det, m.a / det,  (m.d * m.c - m.a * m.f) / det};
}

PipelineConfig parse_pipeline_config(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Config, "malformed pipeline config at byte " +
                                           std::to_string(e.byte) + ": " + e.what());
    }
    if (!doc.is_object()) {
        throw Error(ErrorKind::Config, "pipeline config must be a JSON object");
    }
    reject_unknown_keys(doc, {"seed", "multiplicity", "transforms", "min_area"},
                        "pipeline config");

    PipelineConfig config;
    if (doc.contains("seed")) {
        if (!doc.at("seed").is_number_integer()) {
            throw Error(ErrorKind::Config, "seed must be an integer");
        }
        config.seed = static_cast<std::uint64_t>(doc.at("seed").get<std::int64_t>());
    }
    if (doc.contains("multiplicity")) {
        if (!doc.at("multiplicity").is_number_integer() ||
            doc.at("multiplicity").get<int>() < 0) {
            throw Error(ErrorKind::Config, "multiplicity must be an integer >= 0");
        }
        config.multiplicity = doc.at("multiplicity").get<int>();
    }
    if (doc.contains("min_area")) {
        if (!doc.at("min_area").is_number() || doc.at("min_area").get<double>() < 0.0) {
            throw Error(ErrorKind::Config, "min_area must be a number >= 0");
        }
        config.min_area = doc.at("min_area").get<double>();
    }
    if (doc.contains("transforms")) {
        if (!doc.at("transforms").is_array()) {
            throw Error(ErrorKind::Config, "transforms must be a list");
        }
        int index = 0;
        for (const Json& entry : doc.at("transforms")) {
            config.transforms.push_back(parse_transform(entry, index));
            ++index;
        }
    }
    return config;
}

AffinePlan affine_of(const TransformSpec& spec, int width, int height) {
    const double cx = width / 2.0;
    const double cy = height / 2.0;
    return std::visit(
        Overloaded{
            [&](const Rotate& r) -> AffinePlan {
                const double rad = r.degrees * std::numbers::pi / 180.0;
                const double c = std::cos(rad);
                const double s = std::sin(rad);
                return {{c, -s, cx - c * cx + s * cy, s, c, cy - s * cx - c * cy},
                        width,
                        height};
            },
            [&](const Scale& sc) -> AffinePlan {
                return {{sc.factor, 0.0, cx - sc.factor * cx, 0.0, sc.factor,
                         cy - sc.factor * cy},
                        width,
                        height};
            },
            [&](const Translate& t) -> AffinePlan {
                return {{1.0, 0.0, t.dx, 0.0, 1.0, t.dy}, width, height};
            },
            [&](const HFlip&) -> AffinePlan {
                return {{-1.0, 0.0, static_cast<double>(width), 0.0, 1.0, 0.0}, width,
                        height};
            },
            [&](const VFlip&) -> AffinePlan {
                return {{1.0, 0.0, 0.0, 0.0, -1.0, static_cast<double>(height)}, width,
                        height};
            },
            [&](const Crop& c) -> AffinePlan {
                return {{1.0, 0.0, -c.x, 0.0, 1.0, -c.y},
                        static_cast<int>(std::lround(c.w)),
                        static_cast<int>(std::lround(c.h))};
            },
            [&](const Resize& r) -> AffinePlan {
                return {{static_cast<double>(r.width) / width, 0.0, 0.0, 0.0,
                         static_cast<double>(r.height) / height, 0.0},
                        r.width,
                        r.height};
            },
        },
        spec.kind);
}

AffinePlan plan_pipeline(const std::vector<TransformSpec>& transforms, int width,
                         int height, Rng& rng) {
    AffinePlan plan{{}, width, height};
    for (const TransformSpec& spec : transforms) {
        // one draw per transform keeps the stream stable across probabilities
        const double u = rng.next_double();
        if (!(u < spec.probability)) continue;
        const AffinePlan step = affine_of(spec, plan.out_width, plan.out_height);
        plan.matrix = compose(step.matrix, plan.matrix);
        plan.out_width = step.out_width;
        plan.out_height = step.out_height;
    }
    return plan;
}

FlatPoints transform_points(const FlatPoints& points, const Affine& m, int new_width,
                            int new_height) {
    FlatPoints out = points;
    const std::size_t vertices = out.vertex_count();
    for (std::size_t i = 0; i < out.points.size(); ++i) {
        Keypoint& kp = out.points[i];
        if (i >= vertices && kp.v == 0) continue;  // padding stays (0,0,0)
        const Vec2 p = m.apply({kp.x, kp.y});
        if (p.x < 0.0 || p.x > new_width || p.y < 0.0 || p.y > new_height) {
            kp = {0.0, 0.0, 0};
        } else {
            kp.x = p.x;
            kp.y = p.y;
        }
    }
    return out;
}

std::optional<CocoAnnotation> transform_annotation(const CocoAnnotation& ann,
                                                   const Affine& m, int new_width,
                                                   int new_height, double min_area) {
    if (std::holds_alternative<Rle>(ann.segmentation)) {
        throw Error(ErrorKind::Unsupported,
                    "annotation " + std::to_string(ann.id) +
                        ": RLE segmentation cannot be augmented");
    }

    Rings rings;
    for (const auto& flat : std::get<PolygonRings>(ann.segmentation)) {
        rings.push_back(ring_from_flat(flat));
    }

    // the polygon -> keypoint -> polygon round trip, then frame clipping
    FlatPoints fp = polygon_to_keypoints(rings);
    for (std::size_t i = 0; i < fp.vertex_count(); ++i) {
        const Vec2 p = m.apply({fp.points[i].x, fp.points[i].y});
        fp.points[i].x = p.x;
        fp.points[i].y = p.y;
    }

    Rings clipped;
    double area = 0.0;
    for (const Ring& ring : keypoints_to_polygon(fp)) {
        Ring c = clip_ring_to_rect(ring, new_width, new_height);
        if (c.size() < 3) continue;
        const double a = shoelace_area(c);
        if (a <= 0.0) continue;
        area += a;
        clipped.push_back(std::move(c));
    }
    if (clipped.empty() || area < min_area) return std::nullopt;

    CocoAnnotation out = ann;
    PolygonRings out_rings;
    double min_x = std::numeric_limits<double>::infinity();
    double min_y = std::numeric_limits<double>::infinity();
    double max_x = -std::numeric_limits<double>::infinity();
    double max_y = -std::numeric_limits<double>::infinity();
    for (const Ring& ring : clipped) {
        for (const Vec2& v : ring) {
            min_x = std::min(min_x, v.x);
            min_y = std::min(min_y, v.y);
            max_x = std::max(max_x, v.x);
            max_y = std::max(max_y, v.y);
        }
        out_rings.push_back(flat_from_ring(ring));
    }
    out.segmentation = std::move(out_rings);
    out.bbox = {min_x, min_y, max_x - min_x, max_y - min_y};
    out.area = area;

    FlatPoints kps;
    kps.points = ann.keypoints;
    out.keypoints = transform_points(kps, m, new_width, new_height).points;
    out.num_keypoints = static_cast<int>(
        std::count_if(out.keypoints.begin(), out.keypoints.end(),
                      [](const Keypoint& kp) { return kp.v > 0; }));
    return out;
}

ImageRaster warp_image(const ImageRaster& img, const Affine& m, int new_width,
                       int new_height) {
    const std::optional<Affine> inv = invert(m);
    if (!inv) {
        throw Error(ErrorKind::Geometry, "warp_image: singular transform");
    }

    ImageRaster out;
    out.width = new_width;
    out.height = new_height;
    out.channels = img.channels;
    out.pixels.assign(
        static_cast<std::size_t>(new_width) * new_height * img.channels, 0);

    const auto fetch = [&](int x, int y, int c) -> double {
        if (x < 0 || x >= img.width || y < 0 || y >= img.height) return 0.0;
        return img.at(x, y, c);
    };

    for (int y = 0; y < new_height; ++y) {
        for (int x = 0; x < new_width; ++x) {
            // pixel centers in, pixel-index space out
            const Vec2 src = inv->apply({x + 0.5, y + 0.5});
            const double fx = src.x - 0.5;
            const double fy = src.y - 0.5;
            const int x0 = static_cast<int>(std::floor(fx));
            const int y0 = static_cast<int>(std::floor(fy));
            const double dx = fx - x0;
            const double dy = fy - y0;
            for (int c = 0; c < img.channels; ++c) {
                const double acc = (1.0 - dx) * (1.0 - dy) * fetch(x0, y0, c) +
                                   dx * (1.0 - dy) * fetch(x0 + 1, y0, c) +
                                   (1.0 - dx) * dy * fetch(x0, y0 + 1, c) +
                                   dx * dy * fetch(x0 + 1, y0 + 1, c);
                out.at(x, y, c) = static_cast<std::uint8_t>(
                    std::lround(std::clamp(acc, 0.0, 255.0)));
            }
        }
    }
    return out;
}

AugmentResult augment_dataset(const CocoDataset& ds, const ImageLoader& loader,
                              const PipelineConfig& config, int jobs) {
    if (config.multiplicity < 0) {
        throw Error(ErrorKind::Config, "multiplicity must be >= 0");
    }

    AugmentResult result;
    result.dataset.info = ds.info;
    result.dataset.categories = ds.categories;
    result.dataset.images = ds.images;
    result.dataset.annotations = ds.annotations;

    std::unordered_map<int, std::vector<const CocoAnnotation*>> anns_by_image;
    for (const CocoAnnotation& ann : ds.annotations) {
        anns_by_image[ann.image_id].push_back(&ann);
    }

    if (config.multiplicity == 0 || ds.images.empty()) {
        return result;
    }

    // sequential preload keeps loader errors deterministic
    std::vector<ImageRaster> sources(ds.images.size());
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        try {
            sources[i] = loader(ds.images[i]);
        } catch (const Error& e) {
            throw Error(ErrorKind::Pipeline,
                        "cannot load image '" + ds.images[i].file_name + "': " + e.what());
        }
    }

    struct CopyOutput {
        CocoImage image;
        std::vector<CocoAnnotation> annotations;
        ImageRaster raster;
    };
    const std::size_t per_image = static_cast<std::size_t>(config.multiplicity);
    const std::size_t total = ds.images.size() * per_image;
    std::vector<CopyOutput> outputs(total);
    std::vector<std::exception_ptr> item_errors(total);

    const auto process = [&](std::size_t item) {
        const std::size_t image_index = item / per_image;
        const int copy = static_cast<int>(item % per_image) + 1;
        const CocoImage& src = ds.images[image_index];

        Rng rng(hash_seed(config.seed, static_cast<std::uint64_t>(src.id),
                          static_cast<std::uint64_t>(copy)));
        const AffinePlan plan =
            plan_pipeline(config.transforms, src.width, src.height, rng);

        CopyOutput& out = outputs[item];
        const std::filesystem::path path(src.file_name);
        const std::filesystem::path renamed =
            path.parent_path() /
            (path.stem().string() + "_aug" + std::to_string(copy) +
             path.extension().string());
        out.image.file_name = renamed.string();
        out.image.width = plan.out_width;
        out.image.height = plan.out_height;

        auto it = anns_by_image.find(src.id);
        if (it != anns_by_image.end()) {
            for (const CocoAnnotation* ann : it->second) {
                auto moved = transform_annotation(*ann, plan.matrix, plan.out_width,
                                                  plan.out_height, config.min_area);
                if (moved) out.annotations.push_back(std::move(*moved));
            }
        }
        out.raster = warp_image(sources[image_index], plan.matrix, plan.out_width,
                                plan.out_height);
    };

    const unsigned hw = std::thread::hardware_concurrency();
    std::size_t workers = jobs > 0 ? static_cast<std::size_t>(jobs) : (hw > 0 ? hw : 1);
    workers = std::min(workers, total);

    std::atomic<std::size_t> cursor{0};
    const auto run_worker = [&] {
        for (;;) {
            const std::size_t item = cursor.fetch_add(1);
            if (item >= total) break;
            try {
                process(item);
            } catch (...) {
                item_errors[item] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        run_worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run_worker);
        for (std::thread& t : pool) t.join();
    }
    // lowest item index wins so failures are worker-count independent
    for (const std::exception_ptr& err : item_errors) {
        if (err) std::rethrow_exception(err);
    }

    int next_image_id = 0;
    int next_ann_id = 0;
    for (const CocoImage& img : ds.images) next_image_id = std::max(next_image_id, img.id);
    for (const CocoAnnotation& ann : ds.annotations) {
        next_ann_id = std::max(next_ann_id, ann.id);
    }
    ++next_image_id;
    ++next_ann_id;

    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        for (std::size_t n = 0; n < per_image; ++n) {
            CopyOutput& out = outputs[i * per_image + n];
            out.image.id = next_image_id++;
            result.dataset.images.push_back(out.image);
            for (CocoAnnotation& ann : out.annotations) {
                ann.id = next_ann_id++;
                ann.image_id = out.image.id;
                result.dataset.annotations.push_back(std::move(ann));
            }
            result.images.emplace_back(out.image.file_name, std::move(out.raster));
        }
    }
    return result;
}

}  // namespace cocopipe
