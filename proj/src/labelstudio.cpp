#include "cocopipe/labelstudio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <unordered_map>
#include <unordered_set>

namespace cocopipe {

namespace {

double percent_checked(const Json& value, const std::string& context) {
    if (!value.is_number()) {
        throw Error(ErrorKind::Ingest, context + ": coordinate is not a number");
    }
    const double v = value.get<double>();
    if (v < 0.0 || v > 100.0) {
        throw Error(ErrorKind::Ingest, context + ": coordinate out of range: " +
                                           std::to_string(v));
    }
    return v;
}

std::string result_label(const Json& record, const char* key, const std::string& context) {
    auto it = record.find(key);
    if (it == record.end() || !it->is_array() || it->empty() || !(*it)[0].is_string()) {
        throw Error(ErrorKind::Ingest, context + ": result missing '" + key + "'");
    }
    return (*it)[0].get<std::string>();
}

void read_dims(const Json& record, int& width, int& height) {
    if (record.contains("original_width") && record.at("original_width").is_number()) {
        width = record.at("original_width").get<int>();
    }
    if (record.contains("original_height") && record.at("original_height").is_number()) {
        height = record.at("original_height").get<int>();
    }
}

PolygonResult parse_polygon_result(const Json& record, const std::string& context,
                                   int& width, int& height) {
    PolygonResult poly;
    poly.label = result_label(record, "polygonlabels", context);
    auto it = record.find("points");
    if (it == record.end() || !it->is_array()) {
        throw Error(ErrorKind::Ingest, context + ": polygon result missing 'points'");
    }
    for (const Json& pt : *it) {
        if (!pt.is_array() || pt.size() != 2) {
            throw Error(ErrorKind::Ingest, context + ": polygon point is not an [x, y] pair");
        }
        poly.points.push_back({percent_checked(pt[0], context), percent_checked(pt[1], context)});
    }
    read_dims(record, width, height);
    return poly;
}

KeypointResult parse_keypoint_result(const Json& record, const std::string& context,
                                     int& width, int& height) {
    KeypointResult kp;
    kp.label = result_label(record, "keypointlabels", context);
    if (!record.contains("x") || !record.contains("y")) {
        throw Error(ErrorKind::Ingest, context + ": keypoint result missing 'x'/'y'");
    }
    kp.x = percent_checked(record.at("x"), context);
    kp.y = percent_checked(record.at("y"), context);
    read_dims(record, width, height);
    return kp;
}

// Even-odd crossing test; consistent with rasterize_polygon's parity rule,
// so testing the keypoint's pixel center equals a rasterized-mask lookup.
bool point_in_rings(Vec2 pt, const Rings& rings) {
    bool inside = false;
    for (const Ring& ring : rings) {
        const std::size_t n = ring.size();
        if (n < 3) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& p = ring[i];
            const Vec2& q = ring[(i + 1) % n];
            if ((p.y <= pt.y && q.y > pt.y) || (q.y <= pt.y && p.y > pt.y)) {
                const double xint = p.x + (pt.y - p.y) / (q.y - p.y) * (q.x - p.x);
                if (xint > pt.x) inside = !inside;
            }
        }
    }
    return inside;
}

double point_segment_distance(Vec2 pt, Vec2 a, Vec2 b) {
    const double vx = b.x - a.x;
    const double vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = 0.0;
    if (len2 > 0.0) {
        t = ((pt.x - a.x) * vx + (pt.y - a.y) * vy) / len2;
        t = std::clamp(t, 0.0, 1.0);
    }
    const double dx = pt.x - (a.x + t * vx);
    const double dy = pt.y - (a.y + t * vy);
    return std::hypot(dx, dy);
}

double point_boundary_distance(Vec2 pt, const Ring& ring) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        best = std::min(best, point_segment_distance(pt, ring[i], ring[(i + 1) % n]));
    }
    return best;
}

}  // namespace

std::vector<LabelTask> parse_jsonmin(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Parse, "malformed JSON at byte " + std::to_string(e.byte) +
                                          ": " + e.what());
    }
    if (!doc.is_array()) {
        throw Error(ErrorKind::Ingest, "JSON-MIN export must be an array of task records");
    }

    std::vector<LabelTask> tasks;
    int index = 0;
    for (const Json& record : doc) {
        const std::string context = "record " + std::to_string(index);
        if (!record.is_object()) {
            throw Error(ErrorKind::Ingest, context + ": expected an object");
        }
        LabelTask task;
        if (!record.contains("image") || !record.at("image").is_string()) {
            throw Error(ErrorKind::Ingest, context + ": missing image reference");
        }
        task.image_ref = record.at("image").get<std::string>();
        read_dims(record, task.original_width, task.original_height);

        for (const char* key : {"polygon", "polygonlabels"}) {
            if (record.contains(key) && record.at(key).is_array()) {
                for (const Json& result : record.at(key)) {
                    task.polygon_results.push_back(parse_polygon_result(
                        result, context, task.original_width, task.original_height));
                }
            }
        }
        for (const char* key : {"keypoint", "keypointlabels"}) {
            if (record.contains(key) && record.at(key).is_array()) {
                for (const Json& result : record.at(key)) {
                    task.keypoint_results.push_back(parse_keypoint_result(
                        result, context, task.original_width, task.original_height));
                }
            }
        }

        if (task.original_width <= 0 || task.original_height <= 0) {
            throw Error(ErrorKind::Ingest, context + ": missing original dimensions");
        }
        tasks.push_back(std::move(task));
        ++index;
    }
    return tasks;
}

std::vector<CategorySpec> parse_category_specs(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Parse, "malformed JSON at byte " + std::to_string(e.byte) +
                                          ": " + e.what());
    }
    if (!doc.is_array()) {
        throw Error(ErrorKind::Ingest, "category schema must be a JSON list");
    }
    std::vector<CategorySpec> specs;
    std::unordered_set<std::string> names;
    int index = 0;
    for (const Json& record : doc) {
        const std::string context = "category spec " + std::to_string(index);
        if (!record.is_object() || !record.contains("name") ||
            !record.at("name").is_string()) {
            throw Error(ErrorKind::Ingest, context + ": missing 'name'");
        }
        CategorySpec spec;
        spec.name = record.at("name").get<std::string>();
        if (!names.insert(spec.name).second) {
            throw Error(ErrorKind::Ingest, context + ": duplicate name '" + spec.name + "'");
        }
        if (record.contains("keypoints")) {
            for (const Json& name : record.at("keypoints")) {
                if (!name.is_string()) {
                    throw Error(ErrorKind::Ingest, context + ": keypoint name is not a string");
                }
                spec.keypoint_names.push_back(name.get<std::string>());
            }
        }
        std::unordered_set<std::string> kp_names(spec.keypoint_names.begin(),
                                                 spec.keypoint_names.end());
        if (kp_names.size() != spec.keypoint_names.size()) {
            throw Error(ErrorKind::Ingest, context + ": duplicate keypoint names");
        }
        if (record.contains("skeleton")) {
            const int k = static_cast<int>(spec.keypoint_names.size());
            for (const Json& edge : record.at("skeleton")) {
                if (!edge.is_array() || edge.size() != 2 || !edge[0].is_number_integer() ||
                    !edge[1].is_number_integer()) {
                    throw Error(ErrorKind::Ingest, context + ": skeleton edge is not a pair");
                }
                const int a = edge[0].get<int>();
                const int b = edge[1].get<int>();
                if (a < 1 || a > k || b < 1 || b > k) {
                    throw Error(ErrorKind::Ingest,
                                context + ": skeleton edge outside [1," + std::to_string(k) + "]");
                }
                spec.skeleton.push_back({a, b});
            }
        }
        specs.push_back(std::move(spec));
        ++index;
    }
    return specs;
}

std::vector<Vec2> percent_to_pixels(const std::vector<Vec2>& points, int width, int height) {
    if (width <= 0 || height <= 0) {
        throw Error(ErrorKind::Input, "percent_to_pixels: non-positive dimensions");
    }
    std::vector<Vec2> out;
    out.reserve(points.size());
    for (const Vec2& p : points) {
        out.push_back({p.x * width / 100.0, p.y * height / 100.0});
    }
    return out;
}

std::array<double, 4> bbox_from_polygon(const Ring& ring) {
    if (ring.size() < 3) {
        throw Error(ErrorKind::Geometry,
                    "bbox_from_polygon: ring needs at least 3 vertices, got " +
                        std::to_string(ring.size()));
    }
    double min_x = ring[0].x, max_x = ring[0].x;
    double min_y = ring[0].y, max_y = ring[0].y;
    for (const Vec2& p : ring) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    return {min_x, min_y, max_x - min_x, max_y - min_y};
}

std::vector<std::vector<Keypoint>> associate_keypoints(
    const LabelTask& task, const std::vector<CategorySpec>& specs) {
    std::unordered_map<std::string, const CategorySpec*> by_name;
    for (const auto& spec : specs) {
        by_name[spec.name] = &spec;
    }

    struct Instance {
        const CategorySpec* spec;
        Ring ring;  // pixel coordinates
    };
    std::vector<Instance> instances;
    for (const auto& poly : task.polygon_results) {
        auto it = by_name.find(poly.label);
        if (it == by_name.end()) {
            throw Error(ErrorKind::Ingest,
                        "polygon label '" + poly.label + "' has no category spec");
        }
        instances.push_back(
            {it->second,
             percent_to_pixels(poly.points, task.original_width, task.original_height)});
    }

    std::vector<std::vector<Keypoint>> out;
    out.reserve(instances.size());
    for (const Instance& inst : instances) {
        out.emplace_back(inst.spec->keypoint_names.size(), Keypoint{0.0, 0.0, 0});
    }

    for (const auto& kp : task.keypoint_results) {
        bool label_known = false;
        for (const auto& spec : specs) {
            if (std::find(spec.keypoint_names.begin(), spec.keypoint_names.end(), kp.label) !=
                spec.keypoint_names.end()) {
                label_known = true;
                break;
            }
        }
        if (!label_known) {
            throw Error(ErrorKind::Ingest,
                        "keypoint label '" + kp.label + "' not in any category's keypoints");
        }

        const Vec2 pixel{kp.x * task.original_width / 100.0,
                         kp.y * task.original_height / 100.0};
        // sample the keypoint's pixel center, as a rasterized mask would
        const double cx =
            std::clamp(std::floor(pixel.x), 0.0, double(task.original_width - 1)) + 0.5;
        const double cy =
            std::clamp(std::floor(pixel.y), 0.0, double(task.original_height - 1)) + 0.5;

        std::size_t chosen = instances.size();
        double best_distance = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < instances.size(); ++i) {
            const auto& names = instances[i].spec->keypoint_names;
            if (std::find(names.begin(), names.end(), kp.label) == names.end()) continue;
            if (point_in_rings({cx, cy}, {instances[i].ring})) {
                chosen = i;
                break;  // containment wins, earliest instance on overlap
            }
            if (const double d = point_boundary_distance(pixel, instances[i].ring);
                d < best_distance) {
                best_distance = d;
                chosen = i;  // strict < keeps the earlier instance on ties
            }
        }
        if (chosen >= instances.size()) {
            throw Error(ErrorKind::Ingest,
                        "keypoint label '" + kp.label +
                            "' has no polygon instance of a matching category");
        }

        const auto& names = instances[chosen].spec->keypoint_names;
        const std::size_t slot = static_cast<std::size_t>(
            std::find(names.begin(), names.end(), kp.label) - names.begin());
        Keypoint candidate{pixel.x, pixel.y, 2};
        Keypoint& current = out[chosen][slot];
        // duplicate clicks for one name: keep the lexicographically smallest
        // point so assignment stays order-independent
        if (current.v == 0 || candidate.x < current.x ||
            (candidate.x == current.x && candidate.y < current.y)) {
            current = candidate;
        }
    }
    return out;
}

CocoDataset convert(const std::vector<LabelTask>& tasks,
                    const std::vector<CategorySpec>& specs) {
    CocoDataset ds;
    std::unordered_map<std::string, int> category_id_by_name;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        CocoCategory cat;
        cat.id = static_cast<int>(i) + 1;
        cat.name = specs[i].name;
        cat.keypoint_names = specs[i].keypoint_names;
        cat.skeleton = specs[i].skeleton;
        category_id_by_name[cat.name] = cat.id;
        ds.categories.push_back(std::move(cat));
    }

    int next_annotation_id = 1;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const LabelTask& task = tasks[t];
        CocoImage img;
        img.id = static_cast<int>(t) + 1;
        const std::string name = std::filesystem::path(task.image_ref).filename().string();
        img.file_name = name.empty() ? task.image_ref : name;
        img.width = task.original_width;
        img.height = task.original_height;
        ds.images.push_back(img);

        const auto keypoint_lists = associate_keypoints(task, specs);
        for (std::size_t p = 0; p < task.polygon_results.size(); ++p) {
            const auto& poly = task.polygon_results[p];
            const Ring ring =
                percent_to_pixels(poly.points, task.original_width, task.original_height);
            CocoAnnotation ann;
            ann.id = next_annotation_id++;
            ann.image_id = img.id;
            ann.category_id = category_id_by_name.at(poly.label);
            ann.bbox = bbox_from_polygon(ring);
            ann.area = shoelace_area(ring);
            ann.segmentation = PolygonRings{flat_from_ring(ring)};
            ann.keypoints = keypoint_lists[p];
            ann.num_keypoints = static_cast<int>(std::count_if(
                ann.keypoints.begin(), ann.keypoints.end(),
                [](const Keypoint& kp) { return kp.v > 0; }));
            ann.iscrowd = 0;
            ds.annotations.push_back(std::move(ann));
        }
    }
    return ds;
}

}  // namespace cocopipe
