#include "cocopipe/coco.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace cocopipe {

namespace {

// Coordinates are stored at two decimal places; round-half-away, normalized
// so -0.0 never leaks into output.
double q2(double v) {
    const double r = std::round(v * 100.0) / 100.0;
    return r + 0.0;
}

std::string record_label(const std::string& kind, int id) {
    return kind + " " + std::to_string(id);
}

int to_int(const Json& value, const std::string& context, const std::string& field) {
    if (value.is_number_integer()) return value.get<int>();
    if (value.is_number_float()) {
        const double d = value.get<double>();
        if (d == std::trunc(d)) return static_cast<int>(d);
    }
    throw Error(ErrorKind::Schema, context + ": field '" + field + "' is not an integer");
}

double to_double(const Json& value, const std::string& context, const std::string& field) {
    if (!value.is_number()) {
        throw Error(ErrorKind::Schema, context + ": field '" + field + "' is not a number");
    }
    return value.get<double>();
}

const Json& require_field(const Json& record, const std::string& field,
                          const std::string& context) {
    auto it = record.find(field);
    if (it == record.end() || it->is_null()) {
        throw Error(ErrorKind::Schema, context + ": missing field '" + field + "'");
    }
    return *it;
}

void warn_unknown(const Json& record, const std::set<std::string>& known,
                  const std::string& context, std::vector<std::string>* warnings) {
    if (!warnings) return;
    for (const auto& item : record.items()) {
        if (!known.contains(item.key())) {
            warnings->push_back(context + ": ignoring unknown field '" + item.key() + "'");
        }
    }
}

CocoImage parse_image(const Json& record, int index, std::vector<std::string>* warnings) {
    if (!record.is_object()) {
        throw Error(ErrorKind::Schema, "image at index " + std::to_string(index) +
                                           ": expected an object");
    }
    CocoImage img;
    img.id = record.contains("id") ? to_int(record.at("id"), "image", "id") : index + 1;
    const std::string context = record_label("image", img.id);
    img.file_name = require_field(record, "file_name", context).get<std::string>();
    img.width = to_int(require_field(record, "width", context), context, "width");
    img.height = to_int(require_field(record, "height", context), context, "height");
    warn_unknown(record, {"id", "file_name", "width", "height"}, context, warnings);
    return img;
}

CocoCategory parse_category(const Json& record, int index,
                            std::vector<std::string>* warnings) {
    if (!record.is_object()) {
        throw Error(ErrorKind::Schema, "category at index " + std::to_string(index) +
                                           ": expected an object");
    }
    CocoCategory cat;
    cat.id = record.contains("id") ? to_int(record.at("id"), "category", "id") : index + 1;
    const std::string context = record_label("category", cat.id);
    cat.name = require_field(record, "name", context).get<std::string>();
    if (record.contains("supercategory") && record.at("supercategory").is_string()) {
        cat.supercategory = record.at("supercategory").get<std::string>();
    }
    if (record.contains("keypoints")) {
        for (const Json& name : record.at("keypoints")) {
            if (!name.is_string()) {
                throw Error(ErrorKind::Schema, context + ": keypoint name is not a string");
            }
            cat.keypoint_names.push_back(name.get<std::string>());
        }
    }
    if (record.contains("skeleton")) {
        for (const Json& edge : record.at("skeleton")) {
            if (!edge.is_array() || edge.size() != 2) {
                throw Error(ErrorKind::Schema, context + ": skeleton edge is not a pair");
            }
            cat.skeleton.push_back({to_int(edge[0], context, "skeleton"),
                                    to_int(edge[1], context, "skeleton")});
        }
    }
    warn_unknown(record, {"id", "name", "supercategory", "keypoints", "skeleton"}, context,
                 warnings);
    return cat;
}

Segmentation parse_segmentation(const Json& seg, const std::string& context) {
    if (seg.is_array()) {
        PolygonRings rings;
        for (const Json& ring : seg) {
            if (!ring.is_array()) {
                throw Error(ErrorKind::Schema, context + ": polygon ring is not an array");
            }
            std::vector<double> flat;
            flat.reserve(ring.size());
            for (const Json& coord : ring) {
                flat.push_back(to_double(coord, context, "segmentation"));
            }
            rings.push_back(std::move(flat));
        }
        return rings;
    }
    if (seg.is_object()) {
        Rle rle;
        const Json& size = require_field(seg, "size", context + ": RLE");
        if (!size.is_array() || size.size() != 2) {
            throw Error(ErrorKind::Schema, context + ": RLE size must be [height, width]");
        }
        rle.height = to_int(size[0], context, "size");
        rle.width = to_int(size[1], context, "size");
        const Json& counts = require_field(seg, "counts", context + ": RLE");
        if (!counts.is_array()) {
            throw Error(ErrorKind::Schema,
                        context + ": RLE counts must be an integer list");
        }
        for (const Json& c : counts) {
            rle.counts.push_back(to_int(c, context, "counts"));
        }
        return rle;
    }
    throw Error(ErrorKind::Schema,
                context + ": segmentation must be a polygon list or an RLE object");
}

double default_area(const Segmentation& seg) {
    if (const auto* rings = std::get_if<PolygonRings>(&seg)) {
        double total = 0.0;
        for (const auto& flat : *rings) {
            if (flat.size() >= 6 && flat.size() % 2 == 0) {
                total += shoelace_area(ring_from_flat(flat));
            }
        }
        return total;
    }
    const Rle& rle = std::get<Rle>(seg);
    double fg = 0.0;
    for (std::size_t i = 1; i < rle.counts.size(); i += 2) {
        fg += static_cast<double>(rle.counts[i]);
    }
    return fg;
}

int count_labeled(const std::vector<Keypoint>& kps) {
    return static_cast<int>(
        std::count_if(kps.begin(), kps.end(), [](const Keypoint& k) { return k.v > 0; }));
}

CocoAnnotation parse_annotation(const Json& record, int index,
                                std::vector<std::string>* warnings) {
    if (!record.is_object()) {
        throw Error(ErrorKind::Schema, "annotation at index " + std::to_string(index) +
                                           ": expected an object");
    }
    CocoAnnotation ann;
    ann.id = record.contains("id") ? to_int(record.at("id"), "annotation", "id") : index + 1;
    const std::string context = record_label("annotation", ann.id);
    ann.image_id = to_int(require_field(record, "image_id", context), context, "image_id");
    ann.category_id =
        to_int(require_field(record, "category_id", context), context, "category_id");

    const Json& bbox = require_field(record, "bbox", context);
    if (!bbox.is_array() || bbox.size() != 4) {
        throw Error(ErrorKind::Schema, context + ": bbox must hold [x, y, w, h]");
    }
    for (std::size_t i = 0; i < 4; ++i) {
        ann.bbox[i] = to_double(bbox[i], context, "bbox");
    }

    ann.segmentation = parse_segmentation(require_field(record, "segmentation", context),
                                          context);

    if (record.contains("keypoints")) {
        const Json& kps = record.at("keypoints");
        if (!kps.is_array() || kps.size() % 3 != 0) {
            throw Error(ErrorKind::Schema,
                        context + ": keypoints length is not a multiple of 3");
        }
        for (std::size_t i = 0; i + 2 < kps.size(); i += 3) {
            Keypoint kp;
            kp.x = to_double(kps[i], context, "keypoints");
            kp.y = to_double(kps[i + 1], context, "keypoints");
            kp.v = to_int(kps[i + 2], context, "keypoints");
            ann.keypoints.push_back(kp);
        }
    }
    ann.num_keypoints = record.contains("num_keypoints")
                            ? to_int(record.at("num_keypoints"), context, "num_keypoints")
                            : count_labeled(ann.keypoints);
    ann.area = record.contains("area")
                   ? to_double(record.at("area"), context, "area")
                   : default_area(ann.segmentation);
    ann.iscrowd = record.contains("iscrowd")
                      ? to_int(record.at("iscrowd"), context, "iscrowd")
                      : (std::holds_alternative<Rle>(ann.segmentation) ? 1 : 0);

    warn_unknown(record,
                 {"id", "image_id", "category_id", "bbox", "area", "segmentation",
                  "keypoints", "num_keypoints", "iscrowd"},
                 context, warnings);
    return ann;
}

}  // namespace

const CocoImage* CocoDataset::find_image(int id) const {
    for (const auto& img : images) {
        if (img.id == id) return &img;
    }
    return nullptr;
}

const CocoCategory* CocoDataset::find_category(int id) const {
    for (const auto& cat : categories) {
        if (cat.id == id) return &cat;
    }
    return nullptr;
}

const CocoAnnotation* CocoDataset::find_annotation(int id) const {
    for (const auto& ann : annotations) {
        if (ann.id == id) return &ann;
    }
    return nullptr;
}

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error(ErrorKind::Schema,
            "dataset has " + std::to_string(violations.size()) + " validation violation(s)"),
      violations_(std::move(violations)) {}

CocoDataset parse_dataset(const std::string& text, std::vector<std::string>* warnings) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Parse, "malformed JSON at byte " + std::to_string(e.byte) +
                                          ": " + e.what());
    }
    if (!doc.is_object()) {
        throw Error(ErrorKind::Schema, "top-level JSON value must be an object");
    }

    CocoDataset ds;
    if (doc.contains("info")) {
        const Json& info = doc.at("info");
        if (info.is_object()) {
            ds.info = info;
        } else {
            ds.info["info"] = info;
        }
    }
    for (const auto& item : doc.items()) {
        if (item.key() == "images" || item.key() == "annotations" ||
            item.key() == "categories" || item.key() == "info") {
            continue;
        }
        ds.info[item.key()] = item.value();  // preserved verbatim
    }

    if (doc.contains("images")) {
        const Json& arr = doc.at("images");
        if (!arr.is_array()) throw Error(ErrorKind::Schema, "'images' must be an array");
        int index = 0;
        for (const Json& record : arr) {
            ds.images.push_back(parse_image(record, index++, warnings));
        }
    }
    if (doc.contains("categories")) {
        const Json& arr = doc.at("categories");
        if (!arr.is_array()) throw Error(ErrorKind::Schema, "'categories' must be an array");
        int index = 0;
        for (const Json& record : arr) {
            ds.categories.push_back(parse_category(record, index++, warnings));
        }
    }
    if (doc.contains("annotations")) {
        const Json& arr = doc.at("annotations");
        if (!arr.is_array()) throw Error(ErrorKind::Schema, "'annotations' must be an array");
        int index = 0;
        for (const Json& record : arr) {
            ds.annotations.push_back(parse_annotation(record, index++, warnings));
        }
    }

    for (const auto& ann : ds.annotations) {
        if (!ds.find_image(ann.image_id)) {
            throw Error(ErrorKind::Schema,
                        record_label("annotation", ann.id) + ": dangling image_id " +
                            std::to_string(ann.image_id));
        }
        if (!ds.find_category(ann.category_id)) {
            throw Error(ErrorKind::Schema,
                        record_label("annotation", ann.id) + ": dangling category_id " +
                            std::to_string(ann.category_id));
        }
    }
    return ds;
}

std::vector<Violation> validate(const CocoDataset& ds) {
    std::vector<Violation> out;
    const double eps = 1e-6;
    auto flag = [&out](const std::string& kind, int id, const std::string& rule,
                       const std::string& message) {
        out.push_back({kind, id, rule, message});
    };

    std::unordered_map<int, const CocoImage*> images;
    for (const auto& img : ds.images) {
        if (img.id < 1) {
            flag("image", img.id, "nonpositive id", "image id must be >= 1");
        }
        if (!images.emplace(img.id, &img).second) {
            flag("image", img.id, "duplicate id", "image id appears more than once");
        }
        if (img.width <= 0 || img.height <= 0) {
            flag("image", img.id, "image dims",
                 "width and height must be positive, got " + std::to_string(img.width) +
                     "x" + std::to_string(img.height));
        }
    }

    std::unordered_map<int, const CocoCategory*> categories;
    for (const auto& cat : ds.categories) {
        if (cat.id < 1) {
            flag("category", cat.id, "nonpositive id", "category id must be >= 1");
        }
        if (!categories.emplace(cat.id, &cat).second) {
            flag("category", cat.id, "duplicate id", "category id appears more than once");
        }
        std::unordered_set<std::string> seen;
        for (const auto& name : cat.keypoint_names) {
            if (!seen.insert(name).second) {
                flag("category", cat.id, "duplicate keypoint name",
                     "keypoint name '" + name + "' appears more than once");
            }
        }
        const int k = static_cast<int>(cat.keypoint_names.size());
        for (const auto& edge : cat.skeleton) {
            if (edge[0] < 1 || edge[0] > k || edge[1] < 1 || edge[1] > k) {
                flag("category", cat.id, "skeleton index",
                     "skeleton edge [" + std::to_string(edge[0]) + "," +
                         std::to_string(edge[1]) + "] outside [1," + std::to_string(k) + "]");
            }
        }
    }

    std::unordered_set<int> ann_ids;
    for (const auto& ann : ds.annotations) {
        if (ann.id < 1) {
            flag("annotation", ann.id, "nonpositive id", "annotation id must be >= 1");
        }
        if (!ann_ids.insert(ann.id).second) {
            flag("annotation", ann.id, "duplicate id",
                 "annotation id appears more than once");
        }

        auto img_it = images.find(ann.image_id);
        if (img_it == images.end()) {
            flag("annotation", ann.id, "dangling image_id",
                 "image_id " + std::to_string(ann.image_id) + " has no image record");
        } else {
            const CocoImage& img = *img_it->second;
            const auto& b = ann.bbox;
            if (b[2] < 0.0 || b[3] < 0.0 || b[0] < -eps || b[1] < -eps ||
                b[0] + b[2] > img.width + eps || b[1] + b[3] > img.height + eps) {
                flag("annotation", ann.id, "bbox outside image",
                     "bbox does not fit [0," + std::to_string(img.width) + "]x[0," +
                         std::to_string(img.height) + "]");
            }
        }

        if (ann.area < 0.0) {
            flag("annotation", ann.id, "negative area", "area must be >= 0");
        }

        const bool is_rle = std::holds_alternative<Rle>(ann.segmentation);
        if (ann.iscrowd != 0 && ann.iscrowd != 1) {
            flag("annotation", ann.id, "iscrowd value", "iscrowd must be 0 or 1");
        } else if (ann.iscrowd == 1 && !is_rle) {
            flag("annotation", ann.id, "iscrowd segmentation kind",
                 "iscrowd 1 requires RLE segmentation");
        } else if (ann.iscrowd == 0 && is_rle) {
            flag("annotation", ann.id, "iscrowd segmentation kind",
                 "iscrowd 0 requires polygon segmentation");
        }

        if (const auto* rings = std::get_if<PolygonRings>(&ann.segmentation)) {
            for (const auto& flat : *rings) {
                if (flat.size() % 2 != 0 || flat.size() < 6) {
                    flag("annotation", ann.id, "polygon arity",
                         "polygon ring needs >= 3 vertices as an even coordinate list, got " +
                             std::to_string(flat.size()) + " coordinates");
                }
            }
        } else {
            const Rle& rle = std::get<Rle>(ann.segmentation);
            std::int64_t sum = 0;
            for (std::size_t i = 0; i < rle.counts.size(); ++i) {
                const std::int64_t c = rle.counts[i];
                if (c < 0) {
                    flag("annotation", ann.id, "rle negative run",
                         "run length must be >= 0");
                } else if (c == 0 && i != 0) {
                    flag("annotation", ann.id, "rle zero run",
                         "only the leading background run may be empty");
                }
                sum += c;
            }
            const std::int64_t expected =
                static_cast<std::int64_t>(rle.height) * rle.width;
            if (sum != expected) {
                flag("annotation", ann.id, "rle sum mismatch",
                     "counts sum " + std::to_string(sum) + " != " +
                         std::to_string(expected));
            }
        }

        for (std::size_t i = 0; i < ann.keypoints.size(); ++i) {
            const Keypoint& kp = ann.keypoints[i];
            if (kp.v < 0 || kp.v > 2) {
                flag("annotation", ann.id, "keypoint visibility",
                     "keypoint " + std::to_string(i) + " has v=" + std::to_string(kp.v));
            }
            if (kp.v == 0 && (kp.x != 0.0 || kp.y != 0.0)) {
                flag("annotation", ann.id, "keypoint zero coords",
                     "keypoint " + std::to_string(i) + " with v=0 must sit at (0,0)");
            }
        }
        if (ann.num_keypoints != count_labeled(ann.keypoints)) {
            flag("annotation", ann.id, "num_keypoints mismatch",
                 "num_keypoints " + std::to_string(ann.num_keypoints) + " != labeled count " +
                     std::to_string(count_labeled(ann.keypoints)));
        }
        auto cat_it = categories.find(ann.category_id);
        if (cat_it == categories.end()) {
            flag("annotation", ann.id, "dangling category_id",
                 "category_id " + std::to_string(ann.category_id) + " has no category record");
        } else if (ann.keypoints.size() != cat_it->second->keypoint_names.size()) {
            flag("annotation", ann.id, "keypoint arity",
                 "annotation carries " + std::to_string(ann.keypoints.size()) +
                     " keypoints, category defines " +
                     std::to_string(cat_it->second->keypoint_names.size()));
        }
    }
    return out;
}

std::string serialize_dataset(const CocoDataset& ds) {
    auto violations = validate(ds);
    if (!violations.empty()) {
        throw ValidationError(std::move(violations));
    }

    Json doc = Json::object();
    if (ds.info.is_object() && !ds.info.empty()) {
        doc["info"] = ds.info;
    }

    auto images = ds.images;
    std::sort(images.begin(), images.end(),
              [](const CocoImage& a, const CocoImage& b) { return a.id < b.id; });
    doc["images"] = Json::array();
    for (const auto& img : images) {
        Json j = Json::object();
        j["id"] = img.id;
        j["file_name"] = img.file_name;
        j["width"] = img.width;
        j["height"] = img.height;
        doc["images"].push_back(std::move(j));
    }

    auto annotations = ds.annotations;
    std::sort(annotations.begin(), annotations.end(),
              [](const CocoAnnotation& a, const CocoAnnotation& b) { return a.id < b.id; });
    doc["annotations"] = Json::array();
    for (const auto& ann : annotations) {
        Json j = Json::object();
        j["id"] = ann.id;
        j["image_id"] = ann.image_id;
        j["category_id"] = ann.category_id;
        j["bbox"] = {q2(ann.bbox[0]), q2(ann.bbox[1]), q2(ann.bbox[2]), q2(ann.bbox[3])};
        j["area"] = q2(ann.area);
        if (const auto* rings = std::get_if<PolygonRings>(&ann.segmentation)) {
            Json seg = Json::array();
            for (const auto& flat : *rings) {
                Json ring = Json::array();
                for (double c : flat) ring.push_back(q2(c));
                seg.push_back(std::move(ring));
            }
            j["segmentation"] = std::move(seg);
        } else {
            const Rle& rle = std::get<Rle>(ann.segmentation);
            Json seg = Json::object();
            seg["size"] = {rle.height, rle.width};
            seg["counts"] = rle.counts;
            j["segmentation"] = std::move(seg);
        }
        Json kps = Json::array();
        for (const Keypoint& kp : ann.keypoints) {
            kps.push_back(q2(kp.x));
            kps.push_back(q2(kp.y));
            kps.push_back(kp.v);
        }
        j["keypoints"] = std::move(kps);
        j["num_keypoints"] = ann.num_keypoints;
        j["iscrowd"] = ann.iscrowd;
        doc["annotations"].push_back(std::move(j));
    }

    auto categories = ds.categories;
    std::sort(categories.begin(), categories.end(),
              [](const CocoCategory& a, const CocoCategory& b) { return a.id < b.id; });
    doc["categories"] = Json::array();
    for (const auto& cat : categories) {
        Json j = Json::object();
        j["id"] = cat.id;
        j["name"] = cat.name;
        if (!cat.supercategory.empty()) {
            j["supercategory"] = cat.supercategory;
        }
        j["keypoints"] = cat.keypoint_names;
        Json skeleton = Json::array();
        for (const auto& edge : cat.skeleton) {
            skeleton.push_back({edge[0], edge[1]});
        }
        j["skeleton"] = std::move(skeleton);
        doc["categories"].push_back(std::move(j));
    }

    return doc.dump(2) + "\n";
}

Json violation_to_json(const Violation& v) {
    Json j = Json::object();
    j["record_kind"] = v.record_kind;
    j["record_id"] = v.record_id;
    j["rule"] = v.rule;
    j["message"] = v.message;
    return j;
}

BitMask annotation_mask(const CocoAnnotation& ann, int width, int height) {
    if (const auto* flat_rings = std::get_if<PolygonRings>(&ann.segmentation)) {
        Rings rings;
        for (const auto& flat : *flat_rings) {
            if (flat.size() >= 6 && flat.size() % 2 == 0) {
                rings.push_back(ring_from_flat(flat));
            }
        }
        return rasterize_polygon(rings, height, width);
    }
    const Rle& rle = std::get<Rle>(ann.segmentation);
    BitMask mask = rle_decode(rle);
    if (mask.width != width || mask.height != height) {
        throw Error(ErrorKind::Input,
                    "annotation_mask: RLE size " + std::to_string(mask.width) + "x" +
                        std::to_string(mask.height) + " does not match image " +
                        std::to_string(width) + "x" + std::to_string(height));
    }
    return mask;
}

}  // namespace cocopipe
