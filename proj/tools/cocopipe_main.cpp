#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "cocopipe/augment.hpp"
#include "cocopipe/coco.hpp"
#include "cocopipe/errors.hpp"
#include "cocopipe/imageio.hpp"
#include "cocopipe/labelstudio.hpp"
#include "cocopipe/post_detect.hpp"

namespace fs = std::filesystem;
using cocopipe::Error;
using cocopipe::ErrorKind;
using cocopipe::Json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot read " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// temp + rename in the target directory, so failures never leave partial files
void write_file_atomic(const fs::path& target, const std::string& content) {
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        }
        out << content;
        if (!out) {
            throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        throw Error(ErrorKind::Io,
                    "cannot move " + tmp.string() + " to " + target.string() + ": " +
                        ec.message());
    }
}

void write_image_atomic(const fs::path& target, const cocopipe::ImageRaster& image) {
    // prefix keeps the extension intact for codec selection
    fs::path tmp = target.parent_path() / (".tmp_" + target.filename().string());
    cocopipe::write_image(tmp.string(), image);
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        throw Error(ErrorKind::Io,
                    "cannot move " + tmp.string() + " to " + target.string() + ": " +
                        ec.message());
    }
}

void print_json(const Json& j) { std::cout << j.dump(2) << "\n"; }

Json report_to_json(const cocopipe::DepthReport& report) {
    return Json{{"method", report.method},
                {"value", report.value},
                {"range", Json::array({report.min, report.max})},
                {"sample_count", report.sample_count}};
}

std::vector<cocopipe::Vec2> labeled_points(const cocopipe::CocoAnnotation& ann) {
    std::vector<cocopipe::Vec2> pts;
    for (const auto& kp : ann.keypoints) {
        if (kp.v > 0) pts.push_back({kp.x, kp.y});
    }
    return pts;
}

struct AnnotationContext {
    cocopipe::CocoDataset dataset;
    const cocopipe::CocoAnnotation* annotation = nullptr;
    const cocopipe::CocoImage* image = nullptr;
};

AnnotationContext load_annotation(const std::string& coco_path, int annotation_id) {
    AnnotationContext ctx;
    ctx.dataset = cocopipe::parse_dataset(read_file(coco_path));
    ctx.annotation = ctx.dataset.find_annotation(annotation_id);
    if (!ctx.annotation) {
        throw Error(ErrorKind::Input,
                    "annotation " + std::to_string(annotation_id) + " not found in " +
                        coco_path);
    }
    ctx.image = ctx.dataset.find_image(ctx.annotation->image_id);
    return ctx;
}

int cmd_convert(const std::string& tasks_path, const std::string& categories_path,
                const std::string& images_dir, const std::string& out_path) {
    const auto tasks = cocopipe::parse_jsonmin(read_file(tasks_path));
    const auto specs = cocopipe::parse_category_specs(read_file(categories_path));

    if (!images_dir.empty()) {
        for (const auto& task : tasks) {
            const fs::path candidate =
                fs::path(images_dir) / fs::path(task.image_ref).filename();
            if (!fs::exists(candidate)) {
                throw Error(ErrorKind::Input, "image file not found: " + candidate.string());
            }
        }
    }

    const cocopipe::CocoDataset ds = cocopipe::convert(tasks, specs);
    write_file_atomic(out_path, cocopipe::serialize_dataset(ds));

    std::int64_t labeled = 0;
    for (const auto& ann : ds.annotations) labeled += ann.num_keypoints;
    print_json(Json{{"images", ds.images.size()},
                    {"annotations", ds.annotations.size()},
                    {"keypoints", labeled},
                    {"out", out_path}});
    std::cerr << "wrote " << out_path << "\n";
    return 0;
}

int cmd_validate(const std::string& coco_path) {
    std::vector<std::string> warnings;
    const cocopipe::CocoDataset ds = cocopipe::parse_dataset(read_file(coco_path), &warnings);
    for (const auto& w : warnings) std::cerr << "note: " << w << "\n";

    const auto violations = cocopipe::validate(ds);
    // one compact violation per line, wrapped into a single JSON array
    if (violations.empty()) {
        std::cout << "[]\n";
    } else {
        std::cout << "[\n";
        for (std::size_t i = 0; i < violations.size(); ++i) {
            std::cout << cocopipe::violation_to_json(violations[i]).dump()
                      << (i + 1 < violations.size() ? ",\n" : "\n");
        }
        std::cout << "]\n";
    }
    std::cerr << violations.size() << " violation(s)\n";
    return violations.empty() ? 0 : 1;
}

int cmd_augment(const std::string& coco_path, const std::string& images_dir,
                const std::string& pipeline_path, const std::string& out_dir, int jobs) {
    const cocopipe::CocoDataset ds = cocopipe::parse_dataset(read_file(coco_path));
    if (const auto violations = cocopipe::validate(ds); !violations.empty()) {
        throw Error(ErrorKind::Input,
                    "input dataset has " + std::to_string(violations.size()) +
                        " validation finding(s); run validate for details");
    }
    const cocopipe::PipelineConfig config =
        cocopipe::parse_pipeline_config(read_file(pipeline_path));

    const cocopipe::ImageLoader loader = [&](const cocopipe::CocoImage& img) {
        return cocopipe::read_image((fs::path(images_dir) / img.file_name).string());
    };
    const cocopipe::AugmentResult result =
        cocopipe::augment_dataset(ds, loader, config, jobs);

    fs::create_directories(out_dir);
    for (const auto& [name, raster] : result.images) {
        const fs::path target = fs::path(out_dir) / name;
        if (target.has_parent_path()) fs::create_directories(target.parent_path());
        write_image_atomic(target, raster);
    }
    const fs::path coco_out = fs::path(out_dir) / "coco.json";
    write_file_atomic(coco_out, cocopipe::serialize_dataset(result.dataset));

    print_json(Json{{"seed", config.seed},
                    {"multiplicity", config.multiplicity},
                    {"source_images", ds.images.size()},
                    {"output_images", result.dataset.images.size()},
                    {"output_annotations", result.dataset.annotations.size()},
                    {"images_written", result.images.size()},
                    {"coco", coco_out.string()}});
    std::cerr << "wrote " << coco_out.string() << " and " << result.images.size()
              << " image(s)\n";
    return 0;
}

int cmd_orient(const std::string& coco_path, int annotation_id,
               const std::string& expected_side) {
    const cocopipe::ExpectedSide side = cocopipe::parse_expected_side(expected_side);
    const AnnotationContext ctx = load_annotation(coco_path, annotation_id);

    const auto points = labeled_points(*ctx.annotation);
    if (points.size() < 3) {
        throw Error(ErrorKind::Input,
                    "annotation " + std::to_string(annotation_id) + " has " +
                        std::to_string(points.size()) +
                        " labeled keypoint(s); the placement test needs at least 3");
    }
    const cocopipe::BitMask mask =
        cocopipe::annotation_mask(*ctx.annotation, ctx.image->width, ctx.image->height);
    const cocopipe::ConfigVerdict verdict =
        cocopipe::verify_configuration(mask, points, side);

    print_json(Json{{"axis", Json::array({verdict.axis.x, verdict.axis.y})},
                    {"outer_index", verdict.outer_index},
                    {"placement", cocopipe::placement_name(verdict.placement)},
                    {"expected_side", cocopipe::expected_side_name(side)}});
    return verdict.placement == cocopipe::Placement::Correct ? 0 : 1;
}

int cmd_depth(const std::string& coco_path, int annotation_id,
              const std::string& depth_path, const std::string& method,
              int keypoint_index) {
    const AnnotationContext ctx = load_annotation(coco_path, annotation_id);
    const cocopipe::DepthMap depth = cocopipe::read_depth_png(depth_path);
    if (depth.width != ctx.image->width || depth.height != ctx.image->height) {
        throw Error(ErrorKind::Input,
                    "depth map " + std::to_string(depth.width) + "x" +
                        std::to_string(depth.height) + " does not match image " +
                        std::to_string(ctx.image->width) + "x" +
                        std::to_string(ctx.image->height));
    }

    std::vector<cocopipe::Vec2> points;
    if (keypoint_index >= 0) {
        const auto& kps = ctx.annotation->keypoints;
        if (static_cast<std::size_t>(keypoint_index) >= kps.size() ||
            kps[keypoint_index].v == 0) {
            throw Error(ErrorKind::Input,
                        "keypoint index " + std::to_string(keypoint_index) +
                            " is not a labeled keypoint of annotation " +
                            std::to_string(annotation_id));
        }
        points.push_back({kps[keypoint_index].x, kps[keypoint_index].y});
    } else {
        points = labeled_points(*ctx.annotation);
    }

    Json out = Json::object();
    if (method == "mask" || method == "both") {
        const cocopipe::BitMask mask = cocopipe::annotation_mask(
            *ctx.annotation, ctx.image->width, ctx.image->height);
        if (method == "mask") {
            out["mask_average"] = report_to_json(cocopipe::depth_from_mask(depth, mask));
        } else {
            if (points.empty()) {
                throw Error(ErrorKind::Input,
                            "annotation " + std::to_string(annotation_id) +
                                " has no labeled keypoints");
            }
            const cocopipe::DepthComparison cmp =
                cocopipe::compare_depth_methods(depth, mask, points);
            out["mask_average"] = report_to_json(cmp.mask);
            out["keypoint"] = report_to_json(cmp.keypoint);
            out["range_ratio"] = std::isfinite(cmp.range_ratio)
                                     ? Json(cmp.range_ratio)
                                     : Json("inf");
        }
    } else {  // keypoint
        if (points.empty()) {
            throw Error(ErrorKind::Input, "annotation " + std::to_string(annotation_id) +
                                              " has no labeled keypoints");
        }
        if (points.size() == 1) {
            out["keypoint"] = report_to_json(cocopipe::depth_from_keypoint(depth, points[0]));
        } else {
            double sum = 0.0;
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto& p : points) {
                const double v = cocopipe::depth_from_keypoint(depth, p).value;
                sum += v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            out["keypoint"] = report_to_json(
                {"keypoint", sum / static_cast<double>(points.size()), lo, hi,
                 static_cast<std::int64_t>(points.size())});
        }
    }
    print_json(out);
    return 0;
}

int cmd_stats(const std::string& coco_path) {
    const cocopipe::CocoDataset ds = cocopipe::parse_dataset(read_file(coco_path));

    Json categories = Json::array();
    for (const auto& cat : ds.categories) {
        std::size_t count = 0;
        for (const auto& ann : ds.annotations) {
            if (ann.category_id == cat.id) ++count;
        }
        categories.push_back(Json{{"id", cat.id}, {"name", cat.name}, {"annotations", count}});
    }

    std::int64_t v0 = 0, v1 = 0, v2 = 0;
    std::vector<double> areas;
    for (const auto& ann : ds.annotations) {
        for (const auto& kp : ann.keypoints) {
            if (kp.v == 0) ++v0;
            else if (kp.v == 1) ++v1;
            else ++v2;
        }
        areas.push_back(ann.area);
    }
    std::sort(areas.begin(), areas.end());
    Json area_summary{{"min", 0.0}, {"max", 0.0}, {"mean", 0.0}, {"median", 0.0}};
    if (!areas.empty()) {
        double sum = 0.0;
        for (double a : areas) sum += a;
        const std::size_t n = areas.size();
        area_summary = {{"min", areas.front()},
                        {"max", areas.back()},
                        {"mean", sum / static_cast<double>(n)},
                        {"median", n % 2 ? areas[n / 2]
                                         : (areas[n / 2 - 1] + areas[n / 2]) / 2.0}};
    }

    print_json(Json{{"images", ds.images.size()},
                    {"annotations", ds.annotations.size()},
                    {"categories", categories},
                    {"keypoint_visibility", Json{{"v0", v0}, {"v1", v1}, {"v2", v2}}},
                    {"area", area_summary}});
    return 0;
}

int default_jobs_from_env() {
    const char* env = std::getenv("COCOPIPE_JOBS");
    if (!env || !*env) return 0;
    try {
        const int jobs = std::stoi(env);
        if (jobs < 0) throw std::invalid_argument("negative");
        return jobs;
    } catch (const std::exception&) {
        throw Error(ErrorKind::Config,
                    std::string("COCOPIPE_JOBS must be a non-negative integer, got '") +
                        env + "'");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Combined COCO dataset tools: convert, validate, augment, orient, depth, stats"};
    app.require_subcommand(1);

    std::string tasks_path, categories_path, images_dir, out_path;
    auto* convert = app.add_subcommand(
        "convert", "Convert a JSON-MIN export plus category schema into combined COCO");
    convert->add_option("--tasks", tasks_path, "JSON-MIN export file")->required();
    convert->add_option("--categories", categories_path, "category schema JSON")->required();
    convert->add_option("--images-dir", images_dir,
                        "verify that each task's image exists in this directory");
    convert->add_option("--out", out_path, "output COCO JSON path")->required();

    std::string validate_path;
    auto* validate_cmd = app.add_subcommand("validate", "Check a COCO file's invariants");
    validate_cmd->add_option("coco", validate_path, "COCO JSON file")->required();

    std::string aug_coco, aug_images, aug_pipeline, aug_out;
    int aug_jobs = -1;
    auto* augment = app.add_subcommand(
        "augment", "Expand a dataset with jointly transformed images and annotations");
    augment->add_option("--coco", aug_coco, "input COCO JSON")->required();
    augment->add_option("--images-dir", aug_images, "directory holding source images")
        ->required();
    augment->add_option("--pipeline", aug_pipeline, "pipeline config JSON")->required();
    augment->add_option("--out-dir", aug_out, "output directory")->required();
    augment->add_option("--jobs", aug_jobs,
                        "worker threads; 0 = all cores (default, or COCOPIPE_JOBS)");

    std::string orient_coco, orient_side;
    int orient_ann = 0;
    auto* orient = app.add_subcommand(
        "orient", "Verify object placement from mask orientation and keypoints");
    orient->add_option("--coco", orient_coco, "COCO JSON file")->required();
    orient->add_option("--annotation-id", orient_ann, "annotation to test")->required();
    orient->add_option("--expected-side", orient_side,
                       "side of the axis the outer keypoint should fall on")
        ->required()
        ->check(CLI::IsMember({"positive", "negative"}));

    std::string depth_coco, depth_file, depth_method = "both";
    int depth_ann = 0, depth_kp_index = -1;
    auto* depth = app.add_subcommand(
        "depth", "Estimate object depth from a registered depth map");
    depth->add_option("--coco", depth_coco, "COCO JSON file")->required();
    depth->add_option("--annotation-id", depth_ann, "annotation to measure")->required();
    depth->add_option("--depth", depth_file, "16-bit grayscale depth PNG")->required();
    depth->add_option("--method", depth_method, "estimation method (default both)")
        ->check(CLI::IsMember({"mask", "keypoint", "both"}));
    depth->add_option("--keypoint-index", depth_kp_index,
                      "use one keypoint (0-based) instead of all labeled ones");

    std::string stats_path;
    auto* stats = app.add_subcommand("stats", "Summarize a COCO file");
    stats->add_option("coco", stats_path, "COCO JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (convert->parsed()) {
            return cmd_convert(tasks_path, categories_path, images_dir, out_path);
        }
        if (validate_cmd->parsed()) {
            return cmd_validate(validate_path);
        }
        if (augment->parsed()) {
            const int jobs = aug_jobs >= 0 ? aug_jobs : default_jobs_from_env();
            return cmd_augment(aug_coco, aug_images, aug_pipeline, aug_out, jobs);
        }
        if (orient->parsed()) {
            return cmd_orient(orient_coco, orient_ann, orient_side);
        }
        if (depth->parsed()) {
            return cmd_depth(depth_coco, depth_ann, depth_file, depth_method,
                             depth_kp_index);
        }
        if (stats->parsed()) {
            return cmd_stats(stats_path);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::Config ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
