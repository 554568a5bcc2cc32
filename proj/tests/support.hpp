#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cocopipe/coco.hpp"
#include "cocopipe/geometry.hpp"
#include "cocopipe/imageio.hpp"
#include "cocopipe/post_detect.hpp"

namespace testsupport {

namespace fs = std::filesystem;

// ---------- filesystem helpers ----------

struct TempDir {
    fs::path path;

    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "cocopipe_test_XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data())) {
            throw std::runtime_error("mkdtemp failed");
        }
        path = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

inline std::string fixture_path(const std::string& name) {
    return std::string(COCOPIPE_FIXTURE_DIR) + "/" + name;
}

// ---------- CLI driver ----------

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline std::string shell_quote(const std::string& s) {
    std::string quoted = "'";
    for (char c : s) {
        if (c == '\'') {
            quoted += "'\\''";
        } else {
            quoted += c;
        }
    }
    quoted += "'";
    return quoted;
}

// Runs the binary at `bin` with `args`, capturing both streams.
inline CliResult run_cli_at(const std::string& bin, const std::vector<std::string>& args) {
    TempDir capture;
    std::string cmd = shell_quote(bin);
    for (const auto& a : args) cmd += " " + shell_quote(a);
    cmd += " > " + shell_quote(capture.file("out")) + " 2> " +
           shell_quote(capture.file("err"));
    const int status = std::system(cmd.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = read_file(capture.file("out"));
    result.err = read_file(capture.file("err"));
    return result;
}

// Binary path from the COCOPIPE_BIN environment variable (set by ctest).
inline CliResult run_cli(const std::vector<std::string>& args) {
    const char* bin = std::getenv("COCOPIPE_BIN");
    if (!bin || !*bin) {
        throw std::runtime_error("COCOPIPE_BIN is not set");
    }
    return run_cli_at(bin, args);
}

// ---------- independent geometry oracles ----------

// Crossing-number membership test: odd number of edge crossings strictly to
// the right of the query point. Deliberately per-point (no scanline) so it
// checks the production rasterizer with different machinery.
inline bool oracle_point_inside(const cocopipe::Rings& rings, double cx, double cy) {
    bool inside = false;
    for (const auto& ring : rings) {
        const std::size_t n = ring.size();
        if (n < 3) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const cocopipe::Vec2& p = ring[i];
            const cocopipe::Vec2& q = ring[(i + 1) % n];
            if ((p.y <= cy && q.y > cy) || (q.y <= cy && p.y > cy)) {
                const double xint = p.x + (cy - p.y) / (q.y - p.y) * (q.x - p.x);
                if (xint > cx) inside = !inside;
            }
        }
    }
    return inside;
}

inline cocopipe::BitMask oracle_rasterize(const cocopipe::Rings& rings, int height,
                                          int width) {
    cocopipe::BitMask mask(height, width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            if (oracle_point_inside(rings, x + 0.5, y + 0.5)) mask.set(x, y);
        }
    }
    return mask;
}

// Direct two-pass accumulation over pixels, independent of mask_moments.
inline cocopipe::Moments brute_moments(const cocopipe::BitMask& mask) {
    cocopipe::Moments m;
    double sx = 0.0, sy = 0.0;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            m.m00 += 1.0;
            sx += x;
            sy += y;
        }
    }
    if (m.m00 == 0.0) return m;
    m.centroid = {sx / m.m00, sy / m.m00};
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            const double dx = x - m.centroid.x;
            const double dy = y - m.centroid.y;
            m.mu20 += dx * dx;
            m.mu02 += dy * dy;
            m.mu11 += dx * dy;
        }
    }
    return m;
}

inline double mask_iou(const cocopipe::BitMask& a, const cocopipe::BitMask& b) {
    std::int64_t inter = 0, uni = 0;
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            const bool in_a = a.at(x, y);
            const bool in_b = b.at(x, y);
            if (in_a && in_b) ++inter;
            if (in_a || in_b) ++uni;
        }
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Analytic ellipse fill: pixel centers satisfying the rotated-ellipse
// inequality. The generation angle is the oracle for axis recovery.
inline cocopipe::BitMask ellipse_mask(int width, int height, double cx, double cy,
                                      double a, double b, double theta_deg) {
    const double theta = theta_deg * 3.14159265358979323846 / 180.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    cocopipe::BitMask mask(height, width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double dx = (x + 0.5) - cx;
            const double dy = (y + 0.5) - cy;
            const double u = dx * ct + dy * st;
            const double v = -dx * st + dy * ct;
            if ((u * u) / (a * a) + (v * v) / (b * b) <= 1.0) mask.set(x, y);
        }
    }
    return mask;
}

// ---------- random generators ----------

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline double quantize2(double v) { return std::round(v * 100.0) / 100.0; }

// Vertices on an axis-aligned ellipse at sorted angles: always convex.
inline cocopipe::Ring random_convex_polygon(std::mt19937_64& rng, double cx, double cy,
                                            double rx, double ry, int k) {
    std::vector<double> angles(k);
    for (double& a : angles) a = uniform(rng, 0.0, 2.0 * 3.14159265358979323846);
    std::sort(angles.begin(), angles.end());
    cocopipe::Ring ring;
    for (double a : angles) {
        ring.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
    }
    return ring;
}

// Star-shaped (simple, possibly concave) polygon around a center.
inline cocopipe::Ring random_star_polygon(std::mt19937_64& rng, double cx, double cy,
                                          double rmin, double rmax, int k) {
    std::vector<double> angles(k);
    for (double& a : angles) a = uniform(rng, 0.0, 2.0 * 3.14159265358979323846);
    std::sort(angles.begin(), angles.end());
    cocopipe::Ring ring;
    for (double a : angles) {
        const double r = uniform(rng, rmin, rmax);
        ring.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    return ring;
}

// Distinct sorted angles with a minimum gap, so star polygons stay simple
// and never collapse duplicate vertices.
inline cocopipe::Ring random_star_polygon_spaced(std::mt19937_64& rng, double cx,
                                                 double cy, double rmin, double rmax,
                                                 int k) {
    std::vector<double> angles;
    const double two_pi = 2.0 * 3.14159265358979323846;
    while (static_cast<int>(angles.size()) < k) {
        const double a = uniform(rng, 0.0, two_pi);
        bool ok = true;
        for (double other : angles) {
            const double diff = std::abs(a - other);
            if (std::min(diff, two_pi - diff) < 0.05) {
                ok = false;
                break;
            }
        }
        if (ok) angles.push_back(a);
    }
    std::sort(angles.begin(), angles.end());
    cocopipe::Ring ring;
    for (double a : angles) {
        const double r = uniform(rng, rmin, rmax);
        ring.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    return ring;
}

inline cocopipe::BitMask random_mask(std::mt19937_64& rng, int height, int width,
                                     double fill = 0.5) {
    cocopipe::BitMask mask(height, width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            if (uniform(rng, 0.0, 1.0) < fill) mask.set(x, y);
        }
    }
    return mask;
}

inline cocopipe::ImageRaster gradient_image(int width, int height, int channels) {
    cocopipe::ImageRaster img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.pixels.resize(static_cast<std::size_t>(width) * height * channels);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                img.at(x, y, c) = static_cast<std::uint8_t>((x * 7 + y * 13 + c * 41) % 256);
            }
        }
    }
    return img;
}

// Random dataset that passes validate and survives the 2-decimal
// serialization exactly: integer polygon coordinates (integer shoelace
// areas), 2-decimal keypoints.
inline cocopipe::CocoDataset random_valid_dataset(std::mt19937_64& rng) {
    using namespace cocopipe;
    CocoDataset ds;

    const int n_categories = uniform_int(rng, 1, 3);
    for (int c = 1; c <= n_categories; ++c) {
        CocoCategory cat;
        cat.id = c;
        cat.name = "cat_" + std::to_string(c);
        const int k = uniform_int(rng, 0, 4);
        for (int i = 0; i < k; ++i) cat.keypoint_names.push_back("kp" + std::to_string(i));
        for (int i = 0; i + 1 < k; ++i) cat.skeleton.push_back({i + 1, i + 2});
        ds.categories.push_back(std::move(cat));
    }

    int next_ann_id = 1;
    const int n_images = uniform_int(rng, 1, 4);
    for (int i = 1; i <= n_images; ++i) {
        CocoImage img;
        img.id = i;
        img.file_name = "img_" + std::to_string(i) + ".png";
        img.width = uniform_int(rng, 60, 300);
        img.height = uniform_int(rng, 60, 300);
        ds.images.push_back(img);

        const int n_anns = uniform_int(rng, 0, 3);
        for (int a = 0; a < n_anns; ++a) {
            CocoAnnotation ann;
            ann.id = next_ann_id++;
            ann.image_id = i;
            ann.category_id = uniform_int(rng, 1, n_categories);

            const double cx = uniform(rng, 20.0, img.width - 20.0);
            const double cy = uniform(rng, 20.0, img.height - 20.0);
            const double r = std::min({cx, cy, img.width - cx, img.height - cy, 18.0});
            Ring ring = random_star_polygon_spaced(rng, cx, cy, r * 0.5, r, 6);
            for (Vec2& v : ring) {  // integer grid keeps areas 2dp-exact
                v.x = std::round(v.x);
                v.y = std::round(v.y);
            }
            ann.segmentation = PolygonRings{flat_from_ring(ring)};
            double min_x = ring[0].x, max_x = ring[0].x;
            double min_y = ring[0].y, max_y = ring[0].y;
            for (const Vec2& v : ring) {
                min_x = std::min(min_x, v.x);
                max_x = std::max(max_x, v.x);
                min_y = std::min(min_y, v.y);
                max_y = std::max(max_y, v.y);
            }
            ann.bbox = {min_x, min_y, max_x - min_x, max_y - min_y};
            ann.area = shoelace_area(ring);

            const auto& cat = ds.categories[ann.category_id - 1];
            for (std::size_t k = 0; k < cat.keypoint_names.size(); ++k) {
                if (uniform(rng, 0.0, 1.0) < 0.3) {
                    ann.keypoints.push_back({0.0, 0.0, 0});
                } else {
                    ann.keypoints.push_back(
                        {quantize2(uniform(rng, 1.0, img.width - 1.0)),
                         quantize2(uniform(rng, 1.0, img.height - 1.0)),
                         uniform(rng, 0.0, 1.0) < 0.2 ? 1 : 2});
                }
            }
            ann.num_keypoints = static_cast<int>(std::count_if(
                ann.keypoints.begin(), ann.keypoints.end(),
                [](const Keypoint& kp) { return kp.v > 0; }));
            ann.iscrowd = 0;
            ds.annotations.push_back(std::move(ann));
        }
    }
    return ds;
}

}  // namespace testsupport
