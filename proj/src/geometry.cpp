#include "cocopipe/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace cocopipe {

std::size_t FlatPoints::vertex_count() const {
    return std::accumulate(ring_lengths.begin(), ring_lengths.end(), std::size_t{0});
}

std::int64_t BitMask::count() const {
    return std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; });
}

double shoelace_area(const Ring& ring) {
    if (ring.size() < 3) {
        throw Error(ErrorKind::Geometry,
                    "shoelace_area: ring needs at least 3 vertices, got " +
                        std::to_string(ring.size()));
    }
    double twice = 0.0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
        const Vec2& p = ring[i];
        const Vec2& q = ring[(i + 1) % ring.size()];
        twice += p.x * q.y - q.x * p.y;
    }
    return std::abs(twice) / 2.0;
}

Ring ring_from_flat(const std::vector<double>& flat) {
    if (flat.size() % 2 != 0) {
        throw Error(ErrorKind::Geometry, "ring_from_flat: odd coordinate count");
    }
    Ring ring;
    ring.reserve(flat.size() / 2);
    for (std::size_t i = 0; i + 1 < flat.size(); i += 2) {
        ring.push_back({flat[i], flat[i + 1]});
    }
    return ring;
}

std::vector<double> flat_from_ring(const Ring& ring) {
    std::vector<double> flat;
    flat.reserve(ring.size() * 2);
    for (const Vec2& p : ring) {
        flat.push_back(p.x);
        flat.push_back(p.y);
    }
    return flat;
}

FlatPoints polygon_to_keypoints(const Rings& rings) {
    if (rings.empty()) {
        throw Error(ErrorKind::Geometry, "polygon_to_keypoints: empty ring list");
    }
    FlatPoints fp;
    for (const Ring& ring : rings) {
        if (ring.size() < 3) {
            throw Error(ErrorKind::Geometry,
                        "polygon_to_keypoints: ring with " + std::to_string(ring.size()) +
                            " vertices");
        }
        for (const Vec2& p : ring) {
            fp.points.push_back({p.x, p.y, 2});
        }
        fp.ring_lengths.push_back(ring.size());
    }
    return fp;
}

std::vector<Keypoint> upgrade_visibility(const std::vector<Vec2>& points) {
    std::vector<Keypoint> out;
    out.reserve(points.size());
    for (const Vec2& p : points) {
        out.push_back({p.x, p.y, 2});
    }
    return out;
}

FlatPoints pad_keypoints(FlatPoints fp, std::size_t target_count) {
    if (target_count < fp.points.size()) {
        throw Error(ErrorKind::Geometry,
                    "pad_keypoints: target " + std::to_string(target_count) +
                        " below current count " + std::to_string(fp.points.size()));
    }
    fp.points.resize(target_count, Keypoint{0.0, 0.0, 0});
    return fp;
}

Rings keypoints_to_polygon(const FlatPoints& fp) {
    const std::size_t vertex_total = fp.vertex_count();
    if (vertex_total > fp.points.size()) {
        throw Error(ErrorKind::Geometry,
                    "keypoints_to_polygon: ring_lengths cover " + std::to_string(vertex_total) +
                        " vertices but only " + std::to_string(fp.points.size()) +
                        " points present");
    }
    Rings rings;
    rings.reserve(fp.ring_lengths.size());
    std::size_t pos = 0;
    for (std::size_t len : fp.ring_lengths) {
        if (len < 3) {
            throw Error(ErrorKind::Geometry,
                        "keypoints_to_polygon: ring length " + std::to_string(len));
        }
        Ring ring;
        ring.reserve(len);
        for (std::size_t i = 0; i < len; ++i, ++pos) {
            ring.push_back({fp.points[pos].x, fp.points[pos].y});
        }
        rings.push_back(std::move(ring));
    }
    return rings;
}

BitMask rasterize_polygon(const Rings& rings, int height, int width) {
    if (height <= 0 || width <= 0) {
        throw Error(ErrorKind::Input, "rasterize_polygon: non-positive dimensions");
    }
    BitMask mask(height, width);
    std::vector<double> xs;
    for (int y = 0; y < height; ++y) {
        const double yc = y + 0.5;
        xs.clear();
        for (const Ring& ring : rings) {
            const std::size_t n = ring.size();
            if (n < 3) continue;
            for (std::size_t i = 0; i < n; ++i) {
                const Vec2& p = ring[i];
                const Vec2& q = ring[(i + 1) % n];
                // half-open straddle rule keeps vertex hits counted once
                if ((p.y <= yc && q.y > yc) || (q.y <= yc && p.y > yc)) {
                    const double t = (yc - p.y) / (q.y - p.y);
                    xs.push_back(p.x + t * (q.x - p.x));
                }
            }
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
            // pixels with center in [xs[i], xs[i+1])
            int x0 = static_cast<int>(std::ceil(xs[i] - 0.5));
            int x1 = static_cast<int>(std::ceil(xs[i + 1] - 0.5)) - 1;
            x0 = std::max(x0, 0);
            x1 = std::min(x1, width - 1);
            for (int x = x0; x <= x1; ++x) {
                mask.set(x, y);
            }
        }
    }
    return mask;
}

Rle rle_encode(const BitMask& mask) {
    Rle rle;
    rle.height = mask.height;
    rle.width = mask.width;
    std::uint8_t current = 0;
    std::int64_t run = 0;
    for (int x = 0; x < mask.width; ++x) {
        for (int y = 0; y < mask.height; ++y) {
            const std::uint8_t bit = mask.at(x, y) ? 1 : 0;
            if (bit == current) {
                ++run;
            } else {
                rle.counts.push_back(run);
                current = bit;
                run = 1;
            }
        }
    }
    rle.counts.push_back(run);
    return rle;
}

BitMask rle_decode(const Rle& rle) {
    const std::int64_t total =
        std::accumulate(rle.counts.begin(), rle.counts.end(), std::int64_t{0});
    const std::int64_t expected = static_cast<std::int64_t>(rle.height) * rle.width;
    if (total != expected) {
        throw Error(ErrorKind::Codec,
                    "rle_decode: counts sum " + std::to_string(total) + " != " +
                        std::to_string(expected));
    }
    for (std::int64_t c : rle.counts) {
        if (c < 0) {
            throw Error(ErrorKind::Codec, "rle_decode: negative run length");
        }
    }
    BitMask mask(rle.height, rle.width);
    std::int64_t pos = 0;
    std::uint8_t value = 0;
    for (std::int64_t c : rle.counts) {
        if (value) {
            for (std::int64_t i = 0; i < c; ++i) {
                const std::int64_t p = pos + i;
                const int x = static_cast<int>(p / rle.height);
                const int y = static_cast<int>(p % rle.height);
                mask.set(x, y);
            }
        }
        pos += c;
        value = value ? 0 : 1;
    }
    return mask;
}

Moments mask_moments(const BitMask& mask) {
    double m00 = 0.0, m10 = 0.0, m01 = 0.0;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(x, y)) {
                m00 += 1.0;
                m10 += x;
                m01 += y;
            }
        }
    }
    if (m00 <= 0.0) {
        throw Error(ErrorKind::Geometry, "empty mask");
    }
    Moments m;
    m.m00 = m00;
    m.centroid = {m10 / m00, m01 / m00};
    // second pass over centered coordinates avoids cancellation for
    // far-from-origin masks
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(x, y)) {
                const double dx = x - m.centroid.x;
                const double dy = y - m.centroid.y;
                m.mu20 += dx * dx;
                m.mu02 += dy * dy;
                m.mu11 += dx * dy;
            }
        }
    }
    return m;
}

Vec2 principal_axis(const Moments& m, double tol) {
    if (m.m00 <= 0.0) {
        throw Error(ErrorKind::Geometry, "principal_axis: empty moments");
    }
    const double scale = m.mu20 + m.mu02;
    if (scale <= 0.0 ||
        (std::abs(m.mu20 - m.mu02) <= tol * scale && std::abs(2.0 * m.mu11) <= tol * scale)) {
        throw Error(ErrorKind::Degeneracy, "no unique axis");
    }
    const double theta = 0.5 * std::atan2(2.0 * m.mu11, m.mu20 - m.mu02);
    Vec2 axis{std::cos(theta), std::sin(theta)};
    if (axis.x < 0.0 || (axis.x == 0.0 && axis.y < 0.0)) {
        axis.x = -axis.x;
        axis.y = -axis.y;
    }
    return axis;
}

std::size_t outer_keypoint(Vec2 axis, Vec2 centroid,
                           const std::vector<Vec2>& keypoints, double tol) {
    if (keypoints.size() < 3) {
        throw Error(ErrorKind::Geometry,
                    "outer_keypoint: need at least 3 keypoints, got " +
                        std::to_string(keypoints.size()));
    }
    std::vector<bool> positive(keypoints.size());
    std::size_t pos_count = 0;
    for (std::size_t i = 0; i < keypoints.size(); ++i) {
        const double dx = keypoints[i].x - centroid.x;
        const double dy = keypoints[i].y - centroid.y;
        const double s = axis.x * dy - axis.y * dx;
        const double norm = std::hypot(dx, dy);
        if (norm == 0.0 || std::abs(s) <= tol * norm) {
            throw Error(ErrorKind::Ambiguity,
                        "outer_keypoint: keypoint " + std::to_string(i) +
                            " lies on the axis");
        }
        positive[i] = s > 0.0;
        if (positive[i]) ++pos_count;
    }
    const std::size_t neg_count = keypoints.size() - pos_count;
    if (pos_count != 1 && neg_count != 1) {
        throw Error(ErrorKind::Ambiguity, "outer_keypoint: no unique dissenting sign");
    }
    const bool want_positive = pos_count == 1;
    for (std::size_t i = 0; i < keypoints.size(); ++i) {
        if (positive[i] == want_positive) return i;
    }
    throw Error(ErrorKind::Ambiguity, "outer_keypoint: unreachable");
}

namespace {

enum class Edge { Left, Right, Top, Bottom };

bool inside_edge(const Vec2& p, Edge edge, double width, double height) {
    switch (edge) {
        case Edge::Left: return p.x >= 0.0;
        case Edge::Right: return p.x <= width;
        case Edge::Top: return p.y >= 0.0;
        case Edge::Bottom: return p.y <= height;
    }
    return false;
}

Vec2 intersect_edge(const Vec2& p, const Vec2& q, Edge edge, double width, double height) {
    double t = 0.0;
    switch (edge) {
        case Edge::Left: t = (0.0 - p.x) / (q.x - p.x); break;
        case Edge::Right: t = (width - p.x) / (q.x - p.x); break;
        case Edge::Top: t = (0.0 - p.y) / (q.y - p.y); break;
        case Edge::Bottom: t = (height - p.y) / (q.y - p.y); break;
    }
    Vec2 r{p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
    // pin the clipped coordinate exactly onto the boundary
    switch (edge) {
        case Edge::Left: r.x = 0.0; break;
        case Edge::Right: r.x = width; break;
        case Edge::Top: r.y = 0.0; break;
        case Edge::Bottom: r.y = height; break;
    }
    return r;
}

Ring clip_against(const Ring& in, Edge edge, double width, double height) {
    Ring out;
    if (in.empty()) return out;
    out.reserve(in.size() + 2);
    for (std::size_t i = 0; i < in.size(); ++i) {
        const Vec2& prev = in[(i + in.size() - 1) % in.size()];
        const Vec2& cur = in[i];
        const bool cur_in = inside_edge(cur, edge, width, height);
        const bool prev_in = inside_edge(prev, edge, width, height);
        if (cur_in) {
            if (!prev_in) out.push_back(intersect_edge(prev, cur, edge, width, height));
            out.push_back(cur);
        } else if (prev_in) {
            out.push_back(intersect_edge(prev, cur, edge, width, height));
        }
    }
    return out;
}

}  // namespace

Ring clip_ring_to_rect(const Ring& ring, double width, double height) {
    Ring out = ring;
    for (Edge edge : {Edge::Left, Edge::Right, Edge::Top, Edge::Bottom}) {
        out = clip_against(out, edge, width, height);
        if (out.empty()) break;
    }
    return out;
}

}  // namespace cocopipe
