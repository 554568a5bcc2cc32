#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cocopipe/errors.hpp"

namespace cocopipe {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Vec2&) const = default;
};

// Polygon ring; the closing edge back to the first vertex is implied.
using Ring = std::vector<Vec2>;
using Rings = std::vector<Ring>;

// COCO visibility: 0 not labeled, 1 labeled but occluded, 2 labeled and visible.
struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    int v = 0;

    bool operator==(const Keypoint&) const = default;
};

// Polygon vertices flattened into a keypoint array. The first
// sum(ring_lengths) entries are ring vertices in ring order; entries past
// that are (0,0,0) padding. A bare keypoint list uses empty ring_lengths.
struct FlatPoints {
    std::vector<Keypoint> points;
    std::vector<std::size_t> ring_lengths;

    std::size_t vertex_count() const;

    bool operator==(const FlatPoints&) const = default;
};

// Dense binary raster, one byte per pixel, row-major.
struct BitMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> bits;

    BitMask() = default;
    BitMask(int h, int w) : height(h), width(w), bits(static_cast<std::size_t>(h) * w, 0) {}

    bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool value = true) {
        bits[static_cast<std::size_t>(y) * width + x] = value ? 1 : 0;
    }
    std::int64_t count() const;

    bool operator==(const BitMask&) const = default;
};

// Run-length encoding over column-major pixel order; runs alternate starting
// with the background (0) run, which may be empty.
struct Rle {
    int height = 0;
    int width = 0;
    std::vector<std::int64_t> counts;

    bool operator==(const Rle&) const = default;
};

struct Moments {
    double m00 = 0.0;       // set-pixel count
    Vec2 centroid;          // mean of set-pixel coordinates
    double mu20 = 0.0;      // second central moments
    double mu02 = 0.0;
    double mu11 = 0.0;
};

// Tolerance for isotropy and zero-cross-product degeneracy checks, relative
// to the magnitude of the quantities involved.
inline constexpr double kDegeneracyTol = 1e-9;

double shoelace_area(const Ring& ring);

Ring ring_from_flat(const std::vector<double>& flat);
std::vector<double> flat_from_ring(const Ring& ring);

FlatPoints polygon_to_keypoints(const Rings& rings);
std::vector<Keypoint> upgrade_visibility(const std::vector<Vec2>& points);
FlatPoints pad_keypoints(FlatPoints fp, std::size_t target_count);
Rings keypoints_to_polygon(const FlatPoints& fp);

// Even-odd scanline fill sampling pixel centers (x+0.5, y+0.5); multiple
// rings combine by parity. Pixels outside the frame are clipped.
BitMask rasterize_polygon(const Rings& rings, int height, int width);

Rle rle_encode(const BitMask& mask);
BitMask rle_decode(const Rle& rle);

Moments mask_moments(const BitMask& mask);

// Unit direction of the mask's elongation, canonicalized so ax > 0, or
// ax == 0 and ay > 0. Throws Degeneracy for isotropic masks.
Vec2 principal_axis(const Moments& m, double tol = kDegeneracyTol);

// Index of the unique keypoint whose cross-product sign against the axis
// (z-component of axis x (kp - centroid)) differs from all others.
// Throws Ambiguity when there is no unique dissenter or any cross product
// is zero within tolerance.
std::size_t outer_keypoint(Vec2 axis, Vec2 centroid,
                           const std::vector<Vec2>& keypoints,
                           double tol = kDegeneracyTol);

// Sutherland-Hodgman clip against [0,width] x [0,height]. May return fewer
// than 3 vertices for rings that degenerate on the boundary.
Ring clip_ring_to_rect(const Ring& ring, double width, double height);

}  // namespace cocopipe
