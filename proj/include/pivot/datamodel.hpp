#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pivot {

// Axis-aligned box, (x, y) = top-left corner, sizes in pixels.
struct BoundingBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double x2() const { return x + w; }
    double y2() const { return y + h; }
    double cx() const { return x + 0.5 * w; }
    double cy() const { return y + 0.5 * h; }
    double area() const { return w * h; }
    bool valid() const {
        return w > 0.0 && h > 0.0 && std::isfinite(x) && std::isfinite(y) &&
               std::isfinite(w) && std::isfinite(h);
    }
};

struct GridPoint {
    int row = 0;
    int col = 0;
    bool operator==(const GridPoint&) const = default;
};

// H x W confidence grid. stride = pixels per cell in the coordinate frame
// the map was produced from.
struct ScoreMap {
    int h = 0;
    int w = 0;
    double stride = 1.0;
    std::vector<double> v;

    ScoreMap() = default;
    ScoreMap(int h_, int w_, double stride_ = 1.0)
        : h(h_), w(w_), stride(stride_), v(static_cast<size_t>(h_) * w_, 0.0) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * w + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * w + c]; }
};

// H x W x C feature map, channel-interleaved.
struct FeatureGrid {
    int h = 0;
    int w = 0;
    int c = 0;
    double stride = 1.0;
    std::vector<double> v;

    FeatureGrid() = default;
    FeatureGrid(int h_, int w_, int c_, double stride_ = 1.0)
        : h(h_), w(w_), c(c_), stride(stride_),
          v(static_cast<size_t>(h_) * w_ * c_, 0.0) {}

    double& at(int r, int col, int k) {
        return v[(static_cast<size_t>(r) * w + col) * c + k];
    }
    double at(int r, int col, int k) const {
        return v[(static_cast<size_t>(r) * w + col) * c + k];
    }
};

// H x W x 4 dense box regression grid; channels are (l, t, r, b) distances
// from the cell center to the box edges, normalized by the region side.
// mask marks cells whose center lies inside the encoded box.
struct LtrbMap {
    int h = 0;
    int w = 0;
    std::vector<double> v;       // 4 channels interleaved
    std::vector<uint8_t> mask;

    LtrbMap() = default;
    LtrbMap(int h_, int w_)
        : h(h_), w(w_), v(static_cast<size_t>(h_) * w_ * 4, 0.0),
          mask(static_cast<size_t>(h_) * w_, 0) {}

    double& at(int r, int c, int k) {
        return v[(static_cast<size_t>(r) * w + c) * 4 + k];
    }
    double at(int r, int c, int k) const {
        return v[(static_cast<size_t>(r) * w + c) * 4 + k];
    }
    bool valid_at(int r, int c) const {
        return mask[static_cast<size_t>(r) * w + c] != 0;
    }
};

// Square search region: a crop of `side` pixels in image space centered on
// (cx, cy), resampled to resolution x resolution patch pixels.
struct SearchRegionGeometry {
    double cx = 0.0;
    double cy = 0.0;
    double side = 1.0;
    int resolution = 1;

    double scale() const { return side / resolution; }
    double left() const { return cx - 0.5 * side; }
    double top() const { return cy - 0.5 * side; }

    // patch coords -> image coords
    double to_image_x(double px) const { return left() + px * scale(); }
    double to_image_y(double py) const { return top() + py * scale(); }
    // image coords -> patch coords
    double to_patch_x(double ix) const { return (ix - left()) / scale(); }
    double to_patch_y(double iy) const { return (iy - top()) / scale(); }

    BoundingBox box_to_image(const BoundingBox& b) const {
        return {to_image_x(b.x), to_image_y(b.y), b.w * scale(), b.h * scale()};
    }
    BoundingBox box_to_patch(const BoundingBox& b) const {
        return {to_patch_x(b.x), to_patch_y(b.y), b.w / scale(), b.h / scale()};
    }
};

// Center of grid cell p, in patch pixel coordinates, for an H x W grid
// covering a resolution x resolution patch.
inline double cell_center_x(int col, int grid_w, int resolution) {
    return (col + 0.5) * static_cast<double>(resolution) / grid_w;
}
inline double cell_center_y(int row, int grid_h, int resolution) {
    return (row + 0.5) * static_cast<double>(resolution) / grid_h;
}

double iou(const BoundingBox& a, const BoundingBox& b);
double giou(const BoundingBox& a, const BoundingBox& b);

struct DecodedBox {
    BoundingBox box;
    bool degenerate = false;
};

// Encode `box` (patch coordinates) into an ltrb map over an H x W grid of a
// resolution x resolution patch. Cells outside the box are masked invalid.
LtrbMap ltrb_encode(const BoundingBox& box, int resolution, int grid_h, int grid_w);

// Decode the 4 distances at cell p back into a patch-coordinate box.
// Non-positive extents are clamped to a 1-pixel box and flagged.
DecodedBox ltrb_decode(const LtrbMap& d, const GridPoint& p, int resolution);

}  // namespace pivot
