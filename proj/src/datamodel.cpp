#include "pivot/datamodel.hpp"

#include <algorithm>

namespace pivot {

double iou(const BoundingBox& a, const BoundingBox& b) {
    const double ix = std::max(0.0, std::min(a.x2(), b.x2()) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y2(), b.y2()) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

double giou(const BoundingBox& a, const BoundingBox& b) {
    const double ix = std::max(0.0, std::min(a.x2(), b.x2()) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y2(), b.y2()) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    const double cw = std::max(a.x2(), b.x2()) - std::min(a.x, b.x);
    const double ch = std::max(a.y2(), b.y2()) - std::min(a.y, b.y);
    const double enclose = cw * ch;
    if (uni <= 0.0 || enclose <= 0.0) return 0.0;
    return inter / uni - (enclose - uni) / enclose;
}

LtrbMap ltrb_encode(const BoundingBox& box, int resolution, int grid_h, int grid_w) {
    LtrbMap out(grid_h, grid_w);
    const double inv_side = 1.0 / resolution;
    for (int r = 0; r < grid_h; ++r) {
        const double cy = cell_center_y(r, grid_h, resolution);
        for (int c = 0; c < grid_w; ++c) {
            const double cx = cell_center_x(c, grid_w, resolution);
            const bool inside = cx >= box.x && cx <= box.x2() && cy >= box.y && cy <= box.y2();
            if (!inside) continue;
            out.mask[static_cast<size_t>(r) * grid_w + c] = 1;
            out.at(r, c, 0) = (cx - box.x) * inv_side;
            out.at(r, c, 1) = (cy - box.y) * inv_side;
            out.at(r, c, 2) = (box.x2() - cx) * inv_side;
            out.at(r, c, 3) = (box.y2() - cy) * inv_side;
        }
    }
    return out;
}

DecodedBox ltrb_decode(const LtrbMap& d, const GridPoint& p, int resolution) {
    if (p.row < 0 || p.row >= d.h || p.col < 0 || p.col >= d.w)
        throw std::out_of_range("ltrb_decode: cell out of range");
    const double cx = cell_center_x(p.col, d.w, resolution);
    const double cy = cell_center_y(p.row, d.h, resolution);
    const double l = d.at(p.row, p.col, 0) * resolution;
    const double t = d.at(p.row, p.col, 1) * resolution;
    const double r = d.at(p.row, p.col, 2) * resolution;
    const double b = d.at(p.row, p.col, 3) * resolution;
    DecodedBox out;
    out.box = {cx - l, cy - t, l + r, t + b};
    if (out.box.w <= 0.0 || out.box.h <= 0.0) {
        out.degenerate = true;
        out.box.w = std::max(out.box.w, 1.0);
        out.box.h = std::max(out.box.h, 1.0);
        out.box.x = cx - 0.5 * out.box.w;
        out.box.y = cy - 0.5 * out.box.h;
    }
    return out;
}

}  // namespace pivot
