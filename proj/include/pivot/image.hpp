#pragma once

#include <string>
#include <vector>

#include "pivot/datamodel.hpp"

namespace pivot {

// RGB image, values in [0,1], row-major interleaved.
struct Image {
    int w = 0;
    int h = 0;
    std::vector<float> px;

    Image() = default;
    Image(int w_, int h_) : w(w_), h(h_), px(static_cast<size_t>(w_) * h_ * 3, 0.0f) {}

    float& at(int x, int y, int c) { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
    float at(int x, int y, int c) const {
        return px[(static_cast<size_t>(y) * w + x) * 3 + c];
    }
    bool empty() const { return w == 0 || h == 0; }
};

// Samples with bilinear interpolation; out-of-bounds coordinates replicate
// the nearest edge pixel.
float sample_bilinear(const Image& im, double x, double y, int c);

// Resamples the source rectangle (image coordinates, may extend past the
// frame) into an out_w x out_h image.
Image crop_resize(const Image& im, const BoundingBox& src, int out_w, int out_h);

Image resize(const Image& im, int out_w, int out_h);

void save_ppm(const Image& im, const std::string& path);
Image load_ppm(const std::string& path);

}  // namespace pivot
