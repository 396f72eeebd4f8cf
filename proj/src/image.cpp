#include "pivot/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace pivot {

float sample_bilinear(const Image& im, double x, double y, int c) {
    // pixel centers at integer coordinates
    const double xc = std::clamp(x, 0.0, static_cast<double>(im.w - 1));
    const double yc = std::clamp(y, 0.0, static_cast<double>(im.h - 1));
    const int x0 = static_cast<int>(std::floor(xc));
    const int y0 = static_cast<int>(std::floor(yc));
    const int x1 = std::min(x0 + 1, im.w - 1);
    const int y1 = std::min(y0 + 1, im.h - 1);
    const double fx = xc - x0;
    const double fy = yc - y0;
    const double v00 = im.at(x0, y0, c), v10 = im.at(x1, y0, c);
    const double v01 = im.at(x0, y1, c), v11 = im.at(x1, y1, c);
    return static_cast<float>((v00 * (1 - fx) + v10 * fx) * (1 - fy) +
                              (v01 * (1 - fx) + v11 * fx) * fy);
}

Image crop_resize(const Image& im, const BoundingBox& src, int out_w, int out_h) {
    if (im.empty()) throw std::invalid_argument("crop_resize: empty image");
    if (!(src.w > 0.0 && src.h > 0.0))
        throw std::invalid_argument("crop_resize: degenerate source rect");
    Image out(out_w, out_h);
    const double sx = src.w / out_w;
    const double sy = src.h / out_h;
    for (int y = 0; y < out_h; ++y) {
        const double iy = src.y + (y + 0.5) * sy - 0.5;
        for (int x = 0; x < out_w; ++x) {
            const double ix = src.x + (x + 0.5) * sx - 0.5;
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = sample_bilinear(im, ix, iy, c);
        }
    }
    return out;
}

Image resize(const Image& im, int out_w, int out_h) {
    return crop_resize(im, {0.0, 0.0, static_cast<double>(im.w), static_cast<double>(im.h)},
                       out_w, out_h);
}

void save_ppm(const Image& im, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_ppm: cannot open " + path);
    os << "P6\n" << im.w << " " << im.h << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(im.w) * 3);
    for (int y = 0; y < im.h; ++y) {
        for (int x = 0; x < im.w; ++x)
            for (int c = 0; c < 3; ++c) {
                const float v = std::clamp(im.at(x, y, c), 0.0f, 1.0f);
                row[static_cast<size_t>(x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0f));
            }
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size()));
    }
    if (!os) throw std::runtime_error("save_ppm: write failed " + path);
}

Image load_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_ppm: cannot open " + path);
    std::string magic;
    is >> magic;
    if (magic != "P6") throw std::runtime_error("load_ppm: not a P6 file: " + path);
    auto next_int = [&is, &path]() {
        // skip whitespace and comments
        int ch = is.peek();
        while (ch == '#' || std::isspace(ch)) {
            if (ch == '#') {
                std::string line;
                std::getline(is, line);
            } else {
                is.get();
            }
            ch = is.peek();
        }
        int v;
        is >> v;
        if (!is) throw std::runtime_error("load_ppm: bad header " + path);
        return v;
    };
    const int w = next_int();
    const int h = next_int();
    const int maxv = next_int();
    if (maxv != 255) throw std::runtime_error("load_ppm: unsupported maxval");
    is.get();  // single whitespace after header
    Image out(w, h);
    std::vector<unsigned char> buf(static_cast<size_t>(w) * h * 3);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw std::runtime_error("load_ppm: truncated data " + path);
    for (size_t i = 0; i < buf.size(); ++i) out.px[i] = buf[i] / 255.0f;
    return out;
}

}  // namespace pivot
