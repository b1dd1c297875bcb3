#ifndef VIEWSYNTH_IMAGE_HPP
#define VIEWSYNTH_IMAGE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "viewsynth/common.hpp"

namespace viewsynth {

/// Grayscale image, intensities in [0, 1], row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, float fill = 0.0f)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

    float at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    float& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }

    bool empty() const { return width == 0 || height == 0; }
};

/// Bilinear resize to side x side with corner-aligned sampling.
inline GrayImage resize_bilinear(const GrayImage& img, int side) {
    if (side <= 0) throw ArgumentError("resize_bilinear: side must be positive");
    if (img.empty()) throw ArgumentError("resize_bilinear: empty image");
    if (img.width == side && img.height == side) return img;

    GrayImage out(side, side);
    double sy = side > 1 ? static_cast<double>(img.height - 1) / (side - 1) : 0.0;
    double sx = side > 1 ? static_cast<double>(img.width - 1) / (side - 1) : 0.0;
    for (int y = 0; y < side; ++y) {
        double fy = y * sy;
        int y0 = static_cast<int>(fy);
        int y1 = std::min(y0 + 1, img.height - 1);
        double wy = fy - y0;
        for (int x = 0; x < side; ++x) {
            double fx = x * sx;
            int x0 = static_cast<int>(fx);
            int x1 = std::min(x0 + 1, img.width - 1);
            double wx = fx - x0;
            double v = (1.0 - wy) * ((1.0 - wx) * img.at(y0, x0) + wx * img.at(y0, x1)) +
                       wy * ((1.0 - wx) * img.at(y1, x0) + wx * img.at(y1, x1));
            out.at(y, x) = static_cast<float>(v);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// PGM (P5, 8-bit) I/O
// ---------------------------------------------------------------------------

namespace detail {

inline int pgm_next_token(std::istream& in, std::string& tok) {
    tok.clear();
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {  // comment to end of line
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    return tok.empty() ? EOF : 0;
}

}  // namespace detail

inline GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open PGM file: " + path);
    std::string tok;
    if (detail::pgm_next_token(in, tok) == EOF || tok != "P5") {
        throw FormatError("not a binary PGM (P5): " + path);
    }
    long vals[3];
    for (long& v : vals) {
        if (detail::pgm_next_token(in, tok) == EOF) throw FormatError("truncated PGM header");
        v = std::strtol(tok.c_str(), nullptr, 10);
    }
    long w = vals[0], h = vals[1], maxval = vals[2];
    if (w <= 0 || h <= 0 || maxval != 255) {
        throw FormatError("unsupported PGM dimensions or maxval (need 8-bit)");
    }
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
        throw FormatError("truncated PGM payload: " + path);
    }
    GrayImage img(static_cast<int>(w), static_cast<int>(h));
    for (std::size_t i = 0; i < raw.size(); ++i) {
        img.pixels[i] = static_cast<float>(raw[i]) / 255.0f;
    }
    return img;
}

inline void write_pgm(const GrayImage& img, const std::string& path) {
    if (img.empty()) throw ArgumentError("write_pgm: empty image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open file for writing: " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> raw(img.pixels.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        float v = std::clamp(img.pixels[i], 0.0f, 1.0f);
        raw[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
    if (!out) throw FormatError("failed writing PGM payload: " + path);
}

}  // namespace viewsynth

#endif
