#pragma once

#include <cstdint>
#include <vector>

#include "matchlab/types.hpp"

namespace matchlab {

// Float RGB image, interleaved row-major, values nominally in [0, 1].
struct Image {
    int height = 0;
    int width = 0;
    std::vector<float> data;  // size = height * width * 3

    Image() = default;
    Image(int h, int w, float fill = 0.0f)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

    bool empty() const { return height == 0 || width == 0; }
    PixelGrid grid() const { return {height, width}; }

    float* pixel(int y, int x) { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const float* pixel(int y, int x) const {
        return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    float& at(int y, int x, int c) { return pixel(y, x)[c]; }
    float at(int y, int x, int c) const { return pixel(y, x)[c]; }

    bool operator==(const Image&) const = default;
};

// 8-bit RGB image, interleaved row-major. The on-disk and corruption-facing
// representation.
struct ImageU8 {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;  // size = height * width * 3

    ImageU8() = default;
    ImageU8(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

    bool empty() const { return height == 0 || width == 0; }
    PixelGrid grid() const { return {height, width}; }

    std::uint8_t* pixel(int y, int x) {
        return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    const std::uint8_t* pixel(int y, int x) const {
        return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }

    bool operator==(const ImageU8&) const = default;
};

Image to_float(const ImageU8& u8);
ImageU8 to_u8(const Image& img);  // clamps to [0,1], rounds half away from zero

inline float luminance(const float* rgb) {
    return 0.299f * rgb[0] + 0.587f * rgb[1] + 0.114f * rgb[2];
}

// Grayscale plane (luminance), row-major height*width.
std::vector<float> grayscale(const Image& img);

// Bilinear sample with zero padding outside [0,W-1]x[0,H-1]; returns per
// channel into out[3].
void bilinear_sample(const Image& img, double x, double y, float out[3]);

// Peak signal-to-noise ratio between two same-sized u8 images, in dB.
double psnr(const ImageU8& a, const ImageU8& b);

}  // namespace matchlab
