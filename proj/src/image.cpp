#include "matchlab/image.hpp"

#include <cmath>

namespace matchlab {

Image to_float(const ImageU8& u8) {
    Image out(u8.height, u8.width);
    for (std::size_t i = 0; i < u8.data.size(); ++i) {
        out.data[i] = static_cast<float>(u8.data[i]) * (1.0f / 255.0f);
    }
    return out;
}

ImageU8 to_u8(const Image& img) {
    ImageU8 out(img.height, img.width);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        float v = img.data[i];
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        out.data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    return out;
}

std::vector<float> grayscale(const Image& img) {
    std::vector<float> g(static_cast<std::size_t>(img.height) * img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            g[static_cast<std::size_t>(y) * img.width + x] = luminance(img.pixel(y, x));
        }
    }
    return g;
}

void bilinear_sample(const Image& img, double x, double y, float out[3]) {
    out[0] = out[1] = out[2] = 0.0f;
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    double fx = x - x0;
    double fy = y - y0;
    const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
    for (int k = 0; k < 4; ++k) {
        if (w[k] == 0.0) continue;
        if (xs[k] < 0 || xs[k] >= img.width || ys[k] < 0 || ys[k] >= img.height) continue;
        const float* p = img.pixel(ys[k], xs[k]);
        out[0] += static_cast<float>(w[k] * p[0]);
        out[1] += static_cast<float>(w[k] * p[1]);
        out[2] += static_cast<float>(w[k] * p[2]);
    }
}

double psnr(const ImageU8& a, const ImageU8& b) {
    if (a.height != b.height || a.width != b.width) {
        throw DimensionMismatch("psnr: image sizes differ");
    }
    double mse = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace matchlab
