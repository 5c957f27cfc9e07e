#include "matchlab/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "matchlab/corruption_constants.hpp"
#include "matchlab/image_io.hpp"
#include "matchlab/parallel.hpp"
#include "matchlab/rng.hpp"

namespace matchlab {

namespace cc = corruption_constants;

const std::vector<CorruptionKind>& all_corruption_kinds() {
    static const std::vector<CorruptionKind> kinds{
        CorruptionKind::gaussian_noise, CorruptionKind::shot_noise,
        CorruptionKind::impulse_noise,  CorruptionKind::speckle_noise,
        CorruptionKind::defocus_blur,   CorruptionKind::gaussian_blur,
        CorruptionKind::snow,           CorruptionKind::frost,
        CorruptionKind::fog,            CorruptionKind::spatter,
        CorruptionKind::brightness,     CorruptionKind::contrast,
        CorruptionKind::saturate,       CorruptionKind::pixelate,
        CorruptionKind::jpeg,
    };
    return kinds;
}

std::string to_string(CorruptionKind kind) {
    switch (kind) {
        case CorruptionKind::gaussian_noise: return "gaussian_noise";
        case CorruptionKind::shot_noise: return "shot_noise";
        case CorruptionKind::impulse_noise: return "impulse_noise";
        case CorruptionKind::speckle_noise: return "speckle_noise";
        case CorruptionKind::defocus_blur: return "defocus_blur";
        case CorruptionKind::gaussian_blur: return "gaussian_blur";
        case CorruptionKind::snow: return "snow";
        case CorruptionKind::frost: return "frost";
        case CorruptionKind::fog: return "fog";
        case CorruptionKind::spatter: return "spatter";
        case CorruptionKind::brightness: return "brightness";
        case CorruptionKind::contrast: return "contrast";
        case CorruptionKind::saturate: return "saturate";
        case CorruptionKind::pixelate: return "pixelate";
        case CorruptionKind::jpeg: return "jpeg";
    }
    throw UnsupportedKind("corruption kind out of range");
}

CorruptionKind corruption_kind_from_string(const std::string& name) {
    for (CorruptionKind kind : all_corruption_kinds()) {
        if (to_string(kind) == name) return kind;
    }
    throw UnsupportedKind("unknown corruption kind: " + name);
}

namespace {

struct Plane {
    int h = 0, w = 0;
    std::vector<float> v;
    Plane() = default;
    Plane(int h_, int w_, float fill = 0) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, fill) {}
    float& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
    float at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
    float clamped(int y, int x) const {
        return at(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1));
    }
};

float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

// separable gaussian, nearest-border
Plane gaussian_blur_plane(const Plane& in, double sigma) {
    if (sigma <= 0) return in;
    int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        double w = std::exp(-0.5 * i * i / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = w;
        sum += w;
    }
    for (auto& w : k) w /= sum;

    Plane tmp(in.h, in.w), out(in.h, in.w);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[static_cast<std::size_t>(i + radius)] * in.clamped(y, x + i);
            tmp.at(y, x) = static_cast<float>(acc);
        }
    }
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[static_cast<std::size_t>(i + radius)] * tmp.clamped(y + i, x);
            out.at(y, x) = static_cast<float>(acc);
        }
    }
    return out;
}

std::array<Plane, 3> split_planes(const ImageU8& img) {
    std::array<Plane, 3> p{Plane(img.height, img.width), Plane(img.height, img.width),
                           Plane(img.height, img.width)};
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t* px = img.pixel(y, x);
            for (int c = 0; c < 3; ++c) p[static_cast<std::size_t>(c)].at(y, x) = px[c] / 255.0f;
        }
    }
    return p;
}

ImageU8 merge_planes(const std::array<Plane, 3>& p) {
    ImageU8 out(p[0].h, p[0].w);
    for (int y = 0; y < p[0].h; ++y) {
        for (int x = 0; x < p[0].w; ++x) {
            std::uint8_t* px = out.pixel(y, x);
            for (int c = 0; c < 3; ++c)
                px[c] = static_cast<std::uint8_t>(
                    std::lround(clamp01(p[static_cast<std::size_t>(c)].at(y, x)) * 255.0f));
        }
    }
    return out;
}

int poisson_knuth(Rng& rng, double lambda) {
    if (lambda <= 0) return 0;
    // split large rates so the product below stays away from underflow
    if (lambda > 30.0) {
        int half = poisson_knuth(rng, lambda / 2.0);
        return half + poisson_knuth(rng, lambda - lambda / 2.0);
    }
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= rng.uniform();
    } while (p > limit);
    return k - 1;
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
    float mx = std::max({r, g, b});
    float mn = std::min({r, g, b});
    v = mx;
    float d = mx - mn;
    s = mx == 0 ? 0 : d / mx;
    if (d == 0) {
        h = 0;
    } else if (mx == r) {
        h = (g - b) / d + (g < b ? 6.0f : 0.0f);
    } else if (mx == g) {
        h = (b - r) / d + 2.0f;
    } else {
        h = (r - g) / d + 4.0f;
    }
    h /= 6.0f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
    h = h - std::floor(h);
    float i = std::floor(h * 6.0f);
    float f = h * 6.0f - i;
    float p = v * (1 - s);
    float q = v * (1 - f * s);
    float t = v * (1 - (1 - f) * s);
    switch (static_cast<int>(i) % 6) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

// zoom about the center, output size preserved, border clamped
Plane clipped_zoom(const Plane& in, double zoom) {
    Plane out(in.h, in.w);
    const double cy = (in.h - 1) / 2.0;
    const double cx = (in.w - 1) / 2.0;
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            double sy = cy + (y - cy) / zoom;
            double sx = cx + (x - cx) / zoom;
            int y0 = static_cast<int>(std::floor(sy));
            int x0 = static_cast<int>(std::floor(sx));
            double fy = sy - y0;
            double fx = sx - x0;
            double v = in.clamped(y0, x0) * (1 - fx) * (1 - fy) +
                       in.clamped(y0, x0 + 1) * fx * (1 - fy) +
                       in.clamped(y0 + 1, x0) * (1 - fx) * fy +
                       in.clamped(y0 + 1, x0 + 1) * fx * fy;
            out.at(y, x) = static_cast<float>(v);
        }
    }
    return out;
}

// line kernel of gaussian weights along `angle`, nearest-sample offsets
Plane motion_blur_plane(const Plane& in, double radius, double sigma, double angle) {
    const int r = std::max(1, static_cast<int>(std::lround(radius)));
    std::vector<double> weights(static_cast<std::size_t>(2 * r + 1));
    double sum = 0;
    for (int i = -r; i <= r; ++i) {
        double w = std::exp(-0.5 * i * i / (sigma * sigma));
        weights[static_cast<std::size_t>(i + r)] = w;
        sum += w;
    }
    for (auto& w : weights) w /= sum;
    const double dx = std::cos(angle);
    const double dy = std::sin(angle);
    Plane out(in.h, in.w);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            double acc = 0;
            for (int i = -r; i <= r; ++i) {
                int sx = x + static_cast<int>(std::lround(i * dx));
                int sy = y + static_cast<int>(std::lround(i * dy));
                acc += weights[static_cast<std::size_t>(i + r)] * in.clamped(sy, sx);
            }
            out.at(y, x) = static_cast<float>(acc);
        }
    }
    return out;
}

// periodic diamond-square fractal, min-max normalized to [0, 1]
Plane plasma_fractal(int h, int w, double wibbledecay, Rng& rng) {
    int n = 1;
    while (n < std::max(h, w)) n *= 2;
    std::vector<double> map(static_cast<std::size_t>(n) * n, 0.0);
    auto at = [&](int y, int x) -> double& {
        return map[static_cast<std::size_t>((y % n + n) % n) * n + ((x % n + n) % n)];
    };
    double wibble = 1.0;
    for (int step = n; step >= 2; step /= 2) {
        const double amp = wibble * wibble;
        const int half = step / 2;
        for (int y = 0; y < n; y += step) {
            for (int x = 0; x < n; x += step) {
                double mean =
                    (at(y, x) + at(y, x + step) + at(y + step, x) + at(y + step, x + step)) / 4.0;
                at(y + half, x + half) = mean + amp * rng.uniform(-1.0, 1.0);
            }
        }
        for (int y = 0; y < n; y += step) {
            for (int x = 0; x < n; x += step) {
                double d1 = (at(y, x) + at(y, x + step) + at(y + half, x + half) +
                             at(y - half, x + half)) /
                            4.0;
                at(y, x + half) = d1 + amp * rng.uniform(-1.0, 1.0);
                double d2 = (at(y, x) + at(y + step, x) + at(y + half, x + half) +
                             at(y + half, x - half)) /
                            4.0;
                at(y + half, x) = d2 + amp * rng.uniform(-1.0, 1.0);
            }
        }
        wibble /= wibbledecay;
    }
    double mn = map[0], mx = map[0];
    for (double v : map) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    const double scale = mx > mn ? 1.0 / (mx - mn) : 1.0;
    Plane out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(y, x) = static_cast<float>((at(y, x) - mn) * scale);
    return out;
}

// seeded multi-octave value noise in [0, 1]
Plane value_noise_plane(int h, int w, std::uint64_t seed, int octaves, double base_cell) {
    auto lattice = [seed](int level, int gy, int gx) {
        std::uint64_t v = derive_stream({seed, static_cast<std::uint64_t>(level),
                                         static_cast<std::uint64_t>(gy + 4096),
                                         static_cast<std::uint64_t>(gx + 4096)});
        return static_cast<double>(v >> 11) * 0x1.0p-53;
    };
    Plane out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double v = 0, amp = 0.6, total = 0;
            for (int o = 0; o < octaves; ++o) {
                double cell = base_cell / std::pow(2.0, o);
                double gy = y / cell, gx = x / cell;
                int y0 = static_cast<int>(std::floor(gy));
                int x0 = static_cast<int>(std::floor(gx));
                double fy = gy - y0, fx = gx - x0;
                fy = fy * fy * (3 - 2 * fy);
                fx = fx * fx * (3 - 2 * fx);
                double s = (lattice(o, y0, x0) * (1 - fx) + lattice(o, y0, x0 + 1) * fx) * (1 - fy) +
                           (lattice(o, y0 + 1, x0) * (1 - fx) + lattice(o, y0 + 1, x0 + 1) * fx) * fy;
                v += amp * s;
                total += amp;
                amp *= 0.55;
            }
            out.at(y, x) = static_cast<float>(v / total);
        }
    }
    return out;
}

double severity_check(int severity) {
    if (severity < 1 || severity > kNumSeverities) {
        throw InvalidSeverity("severity must be in 1..5, got " + std::to_string(severity));
    }
    return 0;
}

ImageU8 do_gaussian_noise(const ImageU8& img, int sev, Rng& rng) {
    const double sigma = cc::kGaussianNoiseSigma[static_cast<std::size_t>(sev - 1)];
    auto p = split_planes(img);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (auto& plane : p) plane.at(y, x) += static_cast<float>(rng.normal(0.0, sigma));
    return merge_planes(p);
}

ImageU8 do_shot_noise(const ImageU8& img, int sev, Rng& rng) {
    const double rate = cc::kShotNoiseRate[static_cast<std::size_t>(sev - 1)];
    auto p = split_planes(img);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (auto& plane : p)
                plane.at(y, x) =
                    static_cast<float>(poisson_knuth(rng, plane.at(y, x) * rate) / rate);
    return merge_planes(p);
}

ImageU8 do_impulse_noise(const ImageU8& img, int sev, Rng& rng) {
    const double amount = cc::kImpulseAmount[static_cast<std::size_t>(sev - 1)];
    auto p = split_planes(img);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (auto& plane : p) {
                double u = rng.uniform();
                if (u < amount * 0.5) {
                    plane.at(y, x) = 0.0f;  // pepper
                } else if (u < amount) {
                    plane.at(y, x) = 1.0f;  // salt
                }
            }
        }
    }
    return merge_planes(p);
}

ImageU8 do_speckle_noise(const ImageU8& img, int sev, Rng& rng) {
    const double sigma = cc::kSpeckleSigma[static_cast<std::size_t>(sev - 1)];
    auto p = split_planes(img);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (auto& plane : p)
                plane.at(y, x) += plane.at(y, x) * static_cast<float>(rng.normal(0.0, sigma));
    return merge_planes(p);
}

ImageU8 do_defocus_blur(const ImageU8& img, int sev) {
    const auto& c = cc::kDefocus[static_cast<std::size_t>(sev - 1)];
    const int radius = static_cast<int>(c[0]);
    const double alias = c[1];
    const int n = 2 * radius + 1;
    Plane kernel(n, n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            kernel.at(y, x) =
                ((y - radius) * (y - radius) + (x - radius) * (x - radius) <= radius * radius)
                    ? 1.0f
                    : 0.0f;
    kernel = gaussian_blur_plane(kernel, alias);
    double sum = 0;
    for (float v : kernel.v) sum += v;
    for (auto& v : kernel.v) v = static_cast<float>(v / sum);

    auto p = split_planes(img);
    std::array<Plane, 3> out{Plane(img.height, img.width), Plane(img.height, img.width),
                             Plane(img.height, img.width)};
    for (int c3 = 0; c3 < 3; ++c3) {
        const Plane& in = p[static_cast<std::size_t>(c3)];
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                double acc = 0;
                for (int ky = 0; ky < n; ++ky)
                    for (int kx = 0; kx < n; ++kx)
                        acc += kernel.at(ky, kx) * in.clamped(y + ky - radius, x + kx - radius);
                out[static_cast<std::size_t>(c3)].at(y, x) = static_cast<float>(acc);
            }
        }
    }
    return merge_planes(out);
}

ImageU8 do_gaussian_blur(const ImageU8& img, int sev) {
    const double sigma = cc::kGaussianBlurSigma[static_cast<std::size_t>(sev - 1)];
    auto p = split_planes(img);
    for (auto& plane : p) plane = gaussian_blur_plane(plane, sigma);
    return merge_planes(p);
}

ImageU8 do_snow(const ImageU8& img, int sev, Rng& rng) {
    const auto& c = cc::kSnow[static_cast<std::size_t>(sev - 1)];
    Plane layer(img.height, img.width);
    for (auto& v : layer.v) v = static_cast<float>(rng.normal(c[0], c[1]));
    layer = clipped_zoom(layer, c[2]);
    for (auto& v : layer.v)
        if (v < c[3]) v = 0.0f;
    const double angle = rng.uniform(-135.0, -45.0) * M_PI / 180.0;
    layer = motion_blur_plane(layer, c[4], c[5], angle);

    auto p = split_planes(img);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            float r = p[0].at(y, x), g = p[1].at(y, x), b = p[2].at(y, x);
            float gray = 0.299f * r + 0.587f * g + 0.114f * b;
            float lift = std::max(0.0f, gray * 1.5f + 0.5f);
            float snow = layer.at(y, x) + layer.at(img.height - 1 - y, img.width - 1 - x);
            for (int ch = 0; ch < 3; ++ch) {
                float v = p[static_cast<std::size_t>(ch)].at(y, x);
                v = static_cast<float>(c[6]) * v +
                    static_cast<float>(1.0 - c[6]) * std::max(v, lift);
                p[static_cast<std::size_t>(ch)].at(y, x) = v + snow;
            }
        }
    }
    return merge_planes(p);
}

ImageU8 do_frost(const ImageU8& img, int sev, Rng& rng) {
    const auto& c = cc::kFrost[static_cast<std::size_t>(sev - 1)];
    // procedural frost texture: thresholded value noise, bluish white
    std::uint64_t noise_seed = rng.next_u64();
    Plane noise = value_noise_plane(img.height, img.width, noise_seed, 3, 10.0);
    auto p = split_planes(img);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            float n = noise.at(y, x);
            float crystal = n > 0.52f ? (n - 0.52f) / 0.48f : 0.0f;
            crystal = std::sqrt(crystal);
            const float tint[3] = {0.9f, 0.95f, 1.0f};
            for (int ch = 0; ch < 3; ++ch) {
                auto& v = p[static_cast<std::size_t>(ch)].at(y, x);
                v = static_cast<float>(c[0]) * v +
                    static_cast<float>(c[1]) * crystal * tint[ch];
            }
        }
    }
    return merge_planes(p);
}

ImageU8 do_fog(const ImageU8& img, int sev, Rng& rng) {
    const auto& c = cc::kFog[static_cast<std::size_t>(sev - 1)];
    Plane plasma = plasma_fractal(img.height, img.width, c[1], rng);
    auto p = split_planes(img);
    float max_val = 0;
    for (const auto& plane : p)
        for (float v : plane.v) max_val = std::max(max_val, v);
    const float renorm = static_cast<float>(max_val / (max_val + c[0]));
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (auto& plane : p)
                plane.at(y, x) =
                    (plane.at(y, x) + static_cast<float>(c[0]) * plasma.at(y, x)) * renorm;
    return merge_planes(p);
}

ImageU8 do_spatter(const ImageU8& img, int sev, Rng& rng) {
    const auto& c = cc::kSpatter[static_cast<std::size_t>(sev - 1)];
    Plane liquid(img.height, img.width);
    for (auto& v : liquid.v) v = static_cast<float>(rng.normal(c[0], c[1]));
    liquid = gaussian_blur_plane(liquid, c[2]);

    auto p = split_planes(img);
    if (c[5] == 0) {
        // water: pale turquoise droplets where the blurred field clears the threshold
        float mx = 0;
        for (float v : liquid.v) mx = std::max(mx, v - static_cast<float>(c[3]));
        const float inv = mx > 0 ? 1.0f / mx : 0.0f;
        const float color[3] = {175.0f / 255.0f, 238.0f / 255.0f, 238.0f / 255.0f};
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                float m = std::max(0.0f, liquid.at(y, x) - static_cast<float>(c[3])) * inv;
                float alpha = std::min(1.0f, m * static_cast<float>(c[4]) * 2.0f);
                for (int ch = 0; ch < 3; ++ch) {
                    auto& v = p[static_cast<std::size_t>(ch)].at(y, x);
                    v = v * (1 - alpha) + color[ch] * alpha;
                }
            }
        }
    } else {
        // mud: hard mask, blurred, re-thresholded
        Plane mask(img.height, img.width);
        for (std::size_t i = 0; i < mask.v.size(); ++i)
            mask.v[i] = liquid.v[i] > c[3] ? 1.0f : 0.0f;
        mask = gaussian_blur_plane(mask, c[4]);
        for (auto& v : mask.v)
            if (v < 0.8f) v = 0.0f;
        const float color[3] = {63.0f / 255.0f, 42.0f / 255.0f, 20.0f / 255.0f};
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                float m = mask.at(y, x);
                for (int ch = 0; ch < 3; ++ch) {
                    auto& v = p[static_cast<std::size_t>(ch)].at(y, x);
                    v = v * (1 - m) + color[ch] * m;
                }
            }
        }
    }
    return merge_planes(p);
}

ImageU8 do_brightness(const ImageU8& img, int sev) {
    const float shift = static_cast<float>(cc::kBrightness[static_cast<std::size_t>(sev - 1)]);
    auto p = split_planes(img);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            float h, s, v;
            rgb_to_hsv(p[0].at(y, x), p[1].at(y, x), p[2].at(y, x), h, s, v);
            v = clamp01(v + shift);
            hsv_to_rgb(h, s, v, p[0].at(y, x), p[1].at(y, x), p[2].at(y, x));
        }
    }
    return merge_planes(p);
}

ImageU8 do_contrast(const ImageU8& img, int sev) {
    const float scale = static_cast<float>(cc::kContrast[static_cast<std::size_t>(sev - 1)]);
    auto p = split_planes(img);
    for (auto& plane : p) {
        double mean = 0;
        for (float v : plane.v) mean += v;
        mean /= static_cast<double>(plane.v.size());
        for (auto& v : plane.v) v = static_cast<float>((v - mean) * scale + mean);
    }
    return merge_planes(p);
}

ImageU8 do_saturate(const ImageU8& img, int sev) {
    const auto& c = cc::kSaturate[static_cast<std::size_t>(sev - 1)];
    auto p = split_planes(img);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            float h, s, v;
            rgb_to_hsv(p[0].at(y, x), p[1].at(y, x), p[2].at(y, x), h, s, v);
            s = clamp01(static_cast<float>(s * c[0] + c[1]));
            hsv_to_rgb(h, s, v, p[0].at(y, x), p[1].at(y, x), p[2].at(y, x));
        }
    }
    return merge_planes(p);
}

ImageU8 do_pixelate(const ImageU8& img, int sev) {
    const double factor = cc::kPixelate[static_cast<std::size_t>(sev - 1)];
    const int dw = std::max(1, static_cast<int>(img.width * factor));
    const int dh = std::max(1, static_cast<int>(img.height * factor));
    auto p = split_planes(img);

    // box-average down: output cell (i, j) covers [j*w/dw, (j+1)*w/dw) etc.
    std::array<Plane, 3> down{Plane(dh, dw), Plane(dh, dw), Plane(dh, dw)};
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < dh; ++i) {
            const double y0 = static_cast<double>(i) * img.height / dh;
            const double y1 = static_cast<double>(i + 1) * img.height / dh;
            for (int j = 0; j < dw; ++j) {
                const double x0 = static_cast<double>(j) * img.width / dw;
                const double x1 = static_cast<double>(j + 1) * img.width / dw;
                double acc = 0, area = 0;
                for (int y = static_cast<int>(std::floor(y0)); y < std::ceil(y1); ++y) {
                    const double cy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
                    if (cy <= 0) continue;
                    for (int x = static_cast<int>(std::floor(x0)); x < std::ceil(x1); ++x) {
                        const double cx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
                        if (cx <= 0) continue;
                        acc += cy * cx * p[static_cast<std::size_t>(c)].at(y, x);
                        area += cy * cx;
                    }
                }
                down[static_cast<std::size_t>(c)].at(i, j) = static_cast<float>(acc / area);
            }
        }
    }
    // nearest up
    std::array<Plane, 3> up{Plane(img.height, img.width), Plane(img.height, img.width),
                            Plane(img.height, img.width)};
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < img.height; ++y) {
            int sy = std::min(dh - 1, static_cast<int>(static_cast<double>(y) * dh / img.height));
            for (int x = 0; x < img.width; ++x) {
                int sx = std::min(dw - 1, static_cast<int>(static_cast<double>(x) * dw / img.width));
                up[static_cast<std::size_t>(c)].at(y, x) =
                    down[static_cast<std::size_t>(c)].at(sy, sx);
            }
        }
    }
    return merge_planes(up);
}

}  // namespace

ImageU8 corrupt(const ImageU8& img, const CorruptionSpec& spec) {
    if (img.empty()) throw ImageTooSmall("corrupt: empty image");
    severity_check(spec.severity);
    Rng rng(derive_stream({spec.seed, fnv1a(to_string(spec.kind)),
                           static_cast<std::uint64_t>(spec.severity)}));
    switch (spec.kind) {
        case CorruptionKind::gaussian_noise: return do_gaussian_noise(img, spec.severity, rng);
        case CorruptionKind::shot_noise: return do_shot_noise(img, spec.severity, rng);
        case CorruptionKind::impulse_noise: return do_impulse_noise(img, spec.severity, rng);
        case CorruptionKind::speckle_noise: return do_speckle_noise(img, spec.severity, rng);
        case CorruptionKind::defocus_blur: return do_defocus_blur(img, spec.severity);
        case CorruptionKind::gaussian_blur: return do_gaussian_blur(img, spec.severity);
        case CorruptionKind::snow: return do_snow(img, spec.severity, rng);
        case CorruptionKind::frost: return do_frost(img, spec.severity, rng);
        case CorruptionKind::fog: return do_fog(img, spec.severity, rng);
        case CorruptionKind::spatter: return do_spatter(img, spec.severity, rng);
        case CorruptionKind::brightness: return do_brightness(img, spec.severity);
        case CorruptionKind::contrast: return do_contrast(img, spec.severity);
        case CorruptionKind::saturate: return do_saturate(img, spec.severity);
        case CorruptionKind::pixelate: return do_pixelate(img, spec.severity);
        case CorruptionKind::jpeg:
            return jpeg_roundtrip(img,
                                  cc::kJpegQuality[static_cast<std::size_t>(spec.severity - 1)]);
    }
    throw UnsupportedKind("corrupt: kind out of range");
}

DatasetManifest build_corrupted_set(const LoadedDataset& clean,
                                    const std::filesystem::path& out_dir, std::uint64_t seed,
                                    int workers) {
    std::vector<const ImageRecord*> test_images;
    for (const auto& rec : clean.manifest.images)
        if (rec.split == Split::test) test_images.push_back(&rec);
    if (test_images.empty()) throw InvalidSpec("build_corrupted_set: test split is empty");

    struct Job {
        const ImageRecord* rec;
        CorruptionKind kind;
        int severity;
    };
    std::vector<Job> jobs;
    for (const auto* rec : test_images) {
        for (CorruptionKind kind : all_corruption_kinds()) {
            for (int sev = 1; sev <= kNumSeverities; ++sev) {
                jobs.push_back({rec, kind, sev});
                std::filesystem::create_directories(out_dir / to_string(kind) /
                                                    std::to_string(sev));
            }
        }
    }

    parallel_for(jobs.size(), workers, [&](std::size_t i) {
        const Job& job = jobs[i];
        CorruptionSpec spec;
        spec.kind = job.kind;
        spec.severity = job.severity;
        spec.seed = derive_stream({seed, fnv1a(job.rec->id), fnv1a(to_string(job.kind)),
                                   static_cast<std::uint64_t>(job.severity)});
        ImageU8 out = corrupt(clean.image(job.rec->id), spec);
        const auto dir = out_dir / to_string(job.kind) / std::to_string(job.severity);
        if (job.kind == CorruptionKind::jpeg) {
            save_jpeg(dir / (job.rec->id + ".jpg"), out,
                      cc::kJpegQuality[static_cast<std::size_t>(job.severity - 1)]);
        } else {
            save_png(dir / (job.rec->id + ".png"), out);
        }
    });

    DatasetManifest derived;
    derived.schema_version = clean.manifest.schema_version;
    derived.classes = clean.manifest.classes;
    derived.excluded_classes = clean.manifest.excluded_classes;
    derived.corruption_root = ".";
    derived.corruption_seed = seed;
    for (const auto* rec : test_images) {
        ImageRecord copy = *rec;
        copy.path = "{kind}/{severity}/" + rec->id + ".{ext}";
        derived.images.push_back(copy);
    }
    for (const auto& pair : clean.manifest.pairs) {
        if (clean.manifest.image(pair.src_id).split != Split::test) continue;
        derived.pairs.push_back(pair);  // keypoints, bboxes, tags untouched
    }
    save_manifest(derived, out_dir / "manifest.json");
    return derived;
}

std::map<std::string, ImageU8> load_corrupted_slice(const DatasetManifest& corrupted,
                                                    const std::filesystem::path& root,
                                                    CorruptionKind kind, int severity) {
    severity_check(severity);
    std::map<std::string, ImageU8> out;
    const std::string ext = kind == CorruptionKind::jpeg ? "jpg" : "png";
    for (const auto& rec : corrupted.images) {
        auto path = root / to_string(kind) / std::to_string(severity) / (rec.id + "." + ext);
        out[rec.id] = load_image_u8(path);
    }
    return out;
}

namespace {

RobustnessReport finish_report(
    const std::map<std::string, std::array<double, kNumSeverities>>& cells, double clean,
    const PckSpec& spec) {
    RobustnessReport report;
    report.alpha = spec.alpha;
    report.norm = spec.norm;
    report.cells = cells;
    report.clean = clean;
    double total = 0;
    int count = 0;
    report.severity_avg.fill(0.0);
    for (const auto& [kind, row] : cells) {
        double kind_sum = 0;
        for (int s = 0; s < kNumSeverities; ++s) {
            kind_sum += row[static_cast<std::size_t>(s)];
            report.severity_avg[static_cast<std::size_t>(s)] += row[static_cast<std::size_t>(s)];
            total += row[static_cast<std::size_t>(s)];
            ++count;
        }
        report.kind_avg[kind] = kind_sum / kNumSeverities;
    }
    for (auto& v : report.severity_avg) v /= static_cast<double>(cells.size());
    report.corrupted_avg = count > 0 ? total / count : 0.0;
    return report;
}

}  // namespace

RobustnessReport robustness_report_from_cells(
    const std::map<std::string, std::array<double, kNumSeverities>>& cells, double clean,
    const PckSpec& spec) {
    return finish_report(cells, clean, spec);
}

RobustnessReport robustness_eval(const MatcherParams& params, const DatasetManifest& corrupted,
                                 const std::filesystem::path& corrupted_root,
                                 const LoadedDataset& clean, const PckSpec& spec, int workers) {
    // corrupted pairs must be exactly the clean test pairs
    std::vector<const AnnotatedPair*> clean_test;
    for (const auto& pair : clean.manifest.pairs)
        if (clean.manifest.image(pair.src_id).split == Split::test) clean_test.push_back(&pair);
    if (clean_test.size() != corrupted.pairs.size())
        throw ManifestMismatch("robustness_eval: pair lists differ");
    for (std::size_t i = 0; i < clean_test.size(); ++i) {
        if (clean_test[i]->src_id != corrupted.pairs[i].src_id ||
            clean_test[i]->tgt_id != corrupted.pairs[i].tgt_id)
            throw ManifestMismatch("robustness_eval: pair order differs");
    }

    EvalOptions opts;
    opts.alphas = {spec.alpha};
    opts.slice_alpha = spec.alpha;
    opts.norm = spec.norm;
    opts.split = Split::test;
    opts.workers = workers;

    const double clean_pck = evaluate_report(clean, params, opts).overall();

    std::map<std::string, std::array<double, kNumSeverities>> cells;
    for (CorruptionKind kind : all_corruption_kinds()) {
        auto& row = cells[to_string(kind)];
        for (int sev = 1; sev <= kNumSeverities; ++sev) {
            LoadedDataset slice;
            slice.manifest = corrupted;
            slice.root = corrupted_root;
            slice.images = load_corrupted_slice(corrupted, corrupted_root, kind, sev);
            // evaluate with corrupted images on both ends of every pair
            row[static_cast<std::size_t>(sev - 1)] =
                evaluate_report(slice, params, opts).overall();
        }
    }
    return finish_report(cells, clean_pck, spec);
}

void save_robustness_csv(const RobustnessReport& report, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw IoFailure("cannot write robustness csv: " + path.string());
    f.precision(12);
    f << "severity";
    for (CorruptionKind kind : all_corruption_kinds()) f << "," << to_string(kind);
    f << ",corrupted_avg,clean\n";
    for (int sev = 1; sev <= kNumSeverities; ++sev) {
        f << sev;
        for (CorruptionKind kind : all_corruption_kinds())
            f << "," << report.cells.at(to_string(kind))[static_cast<std::size_t>(sev - 1)];
        f << "," << report.severity_avg[static_cast<std::size_t>(sev - 1)] << "," << report.clean
          << "\n";
    }
    f << "avg";
    for (CorruptionKind kind : all_corruption_kinds())
        f << "," << report.kind_avg.at(to_string(kind));
    f << "," << report.corrupted_avg << "," << report.clean << "\n";
}

}  // namespace matchlab
