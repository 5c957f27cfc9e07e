#pragma once

#include <array>

// Severity parameter tables for the 15 corruption kinds, severities 1..5.
// Values transcribed from the public reference implementation of the common
// visual corruptions benchmark (github.com/hendrycks/robustness,
// imagenet_c/corruptions.py). Do not edit individual entries; bump the
// version when retranscribing.

namespace matchlab::corruption_constants {

inline constexpr int kTableVersion = 1;

// gaussian_noise: stddev of additive noise on the [0,1] scale
inline constexpr std::array<double, 5> kGaussianNoiseSigma{0.08, 0.12, 0.18, 0.26, 0.38};

// shot_noise: Poisson rate multiplier; x = poisson(x * c) / c
inline constexpr std::array<double, 5> kShotNoiseRate{60, 25, 12, 5, 3};

// impulse_noise: salt-and-pepper amount
inline constexpr std::array<double, 5> kImpulseAmount{0.03, 0.06, 0.09, 0.17, 0.27};

// speckle_noise: stddev of multiplicative noise; x = x + x * N(0, c)
inline constexpr std::array<double, 5> kSpeckleSigma{0.15, 0.2, 0.35, 0.45, 0.6};

// defocus_blur: (disk radius, alias blur sigma)
inline constexpr std::array<std::array<double, 2>, 5> kDefocus{
    {{3, 0.1}, {4, 0.5}, {6, 0.5}, {8, 0.5}, {10, 0.5}}};

// gaussian_blur: sigma
inline constexpr std::array<double, 5> kGaussianBlurSigma{1, 2, 3, 4, 6};

// snow: (layer mean, layer scale, zoom, threshold, motion radius, motion
// sigma, brightness blend)
inline constexpr std::array<std::array<double, 7>, 5> kSnow{
    {{0.1, 0.3, 3.0, 0.5, 10, 4, 0.8},
     {0.2, 0.3, 2.0, 0.5, 12, 4, 0.7},
     {0.55, 0.3, 4.0, 0.9, 12, 8, 0.7},
     {0.55, 0.3, 4.5, 0.85, 12, 8, 0.65},
     {0.55, 0.3, 2.5, 0.85, 12, 12, 0.55}}};

// frost: (image weight, frost weight); the frost texture itself is procedural
// here (seeded value noise) instead of the reference's stock photographs
inline constexpr std::array<std::array<double, 2>, 5> kFrost{
    {{1.0, 0.4}, {0.8, 0.6}, {0.7, 0.7}, {0.65, 0.7}, {0.6, 0.75}}};

// fog: (intensity, plasma wibble decay)
inline constexpr std::array<std::array<double, 2>, 5> kFog{
    {{1.5, 2.0}, {2.0, 2.0}, {2.5, 1.7}, {2.5, 1.5}, {3.0, 1.4}}};

// spatter: (layer mean, layer scale, blur sigma, threshold, mask sigma,
// mud flag). First three severities are water, last two mud.
inline constexpr std::array<std::array<double, 6>, 5> kSpatter{
    {{0.65, 0.3, 4, 0.69, 0.6, 0},
     {0.65, 0.3, 3, 0.68, 0.6, 0},
     {0.65, 0.3, 2, 0.68, 0.5, 0},
     {0.65, 0.3, 1, 0.65, 1.5, 1},
     {0.67, 0.4, 1, 0.65, 1.5, 1}}};

// brightness: additive shift of HSV value
inline constexpr std::array<double, 5> kBrightness{0.1, 0.2, 0.3, 0.4, 0.5};

// contrast: scale about the per-channel mean
inline constexpr std::array<double, 5> kContrast{0.4, 0.3, 0.2, 0.1, 0.05};

// saturate: (HSV saturation scale, offset)
inline constexpr std::array<std::array<double, 2>, 5> kSaturate{
    {{0.3, 0}, {0.1, 0}, {2, 0}, {5, 0.1}, {20, 0.2}}};

// pixelate: downscale factor (box down, nearest up)
inline constexpr std::array<double, 5> kPixelate{0.6, 0.5, 0.4, 0.3, 0.25};

// jpeg: encoder quality
inline constexpr std::array<int, 5> kJpegQuality{25, 18, 15, 10, 7};

}  // namespace matchlab::corruption_constants
