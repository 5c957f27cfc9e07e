#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "matchlab/image.hpp"

namespace matchlab {

// PNG/JPEG at the file boundary. Codecs come from OpenCV imgcodecs; all other
// pixel work stays on the project's own image types.
ImageU8 load_image_u8(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const ImageU8& img);
void save_jpeg(const std::filesystem::path& path, const ImageU8& img, int quality);

// In-memory baseline-JPEG round trip (encode at `quality`, decode back).
ImageU8 jpeg_roundtrip(const ImageU8& img, int quality);

std::vector<std::uint8_t> encode_png(const ImageU8& img);

}  // namespace matchlab
