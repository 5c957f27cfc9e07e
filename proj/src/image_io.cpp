#include "matchlab/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <fstream>

namespace matchlab {

namespace {

cv::Mat to_mat_bgr(const ImageU8& img) {
    cv::Mat m(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t* p = img.pixel(y, x);
            m.at<cv::Vec3b>(y, x) = cv::Vec3b(p[2], p[1], p[0]);
        }
    }
    return m;
}

ImageU8 from_mat_bgr(const cv::Mat& m) {
    ImageU8 img(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y) {
        for (int x = 0; x < m.cols; ++x) {
            cv::Vec3b v = m.at<cv::Vec3b>(y, x);
            std::uint8_t* p = img.pixel(y, x);
            p[0] = v[2];
            p[1] = v[1];
            p[2] = v[0];
        }
    }
    return img;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoFailure("cannot open for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoFailure("write failed: " + path.string());
}

}  // namespace

ImageU8 load_image_u8(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (m.empty()) throw IoFailure("cannot read image: " + path.string());
    return from_mat_bgr(m);
}

std::vector<std::uint8_t> encode_png(const ImageU8& img) {
    std::vector<std::uint8_t> buf;
    if (!cv::imencode(".png", to_mat_bgr(img), buf)) throw IoFailure("png encode failed");
    return buf;
}

void save_png(const std::filesystem::path& path, const ImageU8& img) {
    write_bytes(path, encode_png(img));
}

void save_jpeg(const std::filesystem::path& path, const ImageU8& img, int quality) {
    std::vector<std::uint8_t> buf;
    std::vector<int> params{cv::IMWRITE_JPEG_QUALITY, quality};
    if (!cv::imencode(".jpg", to_mat_bgr(img), buf, params)) throw IoFailure("jpeg encode failed");
    write_bytes(path, buf);
}

ImageU8 jpeg_roundtrip(const ImageU8& img, int quality) {
    std::vector<std::uint8_t> buf;
    std::vector<int> params{cv::IMWRITE_JPEG_QUALITY, quality};
    if (!cv::imencode(".jpg", to_mat_bgr(img), buf, params)) throw IoFailure("jpeg encode failed");
    cv::Mat m = cv::imdecode(buf, cv::IMREAD_COLOR);
    if (m.empty()) throw IoFailure("jpeg decode failed");
    return from_mat_bgr(m);
}

}  // namespace matchlab
