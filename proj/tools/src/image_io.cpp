#include "image_io.hpp"

#include <pathbench/error.hpp>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <cstring>

namespace pathbench::io {

GrayImage read_gray(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorKind::MissingFile, "no such file: " + path.string());
    }
    cv::Mat img = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (img.empty()) {
        throw Error(ErrorKind::FormatError, "cannot decode image: " + path.string());
    }
    if (img.type() != CV_8UC1) {
        throw Error(ErrorKind::FormatError, "expected 8-bit grayscale: " + path.string());
    }
    GrayImage out;
    out.width = static_cast<std::size_t>(img.cols);
    out.height = static_cast<std::size_t>(img.rows);
    out.pixels.resize(out.width * out.height);
    for (int r = 0; r < img.rows; ++r) {
        std::memcpy(out.pixels.data() + static_cast<std::size_t>(r) * out.width, img.ptr<std::uint8_t>(r), out.width);
    }
    return out;
}

void write_gray_png(const std::filesystem::path& path, std::size_t width, std::size_t height,
                    const std::vector<std::uint8_t>& pixels) {
    if (pixels.size() != width * height) {
        throw Error(ErrorKind::ShapeError, "pixel buffer does not match image size");
    }
    const cv::Mat img(static_cast<int>(height), static_cast<int>(width), CV_8UC1,
                      const_cast<std::uint8_t*>(pixels.data()));
    const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 6};
    bool ok = false;
    try {
        ok = cv::imwrite(path.string(), img, params);
    } catch (const cv::Exception& e) {
        throw Error(ErrorKind::IoError, "cannot write " + path.string() + ": " + e.what());
    }
    if (!ok) {
        throw Error(ErrorKind::IoError, "cannot write " + path.string());
    }
}

ScanImage read_scan(const std::filesystem::path& path, std::string scan_id) {
    GrayImage img = read_gray(path);
    ScanImage scan;
    scan.scan_id = std::move(scan_id);
    scan.width = img.width;
    scan.height = img.height;
    scan.pixels = std::move(img.pixels);
    return scan;
}

} // namespace pathbench::io
