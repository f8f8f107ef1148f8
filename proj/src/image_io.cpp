// SPDX-License-Identifier: Apache-2.0

#include "hqc/image_io.hpp"

#include "hqc/error.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace hqc {

namespace {

ImageBuffer from_mat(const cv::Mat& mat) {
    cv::Mat m8;
    if (mat.depth() == CV_8U) {
        m8 = mat;
    } else if (mat.depth() == CV_16U) {
        mat.convertTo(m8, CV_8U, 1.0 / 257.0);
    } else {
        mat.convertTo(m8, CV_8U);
    }
    const int ch = m8.channels();
    if (ch != 1 && ch != 3 && ch != 4) {
        throw DataError("unsupported channel count " + std::to_string(ch));
    }
    const int out_ch = ch == 1 ? 1 : 3;
    ImageBuffer out(m8.cols, m8.rows, out_ch);
    for (int y = 0; y < m8.rows; ++y) {
        const auto* row = m8.ptr<std::uint8_t>(y);
        for (int x = 0; x < m8.cols; ++x) {
            if (ch == 1) {
                out.at(x, y) = row[x];
            } else {
                // OpenCV stores BGR(A).
                const auto* px = row + x * ch;
                out.at(x, y, 0) = px[2];
                out.at(x, y, 1) = px[1];
                out.at(x, y, 2) = px[0];
            }
        }
    }
    return out;
}

cv::Mat to_mat(const ImageBuffer& img) {
    const int ch = img.channels();
    cv::Mat mat(img.height(), img.width(), ch == 1 ? CV_8UC1 : CV_8UC3);
    for (int y = 0; y < img.height(); ++y) {
        auto* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < ch; ++c) {
                const double v = std::clamp(std::round(img.at(x, y, c)), 0.0, 255.0);
                const int dst = ch == 1 ? c : 2 - c;
                row[x * ch + dst] = static_cast<std::uint8_t>(v);
            }
        }
    }
    return mat;
}

std::uint32_t be16(const std::uint8_t* p) { return (std::uint32_t(p[0]) << 8) | p[1]; }
std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | p[3];
}

bool is_sof(std::uint8_t m) {
    return m >= 0xC0 && m <= 0xCF && m != 0xC4 && m != 0xC8 && m != 0xCC;
}

}  // namespace

ImageBuffer read_image(const std::filesystem::path& path) {
    cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (mat.empty()) {
        throw DataError("cannot read image " + path.string());
    }
    return from_mat(mat);
}

void write_image(const std::filesystem::path& path, const ImageBuffer& img, int jpeg_quality) {
    std::vector<int> params;
    const auto ext = path.extension().string();
    if (ext == ".jpg" || ext == ".jpeg") {
        params = {cv::IMWRITE_JPEG_QUALITY, jpeg_quality};
    } else if (ext == ".png") {
        params = {cv::IMWRITE_PNG_COMPRESSION, 6};
    }
    bool ok = false;
    try {
        ok = cv::imwrite(path.string(), to_mat(img), params);
    } catch (const cv::Exception& e) {
        throw DataError("cannot write image " + path.string() + ": " + e.what());
    }
    if (!ok) {
        throw DataError("cannot write image " + path.string());
    }
}

std::optional<ImageSize> probe_dimensions(std::span<const std::uint8_t> b) {
    static constexpr std::array<std::uint8_t, 8> png_sig{0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (b.size() >= 24 && std::equal(png_sig.begin(), png_sig.end(), b.begin())) {
        if (b[12] == 'I' && b[13] == 'H' && b[14] == 'D' && b[15] == 'R') {
            return ImageSize{static_cast<int>(be32(&b[16])), static_cast<int>(be32(&b[20]))};
        }
        return std::nullopt;
    }
    if (b.size() < 4 || b[0] != 0xFF || b[1] != 0xD8) {
        return std::nullopt;
    }
    std::size_t pos = 2;
    while (pos + 4 <= b.size()) {
        if (b[pos] != 0xFF) {
            return std::nullopt;
        }
        while (pos < b.size() && b[pos] == 0xFF) {
            ++pos;
        }
        if (pos >= b.size()) {
            break;
        }
        const std::uint8_t marker = b[pos++];
        if (marker == 0xD8 || marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) {
            continue;
        }
        if (marker == 0xD9 || marker == 0xDA || pos + 2 > b.size()) {
            break;
        }
        const std::uint32_t len = be16(&b[pos]);
        if (is_sof(marker)) {
            if (pos + 7 > b.size()) {
                break;
            }
            return ImageSize{static_cast<int>(be16(&b[pos + 5])), static_cast<int>(be16(&b[pos + 3]))};
        }
        pos += len;
    }
    return std::nullopt;
}

std::optional<ImageSize> probe_dimensions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    std::vector<std::uint8_t> buf(256 * 1024);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    buf.resize(static_cast<std::size_t>(in.gcount()));
    if (auto s = probe_dimensions(std::span<const std::uint8_t>(buf))) {
        return s;
    }
    if (!in.eof()) {
        // Metadata larger than the first chunk; fall back to the whole file.
        std::vector<std::uint8_t> rest{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        buf.insert(buf.end(), rest.begin(), rest.end());
        return probe_dimensions(std::span<const std::uint8_t>(buf));
    }
    return std::nullopt;
}

ImageBuffer jpeg_roundtrip(const ImageBuffer& img, int quality) {
    std::vector<std::uint8_t> bytes;
    if (!cv::imencode(".jpg", to_mat(img), bytes, {cv::IMWRITE_JPEG_QUALITY, std::clamp(quality, 1, 100)})) {
        throw DataError("JPEG encode failed");
    }
    cv::Mat decoded = cv::imdecode(bytes, cv::IMREAD_UNCHANGED);
    if (decoded.empty()) {
        throw DataError("JPEG decode failed");
    }
    return from_mat(decoded);
}

std::string codec_identity() {
    std::string jpeg = "unknown";
    std::istringstream info(cv::getBuildInformation());
    std::string line;
    while (std::getline(info, line)) {
        auto p = line.find("JPEG:");
        if (p != std::string::npos) {
            jpeg = line.substr(p + 5);
            jpeg.erase(0, jpeg.find_first_not_of(' '));
            break;
        }
    }
    return std::string("OpenCV ") + CV_VERSION + " imgcodecs; JPEG: " + jpeg;
}

}  // namespace hqc
