#include "sqr/range_image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "byte_io.hpp"
#include "sqr/error.hpp"

namespace sqr {

namespace detail {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace detail

namespace {
constexpr char kMagic[4] = {'S', 'Q', 'R', 'I'};
}

RangeImage::RangeImage(int width, int height)
    : RangeImage(width, height,
                 std::vector<float>(static_cast<std::size_t>(std::max(width, 0)) *
                                        static_cast<std::size_t>(std::max(height, 0)),
                                    0.0f)) {}

RangeImage::RangeImage(int width, int height, std::vector<float> depths)
    : width_(width), height_(height), depths_(std::move(depths)) {
    if (width <= 0 || height <= 0 || width > 65535 || height > 65535) {
        throw InvalidArgument("range image dimensions must be in [1, 65535]");
    }
    if (depths_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw ShapeError("range image depth count does not match width*height");
    }
}

std::size_t RangeImage::nonzero_count() const {
    return static_cast<std::size_t>(
        std::count_if(depths_.begin(), depths_.end(), [](float d) { return d != 0.0f; }));
}

std::vector<std::uint8_t> encode_range_image(const RangeImage& img) {
    detail::ByteWriter w;
    w.bytes(kMagic, 4);
    w.u16(kRangeImageVersion);
    w.u16(static_cast<std::uint16_t>(img.width()));
    w.u16(static_cast<std::uint16_t>(img.height()));
    w.zeros(6);
    for (float d : img.depths()) w.f32(d);
    return std::move(w.data());
}

RangeImage decode_range_image(const std::vector<std::uint8_t>& bytes) {
    detail::ByteReader r(bytes.data(), bytes.size(), "range image");
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("range image: bad magic");
    const std::uint16_t version = r.u16();
    if (version != kRangeImageVersion) {
        throw FormatError("range image: unsupported version " + std::to_string(version));
    }
    const int width = r.u16();
    const int height = r.u16();
    r.skip(6);
    if (width == 0 || height == 0) throw FormatError("range image: zero dimension");
    const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (r.remaining() != n * 4) {
        throw FormatError("range image: payload size does not match header");
    }
    std::vector<float> depths(n);
    for (auto& d : depths) {
        d = r.f32();
        if (!std::isfinite(d) || d < 0.0f || d > static_cast<float>(kFrameSize)) {
            throw FormatError("range image: depth outside [0, 256]");
        }
    }
    return RangeImage(width, height, std::move(depths));
}

void write_range_image(const std::filesystem::path& path, const RangeImage& img) {
    detail::write_file_bytes(path.string(), encode_range_image(img));
}

RangeImage read_range_image(const std::filesystem::path& path) {
    return decode_range_image(detail::read_file_bytes(path.string()));
}

void write_pgm16(const std::filesystem::path& path, const RangeImage& img) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P5\n" << img.width() << ' ' << img.height() << "\n65535\n";
    for (float d : img.depths()) {
        const double v = std::clamp(static_cast<double>(d) / kFrameSize, 0.0, 1.0) * 65535.0;
        const auto q = static_cast<std::uint16_t>(std::lround(v));
        const char be[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xFF)};
        out.write(be, 2);
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace sqr
