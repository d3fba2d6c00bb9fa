#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace sqr {

/// Depth frame of the 256^3 voxel grid; depth 0 is background and larger
/// values are closer to the viewer.
inline constexpr double kFrameSize = 256.0;

/// Row-major depth grid, top row first.
class RangeImage {
public:
    RangeImage() = default;
    RangeImage(int width, int height);
    RangeImage(int width, int height, std::vector<float> depths);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return depths_.size(); }

    float at(int col, int row) const { return depths_[index(col, row)]; }
    float& at(int col, int row) { return depths_[index(col, row)]; }

    const std::vector<float>& depths() const noexcept { return depths_; }
    std::vector<float>& depths() noexcept { return depths_; }

    std::size_t nonzero_count() const;

    friend bool operator==(const RangeImage&, const RangeImage&) = default;

private:
    std::size_t index(int col, int row) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(col);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<float> depths_;
};

/// SQRI binary layout: "SQRI", u16 version, u16 width, u16 height, 6 reserved
/// bytes, then width*height little-endian float32 depths, row-major.
inline constexpr std::uint16_t kRangeImageVersion = 1;
inline constexpr std::size_t kRangeImageHeaderSize = 16;

std::vector<std::uint8_t> encode_range_image(const RangeImage& img);
RangeImage decode_range_image(const std::vector<std::uint8_t>& bytes);

void write_range_image(const std::filesystem::path& path, const RangeImage& img);
RangeImage read_range_image(const std::filesystem::path& path);

/// Binary 16-bit PGM (P5, maxval 65535) with depth mapped linearly from
/// [0, 256] onto [0, 65535].
void write_pgm16(const std::filesystem::path& path, const RangeImage& img);

}  // namespace sqr
