#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "sqr/digest.hpp"
#include "sqr/layers.hpp"

namespace sqr {

/// A sequential regressor: conv/batchnorm/relu blocks, flatten, dense head.
struct ArchitectureConfig {
    std::string preset;
    int input_channels = 1;
    int input_height = 0;
    int input_width = 0;
    std::vector<LayerSpec> layers;
    int outputs = 8;

    friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

inline constexpr std::string_view kPaperScale = "paper-scale";
inline constexpr std::string_view kDeskScale = "desk-scale";

/// 256x256 input, 13 conv layers (7x7 stride 2 first, then 3x3 with strided
/// downsampling), each followed by batchnorm and ReLU, then a linear dense-8
/// head. The per-layer channel ramp 32 -> 512 is a reconstruction.
ArchitectureConfig paper_scale_architecture();

/// 64x64 input, 8 conv layers (5x5 stride 2 first), channels 16 -> 128,
/// batchnorm and ReLU after every conv, linear dense-8 head.
ArchitectureConfig desk_scale_architecture();

/// Throws InvalidArgument for unknown names.
ArchitectureConfig architecture_for(std::string_view preset);

/// Output shape after every layer for a given batch size. Throws ShapeError if
/// the chain is inconsistent.
std::vector<std::array<std::size_t, 4>> trace_shapes(const ArchitectureConfig& cfg, std::size_t batch = 1);

void validate(const ArchitectureConfig& cfg);

std::size_t conv_layer_count(const ArchitectureConfig& cfg);

std::string describe(const ArchitectureConfig& cfg);
Digest architecture_digest(const ArchitectureConfig& cfg);

}  // namespace sqr
