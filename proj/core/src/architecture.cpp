#include "sqr/architecture.hpp"

#include <algorithm>
#include <sstream>

#include "sqr/error.hpp"

namespace sqr {

namespace {

void conv_block(std::vector<LayerSpec>& layers, int kernel, int stride, int in, int out) {
    layers.push_back({LayerKind::Conv, kernel, stride, in, out, true});
    layers.push_back({LayerKind::BatchNorm, 0, 1, out, out, false});
    layers.push_back({LayerKind::Relu});
}

ArchitectureConfig build(std::string_view name, int size, int first_kernel,
                         const std::vector<std::pair<int, int>>& channels_strides) {
    ArchitectureConfig cfg;
    cfg.preset = std::string(name);
    cfg.input_height = size;
    cfg.input_width = size;
    int in = 1;
    int spatial = size;
    for (std::size_t i = 0; i < channels_strides.size(); ++i) {
        const auto [out, stride] = channels_strides[i];
        conv_block(cfg.layers, i == 0 ? first_kernel : 3, stride, in, out);
        in = out;
        spatial = (spatial + stride - 1) / stride;
    }
    cfg.layers.push_back({LayerKind::Flatten});
    cfg.layers.push_back({LayerKind::Dense, 0, 1, in * spatial * spatial, cfg.outputs, false});
    return cfg;
}

}  // namespace

ArchitectureConfig paper_scale_architecture() {
    return build(kPaperScale, 256, 7,
                 {{32, 2}, {32, 1}, {64, 2}, {64, 1}, {128, 2}, {128, 1}, {256, 2},
                  {256, 1}, {256, 2}, {256, 1}, {512, 2}, {512, 1}, {512, 2}});
}

ArchitectureConfig desk_scale_architecture() {
    return build(kDeskScale, 64, 5,
                 {{16, 2}, {16, 1}, {32, 1}, {32, 2}, {64, 1}, {64, 2}, {128, 1}, {128, 2}});
}

ArchitectureConfig architecture_for(std::string_view preset) {
    if (preset == kPaperScale) return paper_scale_architecture();
    if (preset == kDeskScale) return desk_scale_architecture();
    throw InvalidArgument("unknown preset '" + std::string(preset) + "' (expected " +
                          std::string(kPaperScale) + " or " + std::string(kDeskScale) + ")");
}

std::vector<std::array<std::size_t, 4>> trace_shapes(const ArchitectureConfig& cfg, std::size_t batch) {
    if (cfg.input_channels <= 0 || cfg.input_height <= 0 || cfg.input_width <= 0) {
        throw ShapeError("architecture: input dims must be positive");
    }
    std::array<std::size_t, 4> s{batch, static_cast<std::size_t>(cfg.input_channels),
                                 static_cast<std::size_t>(cfg.input_height),
                                 static_cast<std::size_t>(cfg.input_width)};
    std::vector<std::array<std::size_t, 4>> out;
    for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
        const LayerSpec& l = cfg.layers[i];
        const std::string where = "architecture layer " + std::to_string(i) + " (" + std::string(to_string(l.kind)) + ")";
        switch (l.kind) {
            case LayerKind::Conv:
                if (l.kernel <= 0 || l.stride <= 0 || l.out_channels <= 0) {
                    throw ShapeError(where + ": kernel, stride and channels must be positive");
                }
                if (static_cast<std::size_t>(l.in_channels) != s[1]) {
                    throw ShapeError(where + ": expects " + std::to_string(l.in_channels) + " channels, receives " +
                                     std::to_string(s[1]));
                }
                s = {batch, static_cast<std::size_t>(l.out_channels),
                     conv_output_size(s[2], static_cast<std::size_t>(l.stride)),
                     conv_output_size(s[3], static_cast<std::size_t>(l.stride))};
                break;
            case LayerKind::BatchNorm:
                if (static_cast<std::size_t>(l.in_channels) != s[1]) {
                    throw ShapeError(where + ": channel count mismatch");
                }
                break;
            case LayerKind::Relu:
                break;
            case LayerKind::Flatten:
                s = {batch, s[1] * s[2] * s[3], 1, 1};
                break;
            case LayerKind::Dense:
                if (s[2] != 1 || s[3] != 1) throw ShapeError(where + ": dense needs a flattened input");
                if (static_cast<std::size_t>(l.in_channels) != s[1] || l.out_channels <= 0) {
                    throw ShapeError(where + ": expects " + std::to_string(l.in_channels) + " features, receives " +
                                     std::to_string(s[1]));
                }
                s = {batch, static_cast<std::size_t>(l.out_channels), 1, 1};
                break;
        }
        out.push_back(s);
    }
    return out;
}

void validate(const ArchitectureConfig& cfg) {
    const auto shapes = trace_shapes(cfg);
    if (shapes.empty() || cfg.layers.back().kind != LayerKind::Dense || cfg.layers.back().activation ||
        shapes.back()[1] != static_cast<std::size_t>(cfg.outputs)) {
        throw ShapeError("architecture must end in a linear dense layer with " + std::to_string(cfg.outputs) +
                         " outputs");
    }
}

std::size_t conv_layer_count(const ArchitectureConfig& cfg) {
    return static_cast<std::size_t>(std::count_if(cfg.layers.begin(), cfg.layers.end(),
                                                   [](const LayerSpec& l) { return l.kind == LayerKind::Conv; }));
}

std::string describe(const ArchitectureConfig& cfg) {
    std::ostringstream os;
    os << cfg.preset << ';' << cfg.input_channels << 'x' << cfg.input_height << 'x' << cfg.input_width;
    for (const auto& l : cfg.layers) {
        os << ';' << to_string(l.kind);
        switch (l.kind) {
            case LayerKind::Conv:
                os << ':' << l.kernel << 'x' << l.kernel << 's' << l.stride << ',' << l.in_channels << "->"
                   << l.out_channels;
                break;
            case LayerKind::BatchNorm: os << ':' << l.in_channels; break;
            case LayerKind::Dense: os << ':' << l.in_channels << "->" << l.out_channels; break;
            default: break;
        }
    }
    return os.str();
}

Digest architecture_digest(const ArchitectureConfig& cfg) { return sha256(describe(cfg)); }

}  // namespace sqr
