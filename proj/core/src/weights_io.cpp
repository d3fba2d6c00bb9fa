#include "sqr/weights_io.hpp"

#include <cmath>
#include <cstring>

#include "byte_io.hpp"
#include "sqr/error.hpp"

namespace sqr {

namespace {
constexpr char kMagic[4] = {'S', 'Q', 'W', 'T'};
constexpr std::uint16_t kVersion = 1;
}  // namespace

std::vector<std::uint8_t> encode_weights(const ModelWeights& w) {
    detail::ByteWriter out;
    out.bytes(kMagic, 4);
    out.u16(w.version);
    out.bytes(w.architecture.data(), w.architecture.size());
    out.u32(static_cast<std::uint32_t>(w.blocks.size()));
    for (const auto& b : w.blocks) {
        if (b.name.size() > 0xFFFF) throw InvalidArgument("weights: block name too long");
        out.u16(static_cast<std::uint16_t>(b.name.size()));
        out.bytes(b.name.data(), b.name.size());
        out.u32(static_cast<std::uint32_t>(b.values.size()));
        for (float v : b.values) out.f32(v);
    }
    return std::move(out.data());
}

ModelWeights decode_weights(const std::vector<std::uint8_t>& bytes) {
    detail::ByteReader in(bytes.data(), bytes.size(), "weights");
    char magic[4];
    in.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("weights: bad magic");
    ModelWeights w;
    w.version = in.u16();
    if (w.version != kVersion) throw FormatError("weights: unsupported version " + std::to_string(w.version));
    in.bytes(w.architecture.data(), w.architecture.size());
    const std::uint32_t count = in.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedBlock b;
        b.name.resize(in.u16());
        in.bytes(b.name.data(), b.name.size());
        const std::uint32_t n = in.u32();
        in.need(static_cast<std::size_t>(n) * 4);
        b.values.resize(n);
        for (float& v : b.values) v = in.f32();
        w.blocks.push_back(std::move(b));
    }
    if (in.remaining() != 0) throw FormatError("weights: trailing bytes");
    return w;
}

void write_weights(const std::filesystem::path& path, const ModelWeights& w) {
    detail::write_file_bytes(path.string(), encode_weights(w));
}

ModelWeights read_weights(const std::filesystem::path& path) {
    return decode_weights(detail::read_file_bytes(path.string()));
}

}  // namespace sqr
