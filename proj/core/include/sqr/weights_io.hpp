#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sqr/digest.hpp"

namespace sqr {

struct NamedBlock {
    std::string name;
    std::vector<float> values;
    friend bool operator==(const NamedBlock&, const NamedBlock&) = default;
};

/// Learnable parameters and batchnorm running statistics of a regressor.
struct ModelWeights {
    std::uint16_t version = 1;
    Digest architecture{};
    std::vector<NamedBlock> blocks;
    friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

/// SQWT layout: "SQWT", u16 version, 32-byte architecture digest, u32 block
/// count, then per block: u16 name length, name bytes, u32 value count,
/// little-endian float32 values.
std::vector<std::uint8_t> encode_weights(const ModelWeights& w);
ModelWeights decode_weights(const std::vector<std::uint8_t>& bytes);

void write_weights(const std::filesystem::path& path, const ModelWeights& w);
ModelWeights read_weights(const std::filesystem::path& path);

}  // namespace sqr
