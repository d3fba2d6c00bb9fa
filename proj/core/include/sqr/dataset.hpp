#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sqr/range_image.hpp"
#include "sqr/renderer.hpp"
#include "sqr/rng.hpp"
#include "sqr/superquadric.hpp"

namespace sqr {

struct Interval {
    double lo;
    double hi;
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Uniform sampling ranges for generated shapes.
struct SamplingRanges {
    Interval center{25.0, 230.0};
    Interval dims{25.0, 75.0};
    Interval shape{0.1, 1.0};

    friend bool operator==(const SamplingRanges&, const SamplingRanges&) = default;
};

void validate(const SamplingRanges& ranges);

/// Draws a1, a2, a3, eps1, eps2, x0, y0, z0 in that order, each independent
/// and uniform on its range.
SuperquadricParams sample_params(Philox4x32& rng, const SamplingRanges& ranges);

enum class Split { Unassigned, Train, Validation, Test };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct ManifestRecord {
    std::string image;  // relative to the dataset root
    SuperquadricParams params;
    Split split = Split::Unassigned;

    friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct DatasetManifest {
    std::filesystem::path root;
    std::uint64_t seed = 0;
    SamplingRanges ranges;
    RenderConfig render;
    std::vector<ManifestRecord> records;

    std::size_t count(Split s) const;
    std::vector<std::size_t> indices(Split s) const;
};

inline constexpr const char* kManifestFile = "manifest.tsv";
inline constexpr const char* kImagesDir = "images";
inline constexpr const char* kIncompleteMarker = "INCOMPLETE";

/// Manifest text encoding, fixed line order:
///   sqr-manifest<TAB>1
///   seed<TAB><u64>
///   ranges<TAB>center_lo<TAB>center_hi<TAB>dims_lo<TAB>dims_hi<TAB>shape_lo<TAB>shape_hi
///   render<TAB>width<TAB>height<TAB>vx<TAB>vy<TAB>vz<TAB>surface_tol<TAB>step<TAB>bisect_tol<TAB>bisect_cap
///   render_digest<TAB><hex sha256 of describe(RenderConfig)>
///   count<TAB><n>
///   then n lines: image<TAB>split<TAB>a1 a2 a3 eps1 eps2 x0 y0 z0 (tab separated)
/// Doubles use %.17g so the text round-trips bit-exactly.
std::string encode_manifest(const DatasetManifest& m);
DatasetManifest decode_manifest(const std::string& text, const std::filesystem::path& root);

void write_manifest(const DatasetManifest& m);
/// Refuses directories carrying the partial-output marker.
DatasetManifest read_manifest(const std::filesystem::path& root);

std::string manifest_digest(const DatasetManifest& m);

/// Image file name for record `index`: images/000042.sqri.
std::string image_name(std::size_t index);

/// Renders `count` shapes into `out_dir`. Record i draws its parameters from
/// Philox stream i of `seed`, so output bytes do not depend on `threads`.
/// An INCOMPLETE marker is present in `out_dir` until the manifest is written.
DatasetManifest generate_dataset(std::size_t count, std::uint64_t seed,
                                 const SamplingRanges& ranges, const RenderConfig& cfg,
                                 const std::filesystem::path& out_dir, int threads = 1);

/// Assigns split tags (train, validation, test in that order) for up to three
/// fractions summing to 1. Counts are floor(f * n) with the remainder handed
/// to the largest fractional parts; membership follows a seeded shuffle.
DatasetManifest split_dataset(const DatasetManifest& manifest, const std::vector<double>& fractions,
                              std::uint64_t seed);

std::pair<RangeImage, SuperquadricParams> load_record(const DatasetManifest& manifest,
                                                      std::size_t index);

}  // namespace sqr
