#include "sqr/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <numeric>
#include <sstream>
#include <thread>

#include "byte_io.hpp"
#include "sqr/error.hpp"

namespace sqr {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSplitStream = 0x5911'7000'0000'0001ull;

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw FormatError("manifest: bad number '" + s + "'");
    return v;
}

std::uint64_t parse_u64(const std::string& s) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size()) throw FormatError("manifest: bad integer '" + s + "'");
    return v;
}

void expect_fields(const std::vector<std::string>& f, std::string_view key, std::size_t n) {
    if (f.empty() || f[0] != key || f.size() != n + 1) {
        throw FormatError("manifest: expected '" + std::string(key) + "' line with " +
                          std::to_string(n) + " fields");
    }
}

}  // namespace

void validate(const SamplingRanges& r) {
    for (const Interval& i : {r.center, r.dims, r.shape}) {
        if (!std::isfinite(i.lo) || !std::isfinite(i.hi) || !(i.lo < i.hi)) {
            throw InvalidArgument("sampling range must satisfy lo < hi");
        }
    }
    if (r.dims.lo <= 0.0 || r.shape.lo <= 0.0) {
        throw InvalidArgument("dimension and shape ranges must be positive");
    }
}

SuperquadricParams sample_params(Philox4x32& rng, const SamplingRanges& r) {
    ParamVector v{};
    for (std::size_t i = 0; i < 3; ++i) v[i] = rng.uniform(r.dims.lo, r.dims.hi);
    for (std::size_t i = 3; i < 5; ++i) v[i] = rng.uniform(r.shape.lo, r.shape.hi);
    for (std::size_t i = 5; i < 8; ++i) v[i] = rng.uniform(r.center.lo, r.center.hi);
    return SuperquadricParams(v);
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::Unassigned: return "unassigned";
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "unassigned";
}

Split parse_split(std::string_view s) {
    for (Split x : {Split::Unassigned, Split::Train, Split::Validation, Split::Test}) {
        if (to_string(x) == s) return x;
    }
    throw FormatError("unknown split tag '" + std::string(s) + "'");
}

std::size_t DatasetManifest::count(Split s) const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(),
                                                  [s](const ManifestRecord& r) { return r.split == s; }));
}

std::vector<std::size_t> DatasetManifest::indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].split == s) out.push_back(i);
    }
    return out;
}

std::string encode_manifest(const DatasetManifest& m) {
    std::ostringstream os;
    const RenderConfig& c = m.render;
    os << "sqr-manifest\t1\n";
    os << "seed\t" << m.seed << '\n';
    os << "ranges";
    for (const Interval& i : {m.ranges.center, m.ranges.dims, m.ranges.shape}) {
        os << '\t' << fmt_double(i.lo) << '\t' << fmt_double(i.hi);
    }
    os << '\n';
    os << "render\t" << c.width << '\t' << c.height << '\t' << fmt_double(c.view_direction.x) << '\t'
       << fmt_double(c.view_direction.y) << '\t' << fmt_double(c.view_direction.z) << '\t'
       << fmt_double(c.view_lo) << '\t' << fmt_double(c.view_hi) << '\t' << fmt_double(c.surface_tolerance) << '\t' << fmt_double(c.march_step) << '\t'
       << fmt_double(c.bisection_tolerance) << '\t' << c.max_bisection_iterations << '\n';
    os << "render_digest\t" << to_hex(render_digest(c)) << '\n';
    os << "count\t" << m.records.size() << '\n';
    for (const auto& r : m.records) {
        os << r.image << '\t' << to_string(r.split);
        for (double v : r.params.values()) os << '\t' << fmt_double(v);
        os << '\n';
    }
    return os.str();
}

DatasetManifest decode_manifest(const std::string& text, const fs::path& root) {
    std::istringstream is(text);
    std::string line;
    auto next = [&]() {
        if (!std::getline(is, line)) throw FormatError("manifest: unexpected end of file");
        return split_tabs(line);
    };

    DatasetManifest m;
    m.root = root;
    auto f = next();
    if (f.size() != 2 || f[0] != "sqr-manifest") throw FormatError("manifest: bad header");
    if (f[1] != "1") throw FormatError("manifest: unsupported version " + f[1]);

    f = next();
    expect_fields(f, "seed", 1);
    m.seed = parse_u64(f[1]);

    f = next();
    expect_fields(f, "ranges", 6);
    m.ranges.center = {parse_double(f[1]), parse_double(f[2])};
    m.ranges.dims = {parse_double(f[3]), parse_double(f[4])};
    m.ranges.shape = {parse_double(f[5]), parse_double(f[6])};

    f = next();
    expect_fields(f, "render", 11);
    m.render.width = static_cast<int>(parse_u64(f[1]));
    m.render.height = static_cast<int>(parse_u64(f[2]));
    m.render.view_direction = {parse_double(f[3]), parse_double(f[4]), parse_double(f[5])};
    m.render.view_lo = parse_double(f[6]);
    m.render.view_hi = parse_double(f[7]);
    m.render.surface_tolerance = parse_double(f[8]);
    m.render.march_step = parse_double(f[9]);
    m.render.bisection_tolerance = parse_double(f[10]);
    m.render.max_bisection_iterations = static_cast<int>(parse_u64(f[11]));
    validate(m.render);

    f = next();
    expect_fields(f, "render_digest", 1);
    if (f[1] != to_hex(render_digest(m.render))) {
        throw FormatError("manifest: render digest does not match render config");
    }

    f = next();
    expect_fields(f, "count", 1);
    const std::uint64_t n = parse_u64(f[1]);
    m.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 20)));
    for (std::uint64_t i = 0; i < n; ++i) {
        f = next();
        if (f.size() != 2 + kParamCount) throw FormatError("manifest: malformed record line");
        ParamVector v{};
        for (std::size_t k = 0; k < kParamCount; ++k) v[k] = parse_double(f[2 + k]);
        m.records.push_back({f[0], SuperquadricParams(v), parse_split(f[1])});
    }
    if (std::getline(is, line) && !line.empty()) throw FormatError("manifest: trailing data");
    return m;
}

void write_manifest(const DatasetManifest& m) {
    const fs::path tmp = m.root / (std::string(kManifestFile) + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << encode_manifest(m);
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    fs::rename(tmp, m.root / kManifestFile);
}

DatasetManifest read_manifest(const fs::path& root) {
    if (!fs::is_directory(root)) throw InvalidArgument("dataset directory not found: " + root.string());
    if (fs::exists(root / kIncompleteMarker)) {
        throw FormatError("dataset at " + root.string() + " is incomplete (generation did not finish)");
    }
    const auto bytes = detail::read_file_bytes((root / kManifestFile).string());
    return decode_manifest(std::string(bytes.begin(), bytes.end()), root);
}

std::string manifest_digest(const DatasetManifest& m) { return to_hex(sha256(encode_manifest(m))); }

std::string image_name(std::size_t index) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s/%06zu.sqri", kImagesDir, index);
    return buf;
}

DatasetManifest generate_dataset(std::size_t count, std::uint64_t seed, const SamplingRanges& ranges,
                                 const RenderConfig& cfg, const fs::path& out_dir, int threads) {
    validate(ranges);
    validate(cfg);
    fs::create_directories(out_dir / kImagesDir);
    { std::ofstream(out_dir / kIncompleteMarker) << "generation in progress\n"; }

    DatasetManifest m;
    m.root = out_dir;
    m.seed = seed;
    m.ranges = ranges;
    m.render = cfg;

    std::vector<std::optional<SuperquadricParams>> params(count);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto work = [&] {
        while (!failed.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                Philox4x32 rng(seed, i);
                params[i] = sample_params(rng, ranges);
                write_range_image(out_dir / image_name(i), render_range_image(*params[i], cfg));
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
            }
        }
    };
    threads = std::max(threads, 1);
    if (threads == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    }
    if (error) std::rethrow_exception(error);

    m.records.reserve(count);
    for (std::size_t i = 0; i < count; ++i) m.records.push_back({image_name(i), *params[i], Split::Unassigned});
    write_manifest(m);
    fs::remove(out_dir / kIncompleteMarker);
    return m;
}

DatasetManifest split_dataset(const DatasetManifest& manifest, const std::vector<double>& fractions,
                              std::uint64_t seed) {
    if (fractions.empty() || fractions.size() > 3) {
        throw InvalidArgument("split needs one to three fractions (train, validation, test)");
    }
    double sum = 0.0;
    for (double f : fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw InvalidArgument("split fractions must lie in [0, 1]");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("split fractions must sum to 1");

    const std::size_t n = manifest.records.size();
    std::vector<std::size_t> counts(fractions.size());
    std::vector<double> remainders(fractions.size());
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < fractions.size(); ++k) {
        const double exact = fractions[k] * static_cast<double>(n);
        counts[k] = static_cast<std::size_t>(std::floor(exact));
        remainders[k] = exact - std::floor(exact);
        assigned += counts[k];
    }
    std::vector<std::size_t> order(fractions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
    for (std::size_t k = 0; assigned < n; k = (k + 1) % order.size(), ++assigned) ++counts[order[k]];

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Philox4x32 rng(seed, kSplitStream);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

    static constexpr Split kTags[] = {Split::Train, Split::Validation, Split::Test};
    DatasetManifest out = manifest;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        for (std::size_t j = 0; j < counts[k]; ++j) out.records[perm[pos++]].split = kTags[k];
    }
    return out;
}

std::pair<RangeImage, SuperquadricParams> load_record(const DatasetManifest& manifest, std::size_t index) {
    if (index >= manifest.records.size()) {
        throw InvalidArgument("record index " + std::to_string(index) + " out of range (count " +
                              std::to_string(manifest.records.size()) + ")");
    }
    const auto& rec = manifest.records[index];
    RangeImage img = read_range_image(manifest.root / rec.image);
    if (img.width() != manifest.render.width || img.height() != manifest.render.height) {
        throw FormatError("image " + rec.image + " does not match the manifest render size");
    }
    return {std::move(img), rec.params};
}

}  // namespace sqr
