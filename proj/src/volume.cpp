#include "fsct/volume.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace fsct {

namespace {

constexpr char kMagic[4] = {'F', 'S', 'V', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 40;
// Keeps D*H*W*4 comfortably inside a signed 64-bit byte count.
constexpr std::uint64_t kMaxVoxels = 1ull << 33;

void put_u32(std::string& buf, std::uint32_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
    buf.push_back(static_cast<char>((v >> 16) & 0xff));
    buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& buf, float f) {
    put_u32(buf, std::bit_cast<std::uint32_t>(f));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float get_f32(const unsigned char* p) {
    return std::bit_cast<float>(get_u32(p));
}

} // namespace

const char* domain_name(Domain d) {
    switch (d) {
        case Domain::MrRaw: return "MR_RAW";
        case Domain::MrNorm: return "MR_NORM";
        case Domain::CtHu: return "CT_HU";
        case Domain::CtNorm: return "CT_NORM";
        case Domain::CtHighFreq: return "CT_HIGHFREQ";
        case Domain::CtLowFreq: return "CT_LOWFREQ";
    }
    return "?";
}

Volume::Volume(int d_, int h_, int w_, Domain dom, float fill) : d(d_), h(h_), w(w_), domain(dom) {
    if (d <= 0 || h <= 0 || w <= 0) throw ArgumentError("volume extents must be positive");
    data.assign(static_cast<std::size_t>(d) * h * w, fill);
}

void write_volume(const Volume& v, const std::string& path) {
    if (v.size() != static_cast<std::size_t>(v.d) * v.h * v.w)
        throw StateError("write_volume: data length does not match dims");
    std::string buf;
    buf.reserve(kHeaderBytes + v.size() * 4);
    buf.append(kMagic, 4);
    put_u32(buf, kVersion);
    put_u32(buf, static_cast<std::uint32_t>(v.d));
    put_u32(buf, static_cast<std::uint32_t>(v.h));
    put_u32(buf, static_cast<std::uint32_t>(v.w));
    for (float s : v.spacing) put_f32(buf, s);
    buf.push_back(static_cast<char>(v.domain));
    buf.append(7, '\0');
    for (float f : v.data) put_f32(buf, f);

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(detail::cat("cannot open for writing: ", path));
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!os) throw IoError(detail::cat("short write: ", path));
}

Volume read_volume(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(detail::cat("cannot open: ", path));
    std::string raw((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(raw.data());

    if (raw.size() < 4 || std::memcmp(raw.data(), kMagic, 4) != 0)
        throw FormatError(detail::cat(path, ": bad magic at byte offset 0"));
    if (raw.size() < kHeaderBytes)
        throw FormatError(detail::cat(path, ": truncated header at byte offset ", raw.size()));
    if (get_u32(p + 4) != kVersion)
        throw FormatError(detail::cat(path, ": unsupported version at byte offset 4"));

    const std::uint32_t d = get_u32(p + 8), h = get_u32(p + 12), w = get_u32(p + 16);
    if (d == 0 || h == 0 || w == 0)
        throw FormatError(detail::cat(path, ": zero dimension at byte offset 8"));
    const std::uint64_t voxels = static_cast<std::uint64_t>(d) * h * w;
    if (voxels > kMaxVoxels)
        throw FormatError(detail::cat(path, ": dimension overflow at byte offset 8"));

    Volume v;
    v.d = static_cast<int>(d);
    v.h = static_cast<int>(h);
    v.w = static_cast<int>(w);
    for (int i = 0; i < 3; ++i) {
        v.spacing[i] = get_f32(p + 20 + 4 * i);
        if (!(v.spacing[i] > 0.0f) || !std::isfinite(v.spacing[i]))
            throw FormatError(detail::cat(path, ": invalid spacing at byte offset ", 20 + 4 * i));
    }
    const std::uint8_t tag = p[32];
    if (tag > 5)
        throw FormatError(detail::cat(path, ": invalid domain tag at byte offset 32"));
    v.domain = static_cast<Domain>(tag);

    const std::uint64_t want = kHeaderBytes + voxels * 4;
    if (raw.size() < want)
        throw FormatError(detail::cat(path, ": truncated payload, expected ", want,
                                      " bytes but file has ", raw.size(),
                                      " (payload starts at byte offset ", kHeaderBytes, ")"));
    v.data.resize(voxels);
    for (std::uint64_t i = 0; i < voxels; ++i)
        v.data[i] = get_f32(p + kHeaderBytes + 4 * i);
    return v;
}

Volume normalize_mr(const Volume& v) {
    if (v.size() == 0) throw ArgumentError("normalize_mr: empty volume");
    double sum = 0.0;
    for (float f : v.data) sum += f;
    const double mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (float f : v.data) {
        const double dx = f - mean;
        ss += dx * dx;
    }
    const double stddev = std::sqrt(ss / static_cast<double>(v.size()));
    if (stddev < 1e-6)
        throw DegenerateInputError(detail::cat(
            "normalize_mr: population std ", stddev, " below 1e-6 (near-constant volume)"));
    Volume out = v;
    out.domain = Domain::MrNorm;
    for (auto& f : out.data) f = static_cast<float>((f - mean) / stddev);
    return out;
}

CtNormResult normalize_ct(const Volume& v, const HURange& r) {
    if (!(r.min_hu < r.max_hu)) throw ArgumentError("normalize_ct: min_hu must be < max_hu");
    const double range = r.max_hu - r.min_hu;
    CtNormResult res;
    res.volume = v;
    res.volume.domain = Domain::CtNorm;
    for (auto& f : res.volume.data) {
        double x = f;
        if (x < r.min_hu) {
            x = r.min_hu;
            ++res.clamped;
        } else if (x > r.max_hu) {
            x = r.max_hu;
            ++res.clamped;
        }
        f = static_cast<float>((x - r.min_hu) / range);
    }
    return res;
}

Volume denormalize_ct(const Volume& v, const HURange& r) {
    if (!(r.min_hu < r.max_hu)) throw ArgumentError("denormalize_ct: min_hu must be < max_hu");
    const double range = r.max_hu - r.min_hu;
    Volume out = v;
    out.domain = Domain::CtHu;
    for (auto& f : out.data) f = static_cast<float>(static_cast<double>(f) * range + r.min_hu);
    return out;
}

std::vector<std::string> export_slices_pgm(const Volume& v, const std::string& dir,
                                           const std::string& prefix) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    float lo = v.data.empty() ? 0.0f : v.data[0];
    float hi = lo;
    for (float f : v.data) {
        lo = std::min(lo, f);
        hi = std::max(hi, f);
    }
    const float span = hi - lo;
    std::vector<std::string> names;
    for (int z = 0; z < v.d; ++z) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s_z%03d.pgm", prefix.c_str(), z);
        const fs::path p = fs::path(dir) / name;
        std::ofstream os(p, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError(detail::cat("cannot open for writing: ", p.string()));
        os << "P5\n" << v.w << " " << v.h << "\n255\n";
        for (int y = 0; y < v.h; ++y)
            for (int x = 0; x < v.w; ++x) {
                const float f = v.at(z, y, x);
                int g = span > 0.0f ? static_cast<int>(std::lround(255.0f * (f - lo) / span)) : 0;
                g = std::clamp(g, 0, 255);
                os.put(static_cast<char>(g));
            }
        if (!os) throw IoError(detail::cat("short write: ", p.string()));
        names.push_back(name);
    }
    return names;
}

} // namespace fsct
