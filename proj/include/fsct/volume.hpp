#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fsct/common.hpp"

namespace fsct {

// Tag order matches the FSV1 domain byte (0..5).
enum class Domain : std::uint8_t {
    MrRaw = 0,
    MrNorm = 1,
    CtHu = 2,
    CtNorm = 3,
    CtHighFreq = 4,
    CtLowFreq = 5,
};

const char* domain_name(Domain d);

// A 3D scalar grid, depth-major with the width axis fastest.
struct Volume {
    int d = 0, h = 0, w = 0;
    std::array<float, 3> spacing{1.0f, 1.0f, 1.0f};
    Domain domain = Domain::MrRaw;
    std::vector<float> data;

    Volume() = default;
    Volume(int d_, int h_, int w_, Domain dom = Domain::MrRaw, float fill = 0.0f);

    std::size_t size() const { return data.size(); }
    std::size_t index(int z, int y, int x) const {
        return (static_cast<std::size_t>(z) * h + y) * w + x;
    }
    float& at(int z, int y, int x) { return data[index(z, y, x)]; }
    float at(int z, int y, int x) const { return data[index(z, y, x)]; }
    bool same_grid(const Volume& o) const { return d == o.d && h == o.h && w == o.w; }
};

Volume read_volume(const std::string& path);
void write_volume(const Volume& v, const std::string& path);

// Zero-mean / unit-variance MR normalization (population statistics).
Volume normalize_mr(const Volume& v);

struct HURange {
    double min_hu = -1024.0;
    double max_hu = 2252.7;
};

struct CtNormResult {
    Volume volume;          // CT_NORM, values in [0,1]
    long long clamped = 0;  // voxels outside the HU range before mapping
};

CtNormResult normalize_ct(const Volume& v, const HURange& r = {});
Volume denormalize_ct(const Volume& v, const HURange& r = {});

// One 8-bit binary PGM per axial slice, windowed to the volume min/max.
// Returns the written file names (relative to dir).
std::vector<std::string> export_slices_pgm(const Volume& v, const std::string& dir,
                                           const std::string& prefix);

} // namespace fsct
