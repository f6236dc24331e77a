#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fsct/volume.hpp"

namespace fsct {

// Counter-based generator: output i is a splitmix64-style mix of
// (seed, counter). No hidden state beyond the counter, so streams are
// reproducible and positionable from integers alone.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    static std::uint64_t mix(std::uint64_t seed, std::uint64_t counter) {
        std::uint64_t z = seed + (counter + 1) * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64() { return mix(seed_, counter_++); }

    // [0,1) with 53 random bits
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0,n)
    int below(int n) {
        const int v = static_cast<int>(uniform() * n);
        return v >= n ? n - 1 : v;
    }

    // Box-Muller; consumes exactly two uniforms per call.
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        return r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t position() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

struct GeneratorSpec {
    int d = 24, h = 24, w = 24;
    std::uint64_t seed = 0;
    int n_blobs = 6;
    double shell_contrast = 1200.0;  // HU added on blob-boundary ridges
    double noise_sigma = 0.02;       // MR additive noise std
    std::array<float, 3> spacing{1.0f, 1.0f, 1.5f};
};

// Paired (MR_RAW, CT_HU) volumes derived from one smooth latent field.
std::pair<Volume, Volume> generate_pair(const GeneratorSpec& spec);

struct ManifestEntry {
    int index = 0;
    std::string mr_path, ct_path;
    std::uint64_t seed = 0;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
};

DatasetManifest generate_dataset(const GeneratorSpec& spec, int n_pairs,
                                 const std::string& out_dir);
void write_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

// Loads (mr, ct) pairs, resolving relative paths against the manifest dir.
std::vector<std::pair<Volume, Volume>> load_dataset(const std::string& manifest_path);

} // namespace fsct
