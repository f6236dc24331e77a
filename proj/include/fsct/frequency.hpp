#pragma once

#include <vector>

#include "fsct/volume.hpp"

namespace fsct {

struct GaussianSpec {
    double sigma = 15.0;  // voxels
    int radius = 0;       // taps per side; 0 means ceil(3*sigma), at least 1

    static GaussianSpec with_sigma(double s) { return GaussianSpec{s, 0}; }
    int effective_radius() const;
    // Truncated taps for offsets [-radius, radius], renormalized to sum 1.
    std::vector<double> taps() const;
};

// Separable Gaussian smoothing with edge-replicate boundaries; accumulation
// in double, rounded to the volume's float width at the end.
Volume gaussian_lowpass(const Volume& v, const GaussianSpec& spec);

struct FrequencyPair {
    Volume low;   // CT_LOWFREQ
    Volume high;  // CT_HIGHFREQ
};

// low ~ gaussian_lowpass(v), high = v - low, adjusted so that
// low[i] + high[i] == v[i] holds exactly in float arithmetic.
FrequencyPair decompose(const Volume& v, const GaussianSpec& spec);

} // namespace fsct
