#include "fsct/frequency.hpp"

#include <algorithm>
#include <cmath>

namespace fsct {

int GaussianSpec::effective_radius() const {
    if (radius > 0) return radius;
    return std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
}

std::vector<double> GaussianSpec::taps() const {
    if (!(sigma > 0.0)) throw ArgumentError("GaussianSpec: sigma must be positive");
    const int r = effective_radius();
    std::vector<double> t(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        t[i + r] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        sum += t[i + r];
    }
    for (double& x : t) x /= sum;
    return t;
}

namespace {

// One replicate-boundary pass along the chosen axis (0=depth,1=height,2=width).
void axis_pass(const std::vector<double>& src, std::vector<double>& dst,
               int d, int h, int w, int axis, const std::vector<double>& taps) {
    const int r = static_cast<int>(taps.size() / 2);
    const int ext[3] = {d, h, w};
    const std::size_t stride[3] = {static_cast<std::size_t>(h) * w,
                                   static_cast<std::size_t>(w), 1};
    const int n = ext[axis];
    const std::size_t s = stride[axis];
    // Iterate over all lines along `axis`.
    const int o1 = (axis + 1) % 3, o2 = (axis + 2) % 3;
    for (int i1 = 0; i1 < ext[o1]; ++i1)
        for (int i2 = 0; i2 < ext[o2]; ++i2) {
            const std::size_t base = i1 * stride[o1] + i2 * stride[o2];
            for (int i = 0; i < n; ++i) {
                double acc = 0.0;
                for (int t = -r; t <= r; ++t) {
                    const int j = std::clamp(i + t, 0, n - 1);
                    acc += taps[t + r] * src[base + j * s];
                }
                dst[base + i * s] = acc;
            }
        }
}

} // namespace

Volume gaussian_lowpass(const Volume& v, const GaussianSpec& spec) {
    const auto taps = spec.taps();
    std::vector<double> a(v.data.begin(), v.data.end());
    std::vector<double> b(a.size());
    axis_pass(a, b, v.d, v.h, v.w, 2, taps);
    axis_pass(b, a, v.d, v.h, v.w, 1, taps);
    axis_pass(a, b, v.d, v.h, v.w, 0, taps);
    Volume out = v;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = static_cast<float>(b[i]);
    return out;
}

FrequencyPair decompose(const Volume& v, const GaussianSpec& spec) {
    if (v.domain != Domain::CtHu && v.domain != Domain::CtNorm)
        throw ArgumentError(detail::cat("decompose: expected a CT-domain volume, got ",
                                        domain_name(v.domain)));
    FrequencyPair p;
    p.low = gaussian_lowpass(v, spec);
    p.low.domain = Domain::CtLowFreq;
    p.high = v;
    p.high.domain = Domain::CtHighFreq;
    // Nudge the rounded pair until the float sum reconstructs v bit-exactly.
    for (std::size_t i = 0; i < v.data.size(); ++i) {
        const float vv = v.data[i];
        float lv = p.low.data[i];
        float hv = vv - lv;
        lv = vv - hv;
        if (lv + hv != vv) hv = vv - lv;
        if (lv + hv != vv) {
            lv = 0.0f;
            hv = vv;
        }
        p.low.data[i] = lv;
        p.high.data[i] = hv;
    }
    return p;
}

} // namespace fsct
