#pragma once

// Test-side reference implementations. These stay deliberately naive and
// independent of the library's computation paths.

#include <cmath>
#include <functional>
#include <vector>

#include "fsct/synthetic.hpp"
#include "fsct/tensor.hpp"
#include "fsct/volume.hpp"

namespace oracle {

// Direct six-nested-loop 3D convolution, zero padding, double accumulation.
// in: [cin,d,h,w], ker: [cout,cin,k,k,k], out: [cout,d,h,w]
template <class T>
std::vector<T> conv3d_naive(const std::vector<T>& in, const std::vector<T>& ker,
                            const std::vector<T>* bias,
                            int cin, int d, int h, int w, int cout, int k) {
    const int r = k / 2;
    std::vector<T> out(static_cast<std::size_t>(cout) * d * h * w, T(0));
    auto iin = [&](int c, int z, int y, int x) {
        return in[((static_cast<std::size_t>(c) * d + z) * h + y) * w + x];
    };
    for (int co = 0; co < cout; ++co)
        for (int z = 0; z < d; ++z)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double acc = bias ? (*bias)[co] : 0.0;
                    for (int ci = 0; ci < cin; ++ci)
                        for (int a = 0; a < k; ++a)
                            for (int b = 0; b < k; ++b)
                                for (int c = 0; c < k; ++c) {
                                    const int zi = z + a - r, yi = y + b - r, xi = x + c - r;
                                    if (zi < 0 || zi >= d || yi < 0 || yi >= h || xi < 0 ||
                                        xi >= w)
                                        continue;
                                    acc += static_cast<double>(
                                               ker[(((static_cast<std::size_t>(co) * cin + ci) *
                                                         k + a) * k + b) * k + c]) *
                                           iin(ci, zi, yi, xi);
                                }
                    out[((static_cast<std::size_t>(co) * d + z) * h + y) * w + x] =
                        static_cast<T>(acc);
                }
    return out;
}

// Dense 3D convolution of a single-channel volume with an arbitrary kernel
// and replicate boundaries (the frequency module's boundary rule).
inline std::vector<double> conv3d_replicate(const std::vector<double>& in, int d, int h, int w,
                                            const std::vector<double>& ker, int kd, int kh,
                                            int kw) {
    const int rz = kd / 2, ry = kh / 2, rx = kw / 2;
    std::vector<double> out(in.size(), 0.0);
    auto clampi = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
    for (int z = 0; z < d; ++z)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int a = 0; a < kd; ++a)
                    for (int b = 0; b < kh; ++b)
                        for (int c = 0; c < kw; ++c) {
                            const int zi = clampi(z + a - rz, d);
                            const int yi = clampi(y + b - ry, h);
                            const int xi = clampi(x + c - rx, w);
                            acc += ker[(static_cast<std::size_t>(a) * kh + b) * kw + c] *
                                   in[(static_cast<std::size_t>(zi) * h + yi) * w + xi];
                        }
                out[(static_cast<std::size_t>(z) * h + y) * w + x] = acc;
            }
    return out;
}

// Central finite differences against one analytic backward pass.
// build_loss must rebuild the graph from current tensor values on each call.
struct GradCheckResult {
    int checked = 0;
    int failures = 0;
    double worst_rel = 0.0;
};

inline GradCheckResult gradcheck(
    const std::function<double()>& eval_loss,
    const std::function<void()>& run_backward,
    const std::vector<fsct::TensorPtr<double>>& tensors,
    double step = 1e-3, double rtol = 1e-4, double skip_mag = 1e-8) {
    for (const auto& t : tensors) t->zero_grad();
    run_backward();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(tensors.size());
    for (const auto& t : tensors) analytic.push_back(t->grad);

    GradCheckResult res;
    for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
        auto& t = *tensors[ti];
        for (std::size_t i = 0; i < t.numel(); ++i) {
            const double keep = t.value[i];
            t.value[i] = keep + step;
            const double fp = eval_loss();
            t.value[i] = keep - step;
            const double fm = eval_loss();
            t.value[i] = keep;
            const double numeric = (fp - fm) / (2.0 * step);
            const double a = analytic[ti][i];
            if (std::abs(a) <= skip_mag && std::abs(numeric) <= skip_mag) continue;
            ++res.checked;
            const double rel = std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric));
            res.worst_rel = std::max(res.worst_rel, rel);
            if (rel > rtol) ++res.failures;
        }
    }
    return res;
}

template <class T>
void fill_random(fsct::TensorPtr<T>& t, fsct::CounterRng& rng, double lo = -1.0,
                 double hi = 1.0) {
    for (auto& v : t->value) v = static_cast<T>(rng.uniform(lo, hi));
}

} // namespace oracle
