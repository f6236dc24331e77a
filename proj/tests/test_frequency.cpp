#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fsct/frequency.hpp"
#include "fsct/synthetic.hpp"
#include "support/oracles.hpp"

using namespace fsct;

namespace {

Volume random_ct(int d, int h, int w, CounterRng& rng, double lo = 0.0, double hi = 1.0) {
    Volume v(d, h, w, Domain::CtNorm);
    for (auto& f : v.data) f = static_cast<float>(rng.uniform(lo, hi));
    return v;
}

double total_variation(const Volume& v) {
    double tv = 0.0;
    for (int z = 0; z < v.d; ++z)
        for (int y = 0; y < v.h; ++y)
            for (int x = 0; x < v.w; ++x) {
                if (x + 1 < v.w) tv += std::abs(v.at(z, y, x + 1) - v.at(z, y, x));
                if (y + 1 < v.h) tv += std::abs(v.at(z, y + 1, x) - v.at(z, y, x));
                if (z + 1 < v.d) tv += std::abs(v.at(z + 1, y, x) - v.at(z, y, x));
            }
    return tv;
}

} // namespace

TEST_CASE("gaussian taps are normalized and sized by 3 sigma") {
    GaussianSpec spec = GaussianSpec::with_sigma(1.5);
    CHECK(spec.effective_radius() == 5);
    auto taps = spec.taps();
    CHECK(taps.size() == 11);
    const double sum = std::accumulate(taps.begin(), taps.end(), 0.0);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(GaussianSpec::with_sigma(0.2).effective_radius() == 1);
    CHECK(GaussianSpec{15.0, 0}.effective_radius() == 45);
    CHECK_THROWS_AS(GaussianSpec::with_sigma(0.0).taps(), ArgumentError);
    CHECK_THROWS_AS(GaussianSpec::with_sigma(-2.0).taps(), ArgumentError);
}

TEST_CASE("gaussian_lowpass preserves constant volumes (unit DC gain)") {
    Volume v(6, 6, 6, Domain::CtHu, -321.5f);
    Volume low = gaussian_lowpass(v, GaussianSpec::with_sigma(1.5));
    for (float f : low.data) CHECK(std::abs(f + 321.5f) < 1e-6f * 321.5f);
}

TEST_CASE("gaussian_lowpass of a central impulse reproduces the separable taps") {
    GaussianSpec spec = GaussianSpec::with_sigma(1.0);
    const int r = spec.effective_radius();
    const int n = 4 * r + 1;  // replicate boundary stays clear of the kernel support
    Volume v(n, n, n, Domain::CtHu, 0.0f);
    const int c = n / 2;
    v.at(c, c, c) = 1.0f;
    Volume low = gaussian_lowpass(v, spec);
    auto taps = spec.taps();
    for (int dz = -r; dz <= r; ++dz)
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
                const double want = taps[dz + r] * taps[dy + r] * taps[dx + r];
                CHECK(std::abs(low.at(c + dz, c + dy, c + dx) - want) < 1e-7);
            }
}

TEST_CASE("separable filtering matches a dense replicate-boundary convolution") {
    CounterRng rng(7);
    Volume v = random_ct(8, 8, 8, rng);
    GaussianSpec spec = GaussianSpec::with_sigma(1.5);
    Volume low = gaussian_lowpass(v, spec);

    const auto taps = spec.taps();
    const int k = static_cast<int>(taps.size());
    std::vector<double> dense(static_cast<std::size_t>(k) * k * k);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
            for (int c = 0; c < k; ++c)
                dense[(static_cast<std::size_t>(a) * k + b) * k + c] =
                    taps[a] * taps[b] * taps[c];
    std::vector<double> in(v.data.begin(), v.data.end());
    auto ref = oracle::conv3d_replicate(in, v.d, v.h, v.w, dense, k, k, k);
    for (std::size_t i = 0; i < ref.size(); ++i)
        CHECK(std::abs(low.data[i] - ref[i]) < 1e-5);
}

TEST_CASE("decompose reconstructs the input bit-exactly") {
    CounterRng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Volume v = random_ct(6, 7, 5, rng, -1000.0, 2000.0);
        v.domain = Domain::CtHu;
        auto pair = decompose(v, GaussianSpec::with_sigma(1.0 + 0.2 * trial));
        CHECK(pair.low.domain == Domain::CtLowFreq);
        CHECK(pair.high.domain == Domain::CtHighFreq);
        CHECK(pair.low.spacing == v.spacing);
        for (std::size_t i = 0; i < v.data.size(); ++i)
            CHECK(pair.low.data[i] + pair.high.data[i] == v.data[i]);
    }
}

TEST_CASE("decompose of a constant volume has a zero high band") {
    Volume v(8, 8, 8, Domain::CtHu, 77.25f);
    auto pair = decompose(v, GaussianSpec::with_sigma(2.0));
    for (float f : pair.high.data) CHECK(std::abs(f) < 1e-6f);
}

TEST_CASE("decompose requires a CT-domain volume") {
    Volume v(4, 4, 4, Domain::MrRaw, 1.0f);
    CHECK_THROWS_AS(decompose(v, GaussianSpec::with_sigma(1.0)), ArgumentError);
}

TEST_CASE("a wide blob is almost entirely low frequency") {
    // Gaussian blob with width much larger than the filter sigma
    const int n = 24;
    Volume v(n, n, n, Domain::CtHu);
    const double c = (n - 1) / 2.0, width = 8.0;
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                const double r2 = (z - c) * (z - c) + (y - c) * (y - c) + (x - c) * (x - c);
                v.at(z, y, x) = static_cast<float>(1000.0 * std::exp(-r2 / (2 * width * width)));
            }
    auto pair = decompose(v, GaussianSpec::with_sigma(1.5));
    double high_e = 0.0, total_e = 0.0;
    for (std::size_t i = 0; i < v.data.size(); ++i) {
        high_e += static_cast<double>(pair.high.data[i]) * pair.high.data[i];
        total_e += static_cast<double>(v.data[i]) * v.data[i];
    }
    CHECK(high_e < 0.01 * total_e);
}

TEST_CASE("smoothing does not increase total variation") {
    CounterRng rng(3);
    for (double sigma : {1.0, 2.0, 4.0}) {
        Volume v = random_ct(10, 10, 10, rng);
        Volume low = gaussian_lowpass(v, GaussianSpec::with_sigma(sigma));
        CHECK(total_variation(low) <= total_variation(v));
    }
}

TEST_CASE("filter output stays within the input value range") {
    CounterRng rng(5);
    Volume v = random_ct(9, 9, 9, rng, -500.0, 1500.0);
    const float lo = *std::min_element(v.data.begin(), v.data.end());
    const float hi = *std::max_element(v.data.begin(), v.data.end());
    Volume low = gaussian_lowpass(v, GaussianSpec::with_sigma(2.0));
    for (float f : low.data) {
        CHECK(f >= lo - 1e-4f);
        CHECK(f <= hi + 1e-4f);
    }
}

TEST_CASE("mean is preserved on constant volumes") {
    Volume v(12, 12, 12, Domain::CtHu, 250.0f);
    Volume low = gaussian_lowpass(v, GaussianSpec::with_sigma(3.0));
    double m = 0.0;
    for (float f : low.data) m += f;
    m /= low.data.size();
    CHECK(std::abs(m - 250.0) < 1e-5 * 250.0);
}
