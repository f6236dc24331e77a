#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fsct/synthetic.hpp"
#include "fsct/volume.hpp"

using namespace fsct;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    auto p = fs::temp_directory_path() / "fsct_volume_tests";
    fs::create_directories(p);
    return p;
}

Volume random_volume(int d, int h, int w, CounterRng& rng, Domain dom = Domain::CtHu,
                     double lo = -100.0, double hi = 100.0) {
    Volume v(d, h, w, dom);
    for (auto& f : v.data) f = static_cast<float>(rng.uniform(lo, hi));
    return v;
}

} // namespace

TEST_CASE("volume write/read round trip is bitwise lossless") {
    CounterRng rng(1);
    Volume v = random_volume(3, 4, 5, rng, Domain::CtHighFreq);
    v.spacing = {0.8f, 0.9f, 2.5f};
    const auto path = (temp_dir() / "rt.fsv").string();
    write_volume(v, path);
    Volume r = read_volume(path);
    CHECK(r.d == v.d);
    CHECK(r.h == v.h);
    CHECK(r.w == v.w);
    CHECK(r.spacing == v.spacing);
    CHECK(r.domain == v.domain);
    CHECK(r.data == v.data);
}

TEST_CASE("read_volume rejects a bad magic at offset 0") {
    const auto path = (temp_dir() / "bad_magic.fsv").string();
    std::ofstream(path, std::ios::binary) << "XXXXsome more bytes to make a file";
    try {
        read_volume(path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
    }
}

TEST_CASE("read_volume rejects a truncated payload") {
    CounterRng rng(2);
    Volume v = random_volume(2, 2, 2, rng);
    const auto path = (temp_dir() / "trunc.fsv").string();
    write_volume(v, path);
    // keep the header plus only 7 of the 8 payload floats
    std::string raw;
    {
        std::ifstream is(path, std::ios::binary);
        raw.assign((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    }
    raw.resize(40 + 7 * 4);
    std::ofstream(path, std::ios::binary | std::ios::trunc) << raw;
    try {
        read_volume(path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
}

TEST_CASE("read_volume rejects dimension overflow at offset 8") {
    const auto path = (temp_dir() / "overflow.fsv").string();
    std::string buf = "FSV1";
    auto put = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    put(1);
    put(0xFFFFFFFFu);
    put(0xFFFFFFFFu);
    put(0xFFFFFFFFu);
    buf.append(20, '\0');
    std::ofstream(path, std::ios::binary) << buf;
    try {
        read_volume(path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("offset 8") != std::string::npos);
    }
}

TEST_CASE("normalize_mr: two-value volume maps to (-1, 1)") {
    Volume v(1, 1, 2, Domain::MrRaw);
    v.data = {0.0f, 2.0f};
    Volume n = normalize_mr(v);
    CHECK(n.domain == Domain::MrNorm);
    CHECK(n.data[0] == -1.0f);
    CHECK(n.data[1] == 1.0f);
}

TEST_CASE("normalize_mr: output statistics are (0,1) for any non-degenerate input") {
    CounterRng rng(3);
    Volume v = random_volume(6, 5, 4, rng, Domain::MrRaw, 10.0, 300.0);
    Volume n = normalize_mr(v);
    double sum = 0.0;
    for (float f : n.data) sum += f;
    const double mean = sum / n.data.size();
    double ss = 0.0;
    for (float f : n.data) ss += (f - mean) * (f - mean);
    const double stddev = std::sqrt(ss / n.data.size());
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(stddev - 1.0) < 1e-4);
}

TEST_CASE("normalize_mr: constant volume is degenerate") {
    Volume v(2, 2, 2, Domain::MrRaw, 7.5f);
    CHECK_THROWS_AS(normalize_mr(v), DegenerateInputError);
}

TEST_CASE("normalize_ct maps the HU range to [0,1] and back") {
    Volume v(1, 1, 4, Domain::CtHu);
    v.data = {-1024.0f, 2252.7f, 0.0f, 500.0f};
    auto res = normalize_ct(v);
    CHECK(res.clamped == 0);
    CHECK(res.volume.domain == Domain::CtNorm);
    CHECK(res.volume.data[0] == 0.0f);
    CHECK(res.volume.data[1] == 1.0f);
    CHECK(res.volume.data[2] == doctest::Approx(1024.0 / 3276.7).epsilon(1e-6));

    Volume back = denormalize_ct(res.volume);
    CHECK(back.domain == Domain::CtHu);
    for (int i = 0; i < 4; ++i)
        CHECK(std::abs(back.data[i] - v.data[i]) < 1e-3);
}

TEST_CASE("normalize_ct clamps and counts out-of-range values") {
    Volume v(1, 1, 3, Domain::CtHu);
    v.data = {-2000.0f, 3000.0f, 100.0f};
    auto res = normalize_ct(v);
    CHECK(res.clamped == 2);
    CHECK(res.volume.data[0] == 0.0f);
    CHECK(res.volume.data[1] == 1.0f);
}

TEST_CASE("normalize_ct is monotone") {
    CounterRng rng(4);
    Volume v = random_volume(1, 1, 64, rng, Domain::CtHu, -1024.0, 2252.7);
    auto res = normalize_ct(v);
    for (int i = 0; i < 63; ++i) {
        const bool le = v.data[i] <= v.data[i + 1];
        CHECK((res.volume.data[i] <= res.volume.data[i + 1]) == le);
    }
}

TEST_CASE("pgm slice export writes one windowed slice per depth index") {
    Volume v(2, 2, 3, Domain::CtNorm);
    v.data = {0.0f, 0.5f, 1.0f, 0.25f, 0.75f, 0.1f,
              0.9f, 0.2f, 0.3f, 0.4f, 0.6f, 0.8f};
    const auto dir = (temp_dir() / "slices").string();
    auto names = export_slices_pgm(v, dir, "vol");
    REQUIRE(names.size() == 2);
    CHECK(names[0] == "vol_z000.pgm");
    std::ifstream is(fs::path(dir) / names[0], std::ios::binary);
    std::string header;
    std::getline(is, header);
    CHECK(header == "P5");
    int w = 0, h = 0, maxv = 0;
    is >> w >> h >> maxv;
    CHECK(w == 3);
    CHECK(h == 2);
    CHECK(maxv == 255);
    is.get();
    std::string pixels(6, '\0');
    is.read(pixels.data(), 6);
    CHECK(static_cast<unsigned char>(pixels[0]) == 0);    // min -> 0
    CHECK(static_cast<unsigned char>(pixels[2]) == 255);  // max -> 255
}

TEST_CASE("domain tags keep their wire order") {
    CHECK(static_cast<int>(Domain::MrRaw) == 0);
    CHECK(static_cast<int>(Domain::MrNorm) == 1);
    CHECK(static_cast<int>(Domain::CtHu) == 2);
    CHECK(static_cast<int>(Domain::CtNorm) == 3);
    CHECK(static_cast<int>(Domain::CtHighFreq) == 4);
    CHECK(static_cast<int>(Domain::CtLowFreq) == 5);
}
