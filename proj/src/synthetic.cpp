#include "fsct/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace fsct {

namespace {

struct Blob {
    double cz, cy, cx, radius, amp;
};

} // namespace

std::pair<Volume, Volume> generate_pair(const GeneratorSpec& spec) {
    if (spec.d < 8 || spec.h < 8 || spec.w < 8)
        throw ArgumentError("generate_pair: dims must be at least 8 per axis");
    CounterRng rng(spec.seed);

    const int mind = std::min(spec.d, std::min(spec.h, spec.w));
    std::vector<Blob> blobs;
    blobs.reserve(spec.n_blobs);
    for (int b = 0; b < spec.n_blobs; ++b) {
        Blob bl;
        bl.cz = rng.uniform(0.2, 0.8) * spec.d;
        bl.cy = rng.uniform(0.2, 0.8) * spec.h;
        bl.cx = rng.uniform(0.2, 0.8) * spec.w;
        bl.radius = rng.uniform(0.12, 0.30) * mind;
        bl.amp = rng.uniform(0.5, 1.0);
        blobs.push_back(bl);
    }

    const std::size_t n = static_cast<std::size_t>(spec.d) * spec.h * spec.w;
    std::vector<double> field(n, 0.0);
    std::size_t i = 0;
    for (int z = 0; z < spec.d; ++z)
        for (int y = 0; y < spec.h; ++y)
            for (int x = 0; x < spec.w; ++x, ++i) {
                double f = 0.0;
                for (const Blob& b : blobs) {
                    const double dz = z - b.cz, dy = y - b.cy, dx = x - b.cx;
                    const double r2 = dz * dz + dy * dy + dx * dx;
                    f += b.amp * std::exp(-r2 / (2.0 * b.radius * b.radius));
                }
                field[i] = f / (0.5 + f);  // squashed into [0,1)
            }

    Volume mr(spec.d, spec.h, spec.w, Domain::MrRaw);
    mr.spacing = spec.spacing;
    const double noise_amp = spec.noise_sigma * std::sqrt(3.0);  // uniform, matched std
    for (std::size_t j = 0; j < n; ++j) {
        const double base = 0.15 + 0.80 * std::pow(field[j], 0.7);
        const double noise = noise_amp * (2.0 * rng.uniform() - 1.0);
        mr.data[j] = static_cast<float>(base + noise);
    }

    Volume ct(spec.d, spec.h, spec.w, Domain::CtHu);
    ct.spacing = spec.spacing;
    for (std::size_t j = 0; j < n; ++j)
        ct.data[j] = static_cast<float>(-1000.0 + 1900.0 * std::pow(field[j], 1.3));

    // Thin high-HU shells on the latent field's gradient ridges; these carry
    // the volume's high-frequency content, like bone in a head CT.
    std::vector<double> gradmag(n, 0.0);
    double gmax = 0.0;
    auto fld = [&](int z, int y, int x) {
        z = std::clamp(z, 0, spec.d - 1);
        y = std::clamp(y, 0, spec.h - 1);
        x = std::clamp(x, 0, spec.w - 1);
        return field[(static_cast<std::size_t>(z) * spec.h + y) * spec.w + x];
    };
    i = 0;
    for (int z = 0; z < spec.d; ++z)
        for (int y = 0; y < spec.h; ++y)
            for (int x = 0; x < spec.w; ++x, ++i) {
                const double gz = 0.5 * (fld(z + 1, y, x) - fld(z - 1, y, x));
                const double gy = 0.5 * (fld(z, y + 1, x) - fld(z, y - 1, x));
                const double gx = 0.5 * (fld(z, y, x + 1) - fld(z, y, x - 1));
                gradmag[i] = std::sqrt(gz * gz + gy * gy + gx * gx);
                gmax = std::max(gmax, gradmag[i]);
            }
    if (gmax > 0.0 && spec.shell_contrast != 0.0) {
        const double thresh = 0.5 * gmax;
        for (std::size_t j = 0; j < n; ++j)
            if (gradmag[j] > thresh)
                ct.data[j] = static_cast<float>(ct.data[j] + spec.shell_contrast);
    }
    for (auto& f : ct.data)
        f = std::clamp(f, -1024.0f, 2252.7f);

    return {std::move(mr), std::move(ct)};
}

DatasetManifest generate_dataset(const GeneratorSpec& spec, int n_pairs,
                                 const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (n_pairs < 0) throw ArgumentError("generate_dataset: negative pair count");
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    DatasetManifest m;
    for (int i = 0; i < n_pairs; ++i) {
        GeneratorSpec s = spec;
        s.seed = spec.seed + static_cast<std::uint64_t>(i);
        auto [mr, ct] = generate_pair(s);
        char mr_name[32], ct_name[32];
        std::snprintf(mr_name, sizeof(mr_name), "pair_%03d.mr.fsv", i);
        std::snprintf(ct_name, sizeof(ct_name), "pair_%03d.ct.fsv", i);
        write_volume(mr, (fs::path(out_dir) / mr_name).string());
        write_volume(ct, (fs::path(out_dir) / ct_name).string());
        m.entries.push_back({i, mr_name, ct_name, s.seed});
    }
    write_manifest(m, (fs::path(out_dir) / "manifest.txt").string());
    return m;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError(detail::cat("cannot open for writing: ", path));
    for (const auto& e : m.entries)
        os << e.index << ", " << e.mr_path << ", " << e.ct_path << ", " << e.seed << "\n";
    if (!os) throw IoError(detail::cat("short write: ", path));
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError(detail::cat("cannot open manifest: ", path));
    DatasetManifest m;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        ManifestEntry e;
        std::vector<std::string> parts;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            std::string tok = line.substr(start, comma == std::string::npos
                                                     ? std::string::npos
                                                     : comma - start);
            const auto b = tok.find_first_not_of(" \t");
            const auto en = tok.find_last_not_of(" \t\r");
            parts.push_back(b == std::string::npos ? "" : tok.substr(b, en - b + 1));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (parts.size() != 4)
            throw FormatError(detail::cat(path, ":", lineno, ": expected 4 fields"));
        try {
            e.index = std::stoi(parts[0]);
            e.mr_path = parts[1];
            e.ct_path = parts[2];
            e.seed = std::stoull(parts[3]);
        } catch (const std::exception&) {
            throw FormatError(detail::cat(path, ":", lineno, ": malformed manifest line"));
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

std::vector<std::pair<Volume, Volume>> load_dataset(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    const DatasetManifest m = read_manifest(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<std::pair<Volume, Volume>> out;
    out.reserve(m.entries.size());
    for (const auto& e : m.entries) {
        const fs::path mrp =
            fs::path(e.mr_path).is_absolute() ? fs::path(e.mr_path) : base / e.mr_path;
        const fs::path ctp =
            fs::path(e.ct_path).is_absolute() ? fs::path(e.ct_path) : base / e.ct_path;
        out.emplace_back(read_volume(mrp.string()), read_volume(ctp.string()));
    }
    return out;
}

} // namespace fsct
