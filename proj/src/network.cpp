#include "fsct/network.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace fsct {

const char* base_kind_name(BaseKind k) {
    return k == BaseKind::FcNet ? "fcnet" : "unet";
}

BaseKind base_kind_from_string(const std::string& s) {
    if (s == "fcnet") return BaseKind::FcNet;
    if (s == "unet") return BaseKind::UNet;
    throw ArgumentError(detail::cat("unknown base network kind: ", s));
}

Arrangement arrangement_from_string(const std::string& s) {
    if (s == "stack3d") return Arrangement::Stack3d;
    if (s == "large_kernel") return Arrangement::LargeKernel;
    if (s == "factorized" || s == "factorized_1d") return Arrangement::Factorized1d;
    throw ArgumentError(detail::cat("unknown arrangement: ", s));
}

long long param_count(Arrangement arr, int layers, int channels, int k) {
    if (channels <= 0 || k <= 0) throw ArgumentError("param_count: C and k must be positive");
    if (k % 2 == 0) throw ArgumentError("param_count: kernel size must be odd");
    const long long c2 = static_cast<long long>(channels) * channels;
    switch (arr) {
        case Arrangement::Stack3d:
        case Arrangement::LargeKernel:
            if (layers <= 0) throw ArgumentError("param_count: layers must be positive");
            return static_cast<long long>(layers) * c2 * k * k * k;
        case Arrangement::Factorized1d:
            return 9ll * c2 * k;
    }
    throw ArgumentError("param_count: unknown arrangement");
}

namespace {

constexpr char kMagic[4] = {'F', 'S', 'M', '1'};

void put_u32(std::string& buf, std::uint32_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
    buf.push_back(static_cast<char>((v >> 16) & 0xff));
    buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

struct Reader {
    const unsigned char* p;
    std::size_t size;
    std::size_t pos = 0;
    std::string path;

    std::uint32_t u32() {
        if (pos + 4 > size)
            throw FormatError(detail::cat(path, ": truncated checkpoint at byte offset ", pos));
        const std::uint32_t v = static_cast<std::uint32_t>(p[pos]) |
                                (static_cast<std::uint32_t>(p[pos + 1]) << 8) |
                                (static_cast<std::uint32_t>(p[pos + 2]) << 16) |
                                (static_cast<std::uint32_t>(p[pos + 3]) << 24);
        pos += 4;
        return v;
    }
    std::uint8_t u8() {
        if (pos + 1 > size)
            throw FormatError(detail::cat(path, ": truncated checkpoint at byte offset ", pos));
        return p[pos++];
    }
    std::string bytes(std::size_t n) {
        if (pos + n > size)
            throw FormatError(detail::cat(path, ": truncated checkpoint at byte offset ", pos));
        std::string s(reinterpret_cast<const char*>(p + pos), n);
        pos += n;
        return s;
    }
};

void write_records(std::string& buf,
                   const std::vector<std::pair<std::string, TensorPtr<float>>>& named) {
    put_u32(buf, static_cast<std::uint32_t>(named.size()));
    for (const auto& [name, t] : named) {
        put_u32(buf, static_cast<std::uint32_t>(name.size()));
        buf.append(name);
        put_u32(buf, static_cast<std::uint32_t>(t->shape.size()));
        for (int e : t->shape) put_u32(buf, static_cast<std::uint32_t>(e));
        for (float v : t->value) put_u32(buf, std::bit_cast<std::uint32_t>(v));
    }
}

void save_impl(const std::vector<std::pair<std::string, TensorPtr<float>>>& named,
               const BaseNetworkConfig& cfg, int refine_k, bool baseline,
               const std::string& path) {
    std::string buf;
    buf.append(kMagic, 4);
    put_u32(buf, 1);  // container version
    buf.push_back(static_cast<char>(baseline ? 1 : 0));
    buf.push_back(static_cast<char>(cfg.kind == BaseKind::FcNet ? 0 : 1));
    put_u32(buf, static_cast<std::uint32_t>(cfg.channels));
    put_u32(buf, static_cast<std::uint32_t>(cfg.resolved_depth()));
    put_u32(buf, static_cast<std::uint32_t>(cfg.input_channels));
    put_u32(buf, static_cast<std::uint32_t>(refine_k));
    write_records(buf, named);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(detail::cat("cannot open for writing: ", path));
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!os) throw IoError(detail::cat("short write: ", path));
}

struct LoadedCheckpoint {
    CheckpointInfo info;
    std::map<std::string, TensorPtr<float>> tensors;
};

LoadedCheckpoint load_impl(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(detail::cat("cannot open checkpoint: ", path));
    std::string raw((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    Reader r{reinterpret_cast<const unsigned char*>(raw.data()), raw.size(), 0, path};

    if (raw.size() < 4 || std::memcmp(raw.data(), kMagic, 4) != 0)
        throw FormatError(detail::cat(path, ": bad checkpoint magic at byte offset 0"));
    r.pos = 4;
    if (r.u32() != 1)
        throw FormatError(detail::cat(path, ": unsupported checkpoint version"));

    LoadedCheckpoint out;
    out.info.baseline = r.u8() != 0;
    out.info.config.kind = r.u8() == 0 ? BaseKind::FcNet : BaseKind::UNet;
    out.info.config.channels = static_cast<int>(r.u32());
    out.info.config.depth = static_cast<int>(r.u32());
    out.info.config.input_channels = static_cast<int>(r.u32());
    out.info.refine_k = static_cast<int>(r.u32());

    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.bytes(name_len);
        const std::uint32_t rank = r.u32();
        std::vector<int> shape(rank);
        for (auto& e : shape) e = static_cast<int>(r.u32());
        auto t = make_tensor<float>(shape);
        for (auto& v : t->value) v = std::bit_cast<float>(r.u32());
        out.tensors.emplace(name, std::move(t));
    }
    return out;
}

void fill_named(const std::vector<std::pair<std::string, TensorPtr<float>>>& named,
                LoadedCheckpoint& ck, const std::string& path) {
    for (const auto& [name, t] : named) {
        auto it = ck.tensors.find(name);
        if (it == ck.tensors.end())
            throw FormatError(detail::cat(path, ": checkpoint is missing tensor ", name));
        if (it->second->shape != t->shape)
            throw FormatError(detail::cat(path, ": shape mismatch for tensor ", name));
        t->value = it->second->value;
    }
    if (ck.tensors.size() != named.size())
        throw FormatError(detail::cat(path, ": checkpoint holds ", ck.tensors.size(),
                                      " tensors, model expects ", named.size()));
}

} // namespace

void save_checkpoint(const SynthesisModel<float>& m, const BaseNetworkConfig& cfg,
                     const std::string& path) {
    save_impl(m.named_params(), cfg, m.refine.k, false, path);
}

void save_checkpoint(const BaselineModel<float>& m, const BaseNetworkConfig& cfg,
                     const std::string& path) {
    save_impl(m.named_params(), cfg, 0, true, path);
}

CheckpointInfo peek_checkpoint(const std::string& path) {
    return load_impl(path).info;
}

SynthesisModel<float> load_synthesis_checkpoint(const std::string& path, CheckpointInfo* info) {
    auto ck = load_impl(path);
    if (ck.info.baseline)
        throw FormatError(detail::cat(path, ": checkpoint holds a baseline model"));
    CounterRng rng(0);  // structure only; weights are overwritten below
    auto m = SynthesisModel<float>::he_init(ck.info.config, ck.info.refine_k, rng);
    fill_named(m.named_params(), ck, path);
    if (info) *info = ck.info;
    return m;
}

BaselineModel<float> load_baseline_checkpoint(const std::string& path, CheckpointInfo* info) {
    auto ck = load_impl(path);
    if (!ck.info.baseline)
        throw FormatError(detail::cat(path, ": checkpoint holds a synthesis model"));
    CounterRng rng(0);
    auto m = BaselineModel<float>::he_init(ck.info.config, rng);
    fill_named(m.named_params(), ck, path);
    if (info) *info = ck.info;
    return m;
}

} // namespace fsct
