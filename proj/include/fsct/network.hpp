#pragma once

// The synthesis model: a pluggable 3D base network whose penultimate features
// are split by a learned softmax gate into low- and high-frequency streams;
// the high stream runs through a symmetric factorized 1D-convolution block
// before both streams are projected to single-channel images.

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "fsct/synthetic.hpp"
#include "fsct/tensor.hpp"

namespace fsct {

enum class BaseKind { FcNet, UNet };

const char* base_kind_name(BaseKind k);
BaseKind base_kind_from_string(const std::string& s);

struct BaseNetworkConfig {
    BaseKind kind = BaseKind::FcNet;
    int channels = 32;
    int depth = 0;  // 0 -> default: 4 conv layers (FcNet) / 2 levels (UNet)
    int input_channels = 1;

    int resolved_depth() const {
        if (depth > 0) return depth;
        return kind == BaseKind::FcNet ? 4 : 2;
    }
};

enum class Arrangement { Stack3d, LargeKernel, Factorized1d };

Arrangement arrangement_from_string(const std::string& s);

// Weight-only parameter counts for the refinement arrangements compared in
// the ablation: stacked 3x3x3 blocks, single large dense kernels, and the
// nine-convolution factorized module (layers is ignored for the latter).
long long param_count(Arrangement arr, int layers, int channels, int k);

namespace nn {

template <class T>
struct Conv3dLayer {
    TensorPtr<T> w;  // [Cout,Cin,k,k,k]
    TensorPtr<T> b;  // [Cout]
};

template <class T>
struct Conv1dLayer {
    TensorPtr<T> w;  // [Cout,Cin,k]
    TensorPtr<T> b;  // [Cout]
    Axis axis = Axis::Depth;
};

template <class T>
Conv3dLayer<T> he_conv3d(int cout, int cin, int k, CounterRng& rng) {
    Conv3dLayer<T> l;
    l.w = make_param<T>({cout, cin, k, k, k});
    l.b = make_param<T>({cout});
    const double stddev = std::sqrt(2.0 / (static_cast<double>(cin) * k * k * k));
    for (auto& v : l.w->value) v = static_cast<T>(stddev * rng.normal());
    return l;
}

template <class T>
Conv1dLayer<T> he_conv1d(int cout, int cin, int k, Axis axis, CounterRng& rng) {
    Conv1dLayer<T> l;
    l.w = make_param<T>({cout, cin, k});
    l.b = make_param<T>({cout});
    l.axis = axis;
    const double stddev = std::sqrt(2.0 / (static_cast<double>(cin) * k));
    for (auto& v : l.w->value) v = static_cast<T>(stddev * rng.normal());
    return l;
}

} // namespace nn

template <class T>
struct BaseNetwork {
    BaseNetworkConfig cfg;
    std::vector<nn::Conv3dLayer<T>> fc;          // FcNet stack
    std::vector<nn::Conv3dLayer<T>> enc;         // UNet: 2 per level
    std::vector<nn::Conv3dLayer<T>> bottleneck;  // UNet: 2
    std::vector<nn::Conv3dLayer<T>> dec;         // UNet: 2 per level

    static BaseNetwork he_init(const BaseNetworkConfig& cfg, CounterRng& rng) {
        BaseNetwork net;
        net.cfg = cfg;
        const int c = cfg.channels;
        const int depth = cfg.resolved_depth();
        if (cfg.kind == BaseKind::FcNet) {
            int cin = cfg.input_channels;
            for (int i = 0; i < depth; ++i) {
                net.fc.push_back(nn::he_conv3d<T>(c, cin, 3, rng));
                cin = c;
            }
        } else {
            int cin = cfg.input_channels;
            for (int l = 0; l < depth; ++l) {
                const int cl = c << l;
                net.enc.push_back(nn::he_conv3d<T>(cl, cin, 3, rng));
                net.enc.push_back(nn::he_conv3d<T>(cl, cl, 3, rng));
                cin = cl;
            }
            const int cb = c << depth;
            net.bottleneck.push_back(nn::he_conv3d<T>(cb, cin, 3, rng));
            net.bottleneck.push_back(nn::he_conv3d<T>(cb, cb, 3, rng));
            for (int l = depth - 1; l >= 0; --l) {
                const int cl = c << l;
                const int cup = c << (l + 1);
                net.dec.push_back(nn::he_conv3d<T>(cl, cup + cl, 3, rng));
                net.dec.push_back(nn::he_conv3d<T>(cl, cl, 3, rng));
            }
        }
        return net;
    }

    void check_divisible(const TensorPtr<T>& x) const {
        const int depth = cfg.resolved_depth();
        const int factor = 1 << depth;
        const char* names[3] = {"depth", "height", "width"};
        for (int i = 0; i < 3; ++i) {
            const int ext = x->shape[1 + i];
            if (ext % factor != 0)
                throw ShapeError(detail::cat("unet: ", names[i], " axis extent ", ext,
                                             " is not divisible by ", factor));
        }
    }

    TensorPtr<T> forward(Graph<T>& g, const TensorPtr<T>& x) const {
        detail::require(x->shape.size() == 4, "base network: input must be [C,D,H,W]");
        if (cfg.kind == BaseKind::FcNet) {
            auto h = x;
            for (const auto& l : fc) h = relu(g, conv3d(g, h, l.w, l.b));
            return h;
        }
        check_divisible(x);
        const int depth = cfg.resolved_depth();
        auto h = x;
        std::vector<TensorPtr<T>> skips;
        for (int l = 0; l < depth; ++l) {
            h = relu(g, conv3d(g, h, enc[2 * l].w, enc[2 * l].b));
            h = relu(g, conv3d(g, h, enc[2 * l + 1].w, enc[2 * l + 1].b));
            skips.push_back(h);
            h = avg_pool2(g, h);
        }
        h = relu(g, conv3d(g, h, bottleneck[0].w, bottleneck[0].b));
        h = relu(g, conv3d(g, h, bottleneck[1].w, bottleneck[1].b));
        for (int l = depth - 1, i = 0; l >= 0; --l, ++i) {
            h = upsample_nearest2(g, h);
            h = concat_channels(g, h, skips[l]);
            h = relu(g, conv3d(g, h, dec[2 * i].w, dec[2 * i].b));
            h = relu(g, conv3d(g, h, dec[2 * i + 1].w, dec[2 * i + 1].b));
        }
        return h;
    }

    void collect_params(std::vector<std::pair<std::string, TensorPtr<T>>>& out) const {
        auto push = [&](const std::string& prefix, const std::vector<nn::Conv3dLayer<T>>& ls) {
            for (std::size_t i = 0; i < ls.size(); ++i) {
                out.emplace_back(detail::cat("base.", prefix, ".", i, ".w"), ls[i].w);
                out.emplace_back(detail::cat("base.", prefix, ".", i, ".b"), ls[i].b);
            }
        };
        push("fc", fc);
        push("enc", enc);
        push("bottleneck", bottleneck);
        push("dec", dec);
    }
};

template <class T>
struct DecompositionLayer {
    nn::Conv3dLayer<T> proj;  // C -> 2, k=3

    static DecompositionLayer he_init(int channels, CounterRng& rng) {
        DecompositionLayer l;
        l.proj = nn::he_conv3d<T>(2, channels, 3, rng);
        return l;
    }

    struct Out {
        TensorPtr<T> probs;   // [2,D,H,W], per-voxel softmax
        TensorPtr<T> v_low;   // [C,D,H,W]
        TensorPtr<T> v_high;  // [C,D,H,W]
    };

    Out forward(Graph<T>& g, const TensorPtr<T>& v) const {
        if (v->shape[0] != proj.w->shape[1])
            throw ShapeError(detail::cat("decomposition: expected ", proj.w->shape[1],
                                         " feature channels, got ", v->shape[0]));
        Out o;
        o.probs = softmax_channels(g, conv3d(g, v, proj.w, proj.b));
        auto p_low = channel_slice(g, o.probs, 0);
        auto p_high = channel_slice(g, o.probs, 1);
        o.v_low = broadcast_mul(g, v, p_low);
        o.v_high = broadcast_mul(g, v, p_high);
        return o;
    }
};

template <class T>
struct RefinementModule {
    int k = 13;
    bool relu_between = true;
    // branch i applies its three axis convolutions in cyclic order
    std::array<std::array<nn::Conv1dLayer<T>, 3>, 3> branches;

    static constexpr std::array<std::array<Axis, 3>, 3> kAxisOrders{{
        {Axis::Depth, Axis::Height, Axis::Width},
        {Axis::Height, Axis::Width, Axis::Depth},
        {Axis::Width, Axis::Depth, Axis::Height},
    }};

    static RefinementModule he_init(int channels, int k, CounterRng& rng) {
        if (k <= 0 || k % 2 == 0)
            throw ArgumentError("refinement: kernel size must be odd and positive");
        RefinementModule m;
        m.k = k;
        for (int b = 0; b < 3; ++b)
            for (int s = 0; s < 3; ++s)
                m.branches[b][s] = nn::he_conv1d<T>(channels, channels, k,
                                                    kAxisOrders[b][s], rng);
        return m;
    }

    TensorPtr<T> forward(Graph<T>& g, const TensorPtr<T>& v_high) const {
        TensorPtr<T> sum;
        for (int b = 0; b < 3; ++b) {
            auto h = v_high;
            for (int s = 0; s < 3; ++s) {
                h = conv1d_axis(g, h, branches[b][s].w, branches[b][s].axis,
                                branches[b][s].b);
                if (relu_between && s < 2) h = relu(g, h);
            }
            sum = sum ? add(g, sum, h) : h;
        }
        return sum;
    }

    long long weight_param_count() const {
        long long n = 0;
        for (const auto& br : branches)
            for (const auto& l : br) n += static_cast<long long>(l.w->numel());
        return n;
    }
};

template <class T>
struct SynthesisModel {
    BaseNetwork<T> base;
    DecompositionLayer<T> decomp;
    RefinementModule<T> refine;
    nn::Conv3dLayer<T> head_low;   // C -> 1, k=3
    nn::Conv3dLayer<T> head_high;  // C -> 1, k=3

    static SynthesisModel he_init(const BaseNetworkConfig& cfg, int refine_k,
                                  CounterRng& rng) {
        SynthesisModel m;
        m.base = BaseNetwork<T>::he_init(cfg, rng);
        m.decomp = DecompositionLayer<T>::he_init(cfg.channels, rng);
        m.refine = RefinementModule<T>::he_init(cfg.channels, refine_k, rng);
        m.head_low = nn::he_conv3d<T>(1, cfg.channels, 3, rng);
        m.head_high = nn::he_conv3d<T>(1, cfg.channels, 3, rng);
        return m;
    }

    struct Out {
        TensorPtr<T> y_low, y_high, y;  // [1,D,H,W] each
    };

    Out forward(Graph<T>& g, const TensorPtr<T>& x) const {
        auto v = base.forward(g, x);
        auto dec = decomp.forward(g, v);
        Out o;
        o.y_low = conv3d(g, dec.v_low, head_low.w, head_low.b);
        auto refined = refine.forward(g, dec.v_high);
        o.y_high = conv3d(g, refined, head_high.w, head_high.b);
        o.y = add(g, o.y_low, o.y_high);
        return o;
    }

    std::vector<std::pair<std::string, TensorPtr<T>>> named_params() const {
        std::vector<std::pair<std::string, TensorPtr<T>>> out;
        base.collect_params(out);
        out.emplace_back("decomp.w", decomp.proj.w);
        out.emplace_back("decomp.b", decomp.proj.b);
        for (int b = 0; b < 3; ++b)
            for (int s = 0; s < 3; ++s) {
                out.emplace_back(detail::cat("refine.", b, ".", s, ".w"),
                                 refine.branches[b][s].w);
                out.emplace_back(detail::cat("refine.", b, ".", s, ".b"),
                                 refine.branches[b][s].b);
            }
        out.emplace_back("head_low.w", head_low.w);
        out.emplace_back("head_low.b", head_low.b);
        out.emplace_back("head_high.w", head_high.w);
        out.emplace_back("head_high.b", head_high.b);
        return out;
    }

    std::vector<TensorPtr<T>> params() const {
        std::vector<TensorPtr<T>> out;
        for (auto& [name, t] : named_params()) out.push_back(t);
        return out;
    }
};

// Base network plus a single projection head, trained with the overall L1
// only; the comparison arm for the frequency-supervised model.
template <class T>
struct BaselineModel {
    BaseNetwork<T> base;
    nn::Conv3dLayer<T> head;  // C -> 1, k=3

    static BaselineModel he_init(const BaseNetworkConfig& cfg, CounterRng& rng) {
        BaselineModel m;
        m.base = BaseNetwork<T>::he_init(cfg, rng);
        m.head = nn::he_conv3d<T>(1, cfg.channels, 3, rng);
        return m;
    }

    TensorPtr<T> forward(Graph<T>& g, const TensorPtr<T>& x) const {
        return conv3d(g, base.forward(g, x), head.w, head.b);
    }

    std::vector<std::pair<std::string, TensorPtr<T>>> named_params() const {
        std::vector<std::pair<std::string, TensorPtr<T>>> out;
        base.collect_params(out);
        out.emplace_back("head.w", head.w);
        out.emplace_back("head.b", head.b);
        return out;
    }

    std::vector<TensorPtr<T>> params() const {
        std::vector<TensorPtr<T>> out;
        for (auto& [name, t] : named_params()) out.push_back(t);
        return out;
    }
};

// Checkpoint container: config header plus name-length-prefixed f32 records.
struct CheckpointInfo {
    bool baseline = false;
    BaseNetworkConfig config;
    int refine_k = 13;
};

void save_checkpoint(const SynthesisModel<float>& m, const BaseNetworkConfig& cfg,
                     const std::string& path);
void save_checkpoint(const BaselineModel<float>& m, const BaseNetworkConfig& cfg,
                     const std::string& path);
CheckpointInfo peek_checkpoint(const std::string& path);
SynthesisModel<float> load_synthesis_checkpoint(const std::string& path,
                                                CheckpointInfo* info = nullptr);
BaselineModel<float> load_baseline_checkpoint(const std::string& path,
                                              CheckpointInfo* info = nullptr);

} // namespace fsct
