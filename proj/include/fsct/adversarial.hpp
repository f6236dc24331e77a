#pragma once

// High-frequency adversarial learning: an encoder-style critic scored per
// volume, trained with the relativistic average formulation. The critic only
// ever sees high-frequency CT volumes.

#include <vector>

#include "fsct/network.hpp"
#include "fsct/tensor.hpp"
#include "fsct/volume.hpp"

namespace fsct {

template <class T>
struct Discriminator {
    int channels = 32;
    int depth = 2;
    std::vector<nn::Conv3dLayer<T>> convs;  // 2 per level, avg-pooled between
    TensorPtr<T> head_w;                    // [C << (depth-1)]
    TensorPtr<T> head_b;                    // [1]

    static Discriminator he_init(int channels, int depth, CounterRng& rng) {
        if (depth < 1) throw ArgumentError("discriminator: depth must be at least 1");
        Discriminator d;
        d.channels = channels;
        d.depth = depth;
        int cin = 1;
        for (int l = 0; l < depth; ++l) {
            const int cl = channels << l;
            d.convs.push_back(nn::he_conv3d<T>(cl, cin, 3, rng));
            d.convs.push_back(nn::he_conv3d<T>(cl, cl, 3, rng));
            cin = cl;
        }
        d.head_w = make_param<T>({cin});
        d.head_b = make_param<T>({1});
        const double stddev = std::sqrt(1.0 / cin);
        for (auto& v : d.head_w->value) v = static_cast<T>(stddev * rng.normal());
        return d;
    }

    int downsample_factor() const { return 1 << depth; }

    TensorPtr<T> forward(Graph<T>& g, const TensorPtr<T>& y_high) const {
        detail::require(y_high->shape.size() == 4 && y_high->shape[0] == 1,
                        "discriminator: input must be [1,D,H,W]");
        const int factor = downsample_factor();
        const char* names[3] = {"depth", "height", "width"};
        for (int i = 0; i < 3; ++i) {
            const int ext = y_high->shape[1 + i];
            if (ext % factor != 0)
                throw ShapeError(detail::cat("discriminator: ", names[i], " axis extent ",
                                             ext, " is not divisible by ", factor));
        }
        auto h = y_high;
        for (int l = 0; l < depth; ++l) {
            h = relu(g, conv3d(g, h, convs[2 * l].w, convs[2 * l].b));
            h = relu(g, conv3d(g, h, convs[2 * l + 1].w, convs[2 * l + 1].b));
            h = avg_pool2(g, h);
        }
        return linear_scalar(g, mean_spatial(g, h), head_w, head_b);
    }

    std::vector<TensorPtr<T>> params() const {
        std::vector<TensorPtr<T>> out;
        for (const auto& l : convs) {
            out.push_back(l.w);
            out.push_back(l.b);
        }
        out.push_back(head_w);
        out.push_back(head_b);
        return out;
    }
};

// Relativistic average losses over score batches. With sigma the logistic
// function and log terms clamped at probability 1e-12:
//   d = -mean log sigma(s_r - mean s_f) - mean log(1 - sigma(s_f - mean s_r))
//   g = -mean log sigma(s_f - mean s_r) - mean log(1 - sigma(s_r - mean s_f))
namespace detail_ragan {

template <class T>
TensorPtr<T> relativistic_pair(Graph<T>& g, const std::vector<TensorPtr<T>>& pos,
                               const std::vector<TensorPtr<T>>& neg) {
    if (pos.empty() || neg.empty())
        throw ArgumentError("relativistic loss: score lists must be non-empty");
    auto pos_s = stack_scalars(g, pos);
    auto neg_s = stack_scalars(g, neg);
    auto neg_mean = mean_all(g, neg_s);
    auto pos_mean = mean_all(g, pos_s);
    // -mean log sigma(pos - mean(neg))
    auto t1 = scale(g, mean_all(g, log_sigmoid_clamped(g, sub_broadcast(g, pos_s, neg_mean))),
                    T(-1));
    // -mean log(1 - sigma(neg - mean(pos))) == -mean log sigma(mean(pos) - neg)
    auto t2 = scale(g,
                    mean_all(g, log_sigmoid_clamped(
                                    g, scale(g, sub_broadcast(g, neg_s, pos_mean), T(-1)))),
                    T(-1));
    return add(g, t1, t2);
}

} // namespace detail_ragan

template <class T>
TensorPtr<T> ragan_d_loss(Graph<T>& g, const std::vector<TensorPtr<T>>& real_scores,
                          const std::vector<TensorPtr<T>>& fake_scores) {
    return detail_ragan::relativistic_pair(g, real_scores, fake_scores);
}

template <class T>
TensorPtr<T> ragan_g_loss(Graph<T>& g, const std::vector<TensorPtr<T>>& real_scores,
                          const std::vector<TensorPtr<T>>& fake_scores) {
    return detail_ragan::relativistic_pair(g, fake_scores, real_scores);
}

// Guard for the applied-to-high-frequencies contract: ground-truth critic
// inputs must come from the high-frequency band.
inline void require_high_freq(const Volume& v) {
    if (v.domain != Domain::CtHighFreq)
        throw ArgumentError(detail::cat(
            "discriminator input must be CT_HIGHFREQ, got ", domain_name(v.domain)));
}

} // namespace fsct
