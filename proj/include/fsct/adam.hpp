#pragma once

#include <cmath>
#include <vector>

#include "fsct/tensor.hpp"

namespace fsct {

template <class T>
struct AdamState {
    T lr = T(0.001);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
    long long t = 0;
    std::vector<std::vector<T>> m, v;

    static AdamState for_params(const std::vector<TensorPtr<T>>& params,
                                T lr = T(0.001), T beta1 = T(0.9), T beta2 = T(0.999),
                                T eps = T(1e-8)) {
        AdamState st;
        st.lr = lr;
        st.beta1 = beta1;
        st.beta2 = beta2;
        st.eps = eps;
        st.m.reserve(params.size());
        st.v.reserve(params.size());
        for (const auto& p : params) {
            st.m.emplace_back(p->numel(), T(0));
            st.v.emplace_back(p->numel(), T(0));
        }
        return st;
    }
};

// Standard bias-corrected Adam update, applied in place; grads are zeroed
// afterwards so the next backward pass starts clean.
template <class T>
void adam_step(const std::vector<TensorPtr<T>>& params, AdamState<T>& state) {
    if (params.size() != state.m.size() || params.size() != state.v.size())
        throw StateError("adam_step: state does not match parameter count");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->grad.size() != params[i]->numel())
            throw StateError(detail::cat("adam_step: parameter ", i, " has no gradient"));
        if (state.m[i].size() != params[i]->numel())
            throw StateError(detail::cat("adam_step: moment shape mismatch on parameter ", i));
    }
    state.t += 1;
    const T bc1 = T(1) - std::pow(state.beta1, static_cast<T>(state.t));
    const T bc2 = T(1) - std::pow(state.beta2, static_cast<T>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < p.numel(); ++j) {
            const T gj = p.grad[j];
            m[j] = state.beta1 * m[j] + (T(1) - state.beta1) * gj;
            v[j] = state.beta2 * v[j] + (T(1) - state.beta2) * gj * gj;
            const T mhat = m[j] / bc1;
            const T vhat = v[j] / bc2;
            p.value[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
        p.zero_grad();
    }
}

template <class T>
void zero_grad(const std::vector<TensorPtr<T>>& params) {
    for (const auto& p : params) p->zero_grad();
}

} // namespace fsct
