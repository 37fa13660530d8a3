#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "breakdown/model.hpp"

namespace breakdown {

struct AdamConfig {
    double lr = 3e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 1.0;   // global gradient norm cap; <= 0 disables clipping
    int warmup_steps = 0;     // linear ramp from 0 to lr, then constant
};

/// Flat views over a parameter set's tensors, in checkpoint traversal order.
template <typename T>
std::vector<std::pair<T*, size_t>> tensor_views(ModelParams<T>& p) {
    std::vector<std::pair<T*, size_t>> out;
    p.for_each_tensor([&](const std::string&, auto& t) {
        if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Mat<T>>) {
            out.emplace_back(t.a.data(), t.a.size());
        } else {
            out.emplace_back(t.data(), t.size());
        }
    });
    return out;
}

template <typename T>
struct AdamState {
    ModelParams<T> m;
    ModelParams<T> v;
    int64_t step = 0;

    explicit AdamState(const ModelConfig& cfg)
        : m(make_param_shapes<T>(cfg)), v(make_param_shapes<T>(cfg)) {}
};

template <typename T>
double global_grad_norm(ModelParams<T>& grads) {
    double sq = 0.0;
    for (auto [ptr, n] : tensor_views(grads))
        for (size_t i = 0; i < n; ++i) sq += static_cast<double>(ptr[i]) * static_cast<double>(ptr[i]);
    return std::sqrt(sq);
}

/// One Adam update with global-norm clipping and linear warmup.
/// Returns the pre-clip gradient norm. With an effective learning rate of
/// zero the parameters are left bit-identical.
template <typename T>
double adam_step(ModelParams<T>& params, ModelParams<T>& grads, AdamState<T>& st,
                 const AdamConfig& cfg) {
    const double norm = global_grad_norm(grads);
    double gscale = 1.0;
    if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) gscale = cfg.clip_norm / norm;

    st.step += 1;
    double lr = cfg.lr;
    if (cfg.warmup_steps > 0 && st.step < cfg.warmup_steps)
        lr = cfg.lr * static_cast<double>(st.step) / static_cast<double>(cfg.warmup_steps);

    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));

    auto pv = tensor_views(params);
    auto gv = tensor_views(grads);
    auto mv = tensor_views(st.m);
    auto vv = tensor_views(st.v);
    for (size_t t = 0; t < pv.size(); ++t) {
        T* p = pv[t].first;
        T* g = gv[t].first;
        T* m = mv[t].first;
        T* v = vv[t].first;
        const size_t n = pv[t].second;
        for (size_t i = 0; i < n; ++i) {
            const double gi = static_cast<double>(g[i]) * gscale;
            const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
            const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            if (lr != 0.0) {
                const double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps);
                p[i] = static_cast<T>(static_cast<double>(p[i]) - update);
            }
        }
    }
    return norm;
}

template <typename T>
void zero_grads(ModelParams<T>& grads) {
    for (auto [ptr, n] : tensor_views(grads))
        for (size_t i = 0; i < n; ++i) ptr[i] = T(0);
}

}  // namespace breakdown
