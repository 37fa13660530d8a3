#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "breakdown/common.hpp"
#include "breakdown/tensor.hpp"

namespace breakdown {

struct ModelConfig {
    int vocab_size = 8000;
    int max_len = 128;
    int hidden_dim = 128;
    int num_layers = 4;
    int num_heads = 4;
    int ffn_dim = 512;
    double dropout_rate = 0.1;
    int num_labels = 3;
    bool tie_mlm = true;
    uint64_t seed = 0;

    std::vector<std::string> validate() const {
        std::vector<std::string> errs;
        if (vocab_size <= 0) errs.push_back("vocab_size must be positive");
        if (max_len < 8) errs.push_back("max_len must be >= 8");
        if (hidden_dim <= 0) errs.push_back("hidden_dim must be positive");
        if (num_layers <= 0) errs.push_back("num_layers must be positive");
        if (num_heads <= 0) errs.push_back("num_heads must be positive");
        if (ffn_dim <= 0) errs.push_back("ffn_dim must be positive");
        if (num_heads > 0 && hidden_dim % num_heads != 0)
            errs.push_back("hidden_dim must be divisible by num_heads");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0)
            errs.push_back("dropout_rate must be in [0, 1)");
        if (num_labels != 3) errs.push_back("num_labels must be 3");
        return errs;
    }

    void require_valid() const {
        auto errs = validate();
        if (!errs.empty()) {
            std::string msg = "invalid model config:";
            for (const auto& e : errs) msg += " " + e + ";";
            throw input_error(msg);
        }
    }

    int head_dim() const { return hidden_dim / num_heads; }

    bool same_shapes(const ModelConfig& o) const {
        return vocab_size == o.vocab_size && max_len == o.max_len &&
               hidden_dim == o.hidden_dim && num_layers == o.num_layers &&
               num_heads == o.num_heads && ffn_dim == o.ffn_dim &&
               num_labels == o.num_labels && tie_mlm == o.tie_mlm;
    }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"vocab_size", c.vocab_size}, {"max_len", c.max_len},
                       {"hidden_dim", c.hidden_dim}, {"num_layers", c.num_layers},
                       {"num_heads", c.num_heads},   {"ffn_dim", c.ffn_dim},
                       {"dropout_rate", c.dropout_rate},
                       {"num_labels", c.num_labels}, {"tie_mlm", c.tie_mlm},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    j.at("vocab_size").get_to(c.vocab_size);
    j.at("max_len").get_to(c.max_len);
    j.at("hidden_dim").get_to(c.hidden_dim);
    j.at("num_layers").get_to(c.num_layers);
    j.at("num_heads").get_to(c.num_heads);
    j.at("ffn_dim").get_to(c.ffn_dim);
    j.at("dropout_rate").get_to(c.dropout_rate);
    j.at("num_labels").get_to(c.num_labels);
    j.at("tie_mlm").get_to(c.tie_mlm);
    j.at("seed").get_to(c.seed);
}

template <typename T>
struct LayerParams {
    Mat<T> attn_q_w, attn_q_b;
    Mat<T> attn_k_w, attn_k_b;
    Mat<T> attn_v_w, attn_v_b;
    Mat<T> attn_out_w, attn_out_b;
    Mat<T> attn_ln_gain, attn_ln_bias;
    Mat<T> ffn_in_w, ffn_in_b;
    Mat<T> ffn_out_w, ffn_out_b;
    Mat<T> ffn_ln_gain, ffn_ln_bias;
};

/// All learnable tensors. Linear weights are stored [in, out] (y = x W + b);
/// the MLM output matrix is [vocab, hidden] and applied transposed so the
/// tied and untied paths share one code shape.
template <typename T>
struct ModelParams {
    Mat<T> token_embedding;     // [vocab, hidden]
    Mat<T> position_embedding;  // [max_len, hidden]
    Mat<T> segment_embedding;   // [2, hidden]
    Mat<T> embed_ln_gain, embed_ln_bias;
    std::vector<LayerParams<T>> layers;
    Mat<T> mlm_transform_w, mlm_transform_b;
    Mat<T> mlm_ln_gain, mlm_ln_bias;
    Mat<T> mlm_out_w;  // [vocab, hidden]; empty when tied to token_embedding
    Mat<T> mlm_out_b;  // [1, vocab]
    Mat<T> pooler_w, pooler_b;  // [hidden, hidden], [1, hidden]
    Mat<T> cls_w, cls_b;        // [hidden, 3], [1, 3]
    bool tied = true;

    // Visits every tensor in the fixed checkpoint order.
    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        fn("token_embedding", token_embedding);
        fn("position_embedding", position_embedding);
        fn("segment_embedding", segment_embedding);
        fn("embed_ln_gain", embed_ln_gain);
        fn("embed_ln_bias", embed_ln_bias);
        for (size_t l = 0; l < layers.size(); ++l) {
            auto& L = layers[l];
            std::string prefix = "layer" + std::to_string(l) + ".";
            fn(prefix + "attn_q_w", L.attn_q_w);
            fn(prefix + "attn_q_b", L.attn_q_b);
            fn(prefix + "attn_k_w", L.attn_k_w);
            fn(prefix + "attn_k_b", L.attn_k_b);
            fn(prefix + "attn_v_w", L.attn_v_w);
            fn(prefix + "attn_v_b", L.attn_v_b);
            fn(prefix + "attn_out_w", L.attn_out_w);
            fn(prefix + "attn_out_b", L.attn_out_b);
            fn(prefix + "attn_ln_gain", L.attn_ln_gain);
            fn(prefix + "attn_ln_bias", L.attn_ln_bias);
            fn(prefix + "ffn_in_w", L.ffn_in_w);
            fn(prefix + "ffn_in_b", L.ffn_in_b);
            fn(prefix + "ffn_out_w", L.ffn_out_w);
            fn(prefix + "ffn_out_b", L.ffn_out_b);
            fn(prefix + "ffn_ln_gain", L.ffn_ln_gain);
            fn(prefix + "ffn_ln_bias", L.ffn_ln_bias);
        }
        fn("mlm_transform_w", mlm_transform_w);
        fn("mlm_transform_b", mlm_transform_b);
        fn("mlm_ln_gain", mlm_ln_gain);
        fn("mlm_ln_bias", mlm_ln_bias);
        if (!tied) fn("mlm_out_w", mlm_out_w);
        fn("mlm_out_b", mlm_out_b);
        fn("pooler_w", pooler_w);
        fn("pooler_b", pooler_b);
        fn("cls_w", cls_w);
        fn("cls_b", cls_b);
    }

    template <typename Fn>
    void for_each_tensor(Fn&& fn) const {
        const_cast<ModelParams*>(this)->for_each_tensor(
            [&](const std::string& name, Mat<T>& m) { fn(name, static_cast<const Mat<T>&>(m)); });
    }

    size_t num_parameters() const {
        size_t n = 0;
        for_each_tensor([&](const std::string&, const Mat<T>& m) { n += m.size(); });
        return n;
    }

    bool all_finite() const {
        bool ok = true;
        for_each_tensor([&](const std::string&, const Mat<T>& m) {
            for (T v : m.a)
                if (!std::isfinite(static_cast<double>(v))) ok = false;
        });
        return ok;
    }
};

namespace detail {

// Normal(0, std) truncated at two standard deviations, matched to the usual
// BERT initializer. Box-Muller on explicit uniform draws keeps the stream
// portable across standard libraries.
template <typename T>
void fill_truncated_normal(Mat<T>& m, double stddev, Rng& rng) {
    for (auto& v : m.a) {
        double z;
        do {
            double u1 = next_unit(rng);
            double u2 = next_unit(rng);
            if (u1 <= 0.0) u1 = 1e-300;
            z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
        } while (std::abs(z) > 2.0);
        v = static_cast<T>(z * stddev);
    }
}

template <typename T>
void fill_const(Mat<T>& m, T value) {
    std::fill(m.a.begin(), m.a.end(), value);
}

}  // namespace detail

template <typename T>
ModelParams<T> make_param_shapes(const ModelConfig& cfg) {
    cfg.require_valid();
    const int H = cfg.hidden_dim, F = cfg.ffn_dim, V = cfg.vocab_size;
    ModelParams<T> p;
    p.tied = cfg.tie_mlm;
    p.token_embedding = Mat<T>(V, H);
    p.position_embedding = Mat<T>(cfg.max_len, H);
    p.segment_embedding = Mat<T>(2, H);
    p.embed_ln_gain = Mat<T>(1, H);
    p.embed_ln_bias = Mat<T>(1, H);
    p.layers.resize(static_cast<size_t>(cfg.num_layers));
    for (auto& L : p.layers) {
        L.attn_q_w = Mat<T>(H, H);
        L.attn_q_b = Mat<T>(1, H);
        L.attn_k_w = Mat<T>(H, H);
        L.attn_k_b = Mat<T>(1, H);
        L.attn_v_w = Mat<T>(H, H);
        L.attn_v_b = Mat<T>(1, H);
        L.attn_out_w = Mat<T>(H, H);
        L.attn_out_b = Mat<T>(1, H);
        L.attn_ln_gain = Mat<T>(1, H);
        L.attn_ln_bias = Mat<T>(1, H);
        L.ffn_in_w = Mat<T>(H, F);
        L.ffn_in_b = Mat<T>(1, F);
        L.ffn_out_w = Mat<T>(F, H);
        L.ffn_out_b = Mat<T>(1, H);
        L.ffn_ln_gain = Mat<T>(1, H);
        L.ffn_ln_bias = Mat<T>(1, H);
    }
    p.mlm_transform_w = Mat<T>(H, H);
    p.mlm_transform_b = Mat<T>(1, H);
    p.mlm_ln_gain = Mat<T>(1, H);
    p.mlm_ln_bias = Mat<T>(1, H);
    if (!cfg.tie_mlm) p.mlm_out_w = Mat<T>(V, H);
    p.mlm_out_b = Mat<T>(1, V);
    p.pooler_w = Mat<T>(H, H);
    p.pooler_b = Mat<T>(1, H);
    p.cls_w = Mat<T>(H, cfg.num_labels);
    p.cls_b = Mat<T>(1, cfg.num_labels);
    return p;
}

/// Deterministic initialization from cfg.seed: weights ~ truncated
/// normal(0, 0.02), layer-norm gain 1 / offset 0, biases 0.
template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg) {
    ModelParams<T> p = make_param_shapes<T>(cfg);
    Rng rng(cfg.seed);
    p.for_each_tensor([&](const std::string& name, Mat<T>& m) {
        bool is_gain = name.find("ln_gain") != std::string::npos;
        bool is_bias = !is_gain && (name.find("_b") == name.size() - 2 ||
                                    name.find("ln_bias") != std::string::npos);
        if (is_gain) {
            detail::fill_const(m, T(1));
        } else if (is_bias) {
            detail::fill_const(m, T(0));
        } else {
            detail::fill_truncated_normal(m, 0.02, rng);
        }
    });
    return p;
}

template <typename T>
ModelParams<T> zeros_like(const ModelParams<T>& p) {
    ModelParams<T> z = p;
    z.for_each_tensor([](const std::string&, Mat<T>& m) { m.zero(); });
    return z;
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
    ModelParams<To> out;
    out.tied = p.tied;
    auto conv = [](const Mat<From>& src) {
        Mat<To> dst(src.rows, src.cols);
        for (size_t i = 0; i < src.a.size(); ++i) dst.a[i] = static_cast<To>(src.a[i]);
        return dst;
    };
    out.token_embedding = conv(p.token_embedding);
    out.position_embedding = conv(p.position_embedding);
    out.segment_embedding = conv(p.segment_embedding);
    out.embed_ln_gain = conv(p.embed_ln_gain);
    out.embed_ln_bias = conv(p.embed_ln_bias);
    out.layers.resize(p.layers.size());
    for (size_t l = 0; l < p.layers.size(); ++l) {
        const auto& s = p.layers[l];
        auto& d = out.layers[l];
        d.attn_q_w = conv(s.attn_q_w);
        d.attn_q_b = conv(s.attn_q_b);
        d.attn_k_w = conv(s.attn_k_w);
        d.attn_k_b = conv(s.attn_k_b);
        d.attn_v_w = conv(s.attn_v_w);
        d.attn_v_b = conv(s.attn_v_b);
        d.attn_out_w = conv(s.attn_out_w);
        d.attn_out_b = conv(s.attn_out_b);
        d.attn_ln_gain = conv(s.attn_ln_gain);
        d.attn_ln_bias = conv(s.attn_ln_bias);
        d.ffn_in_w = conv(s.ffn_in_w);
        d.ffn_in_b = conv(s.ffn_in_b);
        d.ffn_out_w = conv(s.ffn_out_w);
        d.ffn_out_b = conv(s.ffn_out_b);
        d.ffn_ln_gain = conv(s.ffn_ln_gain);
        d.ffn_ln_bias = conv(s.ffn_ln_bias);
    }
    out.mlm_transform_w = conv(p.mlm_transform_w);
    out.mlm_transform_b = conv(p.mlm_transform_b);
    out.mlm_ln_gain = conv(p.mlm_ln_gain);
    out.mlm_ln_bias = conv(p.mlm_ln_bias);
    out.mlm_out_w = conv(p.mlm_out_w);
    out.mlm_out_b = conv(p.mlm_out_b);
    out.pooler_w = conv(p.pooler_w);
    out.pooler_b = conv(p.pooler_b);
    out.cls_w = conv(p.cls_w);
    out.cls_b = conv(p.cls_b);
    return out;
}

using ModelParamsF = ModelParams<float>;
using ModelParamsD = ModelParams<double>;

}  // namespace breakdown
