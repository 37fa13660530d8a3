#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "breakdown/common.hpp"
#include "breakdown/losses.hpp"
#include "breakdown/model.hpp"
#include "breakdown/tensor.hpp"
#include "breakdown/wordpiece.hpp"

namespace breakdown {

inline constexpr double kLayerNormEps = 1e-5;

/// Execution context for a forward pass. Dropout is applied only when
/// `train` is set and the model config has a positive dropout rate.
struct RunContext {
    bool train = false;
    Rng* rng = nullptr;
};

namespace detail {

template <typename T>
void apply_dropout(Mat<T>& x, double rate, Rng& rng, std::vector<uint8_t>& mask) {
    mask.resize(x.a.size());
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    for (size_t i = 0; i < x.a.size(); ++i) {
        const bool keep = next_unit(rng) >= rate;
        mask[i] = keep ? 1 : 0;
        x.a[i] = keep ? x.a[i] * scale : T(0);
    }
}

template <typename T>
void dropout_backward(Mat<T>& dx, double rate, const std::vector<uint8_t>& mask) {
    if (mask.empty()) return;
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    for (size_t i = 0; i < dx.a.size(); ++i) dx.a[i] = mask[i] ? dx.a[i] * scale : T(0);
}

// gain/bias are [1, H] parameter mats.
template <typename T>
void layer_norm_forward(const Mat<T>& x, const Mat<T>& gain, const Mat<T>& bias,
                        Mat<T>& y, Mat<T>& xhat, std::vector<T>& inv_std) {
    const int H = x.cols;
    y = Mat<T>(x.rows, H);
    xhat = Mat<T>(x.rows, H);
    inv_std.assign(static_cast<size_t>(x.rows), T(0));
    const T* gn = gain.row(0);
    const T* bs = bias.row(0);
    for (int r = 0; r < x.rows; ++r) {
        const T* xr = x.row(r);
        T mean = T(0);
        for (int h = 0; h < H; ++h) mean += xr[h];
        mean /= static_cast<T>(H);
        T var = T(0);
        for (int h = 0; h < H; ++h) {
            const T d = xr[h] - mean;
            var += d * d;
        }
        var /= static_cast<T>(H);
        const T is = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
        inv_std[static_cast<size_t>(r)] = is;
        T* xh = xhat.row(r);
        T* yr = y.row(r);
        for (int h = 0; h < H; ++h) {
            xh[h] = (xr[h] - mean) * is;
            yr[h] = gn[h] * xh[h] + bs[h];
        }
    }
}

template <typename T>
void layer_norm_backward(const Mat<T>& dy, const Mat<T>& xhat,
                         const std::vector<T>& inv_std, const Mat<T>& gain,
                         Mat<T>& dx, Mat<T>& dgain, Mat<T>& dbias) {
    const int H = xhat.cols;
    dx = Mat<T>(dy.rows, H);
    const T* gn = gain.row(0);
    T* dgn = dgain.row(0);
    T* dbs = dbias.row(0);
    std::vector<T> g(static_cast<size_t>(H));
    for (int r = 0; r < dy.rows; ++r) {
        const T* dyr = dy.row(r);
        const T* xh = xhat.row(r);
        T mg = T(0), mgx = T(0);
        for (int h = 0; h < H; ++h) {
            g[static_cast<size_t>(h)] = dyr[h] * gn[h];
            mg += g[static_cast<size_t>(h)];
            mgx += g[static_cast<size_t>(h)] * xh[h];
            dgn[h] += dyr[h] * xh[h];
            dbs[h] += dyr[h];
        }
        mg /= static_cast<T>(H);
        mgx /= static_cast<T>(H);
        const T is = inv_std[static_cast<size_t>(r)];
        T* dxr = dx.row(r);
        for (int h = 0; h < H; ++h)
            dxr[h] = (g[static_cast<size_t>(h)] - mg - xh[h] * mgx) * is;
    }
}

// out is a [1, n] bias-gradient mat.
template <typename T>
void add_col_sums(const Mat<T>& m, Mat<T>& out) {
    T* o = out.row(0);
    for (int r = 0; r < m.rows; ++r) {
        const T* row = m.row(r);
        for (int c = 0; c < m.cols; ++c) o[c] += row[c];
    }
}

}  // namespace detail

template <typename T>
struct LayerCache {
    Mat<T> x_in;                     // layer input [L,H]
    Mat<T> q, k, v;                  // projections [L,H]
    Mat<T> attn_p;                   // softmax attention weights [heads*L, L]
    Mat<T> attn_pd;                  // attention weights after dropout
    std::vector<uint8_t> probs_drop;
    Mat<T> ctx;                      // concatenated head outputs [L,H]
    std::vector<uint8_t> attn_drop;
    Mat<T> xhat1;
    std::vector<T> inv_std1;
    Mat<T> u;                        // output of the first layer norm [L,H]
    Mat<T> z1;                       // FFN pre-activation [L,F]
    Mat<T> a1;                       // FFN activation [L,F]
    std::vector<uint8_t> ffn_drop;
    Mat<T> xhat2;
    std::vector<T> inv_std2;
};

template <typename T>
struct ForwardCache {
    int len = 0;
    std::vector<int32_t> ids;
    std::vector<int32_t> segs;
    Mat<T> xhat0;
    std::vector<T> inv_std0;
    std::vector<uint8_t> embed_drop;
    std::vector<LayerCache<T>> layers;
    Mat<T> hidden;                   // final hidden states [L,H]
};

inline void validate_pair(const EncodedPair& pair, const ModelConfig& cfg) {
    const size_t n = pair.token_ids.size();
    if (pair.segment_ids.size() != n || pair.attention_mask.size() != n)
        throw input_error("encoder: token/segment/mask arrays differ in length");
    if (pair.length <= 0 || static_cast<size_t>(pair.length) > n)
        throw input_error("encoder: length " + std::to_string(pair.length) +
                          " is inconsistent with the id arrays");
    if (pair.length > cfg.max_len)
        throw input_error("encoder: sequence length " + std::to_string(pair.length) +
                          " exceeds max_len " + std::to_string(cfg.max_len));
    for (int t = 0; t < pair.length; ++t) {
        const int32_t id = pair.token_ids[static_cast<size_t>(t)];
        if (id < 0 || id >= static_cast<int32_t>(cfg.vocab_size))
            throw input_error("encoder: token id " + std::to_string(id) +
                              " is outside the vocabulary (size " +
                              std::to_string(cfg.vocab_size) + ")");
        const int32_t seg = pair.segment_ids[static_cast<size_t>(t)];
        if (seg != 0 && seg != 1)
            throw input_error("encoder: segment id must be 0 or 1, got " +
                              std::to_string(seg));
    }
}

/// Runs the encoder over the real (non-PAD) positions of one example.
/// The cache retains every activation the backward pass needs.
template <typename T>
void encoder_forward(const ModelParams<T>& params, const ModelConfig& cfg,
                     const EncodedPair& pair, const RunContext& rc,
                     ForwardCache<T>& cache) {
    validate_pair(pair, cfg);
    const bool drop = rc.train && cfg.dropout_rate > 0.0;
    if (drop && rc.rng == nullptr)
        throw std::logic_error("encoder: training with dropout requires an rng");

    const int L = pair.length;
    const int H = cfg.hidden_dim;
    const int heads = cfg.num_heads;
    const int D = cfg.head_dim();
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(D)));

    cache.len = L;
    cache.ids.assign(pair.token_ids.begin(), pair.token_ids.begin() + L);
    cache.segs.assign(pair.segment_ids.begin(), pair.segment_ids.begin() + L);
    cache.layers.assign(static_cast<size_t>(cfg.num_layers), LayerCache<T>{});
    cache.embed_drop.clear();

    Mat<T> x(L, H);
    for (int t = 0; t < L; ++t) {
        const T* tok = params.token_embedding.row(cache.ids[static_cast<size_t>(t)]);
        const T* pos = params.position_embedding.row(t);
        const T* seg = params.segment_embedding.row(cache.segs[static_cast<size_t>(t)]);
        T* xr = x.row(t);
        for (int h = 0; h < H; ++h) xr[h] = tok[h] + pos[h] + seg[h];
    }
    Mat<T> h0;
    detail::layer_norm_forward(x, params.embed_ln_gain, params.embed_ln_bias, h0,
                               cache.xhat0, cache.inv_std0);
    if (drop) detail::apply_dropout(h0, cfg.dropout_rate, *rc.rng, cache.embed_drop);

    Mat<T> cur = std::move(h0);
    for (int l = 0; l < cfg.num_layers; ++l) {
        LayerCache<T>& lc = cache.layers[static_cast<size_t>(l)];
        const LayerParams<T>& lp = params.layers[static_cast<size_t>(l)];
        lc.x_in = cur;

        lc.q = Mat<T>(L, H);
        lc.k = Mat<T>(L, H);
        lc.v = Mat<T>(L, H);
        matmul(lc.q, lc.x_in, lp.attn_q_w);
        matmul(lc.k, lc.x_in, lp.attn_k_w);
        matmul(lc.v, lc.x_in, lp.attn_v_w);
        add_row_inplace(lc.q, lp.attn_q_b);
        add_row_inplace(lc.k, lp.attn_k_b);
        add_row_inplace(lc.v, lp.attn_v_b);

        lc.attn_p = Mat<T>(heads * L, L);
        for (int h = 0; h < heads; ++h) {
            const int off = h * D;
            for (int i = 0; i < L; ++i) {
                T* srow = lc.attn_p.row(h * L + i);
                const T* qi = lc.q.row(i) + off;
                for (int j = 0; j < L; ++j) {
                    const T* kj = lc.k.row(j) + off;
                    T dot = T(0);
                    for (int d = 0; d < D; ++d) dot += qi[d] * kj[d];
                    srow[j] = dot * scale;
                }
                softmax_inplace(srow, L);
            }
        }
        lc.attn_pd = lc.attn_p;
        lc.probs_drop.clear();
        if (drop) detail::apply_dropout(lc.attn_pd, cfg.dropout_rate, *rc.rng, lc.probs_drop);

        lc.ctx = Mat<T>(L, H);
        for (int h = 0; h < heads; ++h) {
            const int off = h * D;
            for (int i = 0; i < L; ++i) {
                const T* prow = lc.attn_pd.row(h * L + i);
                T* crow = lc.ctx.row(i) + off;
                for (int d = 0; d < D; ++d) crow[d] = T(0);
                for (int j = 0; j < L; ++j) {
                    const T p = prow[j];
                    const T* vj = lc.v.row(j) + off;
                    for (int d = 0; d < D; ++d) crow[d] += p * vj[d];
                }
            }
        }

        Mat<T> attn_out(L, H);
        matmul(attn_out, lc.ctx, lp.attn_out_w);
        add_row_inplace(attn_out, lp.attn_out_b);
        lc.attn_drop.clear();
        if (drop) detail::apply_dropout(attn_out, cfg.dropout_rate, *rc.rng, lc.attn_drop);

        Mat<T> s1(L, H);
        for (size_t i = 0; i < s1.a.size(); ++i) s1.a[i] = lc.x_in.a[i] + attn_out.a[i];
        detail::layer_norm_forward(s1, lp.attn_ln_gain, lp.attn_ln_bias, lc.u, lc.xhat1,
                                   lc.inv_std1);

        lc.z1 = Mat<T>(L, cfg.ffn_dim);
        matmul(lc.z1, lc.u, lp.ffn_in_w);
        add_row_inplace(lc.z1, lp.ffn_in_b);
        lc.a1 = Mat<T>(L, cfg.ffn_dim);
        for (size_t i = 0; i < lc.z1.a.size(); ++i) lc.a1.a[i] = gelu(lc.z1.a[i]);

        Mat<T> ffn_out(L, H);
        matmul(ffn_out, lc.a1, lp.ffn_out_w);
        add_row_inplace(ffn_out, lp.ffn_out_b);
        lc.ffn_drop.clear();
        if (drop) detail::apply_dropout(ffn_out, cfg.dropout_rate, *rc.rng, lc.ffn_drop);

        Mat<T> s2(L, H);
        for (size_t i = 0; i < s2.a.size(); ++i) s2.a[i] = lc.u.a[i] + ffn_out.a[i];
        Mat<T> out;
        detail::layer_norm_forward(s2, lp.ffn_ln_gain, lp.ffn_ln_bias, out, lc.xhat2,
                                   lc.inv_std2);
        cur = std::move(out);
    }
    cache.hidden = std::move(cur);
}

/// Backpropagates d loss / d hidden through the encoder, accumulating
/// parameter gradients into `grads`.
template <typename T>
void encoder_backward(const ModelParams<T>& params, const ModelConfig& cfg,
                      const ForwardCache<T>& cache, Mat<T> dout,
                      ModelParams<T>& grads) {
    const int L = cache.len;
    const int H = cfg.hidden_dim;
    const int heads = cfg.num_heads;
    const int D = cfg.head_dim();
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(D)));

    for (int l = cfg.num_layers - 1; l >= 0; --l) {
        const LayerCache<T>& lc = cache.layers[static_cast<size_t>(l)];
        const LayerParams<T>& lp = params.layers[static_cast<size_t>(l)];
        LayerParams<T>& lg = grads.layers[static_cast<size_t>(l)];

        Mat<T> ds2;
        detail::layer_norm_backward(dout, lc.xhat2, lc.inv_std2, lp.ffn_ln_gain, ds2,
                                    lg.ffn_ln_gain, lg.ffn_ln_bias);

        Mat<T> dffn = ds2;
        detail::dropout_backward(dffn, cfg.dropout_rate, lc.ffn_drop);
        matmul_tn_acc(lg.ffn_out_w, lc.a1, dffn);
        detail::add_col_sums(dffn, lg.ffn_out_b);
        Mat<T> da1(L, cfg.ffn_dim);
        matmul_nt(da1, dffn, lp.ffn_out_w);
        for (size_t i = 0; i < da1.a.size(); ++i) da1.a[i] *= gelu_grad(lc.z1.a[i]);
        matmul_tn_acc(lg.ffn_in_w, lc.u, da1);
        detail::add_col_sums(da1, lg.ffn_in_b);
        Mat<T> du(L, H);
        matmul_nt(du, da1, lp.ffn_in_w);
        for (size_t i = 0; i < du.a.size(); ++i) du.a[i] += ds2.a[i];

        Mat<T> ds1;
        detail::layer_norm_backward(du, lc.xhat1, lc.inv_std1, lp.attn_ln_gain, ds1,
                                    lg.attn_ln_gain, lg.attn_ln_bias);

        Mat<T> dattn = ds1;
        detail::dropout_backward(dattn, cfg.dropout_rate, lc.attn_drop);
        matmul_tn_acc(lg.attn_out_w, lc.ctx, dattn);
        detail::add_col_sums(dattn, lg.attn_out_b);
        Mat<T> dctx(L, H);
        matmul_nt(dctx, dattn, lp.attn_out_w);

        Mat<T> dq(L, H), dk(L, H), dv(L, H);
        std::vector<T> dp(static_cast<size_t>(L));
        for (int h = 0; h < heads; ++h) {
            const int off = h * D;
            for (int i = 0; i < L; ++i) {
                const T* dci = dctx.row(i) + off;
                const T* pd = lc.attn_pd.row(h * L + i);
                for (int j = 0; j < L; ++j) {
                    const T* vj = lc.v.row(j) + off;
                    T* dvj = dv.row(j) + off;
                    T dot = T(0);
                    for (int d = 0; d < D; ++d) {
                        dot += dci[d] * vj[d];
                        dvj[d] += pd[j] * dci[d];
                    }
                    dp[static_cast<size_t>(j)] = dot;
                }
                if (!lc.probs_drop.empty()) {
                    const T ds = static_cast<T>(1.0 / (1.0 - cfg.dropout_rate));
                    const size_t base = static_cast<size_t>(h * L + i) * static_cast<size_t>(L);
                    for (int j = 0; j < L; ++j)
                        dp[static_cast<size_t>(j)] =
                            lc.probs_drop[base + static_cast<size_t>(j)]
                                ? dp[static_cast<size_t>(j)] * ds
                                : T(0);
                }
                const T* p = lc.attn_p.row(h * L + i);
                T inner = T(0);
                for (int j = 0; j < L; ++j) inner += p[j] * dp[static_cast<size_t>(j)];
                const T* qi = lc.q.row(i) + off;
                T* dqi = dq.row(i) + off;
                for (int j = 0; j < L; ++j) {
                    const T dsc = p[j] * (dp[static_cast<size_t>(j)] - inner) * scale;
                    const T* kj = lc.k.row(j) + off;
                    T* dkj = dk.row(j) + off;
                    for (int d = 0; d < D; ++d) {
                        dqi[d] += dsc * kj[d];
                        dkj[d] += dsc * qi[d];
                    }
                }
            }
        }

        matmul_tn_acc(lg.attn_q_w, lc.x_in, dq);
        matmul_tn_acc(lg.attn_k_w, lc.x_in, dk);
        matmul_tn_acc(lg.attn_v_w, lc.x_in, dv);
        detail::add_col_sums(dq, lg.attn_q_b);
        detail::add_col_sums(dk, lg.attn_k_b);
        detail::add_col_sums(dv, lg.attn_v_b);

        Mat<T> dx(L, H);
        matmul_nt(dx, dq, lp.attn_q_w);
        Mat<T> tmp(L, H);
        matmul_nt(tmp, dk, lp.attn_k_w);
        for (size_t i = 0; i < dx.a.size(); ++i) dx.a[i] += tmp.a[i];
        matmul_nt(tmp, dv, lp.attn_v_w);
        for (size_t i = 0; i < dx.a.size(); ++i) dx.a[i] += tmp.a[i] + ds1.a[i];
        dout = std::move(dx);
    }

    detail::dropout_backward(dout, cfg.dropout_rate, cache.embed_drop);
    Mat<T> dsum;
    detail::layer_norm_backward(dout, cache.xhat0, cache.inv_std0, params.embed_ln_gain,
                                dsum, grads.embed_ln_gain, grads.embed_ln_bias);
    for (int t = 0; t < L; ++t) {
        const T* dr = dsum.row(t);
        T* dtok = grads.token_embedding.row(cache.ids[static_cast<size_t>(t)]);
        T* dpos = grads.position_embedding.row(t);
        T* dseg = grads.segment_embedding.row(cache.segs[static_cast<size_t>(t)]);
        for (int h = 0; h < H; ++h) {
            dtok[h] += dr[h];
            dpos[h] += dr[h];
            dseg[h] += dr[h];
        }
    }
}

namespace detail {

template <typename T>
ClassifierOutput classify_head_forward(const ModelParams<T>& params,
                                       const ModelConfig& cfg, const Mat<T>& hidden,
                                       std::vector<T>* pooled_out = nullptr) {
    const int H = cfg.hidden_dim;
    const T* h0 = hidden.row(0);
    std::vector<T> pooled(static_cast<size_t>(H));
    for (int j = 0; j < H; ++j) {
        T z = params.pooler_b.at(0, j);
        for (int i = 0; i < H; ++i) z += h0[i] * params.pooler_w.at(i, j);
        pooled[static_cast<size_t>(j)] = std::tanh(z);
    }
    ClassifierOutput out;
    for (int c = 0; c < cfg.num_labels; ++c) {
        T z = params.cls_b.at(0, c);
        for (int i = 0; i < H; ++i) z += pooled[static_cast<size_t>(i)] * params.cls_w.at(i, c);
        out.logits[static_cast<size_t>(c)] = static_cast<double>(z);
    }
    double mx = out.logits[0];
    for (int c = 1; c < 3; ++c) mx = std::max(mx, out.logits[static_cast<size_t>(c)]);
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) {
        out.probs[static_cast<size_t>(c)] = std::exp(out.logits[static_cast<size_t>(c)] - mx);
        sum += out.probs[static_cast<size_t>(c)];
    }
    for (int c = 0; c < 3; ++c) out.probs[static_cast<size_t>(c)] /= sum;
    if (pooled_out) *pooled_out = std::move(pooled);
    return out;
}

template <typename T>
void classify_head_backward(const ModelParams<T>& params, const ModelConfig& cfg,
                            const Mat<T>& hidden, const std::vector<T>& pooled,
                            const std::array<double, 3>& dlogits, ModelParams<T>& grads,
                            Mat<T>& dhidden) {
    const int H = cfg.hidden_dim;
    const T* h0 = hidden.row(0);
    std::vector<T> dpooled(static_cast<size_t>(H), T(0));
    for (int c = 0; c < cfg.num_labels; ++c) {
        const T dl = static_cast<T>(dlogits[static_cast<size_t>(c)]);
        grads.cls_b.at(0, c) += dl;
        for (int i = 0; i < H; ++i) {
            grads.cls_w.at(i, c) += pooled[static_cast<size_t>(i)] * dl;
            dpooled[static_cast<size_t>(i)] += params.cls_w.at(i, c) * dl;
        }
    }
    T* dh0 = dhidden.row(0);
    for (int j = 0; j < H; ++j) {
        const T p = pooled[static_cast<size_t>(j)];
        const T dz = dpooled[static_cast<size_t>(j)] * (T(1) - p * p);
        grads.pooler_b.at(0, j) += dz;
        for (int i = 0; i < H; ++i) {
            grads.pooler_w.at(i, j) += h0[i] * dz;
            dh0[i] += params.pooler_w.at(i, j) * dz;
        }
    }
}

template <typename T>
struct MlmHeadCache {
    Mat<T> hsel;   // gathered hidden rows [P,H]
    Mat<T> z;      // transform pre-activation [P,H]
    Mat<T> a;      // GELU output [P,H]
    Mat<T> that;   // layer-normed output [P,H]
    Mat<T> xhat;
    std::vector<T> inv_std;
};

template <typename T>
Mat<T> mlm_head_forward(const ModelParams<T>& params, const ModelConfig& cfg,
                        const Mat<T>& hidden, const std::vector<int>& positions,
                        MlmHeadCache<T>* cache = nullptr) {
    const int P = static_cast<int>(positions.size());
    const int H = cfg.hidden_dim;
    MlmHeadCache<T> local;
    MlmHeadCache<T>& c = cache ? *cache : local;
    c.hsel = Mat<T>(P, H);
    for (int p = 0; p < P; ++p) {
        const T* src = hidden.row(positions[static_cast<size_t>(p)]);
        T* dst = c.hsel.row(p);
        for (int h = 0; h < H; ++h) dst[h] = src[h];
    }
    c.z = Mat<T>(P, H);
    matmul(c.z, c.hsel, params.mlm_transform_w);
    add_row_inplace(c.z, params.mlm_transform_b);
    c.a = Mat<T>(P, H);
    for (size_t i = 0; i < c.z.a.size(); ++i) c.a.a[i] = gelu(c.z.a[i]);
    layer_norm_forward(c.a, params.mlm_ln_gain, params.mlm_ln_bias, c.that, c.xhat,
                       c.inv_std);
    const Mat<T>& emb = cfg.tie_mlm ? params.token_embedding : params.mlm_out_w;
    Mat<T> logits(P, cfg.vocab_size);
    matmul_nt(logits, c.that, emb);
    add_row_inplace(logits, params.mlm_out_b);
    return logits;
}

template <typename T>
void mlm_head_backward(const ModelParams<T>& params, const ModelConfig& cfg,
                       const MlmHeadCache<T>& c, const std::vector<int>& positions,
                       const Mat<T>& dlogits, ModelParams<T>& grads, Mat<T>& dhidden) {
    const int P = static_cast<int>(positions.size());
    const int H = cfg.hidden_dim;
    if (P == 0) return;
    add_col_sums(dlogits, grads.mlm_out_b);
    const Mat<T>& emb = cfg.tie_mlm ? params.token_embedding : params.mlm_out_w;
    Mat<T>& demb = cfg.tie_mlm ? grads.token_embedding : grads.mlm_out_w;
    matmul_tn_acc(demb, dlogits, c.that);
    Mat<T> dthat(P, H);
    matmul(dthat, dlogits, emb);
    Mat<T> da;
    layer_norm_backward(dthat, c.xhat, c.inv_std, params.mlm_ln_gain, da,
                        grads.mlm_ln_gain, grads.mlm_ln_bias);
    for (size_t i = 0; i < da.a.size(); ++i) da.a[i] *= gelu_grad(c.z.a[i]);
    matmul_tn_acc(grads.mlm_transform_w, c.hsel, da);
    add_col_sums(da, grads.mlm_transform_b);
    Mat<T> dhsel(P, H);
    matmul_nt(dhsel, da, params.mlm_transform_w);
    for (int p = 0; p < P; ++p) {
        const T* src = dhsel.row(p);
        T* dst = dhidden.row(positions[static_cast<size_t>(p)]);
        for (int h = 0; h < H; ++h) dst[h] += src[h];
    }
}

inline std::vector<int> check_positions(const std::vector<int>& positions, int length) {
    for (int p : positions) {
        if (p < 0 || p >= length)
            throw input_error("mlm: masked position " + std::to_string(p) +
                              " is outside the real sequence (length " +
                              std::to_string(length) + ", PAD excluded)");
    }
    return positions;
}

}  // namespace detail

/// Hidden states for the real positions of one example, eval mode.
template <typename T>
Mat<T> forward_encoder(const ModelParams<T>& params, const ModelConfig& cfg,
                       const EncodedPair& pair) {
    ForwardCache<T> cache;
    encoder_forward(params, cfg, pair, RunContext{}, cache);
    return std::move(cache.hidden);
}

/// Batch forward; each example is processed independently, so results are
/// identical to the single-example op regardless of batch composition.
template <typename T>
std::vector<Mat<T>> forward_encoder(const ModelParams<T>& params, const ModelConfig& cfg,
                                    const std::vector<EncodedPair>& batch) {
    std::vector<Mat<T>> out;
    out.reserve(batch.size());
    for (const EncodedPair& pair : batch) out.push_back(forward_encoder(params, cfg, pair));
    return out;
}

/// Label probabilities for one context/utterance pair, eval mode.
template <typename T>
ClassifierOutput forward_classify(const ModelParams<T>& params, const ModelConfig& cfg,
                                  const EncodedPair& pair) {
    ForwardCache<T> cache;
    encoder_forward(params, cfg, pair, RunContext{}, cache);
    return detail::classify_head_forward(params, cfg, cache.hidden);
}

/// Vocabulary logits at the given masked positions, eval mode.
template <typename T>
Mat<T> forward_mlm(const ModelParams<T>& params, const ModelConfig& cfg,
                   const EncodedPair& pair, const std::vector<int>& positions) {
    ForwardCache<T> cache;
    encoder_forward(params, cfg, pair, RunContext{}, cache);
    detail::check_positions(positions, cache.len);
    return detail::mlm_head_forward(params, cfg, cache.hidden, positions);
}

/// KL loss for one example; when `grads` is non-null, accumulates exact
/// parameter gradients of `loss_scale * loss`.
template <typename T>
double classify_step(const ModelParams<T>& params, const ModelConfig& cfg,
                     const EncodedPair& pair, const std::array<double, 3>& target_p,
                     const RunContext& rc, double loss_scale, ModelParams<T>* grads,
                     ClassifierOutput* out_probs = nullptr) {
    ForwardCache<T> cache;
    encoder_forward(params, cfg, pair, rc, cache);
    std::vector<T> pooled;
    const ClassifierOutput out =
        detail::classify_head_forward(params, cfg, cache.hidden, grads ? &pooled : nullptr);
    if (out_probs) *out_probs = out;
    const double loss = loss_kl(out.probs, target_p);
    if (grads) {
        std::array<double, 3> dlogits = kl_dlogits(out.probs, target_p);
        for (double& d : dlogits) d *= loss_scale;
        Mat<T> dhidden(cache.len, cfg.hidden_dim);
        detail::classify_head_backward(params, cfg, cache.hidden, pooled, dlogits, *grads,
                                       dhidden);
        encoder_backward(params, cfg, cache, std::move(dhidden), *grads);
    }
    return loss;
}

/// Mean masked cross-entropy for one example; when `grads` is non-null,
/// accumulates exact parameter gradients of `loss_scale * loss`.
template <typename T>
double mlm_step(const ModelParams<T>& params, const ModelConfig& cfg,
                const EncodedPair& pair, const std::vector<int>& positions,
                const std::vector<int32_t>& true_ids, const RunContext& rc,
                double loss_scale, ModelParams<T>* grads) {
    if (positions.size() != true_ids.size())
        throw input_error("mlm: one true id per masked position required");
    for (int32_t id : true_ids)
        if (id < 0 || id >= static_cast<int32_t>(cfg.vocab_size))
            throw input_error("mlm: true id outside the vocabulary");
    ForwardCache<T> cache;
    encoder_forward(params, cfg, pair, rc, cache);
    detail::check_positions(positions, cache.len);
    if (positions.empty()) return 0.0;
    detail::MlmHeadCache<T> head;
    const Mat<T> logits = detail::mlm_head_forward(params, cfg, cache.hidden, positions, &head);
    const double loss = loss_mlm(logits, true_ids);
    if (grads) {
        const Mat<T> dlogits = mlm_dlogits(logits, true_ids, loss_scale);
        Mat<T> dhidden(cache.len, cfg.hidden_dim);
        detail::mlm_head_backward(params, cfg, head, positions, dlogits, *grads, dhidden);
        encoder_backward(params, cfg, cache, std::move(dhidden), *grads);
    }
    return loss;
}

}  // namespace breakdown
