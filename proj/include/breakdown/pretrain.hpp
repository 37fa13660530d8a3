#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "breakdown/adam.hpp"
#include "breakdown/checkpoint.hpp"
#include "breakdown/encoder.hpp"
#include "breakdown/masking.hpp"
#include "breakdown/reddit.hpp"

namespace breakdown {

struct PretrainPlan {
    int epochs = 40;  // operating point for continued pre-training
    int batch_size = 32;
    double learning_rate = 1e-4;
    int warmup_steps = 100;
    int64_t max_steps = 0;          // 0 = no cap
    std::string init = "scratch";   // "scratch" | "warm:<checkpoint path>"
    uint64_t seed = 0;
    MaskPolicy mask;

    void validate() const {
        if (epochs < 1) throw input_error("pretrain: epochs must be >= 1");
        if (batch_size <= 0) throw input_error("pretrain: batch_size must be positive");
        if (learning_rate < 0.0)
            throw input_error("pretrain: learning_rate must be nonnegative");
        if (warmup_steps < 0) throw input_error("pretrain: warmup_steps must be >= 0");
        if (max_steps < 0) throw input_error("pretrain: max_steps must be >= 0");
        if (init != "scratch" && init.rfind("warm:", 0) != 0)
            throw input_error("pretrain: init must be \"scratch\" or \"warm:<path>\"");
        mask.validate();
    }
};

struct StepLossRow {
    int epoch = 0;     // 1-based
    int64_t step = 0;  // 1-based global optimizer step
    double loss = 0.0;
};

struct PretrainResult {
    ModelConfig cfg;
    ModelParams<float> params;
    std::vector<StepLossRow> log;
    std::vector<double> epoch_mean_loss;
};

/// Continued MLM pre-training over parent/child pairs. The parent comment is
/// rendered as segment 0 and the child as segment 1, mirroring the
/// context/utterance layout used for fine-tuning.
inline PretrainResult run_pretrain(const PretrainPlan& plan, ModelConfig cfg,
                                   const std::vector<RedditPair>& pairs,
                                   const Vocab& vocab) {
    plan.validate();
    cfg.require_valid();
    if (pairs.empty()) throw input_error("pretrain: empty pair stream");
    if (vocab.size() != cfg.vocab_size)
        throw input_error("pretrain: vocab size " + std::to_string(vocab.size()) +
                          " does not match model config vocab_size " +
                          std::to_string(cfg.vocab_size));

    ModelParams<float> params;
    if (plan.init == "scratch") {
        params = init_params<float>(cfg);
    } else {
        const std::string path = plan.init.substr(5);
        ModelConfig loaded_cfg;
        params = load_checkpoint(path, loaded_cfg);
        if (!loaded_cfg.same_shapes(cfg)) {
            std::string msg = "pretrain: warm-start checkpoint does not match the model config";
            if (loaded_cfg.vocab_size != cfg.vocab_size)
                msg += " (checkpoint vocab_size " + std::to_string(loaded_cfg.vocab_size) +
                       " vs " + std::to_string(cfg.vocab_size) + ")";
            throw input_error(msg);
        }
    }

    std::vector<EncodedPair> encoded;
    encoded.reserve(pairs.size());
    for (const auto& pr : pairs)
        encoded.push_back(encode_pair(vocab, pr.parent_text, pr.child_text, cfg.max_len));

    AdamConfig opt;
    opt.lr = plan.learning_rate;
    opt.warmup_steps = plan.warmup_steps;
    AdamState<float> st(cfg);
    ModelParams<float> grads = make_param_shapes<float>(cfg);

    Rng order_rng(derive_seed(plan.seed, fnv1a64("order")));
    Rng mask_rng(derive_seed(plan.seed, fnv1a64("mask")));
    Rng drop_rng(derive_seed(plan.seed, fnv1a64("dropout")));
    RunContext rc;
    rc.train = true;
    rc.rng = &drop_rng;

    PretrainResult res;
    res.cfg = cfg;
    std::vector<size_t> order(encoded.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    int64_t step = 0;
    bool stop = false;
    for (int epoch = 1; epoch <= plan.epochs && !stop; ++epoch) {
        shuffle_indices(order, order_rng);
        double epoch_sum = 0.0;
        int64_t epoch_steps = 0;
        for (size_t b0 = 0; b0 < order.size() && !stop; b0 += static_cast<size_t>(plan.batch_size)) {
            const size_t b1 = std::min(order.size(), b0 + static_cast<size_t>(plan.batch_size));
            const double inv_b = 1.0 / static_cast<double>(b1 - b0);
            zero_grads(grads);
            double batch_loss = 0.0;
            for (size_t i = b0; i < b1; ++i) {
                const EncodedPair& src = encoded[order[i]];
                MaskedExample mx =
                    apply_mlm_mask(src, plan.mask, static_cast<int32_t>(cfg.vocab_size), mask_rng);
                batch_loss += inv_b * mlm_step(params, cfg, mx.pair, mx.positions,
                                               mx.original_ids, rc, inv_b, &grads);
            }
            adam_step(params, grads, st, opt);
            ++step;
            res.log.push_back({epoch, step, batch_loss});
            epoch_sum += batch_loss;
            ++epoch_steps;
            if (plan.max_steps > 0 && step >= plan.max_steps) stop = true;
        }
        if (epoch_steps > 0)
            res.epoch_mean_loss.push_back(epoch_sum / static_cast<double>(epoch_steps));
    }
    res.params = std::move(params);
    return res;
}

inline void write_pretrain_log_csv(const std::string& path,
                                   const std::vector<StepLossRow>& log) {
    std::string out = "epoch,step,mlm_loss\n";
    for (const auto& r : log) {
        out += std::to_string(r.epoch);
        out += ',';
        out += std::to_string(r.step);
        out += ',';
        out += fmt_double(r.loss);
        out += '\n';
    }
    write_file(path, out);
}

}  // namespace breakdown
