#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "breakdown/adam.hpp"
#include "breakdown/encoder.hpp"
#include "breakdown/metrics.hpp"

namespace breakdown {

struct FinetunePlan {
    int epochs = 20;
    int batch_size = 16;
    double learning_rate = 3e-5;
    double warmup_frac = 0.1;  // fraction of total steps ramped linearly
    int eval_every = 0;        // steps between validations; 0 = once per epoch
    std::string selection_metric = "accuracy";  // accuracy | f1_macro | js_div
    uint64_t seed = 0;

    void validate() const {
        if (epochs < 1) throw input_error("finetune: epochs must be >= 1");
        if (batch_size <= 0) throw input_error("finetune: batch_size must be positive");
        if (learning_rate < 0.0)
            throw input_error("finetune: learning_rate must be nonnegative");
        if (warmup_frac < 0.0 || warmup_frac > 1.0)
            throw input_error("finetune: warmup_frac must be in [0,1]");
        if (eval_every < 0) throw input_error("finetune: eval_every must be >= 0");
        if (selection_metric != "accuracy" && selection_metric != "f1_macro" &&
            selection_metric != "js_div")
            throw input_error("finetune: selection_metric must be accuracy, f1_macro, or js_div");
    }
};

struct FinetuneLogRow {
    int64_t step = 0;
    double train_kl = 0.0;  // mean batch KL since the previous row
    double valid_acc = 0.0;
    double valid_f1 = 0.0;
    double valid_jsd = 0.0;
};

struct FinetuneResult {
    ModelConfig cfg;
    ModelParams<float> params;  // best checkpoint by the selection metric
    std::vector<FinetuneLogRow> log;
    double best_metric = 0.0;
    int64_t best_step = 0;
};

/// Deterministic eval-mode predictions, one record per example in input order.
template <typename T>
std::vector<PredictionRecord> predict(const ModelParams<T>& params, const ModelConfig& cfg,
                                      const std::vector<Example>& examples,
                                      const Vocab& vocab) {
    if (vocab.size() != cfg.vocab_size)
        throw input_error("predict: vocab size " + std::to_string(vocab.size()) +
                          " does not match checkpoint vocab_size " +
                          std::to_string(cfg.vocab_size));
    std::vector<PredictionRecord> out;
    out.reserve(examples.size());
    for (const auto& e : examples) {
        const EncodedPair enc = encode_pair(vocab, e.context, e.utterance, cfg.max_len);
        const ClassifierOutput o = forward_classify(params, cfg, enc);
        PredictionRecord r;
        r.origin = e.origin;
        r.probs = o.probs;
        r.predicted = argmax_label(o.probs);
        out.push_back(std::move(r));
    }
    return out;
}

namespace detail {

struct ValidScores {
    double acc = 0.0, f1m = 0.0, jsd = 0.0;
};

template <typename T>
ValidScores score_valid(const ModelParams<T>& params, const ModelConfig& cfg,
                        const std::vector<EncodedPair>& enc,
                        const std::vector<Example>& valid) {
    std::vector<Label> pl, gl;
    pl.reserve(valid.size());
    gl.reserve(valid.size());
    double jsd_sum = 0.0;
    for (size_t i = 0; i < valid.size(); ++i) {
        const ClassifierOutput o = forward_classify(params, cfg, enc[i]);
        pl.push_back(argmax_label(o.probs));
        gl.push_back(valid[i].majority);
        jsd_sum += js_divergence(o.probs, valid[i].target.p, JsBase::Two);
    }
    ValidScores s;
    s.acc = accuracy(pl, gl);
    s.f1m = f1(pl, gl, F1Mode::Macro);
    s.jsd = jsd_sum / static_cast<double>(valid.size());
    return s;
}

inline double selected_metric(const ValidScores& s, const std::string& metric) {
    if (metric == "accuracy") return s.acc;
    if (metric == "f1_macro") return s.f1m;
    return s.jsd;
}

}  // namespace detail

/// KL fine-tuning of the classifier head (and full encoder) over shuffled
/// batches. The validation set is scored every eval_every steps (plus once at
/// the end) and the best checkpoint by the selection metric is returned; ties
/// keep the earlier step.
inline FinetuneResult run_finetune(const FinetunePlan& plan, const ModelConfig& cfg,
                                   const ModelParams<float>& init,
                                   const std::vector<TrainRecord>& train,
                                   const std::vector<Example>& valid,
                                   const Vocab& vocab) {
    plan.validate();
    cfg.require_valid();
    if (train.empty()) throw input_error("finetune: empty training set");
    if (valid.empty()) throw input_error("finetune: empty validation set");
    if (vocab.size() != cfg.vocab_size)
        throw input_error("finetune: vocab size " + std::to_string(vocab.size()) +
                          " does not match checkpoint vocab_size " +
                          std::to_string(cfg.vocab_size));

    std::vector<EncodedPair> train_enc;
    train_enc.reserve(train.size());
    std::vector<std::array<double, 3>> targets;
    targets.reserve(train.size());
    for (const auto& r : train) {
        train_enc.push_back(encode_pair(vocab, r.context, r.utterance, cfg.max_len));
        targets.push_back(r.target_p);
    }
    std::vector<EncodedPair> valid_enc;
    valid_enc.reserve(valid.size());
    for (const auto& e : valid)
        valid_enc.push_back(encode_pair(vocab, e.context, e.utterance, cfg.max_len));

    const int64_t steps_per_epoch =
        static_cast<int64_t>((train.size() + static_cast<size_t>(plan.batch_size) - 1) /
                             static_cast<size_t>(plan.batch_size));
    const int64_t total_steps = steps_per_epoch * plan.epochs;
    const int64_t eval_every =
        plan.eval_every > 0 ? plan.eval_every : std::max<int64_t>(1, steps_per_epoch);

    AdamConfig opt;
    opt.lr = plan.learning_rate;
    opt.warmup_steps = static_cast<int>(
        std::llround(plan.warmup_frac * static_cast<double>(total_steps)));
    AdamState<float> st(cfg);
    ModelParams<float> params = init;
    ModelParams<float> grads = make_param_shapes<float>(cfg);

    Rng order_rng(derive_seed(plan.seed, fnv1a64("order")));
    Rng drop_rng(derive_seed(plan.seed, fnv1a64("dropout")));
    RunContext rc;
    rc.train = true;
    rc.rng = &drop_rng;

    FinetuneResult res;
    res.cfg = cfg;
    res.params = params;
    const bool asc = metric_ascending(plan.selection_metric);
    res.best_metric = asc ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();

    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    int64_t step = 0, last_eval_step = 0;
    double kl_accum = 0.0;
    int64_t kl_batches = 0;

    auto run_eval = [&]() {
        const detail::ValidScores s = detail::score_valid(params, cfg, valid_enc, valid);
        FinetuneLogRow row;
        row.step = step;
        row.train_kl = kl_batches > 0 ? kl_accum / static_cast<double>(kl_batches) : 0.0;
        row.valid_acc = s.acc;
        row.valid_f1 = s.f1m;
        row.valid_jsd = s.jsd;
        res.log.push_back(row);
        kl_accum = 0.0;
        kl_batches = 0;
        last_eval_step = step;
        const double m = detail::selected_metric(s, plan.selection_metric);
        const bool better = asc ? m < res.best_metric : m > res.best_metric;
        if (better) {
            res.best_metric = m;
            res.best_step = step;
            res.params = params;
        }
    };

    for (int epoch = 1; epoch <= plan.epochs; ++epoch) {
        shuffle_indices(order, order_rng);
        for (size_t b0 = 0; b0 < order.size(); b0 += static_cast<size_t>(plan.batch_size)) {
            const size_t b1 = std::min(order.size(), b0 + static_cast<size_t>(plan.batch_size));
            const double inv_b = 1.0 / static_cast<double>(b1 - b0);
            zero_grads(grads);
            double batch_loss = 0.0;
            for (size_t i = b0; i < b1; ++i) {
                const size_t idx = order[i];
                batch_loss += inv_b * classify_step(params, cfg, train_enc[idx], targets[idx],
                                                    rc, inv_b, &grads);
            }
            adam_step(params, grads, st, opt);
            ++step;
            kl_accum += batch_loss;
            ++kl_batches;
            if (step % eval_every == 0) run_eval();
        }
    }
    if (last_eval_step != step) run_eval();
    return res;
}

inline void write_finetune_log_csv(const std::string& path,
                                   const std::vector<FinetuneLogRow>& log) {
    std::string out = "step,train_kl,valid_acc,valid_f1,valid_jsd\n";
    for (const auto& r : log) {
        out += std::to_string(r.step);
        out += ',';
        out += fmt_double(r.train_kl);
        out += ',';
        out += fmt_double(r.valid_acc);
        out += ',';
        out += fmt_double(r.valid_f1);
        out += ',';
        out += fmt_double(r.valid_jsd);
        out += '\n';
    }
    write_file(path, out);
}

}  // namespace breakdown
