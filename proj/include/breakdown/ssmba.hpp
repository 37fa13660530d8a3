#pragma once

#include <algorithm>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "breakdown/dialogue.hpp"
#include "breakdown/encoder.hpp"
#include "breakdown/masking.hpp"

namespace breakdown {

/// How reconstruction picks a token for each masked position.
struct ReconStrategy {
    enum class Kind { Greedy, Sample, TopK };
    Kind kind = Kind::Sample;
    double temperature = 1.0;
    int k = 1;  // TopK only

    void validate() const {
        if (kind != Kind::Greedy && temperature <= 0.0)
            throw input_error("reconstruction: temperature must be positive");
        if (kind == Kind::TopK && k < 1)
            throw input_error("reconstruction: top-k requires k >= 1");
    }

    // "greedy" | "sample" | "topk:K"
    static ReconStrategy parse(const std::string& s, double temperature = 1.0) {
        ReconStrategy r;
        r.temperature = temperature;
        if (s == "greedy") {
            r.kind = Kind::Greedy;
        } else if (s == "sample") {
            r.kind = Kind::Sample;
        } else if (s.rfind("topk:", 0) == 0) {
            r.kind = Kind::TopK;
            try {
                r.k = std::stoi(s.substr(5));
            } catch (const std::exception&) {
                throw input_error("reconstruction: bad top-k count in \"" + s + "\"");
            }
        } else {
            throw input_error("reconstruction: unknown strategy \"" + s +
                              "\" (want greedy, sample, or topk:K)");
        }
        r.validate();
        return r;
    }

    std::string to_string() const {
        switch (kind) {
            case Kind::Greedy: return "greedy";
            case Kind::Sample: return "sample";
            case Kind::TopK: return "topk:" + std::to_string(k);
        }
        return "?";
    }
};

struct AugmentConfig {
    MaskPolicy corruption{0.45, 1.0, 0.0, 0.0, 0};  // mask-only
    int num_augments = 1;
    ReconStrategy strategy;
    std::string label_mode = "soft";  // "soft" | "hard"
    uint64_t seed = 0;

    void validate() const {
        corruption.validate();
        if (corruption.random_frac != 0.0 || corruption.keep_frac != 0.0)
            throw input_error("ssmba: corruption must be mask-only "
                              "(random_frac = keep_frac = 0)");
        if (num_augments < 1) throw input_error("ssmba: num_augments must be >= 1");
        if (label_mode != "soft" && label_mode != "hard")
            throw input_error("ssmba: label_mode must be \"soft\" or \"hard\"");
        strategy.validate();
    }
};

/// Mask-only corruption with a forced minimum of one mask: if the independent
/// draws select nothing but eligible positions exist, the selection is
/// redrawn; at select_prob = 0 a single eligible position is chosen uniformly.
/// An example with no eligible positions comes back uncorrupted.
inline MaskedExample corrupt_q(const EncodedPair& encoded, const MaskPolicy& policy,
                               Rng& rng) {
    policy.validate();
    if (policy.random_frac != 0.0 || policy.keep_frac != 0.0)
        throw input_error("ssmba: corruption must be mask-only (random_frac = keep_frac = 0)");
    MaskedExample out;
    out.pair = encoded;
    const std::vector<int> eligible = eligible_positions(encoded);
    if (eligible.empty()) return out;
    if (policy.select_prob <= 0.0) {
        const int t = eligible[next_below(rng, eligible.size())];
        out.positions.push_back(t);
        out.original_ids.push_back(encoded.token_ids[static_cast<size_t>(t)]);
        out.pair.token_ids[static_cast<size_t>(t)] = Vocab::kMask;
        return out;
    }
    for (;;) {
        std::vector<int> picked;
        for (int t : eligible)
            if (next_unit(rng) < policy.select_prob) picked.push_back(t);
        if (picked.empty()) continue;
        for (int t : picked) {
            out.positions.push_back(t);
            out.original_ids.push_back(encoded.token_ids[static_cast<size_t>(t)]);
            out.pair.token_ids[static_cast<size_t>(t)] = Vocab::kMask;
        }
        return out;
    }
}

namespace detail {

// Chooses a non-special token id from one row of MLM logits. Greedy argmax
// ties break to the lowest id, which makes topk:1 coincide with greedy.
template <typename T>
int32_t pick_token(const T* logits, int vocab_size, const ReconStrategy& strategy,
                   Rng& rng) {
    const int lo = Vocab::kNumSpecials;
    if (strategy.kind == ReconStrategy::Kind::Greedy) {
        int best = lo;
        for (int id = lo + 1; id < vocab_size; ++id)
            if (logits[id] > logits[best]) best = id;
        return best;
    }
    if (strategy.kind == ReconStrategy::Kind::Sample) {
        double mx = static_cast<double>(logits[lo]);
        for (int id = lo + 1; id < vocab_size; ++id)
            mx = std::max(mx, static_cast<double>(logits[id]));
        std::vector<double> probs(static_cast<size_t>(vocab_size - lo));
        double sum = 0.0;
        for (int id = lo; id < vocab_size; ++id) {
            const double e =
                std::exp((static_cast<double>(logits[id]) - mx) / strategy.temperature);
            probs[static_cast<size_t>(id - lo)] = e;
            sum += e;
        }
        const double u = next_unit(rng) * sum;
        double c = 0.0;
        for (int id = lo; id < vocab_size; ++id) {
            c += probs[static_cast<size_t>(id - lo)];
            if (u < c) return id;
        }
        return vocab_size - 1;
    }
    // TopK: renormalized draw over the k largest logits (logit desc, id asc).
    std::vector<int> ids(static_cast<size_t>(vocab_size - lo));
    for (int id = lo; id < vocab_size; ++id) ids[static_cast<size_t>(id - lo)] = id;
    const size_t k = std::min(static_cast<size_t>(strategy.k), ids.size());
    std::partial_sort(ids.begin(), ids.begin() + static_cast<ptrdiff_t>(k), ids.end(),
                      [&](int a, int b) {
                          if (logits[a] != logits[b]) return logits[a] > logits[b];
                          return a < b;
                      });
    double mx = static_cast<double>(logits[ids[0]]);
    std::vector<double> probs(k);
    double sum = 0.0;
    for (size_t i = 0; i < k; ++i) {
        const double e =
            std::exp((static_cast<double>(logits[ids[i]]) - mx) / strategy.temperature);
        probs[i] = e;
        sum += e;
    }
    const double u = next_unit(rng) * sum;
    double c = 0.0;
    for (size_t i = 0; i < k; ++i) {
        c += probs[i];
        if (u < c) return ids[i];
    }
    return ids[k - 1];
}

}  // namespace detail

/// Fills every masked position of a corrupted pair with a model-chosen token.
/// Special tokens are excluded from the candidate set, so CLS/SEP/PAD/MASK
/// are never produced; unmasked positions pass through untouched.
template <typename T>
EncodedPair reconstruct_r(const ModelParams<T>& params, const ModelConfig& cfg,
                          const EncodedPair& corrupted, const std::vector<int>& positions,
                          const ReconStrategy& strategy, Rng& rng) {
    strategy.validate();
    if (positions.empty())
        throw input_error("reconstruct: no masked positions to fill");
    const Mat<T> logits = forward_mlm(params, cfg, corrupted, positions);
    EncodedPair out = corrupted;
    for (int p = 0; p < logits.rows; ++p) {
        const int32_t id = detail::pick_token(logits.row(p), cfg.vocab_size, strategy, rng);
        out.token_ids[static_cast<size_t>(positions[static_cast<size_t>(p)])] = id;
    }
    return out;
}

/// Teacher distribution for a (context, utterance) pair: the full softmax
/// output in soft mode, a one-hot at the tie-broken argmax in hard mode.
template <typename T>
LabelDistribution pseudo_label(const ModelParams<T>& teacher, const ModelConfig& cfg,
                               const Vocab& vocab, const std::string& context,
                               const std::string& utterance,
                               const std::string& label_mode) {
    const EncodedPair enc = encode_pair(vocab, context, utterance, cfg.max_len);
    const ClassifierOutput out = forward_classify(teacher, cfg, enc);
    if (label_mode == "hard") {
        std::array<double, 3> one{0, 0, 0};
        one[static_cast<size_t>(argmax_label(out.probs))] = 1.0;
        return LabelDistribution::from_probs(one);
    }
    if (label_mode != "soft")
        throw input_error("ssmba: label_mode must be \"soft\" or \"hard\"");
    return LabelDistribution::from_probs(out.probs);
}

/// One augment of one example: corrupt with q, reconstruct with r, label with
/// the teacher. The rng stream is derived from (seed, origin, aug_index), so
/// augmentation order and thread scheduling cannot change the output.
template <typename T>
AugmentedExample make_augment(const Example& example, int aug_index,
                              const ModelParams<T>& teacher, const ModelConfig& teacher_cfg,
                              const ModelParams<T>& recon, const ModelConfig& recon_cfg,
                              const Vocab& vocab, const AugmentConfig& acfg) {
    const uint64_t cseed =
        derive_seed(acfg.seed ^ fnv1a64(example.origin), static_cast<uint64_t>(aug_index));
    Rng rng(cseed);
    const EncodedPair enc =
        encode_pair(vocab, example.context, example.utterance, recon_cfg.max_len);
    const MaskedExample mx = corrupt_q(enc, acfg.corruption, rng);
    const EncodedPair rec =
        mx.positions.empty()
            ? enc
            : reconstruct_r(recon, recon_cfg, mx.pair, mx.positions, acfg.strategy, rng);
    auto [ctx_text, utt_text] = decode_pair(vocab, rec);

    AugmentedExample ax;
    ax.context = std::move(ctx_text);
    ax.utterance = std::move(utt_text);
    ax.pseudo_target =
        pseudo_label(teacher, teacher_cfg, vocab, ax.context, ax.utterance, acfg.label_mode);
    ax.source_origin = example.origin;
    ax.aug_index = aug_index;
    ax.corruption_seed = cseed;
    return ax;
}

/// All augments for a training set, grouped by original example with
/// aug_index ascending. Distinct examples are independent, so the work is
/// sharded across threads without affecting the result.
template <typename T>
std::vector<AugmentedExample> augment_dataset(const std::vector<Example>& train,
                                              const ModelParams<T>& teacher,
                                              const ModelConfig& teacher_cfg,
                                              const ModelParams<T>& recon,
                                              const ModelConfig& recon_cfg,
                                              const Vocab& vocab, const AugmentConfig& acfg,
                                              int threads = 1) {
    acfg.validate();
    if (train.empty()) throw input_error("ssmba: empty training set");
    if (teacher_cfg.vocab_size != vocab.size())
        throw input_error("ssmba: teacher vocab_size " + std::to_string(teacher_cfg.vocab_size) +
                          " does not match vocabulary size " + std::to_string(vocab.size()));
    if (recon_cfg.vocab_size != vocab.size())
        throw input_error("ssmba: reconstruction vocab_size " +
                          std::to_string(recon_cfg.vocab_size) +
                          " does not match vocabulary size " + std::to_string(vocab.size()));

    const size_t total = train.size() * static_cast<size_t>(acfg.num_augments);
    std::vector<AugmentedExample> out(total);
    auto work = [&](size_t begin, size_t end) {
        for (size_t j = begin; j < end; ++j) {
            const size_t e = j / static_cast<size_t>(acfg.num_augments);
            const int a = static_cast<int>(j % static_cast<size_t>(acfg.num_augments));
            out[j] = make_augment(train[e], a, teacher, teacher_cfg, recon, recon_cfg, vocab,
                                  acfg);
        }
    };
    const size_t nthreads = std::max<size_t>(1, std::min<size_t>(
        static_cast<size_t>(threads), total));
    if (nthreads == 1) {
        work(0, total);
    } else {
        std::vector<std::thread> pool;
        const size_t chunk = (total + nthreads - 1) / nthreads;
        for (size_t t = 0; t < nthreads; ++t) {
            const size_t begin = t * chunk;
            const size_t end = std::min(total, begin + chunk);
            if (begin < end) pool.emplace_back(work, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    return out;
}

/// The merged training file: originals verbatim (annotator counts) followed
/// by the augments (pseudo distributions), one JSON object per line.
inline void write_augmented_jsonl(const std::string& path,
                                  const std::vector<Example>& originals,
                                  const std::vector<AugmentedExample>& augments) {
    std::string out;
    for (const auto& e : originals) {
        out += example_to_json(e).dump();
        out += '\n';
    }
    for (const auto& a : augments) {
        out += augmented_to_json(a).dump();
        out += '\n';
    }
    write_file(path, out);
}

}  // namespace breakdown
