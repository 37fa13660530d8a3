#pragma once

#include <cmath>
#include <vector>

#include "breakdown/common.hpp"
#include "breakdown/vocab.hpp"
#include "breakdown/wordpiece.hpp"

namespace breakdown {

/// Masked-language-model corruption policy. Each eligible position (a real,
/// non-special token) is selected with `select_prob`; a selected position is
/// replaced by [MASK] with `mask_frac`, by a random non-special token with
/// `random_frac`, and kept as-is otherwise. Loss is taken over all selected
/// positions either way.
struct MaskPolicy {
    double select_prob = 0.15;
    double mask_frac = 0.8;
    double random_frac = 0.1;
    double keep_frac = 0.1;
    uint64_t seed = 0;

    void validate() const {
        if (select_prob < 0.0 || select_prob > 1.0)
            throw input_error("mask policy: select_prob must be in [0,1]");
        if (mask_frac < 0.0 || random_frac < 0.0 || keep_frac < 0.0)
            throw input_error("mask policy: fractions must be nonnegative");
        const double sum = mask_frac + random_frac + keep_frac;
        if (std::abs(sum - 1.0) > 1e-9)
            throw input_error("mask policy: mask_frac + random_frac + keep_frac must sum to 1, got " +
                              fmt_double(sum));
    }
};

struct MaskedExample {
    EncodedPair pair;                  // corrupted copy of the input
    std::vector<int> positions;        // selected positions, ascending
    std::vector<int32_t> original_ids; // true ids at those positions
};

inline std::vector<int> eligible_positions(const EncodedPair& src) {
    std::vector<int> out;
    for (int t = 0; t < src.length; ++t)
        if (src.token_ids[static_cast<size_t>(t)] >= Vocab::kNumSpecials) out.push_back(t);
    return out;
}

/// Applies the policy to one encoded example. Special tokens ([PAD], [UNK],
/// [CLS], [SEP], [MASK]) and PAD positions are never selected.
inline MaskedExample apply_mlm_mask(const EncodedPair& src, const MaskPolicy& policy,
                                    int32_t vocab_size, Rng& rng) {
    policy.validate();
    if (vocab_size <= Vocab::kNumSpecials)
        throw input_error("mask: vocabulary has no non-special tokens");
    MaskedExample out;
    out.pair = src;
    for (int t : eligible_positions(src)) {
        if (next_unit(rng) >= policy.select_prob) continue;
        out.positions.push_back(t);
        out.original_ids.push_back(src.token_ids[static_cast<size_t>(t)]);
        const double r = next_unit(rng);
        if (r < policy.mask_frac) {
            out.pair.token_ids[static_cast<size_t>(t)] = Vocab::kMask;
        } else if (r < policy.mask_frac + policy.random_frac) {
            out.pair.token_ids[static_cast<size_t>(t)] =
                Vocab::kNumSpecials +
                static_cast<int32_t>(next_below(
                    rng, static_cast<uint64_t>(vocab_size - Vocab::kNumSpecials)));
        }
    }
    return out;
}

}  // namespace breakdown
