#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "breakdown/common.hpp"

namespace breakdown {

// Index order (B, SB, NB) is fixed everywhere a 3-vector appears.
enum class Label : int { B = 0, SB = 1, NB = 2 };

inline const char* label_name(Label l) {
    switch (l) {
        case Label::B: return "B";
        case Label::SB: return "SB";
        case Label::NB: return "NB";
    }
    return "?";
}

inline Label label_from_name(const std::string& s) {
    if (s == "B") return Label::B;
    if (s == "SB") return Label::SB;
    if (s == "NB") return Label::NB;
    throw input_error("unknown label name: " + s);
}

// DBDC annotation symbols: O = no breakdown, T = some breakdown, X = breakdown.
inline Label label_from_vote_symbol(const std::string& s) {
    if (s == "O") return Label::NB;
    if (s == "T") return Label::SB;
    if (s == "X") return Label::B;
    throw input_error("unknown breakdown symbol " + s);
}

/// Probability vector over (B, SB, NB) plus the vote counts it came from.
/// Counts are all zero for model-produced distributions.
struct LabelDistribution {
    std::array<double, 3> p{0.0, 0.0, 0.0};
    std::array<int64_t, 3> counts{0, 0, 0};

    static LabelDistribution from_counts(const std::array<int64_t, 3>& c) {
        int64_t total = c[0] + c[1] + c[2];
        if (total <= 0) throw input_error("no annotations");
        LabelDistribution d;
        d.counts = c;
        for (int i = 0; i < 3; ++i)
            d.p[static_cast<size_t>(i)] =
                static_cast<double>(c[static_cast<size_t>(i)]) / static_cast<double>(total);
        return d;
    }

    static LabelDistribution from_probs(const std::array<double, 3>& probs) {
        LabelDistribution d;
        d.p = probs;
        d.validate();
        return d;
    }

    void validate() const {
        double sum = p[0] + p[1] + p[2];
        if (std::abs(sum - 1.0) > 1e-6 || p[0] < 0 || p[1] < 0 || p[2] < 0)
            throw input_error("label distribution not normalized");
        int64_t total = counts[0] + counts[1] + counts[2];
        if (total > 0) {
            for (size_t i = 0; i < 3; ++i) {
                double expect = static_cast<double>(counts[i]) / static_cast<double>(total);
                if (std::abs(p[i] - expect) > 1e-9)
                    throw input_error("label distribution inconsistent with counts");
            }
        }
    }
};

inline LabelDistribution aggregate_votes(const std::vector<Label>& votes) {
    if (votes.empty()) throw input_error("no annotations");
    std::array<int64_t, 3> counts{0, 0, 0};
    for (Label v : votes) counts[static_cast<size_t>(v)] += 1;
    return LabelDistribution::from_counts(counts);
}

// Argmax with ties broken by severity order B > SB > NB. Scanning in index
// order with a strict > keeps the earlier (more severe) label on ties.
template <typename T>
Label argmax_label(const std::array<T, 3>& v) {
    size_t best = 0;
    for (size_t i = 1; i < 3; ++i)
        if (v[i] > v[best]) best = i;
    return static_cast<Label>(best);
}

inline Label majority_label(const LabelDistribution& d) {
    int64_t total = d.counts[0] + d.counts[1] + d.counts[2];
    if (total > 0) return argmax_label(d.counts);
    return argmax_label(d.p);
}

}  // namespace breakdown
