#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <iostream>

#include "breakdown/labels.hpp"
#include "breakdown/tensor.hpp"

namespace breakdown {

/// Classifier output over (B, SB, NB); probs = softmax(logits).
struct ClassifierOutput {
    std::array<double, 3> probs{0, 0, 0};
    std::array<double, 3> logits{0, 0, 0};
};

// Incremented whenever loss_kl has to clamp a zero predicted probability.
inline std::atomic<int64_t>& kl_clamp_count() {
    static std::atomic<int64_t> count{0};
    return count;
}

/// KL(target || output) = sum_i t_i (ln t_i - ln q_i), with 0 ln 0 = 0.
/// Output probabilities are clamped at 1e-12 where the target is positive;
/// its parameter gradient is that of soft-target cross-entropy.
inline double loss_kl(const std::array<double, 3>& output_probs,
                      const std::array<double, 3>& target_p) {
    double loss = 0.0;
    for (size_t i = 0; i < 3; ++i) {
        double t = target_p[i];
        if (t <= 0.0) continue;
        double q = output_probs[i];
        if (q < 1e-12) {
            q = 1e-12;
            if (kl_clamp_count().fetch_add(1) == 0)
                std::cerr << "[breakdown] loss_kl: clamped zero output probability\n";
        }
        loss += t * (std::log(t) - std::log(q));
    }
    return loss;
}

inline double loss_kl(const ClassifierOutput& out, const LabelDistribution& target) {
    return loss_kl(out.probs, target.p);
}

// d loss / d logits for the KL objective (identical to soft cross-entropy).
inline std::array<double, 3> kl_dlogits(const std::array<double, 3>& output_probs,
                                        const std::array<double, 3>& target_p) {
    return {output_probs[0] - target_p[0], output_probs[1] - target_p[1],
            output_probs[2] - target_p[2]};
}

/// Mean cross-entropy over masked positions; logits is [positions x vocab].
/// Zero positions contribute zero loss.
template <typename T>
double loss_mlm(const Mat<T>& logits, const std::vector<int32_t>& true_ids) {
    if (logits.rows != static_cast<int>(true_ids.size()))
        throw input_error("loss_mlm: one true id per masked position required");
    if (logits.rows == 0) return 0.0;
    double total = 0.0;
    for (int p = 0; p < logits.rows; ++p) {
        const T* row = logits.row(p);
        const T lse = log_sum_exp(row, logits.cols);
        total += static_cast<double>(lse - row[true_ids[static_cast<size_t>(p)]]);
    }
    return total / static_cast<double>(logits.rows);
}

// d loss / d logits for mean masked cross-entropy, scaled by `scale`.
template <typename T>
Mat<T> mlm_dlogits(const Mat<T>& logits, const std::vector<int32_t>& true_ids,
                   double scale = 1.0) {
    Mat<T> d(logits.rows, logits.cols);
    if (logits.rows == 0) return d;
    const T w = static_cast<T>(scale / static_cast<double>(logits.rows));
    for (int p = 0; p < logits.rows; ++p) {
        const T* row = logits.row(p);
        T* drow = d.row(p);
        T mx = row[0];
        for (int j = 1; j < logits.cols; ++j) mx = row[j] > mx ? row[j] : mx;
        T sum = T(0);
        for (int j = 0; j < logits.cols; ++j) {
            drow[j] = std::exp(row[j] - mx);
            sum += drow[j];
        }
        const T inv = T(1) / sum;
        for (int j = 0; j < logits.cols; ++j) drow[j] *= inv * w;
        drow[true_ids[static_cast<size_t>(p)]] -= w;
    }
    return d;
}

}  // namespace breakdown
