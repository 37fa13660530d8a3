#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "breakdown/common.hpp"
#include "breakdown/dialogue.hpp"
#include "breakdown/labels.hpp"

namespace breakdown {

struct MetricReport {
    double accuracy = 0.0;
    double f1_macro = 0.0;
    double f1_breakdown = 0.0;
    double js_div = 0.0;
    std::string js_base = "2";
    int64_t n_examples = 0;
};

inline void to_json(nlohmann::json& j, const MetricReport& r) {
    j = nlohmann::json{{"accuracy", r.accuracy},   {"f1_macro", r.f1_macro},
                       {"f1_breakdown", r.f1_breakdown}, {"js_div", r.js_div},
                       {"js_base", r.js_base},     {"n_examples", r.n_examples}};
}

inline void from_json(const nlohmann::json& j, MetricReport& r) {
    j.at("accuracy").get_to(r.accuracy);
    j.at("f1_macro").get_to(r.f1_macro);
    j.at("f1_breakdown").get_to(r.f1_breakdown);
    j.at("js_div").get_to(r.js_div);
    j.at("js_base").get_to(r.js_base);
    j.at("n_examples").get_to(r.n_examples);
}

inline std::string format_report(const MetricReport& r) {
    std::string out;
    out += "n_examples    " + std::to_string(r.n_examples) + "\n";
    out += "accuracy      " + fmt_double(r.accuracy) + "\n";
    out += "f1_macro      " + fmt_double(r.f1_macro) + "\n";
    out += "f1_breakdown  " + fmt_double(r.f1_breakdown) + "\n";
    out += "js_div        " + fmt_double(r.js_div) + " (base " + r.js_base + ")\n";
    return out;
}

inline double accuracy(const std::vector<Label>& preds, const std::vector<Label>& golds) {
    if (preds.empty() || preds.size() != golds.size())
        throw input_error("accuracy: prediction and gold lists must be equal-length and non-empty");
    int64_t hits = 0;
    for (size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == golds[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

enum class F1Mode { Macro, SingleBreakdown };

/// Per-class F1 = 2PR/(P+R), with precision/recall/F1 defined as 0 whenever
/// their denominators are 0. Macro averages over all three classes.
inline double f1(const std::vector<Label>& preds, const std::vector<Label>& golds,
                 F1Mode mode) {
    if (preds.empty() || preds.size() != golds.size())
        throw input_error("f1: prediction and gold lists must be equal-length and non-empty");
    std::array<int64_t, 3> tp{0, 0, 0}, fp{0, 0, 0}, fn{0, 0, 0};
    for (size_t i = 0; i < preds.size(); ++i) {
        const auto p = static_cast<size_t>(preds[i]);
        const auto g = static_cast<size_t>(golds[i]);
        if (p == g) {
            ++tp[p];
        } else {
            ++fp[p];
            ++fn[g];
        }
    }
    std::array<double, 3> per_class{0, 0, 0};
    for (size_t c = 0; c < 3; ++c) {
        const double prec = tp[c] + fp[c] > 0
                                ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c])
                                : 0.0;
        const double rec = tp[c] + fn[c] > 0
                               ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c])
                               : 0.0;
        per_class[c] = prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    }
    if (mode == F1Mode::SingleBreakdown) return per_class[static_cast<size_t>(Label::B)];
    return (per_class[0] + per_class[1] + per_class[2]) / 3.0;
}

enum class JsBase { Two, E };

inline JsBase js_base_from_string(const std::string& s) {
    if (s == "2") return JsBase::Two;
    if (s == "e") return JsBase::E;
    throw input_error("js base must be \"2\" or \"e\", got \"" + s + "\"");
}

inline std::string js_base_name(JsBase b) { return b == JsBase::Two ? "2" : "e"; }

/// Jensen-Shannon divergence over 3-class distributions:
/// JSD = KL(p||m)/2 + KL(q||m)/2 with m = (p+q)/2 and the 0 log 0 = 0
/// convention. Bounded by 1 in base 2 and ln 2 in base e.
inline double js_divergence(const std::array<double, 3>& p, const std::array<double, 3>& q,
                            JsBase base = JsBase::Two) {
    for (const auto& d : {p, q}) {
        double sum = 0.0;
        for (double v : d) {
            if (v < 0.0) throw input_error("js_divergence: negative probability");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw input_error("js_divergence: distribution sums to " + fmt_double(sum) +
                              ", expected 1");
    }
    double jsd = 0.0;
    for (size_t i = 0; i < 3; ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) jsd += 0.5 * p[i] * std::log(p[i] / m);
        if (q[i] > 0.0) jsd += 0.5 * q[i] * std::log(q[i] / m);
    }
    if (base == JsBase::Two) jsd /= std::log(2.0);
    if (jsd < 0.0) jsd = 0.0;  // guard tiny negative round-off at p = q
    return jsd;
}

// ---------------------------------------------------------------------------
// Prediction records and files.
// ---------------------------------------------------------------------------

struct PredictionRecord {
    std::string origin;
    std::array<double, 3> probs{0, 0, 0};
    Label predicted = Label::NB;
};

inline void validate_prediction(const PredictionRecord& r) {
    double sum = r.probs[0] + r.probs[1] + r.probs[2];
    if (std::abs(sum - 1.0) > 1e-9 || r.probs[0] < 0 || r.probs[1] < 0 || r.probs[2] < 0)
        throw input_error("prediction " + r.origin + ": probs must sum to 1");
    if (r.predicted != argmax_label(r.probs))
        throw input_error("prediction " + r.origin +
                          ": label is not the tie-broken argmax of probs");
}

inline void write_predictions_jsonl(const std::string& path,
                                    const std::vector<PredictionRecord>& preds) {
    std::string out;
    for (const auto& r : preds) {
        out += nlohmann::json{{"origin", r.origin},
                              {"probs", r.probs},
                              {"label", label_name(r.predicted)}}
                   .dump();
        out += '\n';
    }
    write_file(path, out);
}

inline std::vector<PredictionRecord> read_predictions_jsonl(const std::string& path) {
    std::string content = read_file(path);
    std::vector<PredictionRecord> out;
    size_t start = 0, line_no = 0;
    while (start < content.size()) {
        size_t nl = content.find('\n', start);
        if (nl == std::string::npos) nl = content.size();
        std::string line = content.substr(start, nl - start);
        start = nl + 1;
        ++line_no;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            PredictionRecord r;
            r.origin = j.at("origin").get<std::string>();
            auto p = j.at("probs").get<std::vector<double>>();
            if (p.size() != 3) throw input_error("probs must have 3 entries");
            r.probs = {p[0], p[1], p[2]};
            r.predicted = label_from_name(j.at("label").get<std::string>());
            validate_prediction(r);
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw input_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

/// Scores a prediction set against gold examples. Predictions must cover the
/// gold origins exactly; js_div is the mean per-example divergence between
/// predicted probs and the annotator distribution.
inline MetricReport evaluate(const std::vector<PredictionRecord>& preds,
                             const std::vector<Example>& golds, JsBase base = JsBase::Two) {
    if (golds.empty()) throw input_error("evaluate: no gold examples");
    std::map<std::string, const PredictionRecord*> by_origin;
    for (const auto& r : preds) {
        if (!by_origin.emplace(r.origin, &r).second)
            throw input_error("evaluate: duplicate prediction for origin " + r.origin);
    }
    std::string missing, extra;
    std::map<std::string, bool> gold_origins;
    for (const auto& g : golds) {
        if (!gold_origins.emplace(g.origin, true).second)
            throw input_error("evaluate: duplicate gold origin " + g.origin);
        if (!by_origin.count(g.origin)) missing += " " + g.origin;
    }
    for (const auto& [origin, _] : by_origin)
        if (!gold_origins.count(origin)) extra += " " + origin;
    if (!missing.empty() || !extra.empty()) {
        std::string msg = "evaluate: predictions do not cover the gold set exactly.";
        if (!missing.empty()) msg += " missing:" + missing + ".";
        if (!extra.empty()) msg += " extra:" + extra + ".";
        throw input_error(msg);
    }

    std::vector<Label> pl, gl;
    pl.reserve(golds.size());
    gl.reserve(golds.size());
    double jsd_sum = 0.0;
    for (const auto& g : golds) {
        const PredictionRecord& r = *by_origin.at(g.origin);
        pl.push_back(r.predicted);
        gl.push_back(g.majority);
        jsd_sum += js_divergence(r.probs, g.target.p, base);
    }
    MetricReport rep;
    rep.accuracy = accuracy(pl, gl);
    rep.f1_macro = f1(pl, gl, F1Mode::Macro);
    rep.f1_breakdown = f1(pl, gl, F1Mode::SingleBreakdown);
    rep.js_div = jsd_sum / static_cast<double>(golds.size());
    rep.js_base = js_base_name(base);
    rep.n_examples = static_cast<int64_t>(golds.size());
    return rep;
}

// ---------------------------------------------------------------------------
// Ensembles.
// ---------------------------------------------------------------------------

/// Elementwise mean of the members' probability vectors, example by example.
/// Members must agree on the origin sequence.
inline std::vector<PredictionRecord> ensemble_average(
    const std::vector<std::vector<PredictionRecord>>& members) {
    if (members.empty()) throw input_error("ensemble: need at least one member");
    const size_t n = members[0].size();
    for (size_t m = 1; m < members.size(); ++m) {
        if (members[m].size() != n)
            throw input_error("ensemble: member " + std::to_string(m) + " has " +
                              std::to_string(members[m].size()) + " rows, expected " +
                              std::to_string(n));
        for (size_t i = 0; i < n; ++i)
            if (members[m][i].origin != members[0][i].origin)
                throw input_error("ensemble: member files misaligned at row " +
                                  std::to_string(i) + " (" + members[m][i].origin + " vs " +
                                  members[0][i].origin + ")");
    }
    std::vector<PredictionRecord> out;
    out.reserve(n);
    const double inv = 1.0 / static_cast<double>(members.size());
    for (size_t i = 0; i < n; ++i) {
        PredictionRecord r;
        r.origin = members[0][i].origin;
        for (const auto& m : members)
            for (size_t c = 0; c < 3; ++c) r.probs[c] += m[i].probs[c];
        for (size_t c = 0; c < 3; ++c) r.probs[c] *= inv;
        r.predicted = argmax_label(r.probs);
        out.push_back(std::move(r));
    }
    return out;
}

inline double metric_value(const MetricReport& r, const std::string& metric) {
    if (metric == "accuracy") return r.accuracy;
    if (metric == "f1_macro") return r.f1_macro;
    if (metric == "f1_breakdown") return r.f1_breakdown;
    if (metric == "js_div") return r.js_div;
    throw input_error("unknown selection metric \"" + metric +
                      "\" (want accuracy, f1_macro, f1_breakdown, or js_div)");
}

inline bool metric_ascending(const std::string& metric) { return metric == "js_div"; }

/// Ranks candidates by a validation metric (descending for accuracy/F1,
/// ascending for js_div; ties keep input order) and returns the top k names.
inline std::vector<std::string> select_top_k(
    const std::vector<std::pair<std::string, MetricReport>>& candidates,
    const std::string& metric, size_t k) {
    if (k > candidates.size())
        throw input_error("select_top_k: k = " + std::to_string(k) + " exceeds " +
                          std::to_string(candidates.size()) + " candidates");
    std::vector<size_t> idx(candidates.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const bool asc = metric_ascending(metric);
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        const double va = metric_value(candidates[a].second, metric);
        const double vb = metric_value(candidates[b].second, metric);
        return asc ? va < vb : va > vb;
    });
    std::vector<std::string> out;
    out.reserve(k);
    for (size_t i = 0; i < k; ++i) out.push_back(candidates[idx[i]].first);
    return out;
}

}  // namespace breakdown
