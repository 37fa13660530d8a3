#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "breakdown/common.hpp"
#include "breakdown/labels.hpp"

namespace breakdown {

enum class Speaker { User, System };

struct Turn {
    int turn_index = 0;
    Speaker speaker = Speaker::User;
    std::string utterance;
    std::vector<Label> annotations;  // empty for unannotated turns
};

struct Dialogue {
    std::string dialogue_id;
    std::vector<Turn> turns;
};

/// A labelled training/evaluation example: one annotated system turn with the
/// most recent prior user utterance as context.
struct Example {
    std::string context;    // empty when the system speaks first
    std::string utterance;  // the agent utterance under prediction
    LabelDistribution target;
    Label majority = Label::NB;
    std::string origin;  // "<dialogue_id>#<turn_index>"
};

/// An SSMBA-generated example carrying its provenance and teacher label.
struct AugmentedExample {
    std::string context;
    std::string utterance;
    LabelDistribution pseudo_target;
    std::string source_origin;
    int aug_index = 0;
    uint64_t corruption_seed = 0;
};

// A row of a (possibly augmented) training file: originals keep annotator
// counts, augments carry the teacher distribution.
struct TrainRecord {
    std::string context;
    std::string utterance;
    std::array<double, 3> target_p{0, 0, 0};
    std::string origin;
    bool is_augment = false;
};

inline std::string make_origin(const std::string& dialogue_id, int turn_index) {
    return dialogue_id + "#" + std::to_string(turn_index);
}

// ---------------------------------------------------------------------------
// DBDC dialogue JSON:
// {"dialogue-id": str, "turns": [{"turn-index": int, "speaker": "U"|"S",
//   "utterance": str, "annotations": [{"breakdown": "O"|"T"|"X"}]}]}
// ---------------------------------------------------------------------------

inline Dialogue parse_dbdc_json(const nlohmann::json& j) {
    Dialogue d;
    if (!j.is_object() || !j.contains("dialogue-id") || !j.contains("turns"))
        throw input_error("dialogue file missing dialogue-id or turns");
    d.dialogue_id = j.at("dialogue-id").get<std::string>();
    for (const auto& jt : j.at("turns")) {
        Turn t;
        t.turn_index = jt.at("turn-index").get<int>();
        std::string sp = jt.at("speaker").get<std::string>();
        if (sp == "U") t.speaker = Speaker::User;
        else if (sp == "S") t.speaker = Speaker::System;
        else throw input_error("unknown speaker \"" + sp + "\" at turn " +
                               std::to_string(t.turn_index));
        t.utterance = jt.at("utterance").get<std::string>();
        if (jt.contains("annotations")) {
            for (const auto& ja : jt.at("annotations")) {
                std::string sym = ja.at("breakdown").get<std::string>();
                try {
                    t.annotations.push_back(label_from_vote_symbol(sym));
                } catch (const input_error&) {
                    throw input_error("unknown breakdown symbol " + sym + " at turn " +
                                      std::to_string(t.turn_index));
                }
            }
        }
        d.turns.push_back(std::move(t));
    }
    return d;
}

inline Dialogue parse_dbdc_file(const std::string& path) {
    std::string content = read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(content);
    } catch (const nlohmann::json::parse_error& e) {
        throw input_error("malformed JSON in " + path + " at byte " +
                          std::to_string(e.byte) + ": " + e.what());
    }
    return parse_dbdc_json(j);
}

/// One Example per annotated system turn; context is the most recent USER
/// utterance before it (consecutive system turns do not change the context),
/// empty if no user has spoken yet. Annotated user turns are ignored.
inline std::vector<Example> build_examples(const Dialogue& dlg) {
    std::vector<Example> out;
    std::string last_user;
    for (const auto& t : dlg.turns) {
        if (t.speaker == Speaker::User) {
            last_user = t.utterance;
            continue;
        }
        if (t.annotations.empty()) continue;
        Example e;
        e.context = last_user;
        e.utterance = t.utterance;
        e.target = aggregate_votes(t.annotations);
        e.majority = majority_label(e.target);
        e.origin = make_origin(dlg.dialogue_id, t.turn_index);
        out.push_back(std::move(e));
    }
    return out;
}

inline std::array<double, 3> label_histogram(const std::vector<Example>& examples) {
    if (examples.empty()) throw input_error("label_histogram: no examples");
    std::array<double, 3> h{0, 0, 0};
    for (const auto& e : examples) h[static_cast<size_t>(e.majority)] += 1.0;
    for (auto& v : h) v /= static_cast<double>(examples.size());
    return h;
}

// ---------------------------------------------------------------------------
// Example JSONL: {"context": str, "utterance": str, "counts": [b, sb, nb],
// "origin": str}. Augment rows replace counts with "pseudo" plus provenance.
// ---------------------------------------------------------------------------

inline nlohmann::json example_to_json(const Example& e) {
    return nlohmann::json{{"context", e.context},
                          {"utterance", e.utterance},
                          {"counts", e.target.counts},
                          {"origin", e.origin}};
}

inline Example example_from_json(const nlohmann::json& j) {
    Example e;
    e.context = j.at("context").get<std::string>();
    e.utterance = j.at("utterance").get<std::string>();
    auto c = j.at("counts").get<std::vector<int64_t>>();
    if (c.size() != 3) throw input_error("counts must have 3 entries");
    e.target = LabelDistribution::from_counts({c[0], c[1], c[2]});
    e.majority = majority_label(e.target);
    e.origin = j.at("origin").get<std::string>();
    return e;
}

inline nlohmann::json augmented_to_json(const AugmentedExample& a) {
    return nlohmann::json{{"context", a.context},
                          {"utterance", a.utterance},
                          {"pseudo", a.pseudo_target.p},
                          {"source_origin", a.source_origin},
                          {"aug_index", a.aug_index},
                          {"corruption_seed", a.corruption_seed},
                          {"origin", a.source_origin + "#aug" + std::to_string(a.aug_index)}};
}

inline void write_examples_jsonl(const std::string& path,
                                 const std::vector<Example>& examples) {
    std::string out;
    for (const auto& e : examples) {
        out += example_to_json(e).dump();
        out += '\n';
    }
    write_file(path, out);
}

inline std::vector<Example> read_examples_jsonl(const std::string& path) {
    std::string content = read_file(path);
    std::vector<Example> out;
    size_t start = 0, line_no = 0;
    while (start < content.size()) {
        size_t nl = content.find('\n', start);
        if (nl == std::string::npos) nl = content.size();
        std::string line = content.substr(start, nl - start);
        start = nl + 1;
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(example_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw input_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

// Reads a training file that may mix original and augmented rows.
inline std::vector<TrainRecord> read_training_rows(const std::string& path) {
    std::string content = read_file(path);
    std::vector<TrainRecord> out;
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
            TrainRecord r;
            r.context = j.at("context").get<std::string>();
            r.utterance = j.at("utterance").get<std::string>();
            if (j.contains("pseudo")) {
                auto p = j.at("pseudo").get<std::vector<double>>();
                if (p.size() != 3) throw input_error("pseudo must have 3 entries");
                r.target_p = {p[0], p[1], p[2]};
                r.is_augment = true;
            } else {
                auto c = j.at("counts").get<std::vector<int64_t>>();
                if (c.size() != 3) throw input_error("counts must have 3 entries");
                auto d = LabelDistribution::from_counts({c[0], c[1], c[2]});
                r.target_p = d.p;
            }
            r.origin = j.value("origin", "");
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw input_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

inline TrainRecord to_train_record(const Example& e) {
    TrainRecord r;
    r.context = e.context;
    r.utterance = e.utterance;
    r.target_p = e.target.p;
    r.origin = e.origin;
    return r;
}

}  // namespace breakdown
