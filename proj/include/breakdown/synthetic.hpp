#pragma once

#include <array>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "breakdown/common.hpp"
#include "breakdown/dialogue.hpp"
#include "breakdown/labels.hpp"
#include "breakdown/reddit.hpp"

namespace breakdown {

/// Deterministic corpus generator. Breakdown is a pure function of topical
/// mismatch: a system turn that echoes the user's topic is NB, a turn that
/// drifts wholly to a topic outside the conversational repertoire is B, and a
/// half-and-half turn is SB. Drift topics never appear in dialogue contexts,
/// which keeps the labels learnable by a tiny model at this scale while
/// preserving realistic vote distributions.
struct SynthConfig {
    uint64_t seed = 13;
    int num_dialogues = 2000;
    int num_reddit_pairs = 5000;
    int num_annotators = 15;
    double p_breakdown = 0.40;
    double p_some = 0.20;
};

namespace synth_detail {

// The first half of the topics carry conversations; the second half supply
// the foreign material that breakdown replies drift into.
inline const std::vector<std::vector<std::string>>& topic_words() {
    static const std::vector<std::vector<std::string>> topics = {
        {"rain", "sunshine", "clouds", "storm", "forecast", "umbrella", "breeze", "snow"},
        {"recipe", "oven", "flour", "pasta", "spices", "dinner", "kitchen", "baking"},
        {"cinema", "actor", "sequel", "trailer", "director", "screen", "popcorn", "plot"},
        {"soccer", "goal", "referee", "stadium", "coach", "playoffs", "tennis", "score"},
        {"guitar", "melody", "concert", "drummer", "chorus", "album", "lyrics", "piano"},
        {"airport", "luggage", "passport", "hotel", "beach", "flight", "tourist", "maps"},
        {"roses", "compost", "seedling", "weeds", "lawn", "shovel", "bloom", "soil"},
        {"laptop", "keyboard", "software", "server", "coding", "monitor", "mouse", "update"},
        {"novel", "author", "chapter", "library", "paperback", "poetry", "bookmark", "reading"},
        {"puppy", "kitten", "leash", "vet", "feathers", "aquarium", "treats", "collar"},
        {"engine", "highway", "gasoline", "brakes", "mechanic", "steering", "tires", "garage"},
        {"homework", "teacher", "exam", "classroom", "semester", "lecture", "notebook", "grades"},
    };
    return topics;
}

inline const std::vector<std::string>& filler_words() {
    static const std::vector<std::string> fillers = {
        "i", "you", "we", "the", "a", "my", "was", "is", "really", "about",
        "today", "think", "like", "good", "very", "and", "it", "to", "of", "so"};
    return fillers;
}

// Fillers cycle through a fixed order from a random phase, so a sentence's
// first filler determines the rest. They carry no label signal but give the
// masked-token objective local structure to learn.
struct FillerCycle {
    size_t pos;
    explicit FillerCycle(Rng& rng) : pos(next_below(rng, filler_words().size())) {}
    const std::string& next() {
        const auto& f = filler_words();
        const std::string& w = f[pos];
        pos = (pos + 1) % f.size();
        return w;
    }
};

// Draws `count` distinct words from one topic.
inline std::vector<std::string> pick_topic_words(int topic, size_t count, Rng& rng) {
    const auto& words = topic_words()[static_cast<size_t>(topic)];
    std::vector<size_t> idx(words.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    shuffle_indices(idx, rng);
    std::vector<std::string> out;
    for (size_t i = 0; i < count && i < idx.size(); ++i) out.push_back(words[idx[i]]);
    return out;
}

inline std::string weave_sentence(const std::vector<std::string>& content, Rng& rng) {
    FillerCycle fill(rng);
    std::string s = fill.next();
    for (const auto& w : content) {
        s += ' ';
        s += fill.next();
        s += ' ';
        s += w;
    }
    s += ' ';
    s += fill.next();
    return s;
}

inline std::string topic_sentence(int topic, Rng& rng) {
    const size_t n = 2 + next_below(rng, 2);  // 2 or 3 content words
    return weave_sentence(pick_topic_words(topic, n, rng), rng);
}

// Draws `count` distinct words from an explicit pool.
inline std::vector<std::string> pick_from(const std::vector<std::string>& pool,
                                          size_t count, Rng& rng) {
    std::vector<size_t> idx(pool.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    shuffle_indices(idx, rng);
    std::vector<std::string> out;
    for (size_t i = 0; i < count && i < idx.size(); ++i) out.push_back(pool[idx[i]]);
    return out;
}

// On-topic reply: echoes the previous turn's content words.
inline std::string echo_sentence(const std::vector<std::string>& prev_content, Rng& rng) {
    return weave_sentence(pick_from(prev_content, 2, rng), rng);
}

// Full drift: three words from a foreign topic, nothing echoed.
inline std::string drift_sentence(int topic_b, Rng& rng) {
    return weave_sentence(pick_topic_words(topic_b, 3, rng), rng);
}

// Partial drift: exactly one echoed word plus one foreign-topic word.
inline std::string mixed_sentence(const std::vector<std::string>& prev_content,
                                  int topic_b, Rng& rng) {
    auto content = pick_from(prev_content, 1, rng);
    for (auto& w : pick_topic_words(topic_b, 1, rng)) content.push_back(std::move(w));
    return weave_sentence(content, rng);
}

inline const char* vote_symbol(Label l) {
    switch (l) {
        case Label::B: return "X";
        case Label::SB: return "T";
        case Label::NB: return "O";
    }
    return "O";
}

// Majority label gets n - 2 votes, the other two classes one vote each.
inline std::vector<Label> make_votes(Label majority, int n) {
    std::vector<Label> votes;
    for (int c = 0; c < 3; ++c) {
        const Label l = static_cast<Label>(c);
        const int k = (l == majority) ? n - 2 : 1;
        for (int i = 0; i < k; ++i) votes.push_back(l);
    }
    return votes;
}

}  // namespace synth_detail

inline nlohmann::json dialogue_to_json(const Dialogue& d) {
    nlohmann::json turns = nlohmann::json::array();
    for (const auto& t : d.turns) {
        nlohmann::json jt{{"turn-index", t.turn_index},
                          {"speaker", t.speaker == Speaker::User ? "U" : "S"},
                          {"utterance", t.utterance}};
        if (!t.annotations.empty()) {
            nlohmann::json ann = nlohmann::json::array();
            for (Label l : t.annotations)
                ann.push_back({{"breakdown", synth_detail::vote_symbol(l)}});
            jt["annotations"] = std::move(ann);
        }
        turns.push_back(std::move(jt));
    }
    return nlohmann::json{{"dialogue-id", d.dialogue_id}, {"turns", std::move(turns)}};
}

/// Four turns U,S,U,S on one conversation topic; only the final system turn
/// is annotated. A coherent reply (NB) echoes content words of the user's
/// last turn, a breakdown (B) drifts entirely to a foreign topic, and a
/// partial breakdown (SB) mixes one echoed word with one foreign word,
/// according to the configured proportions.
inline Dialogue generate_dialogue(const SynthConfig& cfg, int index) {
    using namespace synth_detail;
    Rng rng(derive_seed(cfg.seed, static_cast<uint64_t>(index)));
    const int half = static_cast<int>(topic_words().size()) / 2;
    const int topic_a = static_cast<int>(next_below(rng, static_cast<uint64_t>(half)));
    const int topic_b =
        half + static_cast<int>(next_below(rng, static_cast<uint64_t>(half)));

    const double r = next_unit(rng);
    Label label = Label::NB;
    if (r < cfg.p_breakdown) label = Label::B;
    else if (r < cfg.p_breakdown + cfg.p_some) label = Label::SB;

    const std::string turn1 = topic_sentence(topic_a, rng);
    const std::string turn2 = topic_sentence(topic_a, rng);
    const auto ctx_content = pick_topic_words(topic_a, 2 + next_below(rng, 2), rng);
    const std::string turn3 = weave_sentence(ctx_content, rng);

    std::string final_turn;
    if (label == Label::NB) final_turn = echo_sentence(ctx_content, rng);
    else if (label == Label::B) final_turn = drift_sentence(topic_b, rng);
    else final_turn = mixed_sentence(ctx_content, topic_b, rng);

    char id[32];
    std::snprintf(id, sizeof(id), "synth-%05d", index);
    Dialogue d;
    d.dialogue_id = id;
    d.turns.push_back({1, Speaker::User, turn1, {}});
    d.turns.push_back({2, Speaker::System, turn2, {}});
    d.turns.push_back({3, Speaker::User, turn3, {}});
    d.turns.push_back({4, Speaker::System, final_turn, make_votes(label, cfg.num_annotators)});
    return d;
}

struct SynthCorpus {
    std::vector<Example> train;
    std::vector<Example> valid;
    std::vector<Example> test;
    std::string reddit_dump;  // newline-delimited comment JSON, decoys included
};

/// Parent/child pairs share a topic, and children echo a parent content word
/// half the time, so masked-token prediction rewards both topic co-occurrence
/// and cross-segment copying. The dump interleaves exactly `num_reddit_pairs`
/// extractable pairs with deleted bodies, malformed lines, link-parented
/// comments, and orphans that a correct extractor must skip.
inline std::string generate_reddit_dump(const SynthConfig& cfg) {
    using namespace synth_detail;
    Rng rng(derive_seed(cfg.seed, fnv1a64("reddit")));
    const int num_topics = static_cast<int>(topic_words().size());
    std::string out;
    for (int i = 0; i < cfg.num_reddit_pairs; ++i) {
        const int topic = static_cast<int>(next_below(rng, static_cast<uint64_t>(num_topics)));
        const std::string pid = "p" + std::to_string(i);
        const auto parent_content = pick_topic_words(topic, 2 + next_below(rng, 2), rng);
        std::vector<std::string> child_content =
            pick_from(parent_content, 1 + next_below(rng, 2), rng);
        for (auto& w : pick_topic_words(topic, next_below(rng, 2), rng))
            child_content.push_back(std::move(w));
        out += nlohmann::json{{"id", pid},
                              {"parent_id", "t3_link" + std::to_string(i)},
                              {"body", weave_sentence(parent_content, rng)}}
                   .dump();
        out += '\n';
        if (i % 10 == 3) {
            out += nlohmann::json{{"id", "del" + std::to_string(i)},
                                  {"parent_id", "t1_" + pid},
                                  {"body", "[deleted]"}}
                       .dump();
            out += '\n';
        }
        if (i % 13 == 5) out += "{\"id\": \"broken\n";
        if (i % 17 == 7) {
            out += nlohmann::json{{"id", "orphan" + std::to_string(i)},
                                  {"parent_id", "t1_nosuch" + std::to_string(i)},
                                  {"body", topic_sentence(topic, rng)}}
                       .dump();
            out += '\n';
        }
        out += nlohmann::json{{"id", "c" + std::to_string(i)},
                              {"parent_id", "t1_" + pid},
                              {"body", weave_sentence(child_content, rng)}}
                   .dump();
        out += '\n';
    }
    return out;
}

/// Builds the full corpus, round-tripping every dialogue through its JSON
/// form so the generator exercises the same parser real data uses.
inline SynthCorpus generate_corpus(const SynthConfig& cfg) {
    if (cfg.num_dialogues < 10) throw input_error("synthetic corpus needs >= 10 dialogues");
    if (cfg.num_annotators < 3) throw input_error("synthetic corpus needs >= 3 annotators");
    if (cfg.p_breakdown < 0 || cfg.p_some < 0 || cfg.p_breakdown + cfg.p_some > 1)
        throw input_error("synthetic label proportions must be nonnegative and sum to <= 1");

    SynthCorpus corpus;
    const int n_train = cfg.num_dialogues * 7 / 10;
    const int n_valid = (cfg.num_dialogues - n_train) / 2;
    for (int i = 0; i < cfg.num_dialogues; ++i) {
        const Dialogue d = parse_dbdc_json(dialogue_to_json(generate_dialogue(cfg, i)));
        auto examples = build_examples(d);
        auto& split = i < n_train ? corpus.train
                      : i < n_train + n_valid ? corpus.valid
                                              : corpus.test;
        for (auto& e : examples) split.push_back(std::move(e));
    }
    corpus.reddit_dump = generate_reddit_dump(cfg);
    return corpus;
}

struct SynthPaths {
    std::string train, valid, test, reddit;
};

inline SynthPaths write_corpus(const SynthCorpus& corpus, const std::string& out_dir) {
    SynthPaths paths{out_dir + "/train.jsonl", out_dir + "/valid.jsonl",
                     out_dir + "/test.jsonl", out_dir + "/reddit_dump.jsonl"};
    write_examples_jsonl(paths.train, corpus.train);
    write_examples_jsonl(paths.valid, corpus.valid);
    write_examples_jsonl(paths.test, corpus.test);
    write_file(paths.reddit, corpus.reddit_dump);
    return paths;
}

}  // namespace breakdown
