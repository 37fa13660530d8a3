#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "breakdown/common.hpp"
#include "breakdown/text.hpp"
#include "breakdown/vocab.hpp"

namespace breakdown {

/// A (context, utterance) sentence pair rendered as model input:
/// [CLS] context [SEP] utterance [SEP] PAD...  All three arrays have the same
/// padded length; `length` counts the real (non-PAD) tokens.
struct EncodedPair {
    std::vector<int32_t> token_ids;
    std::vector<int32_t> segment_ids;   // 0 through the first SEP, 1 after
    std::vector<uint8_t> attention_mask;  // 1 for real tokens, 0 for PAD
    int length = 0;
};

namespace detail {

struct WordEntry {
    std::vector<std::string> symbols;  // current segmentation of the word
    int64_t freq = 0;
};

inline void accumulate_word_counts(const std::string& line,
                                   std::map<std::string, int64_t>& counts) {
    for (const auto& w : split_whitespace(normalize_text(line))) counts[w] += 1;
}

}  // namespace detail

/// Train a WordPiece vocabulary with greedy pair merging.
///
/// Starts from single code points ("a", "##b", ...) and repeatedly merges the
/// highest-frequency adjacent symbol pair until `vocab_size` is reached or no
/// pair occurs at least `min_frequency` times. Ties break to the
/// lexicographically smallest pair, so training is deterministic given the
/// same corpus.
inline Vocab train_wordpiece(const std::map<std::string, int64_t>& word_counts,
                             int vocab_size, int min_frequency) {
    if (vocab_size <= 0) throw input_error("vocab_size must be positive");
    if (min_frequency <= 0) throw input_error("min_frequency must be positive");

    std::vector<detail::WordEntry> words;
    words.reserve(word_counts.size());
    for (const auto& [w, f] : word_counts) {
        detail::WordEntry e;
        e.freq = f;
        auto cps = utf8_codepoints(w);
        for (size_t i = 0; i < cps.size(); ++i)
            e.symbols.push_back(i == 0 ? cps[i] : "##" + cps[i]);
        if (!e.symbols.empty()) words.push_back(std::move(e));
    }
    if (words.empty()) throw input_error("empty corpus");

    std::map<std::string, int> alphabet;  // ordered -> deterministic ids
    for (const auto& e : words)
        for (const auto& s : e.symbols) alphabet.emplace(s, 0);

    std::vector<std::string> pieces = Vocab::special_pieces();
    for (const auto& [s, _] : alphabet) pieces.push_back(s);
    if (vocab_size <= static_cast<int>(pieces.size()))
        throw input_error("vocab size too small");

    while (static_cast<int>(pieces.size()) < vocab_size) {
        std::map<std::pair<std::string, std::string>, int64_t> pair_counts;
        for (const auto& e : words)
            for (size_t i = 0; i + 1 < e.symbols.size(); ++i)
                pair_counts[{e.symbols[i], e.symbols[i + 1]}] += e.freq;
        if (pair_counts.empty()) break;

        // map iteration is ordered, so the first max is the lexicographically
        // smallest pair among the tied best
        std::pair<std::string, std::string> best;
        int64_t best_count = 0;
        for (const auto& [p, c] : pair_counts) {
            if (c > best_count) {
                best_count = c;
                best = p;
            }
        }
        if (best_count < min_frequency) break;

        std::string merged = best.first + best.second.substr(2);
        pieces.push_back(merged);
        for (auto& e : words) {
            std::vector<std::string> out;
            out.reserve(e.symbols.size());
            size_t i = 0;
            while (i < e.symbols.size()) {
                if (i + 1 < e.symbols.size() && e.symbols[i] == best.first &&
                    e.symbols[i + 1] == best.second) {
                    out.push_back(merged);
                    i += 2;
                } else {
                    out.push_back(e.symbols[i]);
                    i += 1;
                }
            }
            e.symbols = std::move(out);
        }
    }
    return Vocab(std::move(pieces));
}

inline Vocab train_wordpiece(const std::vector<std::string>& corpus, int vocab_size,
                             int min_frequency) {
    std::map<std::string, int64_t> counts;
    for (const auto& line : corpus) detail::accumulate_word_counts(line, counts);
    return train_wordpiece(counts, vocab_size, min_frequency);
}

// Streaming variant: only word counts are kept in memory.
inline Vocab train_wordpiece(std::istream& corpus, int vocab_size, int min_frequency) {
    std::map<std::string, int64_t> counts;
    std::string line;
    while (std::getline(corpus, line)) detail::accumulate_word_counts(line, counts);
    return train_wordpiece(counts, vocab_size, min_frequency);
}

/// Greedy longest-match-first segmentation per whitespace-split word. A word
/// with no full piece cover becomes a single UNK. Never emits CLS/SEP/PAD/MASK.
inline std::vector<int32_t> encode(const Vocab& vocab, const std::string& text) {
    std::vector<int32_t> ids;
    for (const auto& word : split_whitespace(normalize_text(text))) {
        auto cps = utf8_codepoints(word);
        std::vector<int32_t> word_ids;
        bool bad = false;
        size_t start = 0;
        while (start < cps.size()) {
            int match = -1;
            size_t match_end = start;
            // longest match first: shrink the candidate end until found
            for (size_t end = cps.size(); end > start; --end) {
                std::string piece = start > 0 ? "##" : "";
                for (size_t k = start; k < end; ++k) piece += cps[k];
                int id = vocab.id_of(piece);
                if (id >= Vocab::kNumSpecials) {
                    match = id;
                    match_end = end;
                    break;
                }
            }
            if (match < 0) {
                bad = true;
                break;
            }
            word_ids.push_back(match);
            start = match_end;
        }
        if (bad) {
            ids.push_back(Vocab::kUnk);
        } else {
            ids.insert(ids.end(), word_ids.begin(), word_ids.end());
        }
    }
    return ids;
}

/// Inverse of encode for special-free sequences: "##" joins are stitched,
/// word-initial pieces are space-separated, special tokens are dropped.
inline std::string decode(const Vocab& vocab, const std::vector<int32_t>& ids) {
    std::string out;
    for (int32_t id : ids) {
        const std::string& piece = vocab.piece(id);  // throws on out-of-range
        if (Vocab::is_special_id(id)) continue;
        if (piece.size() > 2 && piece[0] == '#' && piece[1] == '#') {
            out += piece.substr(2);
        } else {
            if (!out.empty()) out += ' ';
            out += piece;
        }
    }
    return out;
}

/// Render a sentence pair as [CLS] context [SEP] utterance [SEP] with padding
/// to max_len. When the pair is over-length the context is trimmed from the
/// FRONT first (the utterance carries the breakdown signal); the utterance
/// tail is trimmed only if it alone exceeds the budget. With three specials
/// the context keeps max_len - 3 - |utterance| tokens, so e.g. max_len 64
/// with a 10-token utterance leaves exactly 51 context tokens.
inline EncodedPair encode_pair(const Vocab& vocab, const std::string& context,
                               const std::string& utterance, int max_len) {
    if (max_len < 8) throw input_error("max_len must be >= 8");
    std::vector<int32_t> ctx = encode(vocab, context);
    std::vector<int32_t> utt = encode(vocab, utterance);

    const int budget = max_len - 3;  // CLS + 2x SEP
    if (static_cast<int>(utt.size()) > budget) {
        utt.resize(static_cast<size_t>(budget));
        ctx.clear();
    } else if (static_cast<int>(ctx.size() + utt.size()) > budget) {
        size_t keep = static_cast<size_t>(budget) - utt.size();
        ctx.erase(ctx.begin(), ctx.end() - static_cast<ptrdiff_t>(keep));
    }

    EncodedPair p;
    p.token_ids.reserve(static_cast<size_t>(max_len));
    p.token_ids.push_back(Vocab::kCls);
    p.token_ids.insert(p.token_ids.end(), ctx.begin(), ctx.end());
    p.token_ids.push_back(Vocab::kSep);
    size_t seg0 = p.token_ids.size();
    p.token_ids.insert(p.token_ids.end(), utt.begin(), utt.end());
    p.token_ids.push_back(Vocab::kSep);
    p.length = static_cast<int>(p.token_ids.size());

    p.segment_ids.assign(p.token_ids.size(), 1);
    for (size_t i = 0; i < seg0; ++i) p.segment_ids[i] = 0;
    p.attention_mask.assign(p.token_ids.size(), 1);

    p.token_ids.resize(static_cast<size_t>(max_len), Vocab::kPad);
    p.segment_ids.resize(static_cast<size_t>(max_len), 1);
    p.attention_mask.resize(static_cast<size_t>(max_len), 0);
    return p;
}

// Segment texts back out of an encoded pair; used to materialize SSMBA
// reconstructions. Returns {context_text, utterance_text}.
inline std::pair<std::string, std::string> decode_pair(const Vocab& vocab,
                                                       const EncodedPair& p) {
    std::vector<int32_t> ctx, utt;
    int seps_seen = 0;
    for (int i = 0; i < p.length; ++i) {
        int32_t id = p.token_ids[static_cast<size_t>(i)];
        if (id == Vocab::kSep) {
            ++seps_seen;
            continue;
        }
        if (id == Vocab::kCls) continue;
        (seps_seen == 0 ? ctx : utt).push_back(id);
    }
    return {decode(vocab, ctx), decode(vocab, utt)};
}

}  // namespace breakdown
