#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "breakdown/common.hpp"

namespace breakdown {

/// WordPiece vocabulary: an ordered piece list with its exact inverse map.
/// Ids 0..4 are the special tokens PAD, UNK, CLS, SEP, MASK in that order.
class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;
    static constexpr int kMask = 4;
    static constexpr int kNumSpecials = 5;

    static const std::vector<std::string>& special_pieces() {
        static const std::vector<std::string> specials = {"[PAD]", "[UNK]", "[CLS]",
                                                          "[SEP]", "[MASK]"};
        return specials;
    }

    Vocab() = default;

    // Pieces must start with the five specials; everything after is a subword.
    explicit Vocab(std::vector<std::string> pieces) : pieces_(std::move(pieces)) {
        for (size_t i = 0; i < pieces_.size(); ++i) {
            auto inserted = piece_to_id_.emplace(pieces_[i], static_cast<int>(i));
            if (!inserted.second)
                throw input_error("duplicate vocab piece: " + pieces_[i]);
        }
        validate();
    }

    int size() const { return static_cast<int>(pieces_.size()); }

    const std::vector<std::string>& pieces() const { return pieces_; }

    const std::string& piece(int id) const {
        if (id < 0 || id >= size()) throw input_error("unknown id");
        return pieces_[static_cast<size_t>(id)];
    }

    // Returns -1 when the piece is not in the vocabulary.
    int id_of(const std::string& piece) const {
        auto it = piece_to_id_.find(piece);
        return it == piece_to_id_.end() ? -1 : it->second;
    }

    static bool is_special_id(int id) { return id >= 0 && id < kNumSpecials; }

    void validate() const {
        const auto& specials = special_pieces();
        if (pieces_.size() < specials.size())
            throw input_error("vocab missing special tokens");
        for (size_t i = 0; i < specials.size(); ++i) {
            if (pieces_[i] != specials[i])
                throw input_error("vocab id " + std::to_string(i) + " must be " + specials[i]);
        }
        for (size_t i = specials.size(); i < pieces_.size(); ++i) {
            for (const auto& s : specials) {
                if (pieces_[i] == s)
                    throw input_error("subword piece equals special token: " + s);
            }
        }
    }

    // One piece per line, UTF-8, line number = id.
    void save(const std::string& path) const {
        std::string out;
        for (const auto& p : pieces_) {
            out += p;
            out += '\n';
        }
        write_file(path, out);
    }

    static Vocab load(const std::string& path) {
        std::string content = read_file(path);
        std::vector<std::string> pieces;
        size_t start = 0;
        while (start < content.size()) {
            size_t nl = content.find('\n', start);
            if (nl == std::string::npos) nl = content.size();
            std::string line = content.substr(start, nl - start);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) pieces.push_back(line);
            start = nl + 1;
        }
        if (pieces.empty()) throw input_error("empty vocab file: " + path);
        return Vocab(std::move(pieces));
    }

private:
    std::vector<std::string> pieces_;
    std::unordered_map<std::string, int> piece_to_id_;
};

}  // namespace breakdown
