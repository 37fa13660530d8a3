#pragma once

#include <string>
#include <vector>

namespace breakdown {

inline bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Lowercase (ASCII range) and collapse runs of whitespace to single spaces,
// trimming the ends. Non-ASCII bytes pass through untouched; the corpus this
// targets is uncased English, so no Unicode case folding is attempted.
inline std::string normalize_text(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_ascii_space(c)) {
            if (!out.empty()) pending_space = true;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        out.push_back(c);
    }
    return out;
}

inline std::vector<std::string> split_whitespace(const std::string& s) {
    std::vector<std::string> words;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_ascii_space(s[i])) ++i;
        size_t start = i;
        while (i < s.size() && !is_ascii_space(s[i])) ++i;
        if (i > start) words.push_back(s.substr(start, i - start));
    }
    return words;
}

// Split a UTF-8 string into code point substrings. Invalid lead bytes are
// passed through as single-byte units.
inline std::vector<std::string> utf8_codepoints(const std::string& s) {
    std::vector<std::string> cps;
    size_t i = 0;
    while (i < s.size()) {
        unsigned char b = static_cast<unsigned char>(s[i]);
        size_t len = 1;
        if ((b & 0xE0) == 0xC0) len = 2;
        else if ((b & 0xF0) == 0xE0) len = 3;
        else if ((b & 0xF8) == 0xF0) len = 4;
        if (i + len > s.size()) len = 1;
        for (size_t k = 1; k < len; ++k) {
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
                len = 1;
                break;
            }
        }
        cps.push_back(s.substr(i, len));
        i += len;
    }
    return cps;
}

}  // namespace breakdown
