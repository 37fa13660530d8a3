#pragma once

#include <deque>
#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "breakdown/common.hpp"

namespace breakdown {

/// A parent/child comment pair extracted from a Reddit dump.
struct RedditPair {
    std::string parent_text;
    std::string child_text;
    std::string pair_id;  // the child comment's id
};

struct RedditExtractOptions {
    // Emit at most this many pairs; 0 means unlimited.
    int64_t limit = 0;
    // Bounded id->body map with FIFO eviction; full dumps cannot be indexed
    // in memory.
    size_t capacity = 1 << 20;
};

struct RedditExtractStats {
    int64_t lines = 0;
    int64_t pairs = 0;
    int64_t skipped_lines = 0;   // malformed JSON or missing fields
    int64_t dropped_bodies = 0;  // deleted/removed/empty comments
};

namespace detail {

inline bool usable_body(const std::string& body) {
    return !body.empty() && body != "[deleted]" && body != "[removed]";
}

}  // namespace detail

/// Single pass over a newline-delimited comment dump (fields: id, parent_id,
/// body). Emits (parent.body, child.body) for each child whose parent_id
/// names a comment ("t1_" prefix) seen earlier in the stream. Deleted,
/// removed, and empty bodies are dropped as both parents and children.
/// Malformed lines are counted and skipped, never fatal.
inline RedditExtractStats extract_reddit_pairs(
    std::istream& dump, const RedditExtractOptions& opts,
    const std::function<void(const RedditPair&)>& emit) {
    RedditExtractStats stats;
    std::unordered_map<std::string, std::string> bodies;
    std::deque<std::string> order;  // FIFO eviction queue

    std::string line;
    while (std::getline(dump, line)) {
        if (opts.limit > 0 && stats.pairs >= opts.limit) break;
        ++stats.lines;
        if (line.empty()) continue;
        std::string id, parent_id, body;
        try {
            auto j = nlohmann::json::parse(line);
            id = j.at("id").get<std::string>();
            parent_id = j.at("parent_id").get<std::string>();
            body = j.at("body").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            ++stats.skipped_lines;
            continue;
        }
        if (!detail::usable_body(body)) {
            ++stats.dropped_bodies;
            continue;
        }
        if (parent_id.rfind("t1_", 0) == 0) {
            auto it = bodies.find(parent_id.substr(3));
            if (it != bodies.end()) {
                emit(RedditPair{it->second, body, id});
                ++stats.pairs;
            }
        }
        if (bodies.size() >= opts.capacity && !order.empty()) {
            bodies.erase(order.front());
            order.pop_front();
        }
        if (bodies.emplace(id, body).second) order.push_back(id);
    }
    return stats;
}

inline std::vector<RedditPair> extract_reddit_pairs(std::istream& dump,
                                                    const RedditExtractOptions& opts = {}) {
    std::vector<RedditPair> pairs;
    extract_reddit_pairs(dump, opts, [&](const RedditPair& p) { pairs.push_back(p); });
    return pairs;
}

// Pairs file: JSONL {"parent": str, "child": str, "id": str}.
inline void write_pairs_jsonl(const std::string& path, const std::vector<RedditPair>& pairs) {
    std::string out;
    for (const auto& p : pairs) {
        out += nlohmann::json{{"parent", p.parent_text},
                              {"child", p.child_text},
                              {"id", p.pair_id}}
                   .dump();
        out += '\n';
    }
    write_file(path, out);
}

inline std::vector<RedditPair> read_pairs_jsonl(const std::string& path) {
    std::string content = read_file(path);
    std::vector<RedditPair> out;
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
            out.push_back(RedditPair{j.at("parent").get<std::string>(),
                                     j.at("child").get<std::string>(),
                                     j.value("id", std::to_string(line_no))});
        } catch (const nlohmann::json::exception& e) {
            throw input_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace breakdown
