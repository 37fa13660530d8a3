#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "breakdown/dialogue.hpp"
#include "breakdown/reddit.hpp"

using namespace breakdown;
using Catch::Matchers::ContainsSubstring;
using nlohmann::json;

namespace {

json make_turn(int index, const std::string& speaker, const std::string& utt,
               const std::string& votes = "") {
    json t{{"turn-index", index}, {"speaker", speaker}, {"utterance", utt}};
    if (!votes.empty()) {
        json anns = json::array();
        for (char c : votes) anns.push_back(json{{"breakdown", std::string(1, c)}});
        t["annotations"] = anns;
    }
    return t;
}

json make_dialogue(const std::string& id, std::vector<json> turns) {
    return json{{"dialogue-id", id}, {"turns", turns}};
}

}  // namespace

TEST_CASE("vote symbols map onto the severity scale", "[data]") {
    REQUIRE(label_from_vote_symbol("O") == Label::NB);
    REQUIRE(label_from_vote_symbol("T") == Label::SB);
    REQUIRE(label_from_vote_symbol("X") == Label::B);
    REQUIRE_THROWS_WITH(label_from_vote_symbol("Q"), "unknown breakdown symbol Q");
}

TEST_CASE("vote aggregation produces exact distributions", "[data]") {
    SECTION("unanimous") {
        auto d = aggregate_votes(std::vector<Label>(15, Label::NB));
        REQUIRE(d.p == std::array<double, 3>{0.0, 0.0, 1.0});
        REQUIRE(d.counts == std::array<int64_t, 3>{0, 0, 15});
    }
    SECTION("mixed 6/3/6") {
        std::vector<Label> votes;
        for (int i = 0; i < 6; ++i) votes.push_back(Label::B);
        for (int i = 0; i < 3; ++i) votes.push_back(Label::SB);
        for (int i = 0; i < 6; ++i) votes.push_back(Label::NB);
        auto d = aggregate_votes(votes);
        REQUIRE(d.p == std::array<double, 3>{0.4, 0.2, 0.4});
    }
    SECTION("even split") {
        auto d = LabelDistribution::from_counts({5, 5, 5});
        for (double v : d.p) REQUIRE(v == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
    }
    SECTION("vote multiplicity does not change the distribution") {
        auto a = LabelDistribution::from_counts({2, 1, 3});
        auto b = LabelDistribution::from_counts({8, 4, 12});
        REQUIRE(a.p == b.p);
    }
    SECTION("no votes is an error") {
        REQUIRE_THROWS_WITH(aggregate_votes({}), "no annotations");
        REQUIRE_THROWS_WITH(LabelDistribution::from_counts({0, 0, 0}), "no annotations");
    }
}

TEST_CASE("majority label breaks ties toward severity", "[data]") {
    auto maj = [](int64_t b, int64_t sb, int64_t nb) {
        return majority_label(LabelDistribution::from_counts({b, sb, nb}));
    };
    REQUIRE(maj(9, 3, 3) == Label::B);
    REQUIRE(maj(7, 7, 1) == Label::B);
    REQUIRE(maj(5, 5, 5) == Label::B);
    REQUIRE(maj(1, 7, 7) == Label::SB);
    REQUIRE(maj(1, 2, 7) == Label::NB);
    REQUIRE(argmax_label(std::array<double, 3>{0.2, 0.2, 0.6}) == Label::NB);
    REQUIRE(argmax_label(std::array<double, 3>{0.4, 0.4, 0.2}) == Label::B);
}

TEST_CASE("distribution validation", "[data]") {
    REQUIRE_THROWS_WITH(LabelDistribution::from_probs({0.5, 0.2, 0.2}),
                        "label distribution not normalized");
    REQUIRE_THROWS_AS(LabelDistribution::from_probs({1.2, -0.2, 0.0}), input_error);
    REQUIRE_NOTHROW(LabelDistribution::from_probs({0.25, 0.5, 0.25}));
}

TEST_CASE("dialogue parsing", "[data]") {
    SECTION("annotations and speakers round through") {
        auto j = make_dialogue(
            "dlg1", {make_turn(0, "U", "hi"), make_turn(1, "S", "hello", "OOOXXT")});
        Dialogue d = parse_dbdc_json(j);
        REQUIRE(d.dialogue_id == "dlg1");
        REQUIRE(d.turns.size() == 2);
        REQUIRE(d.turns[0].speaker == Speaker::User);
        REQUIRE(d.turns[0].annotations.empty());
        REQUIRE(d.turns[1].speaker == Speaker::System);
        REQUIRE(d.turns[1].annotations.size() == 6);
    }
    SECTION("bad vote symbol names the turn") {
        auto j = make_dialogue("dlg1", {make_turn(3, "S", "hello", "OZ")});
        REQUIRE_THROWS_WITH(parse_dbdc_json(j),
                            ContainsSubstring("unknown breakdown symbol Z at turn 3"));
    }
    SECTION("bad speaker") {
        auto j = make_dialogue("dlg1", {make_turn(0, "R", "hi")});
        REQUIRE_THROWS_WITH(parse_dbdc_json(j), ContainsSubstring("unknown speaker"));
    }
    SECTION("missing top-level keys") {
        REQUIRE_THROWS_WITH(parse_dbdc_json(json{{"turns", json::array()}}),
                            ContainsSubstring("dialogue-id"));
    }
    SECTION("malformed file reports the byte offset") {
        const std::string path = "bad_dialogue.json";
        write_file(path, "{\"dialogue-id\": \"x\", ");
        REQUIRE_THROWS_WITH(parse_dbdc_file(path), ContainsSubstring("at byte"));
        std::remove(path.c_str());
    }
}

TEST_CASE("example extraction walks annotated system turns", "[data]") {
    auto j = make_dialogue("d7", {
        make_turn(0, "S", "welcome", "OOO"),       // system speaks first: empty context
        make_turn(1, "U", "hi there"),
        make_turn(2, "S", "reply one", "OOX"),
        make_turn(3, "S", "reply two", "XXX"),     // same user context as turn 2
        make_turn(4, "S", "unannotated"),          // skipped
        make_turn(5, "U", "ignored votes", "XXX"), // user annotations are ignored
        make_turn(6, "S", "reply three", "TTT"),
    });
    auto examples = build_examples(parse_dbdc_json(j));
    REQUIRE(examples.size() == 4);

    REQUIRE(examples[0].context == "");
    REQUIRE(examples[0].utterance == "welcome");
    REQUIRE(examples[0].origin == "d7#0");
    REQUIRE(examples[0].majority == Label::NB);

    REQUIRE(examples[1].context == "hi there");
    REQUIRE(examples[1].origin == "d7#2");

    REQUIRE(examples[2].context == "hi there");
    REQUIRE(examples[2].utterance == "reply two");
    REQUIRE(examples[2].majority == Label::B);

    REQUIRE(examples[3].context == "ignored votes");
    REQUIRE(examples[3].majority == Label::SB);
    REQUIRE(examples[3].target.counts == std::array<int64_t, 3>{0, 3, 0});
}

TEST_CASE("label histogram", "[data]") {
    auto j = make_dialogue("d", {
        make_turn(0, "S", "a", "XXX"),
        make_turn(1, "S", "b", "OOO"),
        make_turn(2, "S", "c", "OOO"),
        make_turn(3, "S", "d", "TTT"),
    });
    auto h = label_histogram(build_examples(parse_dbdc_json(j)));
    REQUIRE(h == std::array<double, 3>{0.25, 0.25, 0.5});
    REQUIRE_THROWS_WITH(label_histogram({}), "label_histogram: no examples");
}

TEST_CASE("example JSONL round trip", "[data]") {
    auto j = make_dialogue("rt", {make_turn(0, "U", "ctx words"),
                                  make_turn(1, "S", "utt words", "OOTTX")});
    auto examples = build_examples(parse_dbdc_json(j));
    const std::string path = "examples_rt.jsonl";
    write_examples_jsonl(path, examples);
    auto back = read_examples_jsonl(path);
    REQUIRE(back.size() == examples.size());
    REQUIRE(back[0].context == examples[0].context);
    REQUIRE(back[0].utterance == examples[0].utterance);
    REQUIRE(back[0].origin == examples[0].origin);
    REQUIRE(back[0].target.counts == examples[0].target.counts);
    REQUIRE(back[0].target.p == examples[0].target.p);
    REQUIRE(back[0].majority == examples[0].majority);
    std::remove(path.c_str());
}

TEST_CASE("training rows distinguish originals from augments", "[data]") {
    const std::string path = "train_rows.jsonl";
    std::string content;
    content += json{{"context", "c"}, {"utterance", "u"},
                    {"counts", {1, 1, 2}}, {"origin", "d#1"}}.dump() + "\n";
    content += json{{"context", "c2"}, {"utterance", "u2"},
                    {"pseudo", {1.0, 0.0, 0.0}}, {"origin", "d#1#aug0"}}.dump() + "\n";
    write_file(path, content);

    auto rows = read_training_rows(path);
    REQUIRE(rows.size() == 2);
    REQUIRE_FALSE(rows[0].is_augment);
    REQUIRE(rows[0].target_p == std::array<double, 3>{0.25, 0.25, 0.5});
    REQUIRE(rows[0].origin == "d#1");
    REQUIRE(rows[1].is_augment);
    REQUIRE(rows[1].target_p == std::array<double, 3>{1.0, 0.0, 0.0});
    std::remove(path.c_str());
}

namespace {

std::string dump_line(const std::string& id, const std::string& parent,
                      const std::string& body) {
    return json{{"id", id}, {"parent_id", parent}, {"body", body}}.dump() + "\n";
}

}  // namespace

TEST_CASE("reddit pair extraction", "[data]") {
    SECTION("comment replying to a seen comment yields a pair") {
        std::istringstream dump(dump_line("aa", "t3_post", "parent text") +
                                dump_line("bb", "t1_aa", "child text"));
        RedditExtractOptions opts;
        auto pairs = extract_reddit_pairs(dump, opts);
        REQUIRE(pairs.size() == 1);
        REQUIRE(pairs[0].parent_text == "parent text");
        REQUIRE(pairs[0].child_text == "child text");
        REQUIRE(pairs[0].pair_id == "bb");
    }
    SECTION("top-level comments never pair and unseen parents are skipped") {
        std::istringstream dump(dump_line("aa", "t3_post", "top level") +
                                dump_line("bb", "t1_zz", "orphan child"));
        std::istringstream copy(dump.str());
        RedditExtractStats stats;
        RedditExtractOptions opts;
        extract_reddit_pairs(copy, opts, [&](const RedditPair&) { ++stats.pairs; });
        REQUIRE(stats.pairs == 0);
    }
    SECTION("deleted, removed, and empty bodies are dropped as both roles") {
        std::istringstream dump(dump_line("aa", "t3_post", "[deleted]") +
                                dump_line("bb", "t1_aa", "child of deleted") +
                                dump_line("cc", "t3_post", "live parent") +
                                dump_line("dd", "t1_cc", "[removed]") +
                                dump_line("ee", "t1_cc", ""));
        RedditExtractOptions opts;
        std::vector<RedditPair> pairs;
        auto stats = extract_reddit_pairs(
            dump, opts, [&](const RedditPair& p) { pairs.push_back(p); });
        REQUIRE(pairs.empty());
        REQUIRE(stats.dropped_bodies == 3);
        REQUIRE(stats.lines == 5);
    }
    SECTION("malformed lines are counted, not fatal") {
        std::istringstream dump("this is not json\n" +
                                dump_line("aa", "t3_post", "parent") +
                                "{\"id\": \"xx\"}\n" +
                                dump_line("bb", "t1_aa", "child"));
        RedditExtractOptions opts;
        std::vector<RedditPair> pairs;
        auto stats = extract_reddit_pairs(
            dump, opts, [&](const RedditPair& p) { pairs.push_back(p); });
        REQUIRE(stats.skipped_lines == 2);
        REQUIRE(pairs.size() == 1);
    }
    SECTION("limit stops the scan") {
        std::string text;
        text += dump_line("p0", "t3_post", "root");
        for (int i = 0; i < 10; ++i)
            text += dump_line("c" + std::to_string(i), "t1_p0", "reply");
        std::istringstream dump(text);
        RedditExtractOptions opts;
        opts.limit = 3;
        auto pairs = extract_reddit_pairs(dump, opts);
        REQUIRE(pairs.size() == 3);
    }
    SECTION("bounded index evicts oldest parents first") {
        RedditExtractOptions opts;
        opts.capacity = 2;
        std::istringstream dump(dump_line("p1", "t3_post", "one") +
                                dump_line("p2", "t3_post", "two") +
                                dump_line("p3", "t3_post", "three") +  // evicts p1
                                dump_line("c1", "t1_p1", "reply to one") +
                                dump_line("c2", "t1_p3", "reply to three"));
        auto pairs = extract_reddit_pairs(dump, opts);
        REQUIRE(pairs.size() == 1);
        REQUIRE(pairs[0].parent_text == "three");
    }
    SECTION("pairs file round trip") {
        std::vector<RedditPair> pairs{{"parent a", "child a", "id1"},
                                      {"parent b", "child b", "id2"}};
        const std::string path = "pairs_rt.jsonl";
        write_pairs_jsonl(path, pairs);
        auto back = read_pairs_jsonl(path);
        REQUIRE(back.size() == 2);
        REQUIRE(back[1].parent_text == "parent b");
        REQUIRE(back[1].child_text == "child b");
        REQUIRE(back[1].pair_id == "id2");
        std::remove(path.c_str());
    }
}
