#pragma once

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "breakdown/checkpoint.hpp"
#include "breakdown/config.hpp"
#include "breakdown/dialogue.hpp"
#include "breakdown/finetune.hpp"
#include "breakdown/metrics.hpp"
#include "breakdown/pretrain.hpp"
#include "breakdown/reddit.hpp"
#include "breakdown/ssmba.hpp"
#include "breakdown/wordpiece.hpp"

namespace breakdown {

/// Reads parent/child pairs from either an already-extracted pairs file or a
/// raw comment dump; the format is sniffed from the first parseable line.
inline std::vector<RedditPair> load_reddit_pairs(const std::string& path,
                                                 int64_t limit = 0) {
    const std::string content = read_file(path);
    bool pairs_format = false;
    size_t start = 0;
    while (start < content.size()) {
        size_t nl = content.find('\n', start);
        if (nl == std::string::npos) nl = content.size();
        const std::string line = content.substr(start, nl - start);
        start = nl + 1;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        pairs_format = j.contains("parent") && j.contains("child");
        break;
    }
    if (pairs_format) {
        auto pairs = read_pairs_jsonl(path);
        if (limit > 0 && static_cast<int64_t>(pairs.size()) > limit)
            pairs.resize(static_cast<size_t>(limit));
        return pairs;
    }
    std::istringstream ss(content);
    RedditExtractOptions opts;
    opts.limit = limit;
    return extract_reddit_pairs(ss, opts);
}

namespace detail {

inline nlohmann::json file_entry(const std::string& path) {
    return nlohmann::json{{"path", path}, {"fnv1a64", hash_hex(hash_file(path))}};
}

inline void write_report(const std::string& path, const MetricReport& r) {
    write_file(path, nlohmann::json(r).dump(2) + "\n");
}

}  // namespace detail

/// The full recipe: vocabulary, continued MLM pre-training on parent/child
/// pairs, teacher fine-tuning, SSMBA augmentation, seed-varied fine-tuning
/// reruns, top-k ensembling, and evaluation. Every artifact lands in
/// cfg.out_dir and is listed in the returned manifest (also written there as
/// manifest.json). The manifest carries no timestamps, so identical config
/// and seed reproduce it byte for byte.
inline nlohmann::json run_pipeline(const RunConfig& cfg, std::ostream* progress = nullptr) {
    const auto note = [&](const std::string& msg) {
        if (progress) *progress << "[pipeline] " << msg << "\n" << std::flush;
    };
    std::filesystem::create_directories(cfg.out_dir);
    const std::string od = cfg.out_dir + "/";
    const JsBase base = js_base_from_string(cfg.js_base);

    nlohmann::json manifest;
    manifest["config"] = cfg.to_kv();
    manifest["config_hash"] = cfg.config_hash();
    manifest["seed"] = cfg.seed;

    nlohmann::json inputs;
    inputs["data.train"] = detail::file_entry(cfg.train_path);
    inputs["data.valid"] = detail::file_entry(cfg.valid_path);
    inputs["data.reddit"] = detail::file_entry(cfg.reddit_path);
    if (!cfg.test_path.empty()) inputs["data.test"] = detail::file_entry(cfg.test_path);
    if (!cfg.vocab_path.empty()) inputs["vocab.path"] = detail::file_entry(cfg.vocab_path);
    manifest["inputs"] = std::move(inputs);

    const std::vector<Example> train_examples = read_examples_jsonl(cfg.train_path);
    const std::vector<Example> valid_examples = read_examples_jsonl(cfg.valid_path);
    if (train_examples.empty()) throw input_error("pipeline: empty training set");
    if (valid_examples.empty()) throw input_error("pipeline: empty validation set");

    note("reading parent/child pairs from " + cfg.reddit_path);
    const std::vector<RedditPair> pairs = load_reddit_pairs(cfg.reddit_path, cfg.reddit_limit);
    if (pairs.empty()) throw input_error("pipeline: no parent/child pairs extracted");
    manifest["reddit"] = nlohmann::json{{"pairs", pairs.size()}};

    Vocab vocab = [&] {
        if (!cfg.vocab_path.empty()) {
            note("loading vocabulary from " + cfg.vocab_path);
            return Vocab::load(cfg.vocab_path);
        }
        note("training vocabulary (size " + std::to_string(cfg.vocab_size) + ")");
        std::vector<std::string> corpus;
        corpus.reserve(2 * (train_examples.size() + pairs.size()));
        for (const auto& e : train_examples) {
            corpus.push_back(e.context);
            corpus.push_back(e.utterance);
        }
        for (const auto& p : pairs) {
            corpus.push_back(p.parent_text);
            corpus.push_back(p.child_text);
        }
        return train_wordpiece(corpus, cfg.vocab_size, cfg.min_freq);
    }();
    vocab.save(od + "vocab.txt");
    manifest["vocab"] = nlohmann::json{{"file", "vocab.txt"},
                                       {"size", vocab.size()},
                                       {"fnv1a64", hash_hex(hash_file(od + "vocab.txt"))}};

    ModelConfig mcfg = cfg.model;
    mcfg.vocab_size = vocab.size();  // the trained vocabulary can come up short

    note("pre-training (" + std::to_string(cfg.pretrain.epochs) + " epochs over " +
         std::to_string(pairs.size()) + " pairs)");
    PretrainResult pre = run_pretrain(cfg.pretrain, mcfg, pairs, vocab);
    save_checkpoint(od + "pretrain.ckpt", pre.cfg, pre.params);
    write_pretrain_log_csv(od + "pretrain_log.csv", pre.log);
    manifest["stages"]["pretrain"] = nlohmann::json{
        {"checkpoint", "pretrain.ckpt"},
        {"fnv1a64", hash_hex(hash_file(od + "pretrain.ckpt"))},
        {"log", "pretrain_log.csv"},
        {"steps", pre.log.empty() ? 0 : pre.log.back().step},
        {"epoch_mean_loss", pre.epoch_mean_loss},
        {"first_epoch_loss", pre.epoch_mean_loss.front()},
        {"final_epoch_loss", pre.epoch_mean_loss.back()}};

    std::vector<TrainRecord> original_records;
    original_records.reserve(train_examples.size());
    for (const auto& e : train_examples) original_records.push_back(to_train_record(e));

    note("fine-tuning the teacher on " + std::to_string(original_records.size()) +
         " original examples");
    FinetunePlan teacher_plan = cfg.finetune;
    teacher_plan.seed = derive_seed(cfg.finetune.seed, fnv1a64("teacher"));
    FinetuneResult teacher = run_finetune(teacher_plan, mcfg, pre.params,
                                          original_records, valid_examples, vocab);
    save_checkpoint(od + "teacher.ckpt", teacher.cfg, teacher.params);
    write_finetune_log_csv(od + "teacher_log.csv", teacher.log);
    const auto teacher_preds = predict(teacher.params, teacher.cfg, valid_examples, vocab);
    write_predictions_jsonl(od + "teacher_valid.jsonl", teacher_preds);
    const MetricReport teacher_report = evaluate(teacher_preds, valid_examples, base);
    detail::write_report(od + "teacher_report.json", teacher_report);
    manifest["stages"]["teacher"] = nlohmann::json{
        {"checkpoint", "teacher.ckpt"},
        {"fnv1a64", hash_hex(hash_file(od + "teacher.ckpt"))},
        {"log", "teacher_log.csv"},
        {"valid_predictions", "teacher_valid.jsonl"},
        {"valid_report", teacher_report}};

    note("augmenting (" + std::to_string(cfg.augment.num_augments) + " per example, " +
         cfg.augment.strategy.to_string() + ", " + cfg.augment.label_mode + " labels)");
    const auto augments =
        augment_dataset(train_examples, teacher.params, teacher.cfg, pre.params, pre.cfg,
                        vocab, cfg.augment, cfg.threads);
    write_augmented_jsonl(od + "augmented.jsonl", train_examples, augments);
    manifest["stages"]["augment"] = nlohmann::json{
        {"file", "augmented.jsonl"},
        {"fnv1a64", hash_hex(hash_file(od + "augmented.jsonl"))},
        {"original_rows", train_examples.size()},
        {"augment_rows", augments.size()}};

    const std::vector<TrainRecord> member_records = read_training_rows(od + "augmented.jsonl");

    note("fine-tuning " + std::to_string(cfg.ensemble_seeds) + " ensemble candidates on " +
         std::to_string(member_records.size()) + " rows");
    std::vector<FinetuneResult> members(static_cast<size_t>(cfg.ensemble_seeds));
    {
        const size_t n = members.size();
        const size_t nthreads =
            std::max<size_t>(1, std::min<size_t>(static_cast<size_t>(cfg.threads), n));
        auto work = [&](size_t t0) {
            for (size_t i = t0; i < n; i += nthreads) {
                FinetunePlan plan = cfg.finetune;
                plan.seed = derive_seed(cfg.finetune.seed, i);
                members[i] = run_finetune(plan, mcfg, pre.params, member_records,
                                          valid_examples, vocab);
            }
        };
        if (nthreads == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (size_t t = 0; t < nthreads; ++t) pool.emplace_back(work, t);
            for (auto& th : pool) th.join();
        }
    }

    std::vector<std::pair<std::string, MetricReport>> candidates;
    std::map<std::string, size_t> member_index;
    std::vector<std::vector<PredictionRecord>> member_valid_preds(members.size());
    nlohmann::json member_entries = nlohmann::json::array();
    for (size_t i = 0; i < members.size(); ++i) {
        const std::string name = "member_" + std::to_string(i);
        member_index[name] = i;
        save_checkpoint(od + name + ".ckpt", members[i].cfg, members[i].params);
        write_finetune_log_csv(od + name + "_log.csv", members[i].log);
        member_valid_preds[i] = predict(members[i].params, members[i].cfg, valid_examples, vocab);
        write_predictions_jsonl(od + name + "_valid.jsonl", member_valid_preds[i]);
        const MetricReport rep = evaluate(member_valid_preds[i], valid_examples, base);
        candidates.emplace_back(name, rep);
        member_entries.push_back(nlohmann::json{
            {"name", name},
            {"checkpoint", name + ".ckpt"},
            {"fnv1a64", hash_hex(hash_file(od + name + ".ckpt"))},
            {"valid_predictions", name + "_valid.jsonl"},
            {"valid_report", rep}});
    }
    manifest["stages"]["members"] = std::move(member_entries);

    const std::vector<std::string> selected =
        select_top_k(candidates, "accuracy", cfg.ensemble_top_k);
    note("ensembling top " + std::to_string(cfg.ensemble_top_k) + " of " +
         std::to_string(members.size()) + " members by validation accuracy");

    std::vector<std::vector<PredictionRecord>> selected_valid;
    for (const auto& name : selected) selected_valid.push_back(member_valid_preds[member_index[name]]);
    const auto ensemble_valid = ensemble_average(selected_valid);
    write_predictions_jsonl(od + "ensemble_valid.jsonl", ensemble_valid);
    const MetricReport ensemble_valid_report = evaluate(ensemble_valid, valid_examples, base);
    detail::write_report(od + "valid_report.json", ensemble_valid_report);

    nlohmann::json ensemble_entry{{"selected", selected},
                                  {"valid_predictions", "ensemble_valid.jsonl"},
                                  {"valid_report", ensemble_valid_report}};

    if (!cfg.test_path.empty()) {
        const std::vector<Example> test_examples = read_examples_jsonl(cfg.test_path);
        if (test_examples.empty()) throw input_error("pipeline: empty test set");
        std::vector<std::vector<PredictionRecord>> selected_test;
        for (const auto& name : selected) {
            const auto& m = members[member_index[name]];
            selected_test.push_back(predict(m.params, m.cfg, test_examples, vocab));
        }
        const auto ensemble_test = ensemble_average(selected_test);
        write_predictions_jsonl(od + "ensemble_test.jsonl", ensemble_test);
        const MetricReport test_report = evaluate(ensemble_test, test_examples, base);
        detail::write_report(od + "test_report.json", test_report);
        ensemble_entry["test_predictions"] = "ensemble_test.jsonl";
        ensemble_entry["test_report"] = test_report;
    }
    manifest["stages"]["ensemble"] = std::move(ensemble_entry);

    write_file(od + "manifest.json", manifest.dump(2) + "\n");
    note("done; manifest at " + od + "manifest.json");
    return manifest;
}

}  // namespace breakdown
