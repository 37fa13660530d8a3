#pragma once

#include <map>
#include <string>
#include <vector>

#include "breakdown/common.hpp"
#include "breakdown/finetune.hpp"
#include "breakdown/masking.hpp"
#include "breakdown/metrics.hpp"
#include "breakdown/model.hpp"
#include "breakdown/pretrain.hpp"
#include "breakdown/ssmba.hpp"
#include "breakdown/vocab.hpp"

namespace breakdown {

/// Everything a full pipeline run needs, resolved from a flat key=value file
/// plus command-line overrides.
struct RunConfig {
    uint64_t seed = 0;
    int threads = 1;
    std::string out_dir;

    std::string train_path;   // example JSONL or a directory of dialogue JSON
    std::string valid_path;
    std::string test_path;    // optional
    std::string reddit_path;  // raw comment dump or extracted pairs JSONL
    int64_t reddit_limit = 0;

    std::string vocab_path;  // optional pre-trained vocabulary
    int vocab_size = 1000;
    int min_freq = 2;

    ModelConfig model;
    PretrainPlan pretrain;
    AugmentConfig augment;
    FinetunePlan finetune;

    int ensemble_seeds = 8;
    int ensemble_top_k = 4;
    std::string js_base = "2";

    // Canonical sorted key=value rendering; hashing it yields the config hash
    // recorded in manifests.
    std::map<std::string, std::string> to_kv() const {
        std::map<std::string, std::string> kv;
        kv["seed"] = std::to_string(seed);
        kv["threads"] = std::to_string(threads);
        kv["out_dir"] = out_dir;
        kv["data.train"] = train_path;
        kv["data.valid"] = valid_path;
        kv["data.test"] = test_path;
        kv["data.reddit"] = reddit_path;
        kv["data.reddit_limit"] = std::to_string(reddit_limit);
        kv["vocab.path"] = vocab_path;
        kv["vocab.size"] = std::to_string(vocab_size);
        kv["vocab.min_freq"] = std::to_string(min_freq);
        kv["model.vocab_size"] = std::to_string(model.vocab_size);
        kv["model.max_len"] = std::to_string(model.max_len);
        kv["model.hidden_dim"] = std::to_string(model.hidden_dim);
        kv["model.num_layers"] = std::to_string(model.num_layers);
        kv["model.num_heads"] = std::to_string(model.num_heads);
        kv["model.ffn_dim"] = std::to_string(model.ffn_dim);
        kv["model.dropout_rate"] = fmt_double(model.dropout_rate);
        kv["model.tie_mlm"] = model.tie_mlm ? "true" : "false";
        kv["mask.select_prob"] = fmt_double(pretrain.mask.select_prob);
        kv["mask.mask_frac"] = fmt_double(pretrain.mask.mask_frac);
        kv["mask.random_frac"] = fmt_double(pretrain.mask.random_frac);
        kv["mask.keep_frac"] = fmt_double(pretrain.mask.keep_frac);
        kv["pretrain.epochs"] = std::to_string(pretrain.epochs);
        kv["pretrain.batch_size"] = std::to_string(pretrain.batch_size);
        kv["pretrain.lr"] = fmt_double(pretrain.learning_rate);
        kv["pretrain.warmup_steps"] = std::to_string(pretrain.warmup_steps);
        kv["pretrain.max_steps"] = std::to_string(pretrain.max_steps);
        kv["pretrain.init"] = pretrain.init;
        kv["augment.num"] = std::to_string(augment.num_augments);
        kv["augment.select_prob"] = fmt_double(augment.corruption.select_prob);
        kv["augment.strategy"] = augment.strategy.to_string();
        kv["augment.temperature"] = fmt_double(augment.strategy.temperature);
        kv["augment.label"] = augment.label_mode;
        kv["finetune.epochs"] = std::to_string(finetune.epochs);
        kv["finetune.batch_size"] = std::to_string(finetune.batch_size);
        kv["finetune.lr"] = fmt_double(finetune.learning_rate);
        kv["finetune.warmup_frac"] = fmt_double(finetune.warmup_frac);
        kv["finetune.eval_every"] = std::to_string(finetune.eval_every);
        kv["finetune.metric"] = finetune.selection_metric;
        kv["ensemble.num_seeds"] = std::to_string(ensemble_seeds);
        kv["ensemble.top_k"] = std::to_string(ensemble_top_k);
        kv["eval.js_base"] = js_base;
        return kv;
    }

    std::string canonical_text() const {
        std::string out;
        for (const auto& [k, v] : to_kv()) {
            out += k;
            out += " = ";
            out += v;
            out += '\n';
        }
        return out;
    }

    std::string config_hash() const { return hash_hex(fnv1a64(canonical_text())); }
};

namespace detail {

struct KvParser {
    std::map<std::string, std::string> raw;
    std::vector<std::string> errors;
    std::map<std::string, bool> consumed;

    void load_text(const std::string& text, const std::string& source) {
        size_t start = 0;
        int line_no = 0;
        while (start <= text.size()) {
            size_t nl = text.find('\n', start);
            if (nl == std::string::npos) nl = text.size();
            std::string line = text.substr(start, nl - start);
            start = nl + 1;
            ++line_no;
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            const auto trim = [](std::string s) {
                size_t b = s.find_first_not_of(" \t\r");
                size_t e = s.find_last_not_of(" \t\r");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            line = trim(line);
            if (line.empty()) continue;
            const size_t eq = line.find('=');
            if (eq == std::string::npos) {
                errors.push_back(source + ":" + std::to_string(line_no) +
                                 ": expected key = value");
                continue;
            }
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) {
                errors.push_back(source + ":" + std::to_string(line_no) + ": empty key");
                continue;
            }
            raw[key] = value;  // later assignments win, so overrides are easy
        }
        if (start == 0 && !text.empty()) errors.push_back(source + ": unreadable");
    }

    bool has(const std::string& key) const { return raw.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& dflt) {
        consumed[key] = true;
        auto it = raw.find(key);
        return it == raw.end() ? dflt : it->second;
    }

    int64_t get_int(const std::string& key, int64_t dflt) {
        consumed[key] = true;
        auto it = raw.find(key);
        if (it == raw.end()) return dflt;
        try {
            size_t pos = 0;
            int64_t v = std::stoll(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            errors.push_back(key + ": expected an integer, got \"" + it->second + "\"");
            return dflt;
        }
    }

    double get_double(const std::string& key, double dflt) {
        consumed[key] = true;
        auto it = raw.find(key);
        if (it == raw.end()) return dflt;
        try {
            size_t pos = 0;
            double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            errors.push_back(key + ": expected a number, got \"" + it->second + "\"");
            return dflt;
        }
    }

    bool get_bool(const std::string& key, bool dflt) {
        consumed[key] = true;
        auto it = raw.find(key);
        if (it == raw.end()) return dflt;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        errors.push_back(key + ": expected true or false, got \"" + it->second + "\"");
        return dflt;
    }

    void flag_unknown() {
        for (const auto& [k, _] : raw)
            if (!consumed.count(k)) errors.push_back(k + ": unknown configuration key");
    }
};

}  // namespace detail

/// Parses and fully validates a run configuration. `overrides` are
/// "key=value" strings that win over file contents. All violations are
/// collected and reported together, each naming its key path.
inline RunConfig validate_config(const std::string& path,
                                 const std::vector<std::string>& overrides = {},
                                 bool require_paths = true) {
    detail::KvParser p;
    if (!path.empty()) p.load_text(read_file(path), path);
    for (const auto& ov : overrides) p.load_text(ov, "--set");

    RunConfig c;
    c.seed = static_cast<uint64_t>(p.get_int("seed", 0));
    c.threads = static_cast<int>(p.get_int("threads", 1));
    c.out_dir = p.get_string("out_dir", "run_out");
    c.train_path = p.get_string("data.train", "");
    c.valid_path = p.get_string("data.valid", "");
    c.test_path = p.get_string("data.test", "");
    c.reddit_path = p.get_string("data.reddit", "");
    c.reddit_limit = p.get_int("data.reddit_limit", 0);
    c.vocab_path = p.get_string("vocab.path", "");
    c.vocab_size = static_cast<int>(p.get_int("vocab.size", 1000));
    c.min_freq = static_cast<int>(p.get_int("vocab.min_freq", 2));

    c.model.vocab_size = static_cast<int>(p.get_int("model.vocab_size", c.vocab_size));
    c.model.max_len = static_cast<int>(p.get_int("model.max_len", 64));
    c.model.hidden_dim = static_cast<int>(p.get_int("model.hidden_dim", 64));
    c.model.num_layers = static_cast<int>(p.get_int("model.num_layers", 2));
    c.model.num_heads = static_cast<int>(p.get_int("model.num_heads", 2));
    c.model.ffn_dim = static_cast<int>(p.get_int("model.ffn_dim", 128));
    c.model.dropout_rate = p.get_double("model.dropout_rate", 0.0);
    c.model.tie_mlm = p.get_bool("model.tie_mlm", true);
    c.model.seed = c.seed;

    c.pretrain.mask.select_prob = p.get_double("mask.select_prob", 0.15);
    c.pretrain.mask.mask_frac = p.get_double("mask.mask_frac", 0.8);
    c.pretrain.mask.random_frac = p.get_double("mask.random_frac", 0.1);
    c.pretrain.mask.keep_frac = p.get_double("mask.keep_frac", 0.1);
    c.pretrain.epochs = static_cast<int>(p.get_int("pretrain.epochs", 40));
    c.pretrain.batch_size = static_cast<int>(p.get_int("pretrain.batch_size", 32));
    c.pretrain.learning_rate = p.get_double("pretrain.lr", 1e-4);
    c.pretrain.warmup_steps = static_cast<int>(p.get_int("pretrain.warmup_steps", 100));
    c.pretrain.max_steps = p.get_int("pretrain.max_steps", 0);
    c.pretrain.init = p.get_string("pretrain.init", "scratch");

    c.augment.num_augments = static_cast<int>(p.get_int("augment.num", 2));
    c.augment.corruption.select_prob = p.get_double("augment.select_prob", 0.45);
    const std::string strategy = p.get_string("augment.strategy", "sample");
    const double temperature = p.get_double("augment.temperature", 1.0);
    c.augment.label_mode = p.get_string("augment.label", "soft");

    c.finetune.epochs = static_cast<int>(p.get_int("finetune.epochs", 20));
    c.finetune.batch_size = static_cast<int>(p.get_int("finetune.batch_size", 16));
    c.finetune.learning_rate = p.get_double("finetune.lr", 3e-5);
    c.finetune.warmup_frac = p.get_double("finetune.warmup_frac", 0.1);
    c.finetune.eval_every = static_cast<int>(p.get_int("finetune.eval_every", 0));
    c.finetune.selection_metric = p.get_string("finetune.metric", "accuracy");

    c.ensemble_seeds = static_cast<int>(p.get_int("ensemble.num_seeds", 8));
    c.ensemble_top_k = static_cast<int>(p.get_int("ensemble.top_k", 4));
    c.js_base = p.get_string("eval.js_base", "2");

    p.flag_unknown();
    std::vector<std::string> errs = std::move(p.errors);

    for (const auto& e : c.model.validate()) errs.push_back("model: " + e);
    const auto check = [&errs](const std::string& scope, auto&& fn) {
        try {
            fn();
        } catch (const input_error& e) {
            const std::string what = e.what();
            errs.push_back(what.rfind(scope + ": ", 0) == 0 ? what
                                                            : scope + ": " + what);
        }
    };
    check("pretrain", [&] { c.pretrain.validate(); });
    check("augment", [&] {
        c.augment.strategy = ReconStrategy::parse(strategy, temperature);
        c.augment.validate();
    });
    check("finetune", [&] { c.finetune.validate(); });
    check("eval.js_base", [&] { js_base_from_string(c.js_base); });
    if (c.threads < 1) errs.push_back("threads: must be >= 1");
    if (c.vocab_size <= Vocab::kNumSpecials)
        errs.push_back("vocab.size: must exceed the " +
                       std::to_string(Vocab::kNumSpecials) + " special tokens");
    if (c.min_freq < 1) errs.push_back("vocab.min_freq: must be >= 1");
    if (c.ensemble_seeds < 1) errs.push_back("ensemble.num_seeds: must be >= 1");
    if (c.ensemble_top_k < 1 || c.ensemble_top_k > c.ensemble_seeds)
        errs.push_back("ensemble.top_k: must be in [1, ensemble.num_seeds]");
    if (c.out_dir.empty()) errs.push_back("out_dir: must not be empty");

    if (require_paths) {
        const auto need = [&](const char* key, const std::string& value) {
            if (value.empty())
                errs.push_back(std::string(key) + ": required");
            else if (!file_exists(value))
                errs.push_back(std::string(key) + ": path does not exist: " + value);
        };
        need("data.train", c.train_path);
        need("data.valid", c.valid_path);
        need("data.reddit", c.reddit_path);
        if (!c.test_path.empty() && !file_exists(c.test_path))
            errs.push_back("data.test: path does not exist: " + c.test_path);
        if (!c.vocab_path.empty() && !file_exists(c.vocab_path))
            errs.push_back("vocab.path: path does not exist: " + c.vocab_path);
    }

    if (!errs.empty()) {
        std::string msg = "invalid configuration (" + std::to_string(errs.size()) +
                          " problem" + (errs.size() == 1 ? "" : "s") + "):";
        for (const auto& e : errs) msg += "\n  - " + e;
        throw input_error(msg);
    }

    c.augment.seed = derive_seed(c.seed, fnv1a64("augment"));
    c.pretrain.seed = derive_seed(c.seed, fnv1a64("pretrain"));
    c.finetune.seed = derive_seed(c.seed, fnv1a64("finetune"));
    return c;
}

}  // namespace breakdown
