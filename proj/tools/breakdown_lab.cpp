// Command-line front end: every pipeline stage as a subcommand, sharing the
// flat key=value configuration format and deterministic seeding.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "breakdown/breakdown.hpp"

namespace {

using namespace breakdown;

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("BREAKDOWN_LAB_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return v;
        } catch (const std::exception&) {
            throw input_error("BREAKDOWN_LAB_THREADS is not a positive integer");
        }
    }
    return 1;
}

void ensure_parent_dir(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

// --- tok ------------------------------------------------------------------

struct TokTrainArgs {
    std::string corpus, out;
    int vocab_size = 1000, min_freq = 2;
};

void run_tok_train(const TokTrainArgs& a) {
    std::ifstream in(a.corpus);
    if (!in) throw input_error("cannot open corpus: " + a.corpus);
    const Vocab vocab = train_wordpiece(in, a.vocab_size, a.min_freq);
    ensure_parent_dir(a.out);
    vocab.save(a.out);
    std::cout << "trained " << vocab.size() << " pieces -> " << a.out << "\n";
}

struct TokEncodeArgs {
    std::string vocab;
    bool pair = false;
    int max_len = 64;
};

void run_tok_encode(const TokEncodeArgs& a) {
    const Vocab vocab = Vocab::load(a.vocab);
    std::string line;
    while (std::getline(std::cin, line)) {
        if (a.pair) {
            const size_t tab = line.find('\t');
            const std::string ctx = tab == std::string::npos ? "" : line.substr(0, tab);
            const std::string utt = tab == std::string::npos ? line : line.substr(tab + 1);
            const EncodedPair p = encode_pair(vocab, ctx, utt, a.max_len);
            std::cout << nlohmann::json{{"ids", p.token_ids},
                                        {"segments", p.segment_ids},
                                        {"length", p.length}}
                             .dump()
                      << "\n";
        } else {
            const auto ids = encode(vocab, line);
            for (size_t i = 0; i < ids.size(); ++i)
                std::cout << (i ? " " : "") << ids[i];
            std::cout << "\n";
        }
    }
}

// --- extract-reddit ---------------------------------------------------------

struct ExtractArgs {
    std::string dump, out;
    int64_t limit = 0;
    int64_t capacity = 1 << 20;
};

void run_extract(const ExtractArgs& a) {
    std::ifstream in(a.dump);
    if (!in) throw input_error("cannot open dump: " + a.dump);
    ensure_parent_dir(a.out);
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw input_error("cannot write file: " + a.out);
    RedditExtractOptions opts;
    opts.limit = a.limit;
    opts.capacity = static_cast<size_t>(a.capacity);
    const RedditExtractStats stats = extract_reddit_pairs(in, opts, [&](const RedditPair& p) {
        out << nlohmann::json{{"parent", p.parent_text},
                              {"child", p.child_text},
                              {"id", p.pair_id}}
                   .dump()
            << "\n";
    });
    if (!out) throw input_error("write failed: " + a.out);
    std::cout << "lines: " << stats.lines << "  pairs: " << stats.pairs
              << "  skipped: " << stats.skipped_lines
              << "  dropped bodies: " << stats.dropped_bodies << "\n";
}

// --- pretrain ---------------------------------------------------------------

struct PretrainArgs {
    std::string pairs, vocab, config, out, init, log;
    int epochs = -1;
    int64_t max_steps = -1;
    int64_t seed = -1;
};

void run_pretrain_cmd(const PretrainArgs& a) {
    RunConfig rc = validate_config(a.config, {}, false);
    PretrainPlan plan = rc.pretrain;
    if (a.epochs > 0) plan.epochs = a.epochs;
    if (!a.init.empty()) plan.init = a.init;
    if (a.max_steps >= 0) plan.max_steps = a.max_steps;
    if (a.seed >= 0) plan.seed = static_cast<uint64_t>(a.seed);
    plan.validate();

    const Vocab vocab = Vocab::load(a.vocab);
    ModelConfig mcfg = rc.model;
    mcfg.vocab_size = vocab.size();

    const auto pairs = load_reddit_pairs(a.pairs);
    std::cout << "pre-training on " << pairs.size() << " pairs, " << plan.epochs
              << " epochs\n";
    const PretrainResult res = run_pretrain(plan, mcfg, pairs, vocab);
    ensure_parent_dir(a.out);
    save_checkpoint(a.out, res.cfg, res.params);
    const std::string log_path = a.log.empty() ? a.out + ".log.csv" : a.log;
    ensure_parent_dir(log_path);
    write_pretrain_log_csv(log_path, res.log);
    std::cout << "first epoch mean loss: " << fmt_double(res.epoch_mean_loss.front())
              << "\nfinal epoch mean loss: " << fmt_double(res.epoch_mean_loss.back())
              << "\ncheckpoint -> " << a.out << "\nlog -> " << log_path << "\n";
}

// --- augment ----------------------------------------------------------------

struct AugmentArgs {
    std::string train, teacher, recon, vocab, out;
    int num_aug = 1;
    double select_prob = 0.45;
    std::string strategy = "sample";
    double temperature = 1.0;
    std::string label = "soft";
    int64_t seed = 0;
    int threads = 0;
};

void run_augment(const AugmentArgs& a) {
    const Vocab vocab = Vocab::load(a.vocab);
    ModelConfig teacher_cfg, recon_cfg;
    const ModelParams<float> teacher = load_checkpoint(a.teacher, teacher_cfg);
    const ModelParams<float> recon = load_checkpoint(a.recon, recon_cfg);

    AugmentConfig acfg;
    acfg.num_augments = a.num_aug;
    acfg.corruption.select_prob = a.select_prob;
    acfg.strategy = ReconStrategy::parse(a.strategy, a.temperature);
    acfg.label_mode = a.label;
    acfg.seed = static_cast<uint64_t>(a.seed);
    acfg.validate();

    const auto train = read_examples_jsonl(a.train);
    const auto augments = augment_dataset(train, teacher, teacher_cfg, recon, recon_cfg,
                                          vocab, acfg, resolve_threads(a.threads));
    ensure_parent_dir(a.out);
    write_augmented_jsonl(a.out, train, augments);
    std::cout << train.size() << " originals + " << augments.size() << " augments -> "
              << a.out << "\n";
}

// --- finetune ---------------------------------------------------------------

struct FinetuneArgs {
    std::string train, augmented, valid, init, vocab, out, log, pred;
    int epochs = -1, batch_size = -1, eval_every = -1;
    double lr = -1.0, warmup_frac = -1.0;
    std::string metric;
    int64_t seed = -1;
};

void run_finetune_cmd(const FinetuneArgs& a) {
    FinetunePlan plan;
    if (a.epochs > 0) plan.epochs = a.epochs;
    if (a.batch_size > 0) plan.batch_size = a.batch_size;
    if (a.lr >= 0.0) plan.learning_rate = a.lr;
    if (a.warmup_frac >= 0.0) plan.warmup_frac = a.warmup_frac;
    if (a.eval_every >= 0) plan.eval_every = a.eval_every;
    if (!a.metric.empty()) plan.selection_metric = a.metric;
    if (a.seed >= 0) plan.seed = static_cast<uint64_t>(a.seed);
    plan.validate();

    const Vocab vocab = Vocab::load(a.vocab);
    ModelConfig mcfg;
    const ModelParams<float> init = load_checkpoint(a.init, mcfg);

    const auto train_examples = read_examples_jsonl(a.train);
    std::vector<TrainRecord> rows;
    rows.reserve(train_examples.size());
    for (const auto& e : train_examples) rows.push_back(to_train_record(e));
    if (!a.augmented.empty()) {
        // The augmented file repeats the originals, so only its augment rows
        // are appended here.
        for (auto& r : read_training_rows(a.augmented))
            if (r.is_augment) rows.push_back(std::move(r));
    }
    const auto valid = read_examples_jsonl(a.valid);

    std::cout << "fine-tuning on " << rows.size() << " rows (" << train_examples.size()
              << " originals), " << plan.epochs << " epochs\n";
    const FinetuneResult res = run_finetune(plan, mcfg, init, rows, valid, vocab);
    ensure_parent_dir(a.out);
    save_checkpoint(a.out, res.cfg, res.params);
    const std::string log_path = a.log.empty() ? a.out + ".log.csv" : a.log;
    ensure_parent_dir(log_path);
    write_finetune_log_csv(log_path, res.log);
    std::cout << "best " << plan.selection_metric << ": " << fmt_double(res.best_metric)
              << " at step " << res.best_step << "\ncheckpoint -> " << a.out << "\nlog -> "
              << log_path << "\n";
    if (!a.pred.empty()) {
        ensure_parent_dir(a.pred);
        write_predictions_jsonl(a.pred, predict(res.params, res.cfg, valid, vocab));
        std::cout << "validation predictions -> " << a.pred << "\n";
    }
}

// --- predict ----------------------------------------------------------------

struct PredictArgs {
    std::string model, vocab, data, out;
};

void run_predict(const PredictArgs& a) {
    const Vocab vocab = Vocab::load(a.vocab);
    ModelConfig mcfg;
    const ModelParams<float> params = load_checkpoint(a.model, mcfg);
    const auto examples = read_examples_jsonl(a.data);
    ensure_parent_dir(a.out);
    write_predictions_jsonl(a.out, predict(params, mcfg, examples, vocab));
    std::cout << examples.size() << " predictions -> " << a.out << "\n";
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
    std::string pred, gold, base = "2", out;
};

void run_eval(const EvalArgs& a) {
    const auto preds = read_predictions_jsonl(a.pred);
    const auto golds = read_examples_jsonl(a.gold);
    const MetricReport r = evaluate(preds, golds, js_base_from_string(a.base));
    std::cout << format_report(r);
    if (!a.out.empty()) {
        ensure_parent_dir(a.out);
        write_file(a.out, nlohmann::json(r).dump(2) + "\n");
        std::cout << "report -> " << a.out << "\n";
    }
}

// --- ensemble ---------------------------------------------------------------

struct EnsembleArgs {
    std::vector<std::string> members;
    std::string valid, out, base = "2";
    int top = 4;
};

void run_ensemble(const EnsembleArgs& a) {
    const auto golds = read_examples_jsonl(a.valid);
    const JsBase base = js_base_from_string(a.base);
    std::vector<std::pair<std::string, MetricReport>> candidates;
    std::vector<std::vector<PredictionRecord>> all_preds;
    for (const auto& path : a.members) {
        all_preds.push_back(read_predictions_jsonl(path));
        candidates.emplace_back(path, evaluate(all_preds.back(), golds, base));
    }
    const auto selected = select_top_k(candidates, "accuracy", a.top);
    std::vector<std::vector<PredictionRecord>> chosen;
    for (const auto& name : selected) {
        for (size_t i = 0; i < a.members.size(); ++i)
            if (a.members[i] == name) chosen.push_back(all_preds[i]);
        std::cout << "selected: " << name << "\n";
    }
    const auto averaged = ensemble_average(chosen);
    ensure_parent_dir(a.out);
    write_predictions_jsonl(a.out, averaged);
    std::cout << format_report(evaluate(averaged, golds, base));
    std::cout << "ensembled predictions -> " << a.out << "\n";
}

// --- pipeline ----------------------------------------------------------------

struct PipelineArgs {
    std::string config, out;
    std::vector<std::string> sets;
    int64_t seed = -1;
    int threads = 0;
};

void run_pipeline_cmd(const PipelineArgs& a) {
    std::vector<std::string> overrides = a.sets;
    if (a.seed >= 0) overrides.push_back("seed = " + std::to_string(a.seed));
    if (!a.out.empty()) overrides.push_back("out_dir = " + a.out);
    if (a.threads > 0 || std::getenv("BREAKDOWN_LAB_THREADS"))
        overrides.push_back("threads = " + std::to_string(resolve_threads(a.threads)));
    const RunConfig cfg = validate_config(a.config, overrides, true);
    const nlohmann::json manifest = run_pipeline(cfg, &std::cerr);
    const auto& ens = manifest.at("stages").at("ensemble");
    std::cout << "valid accuracy: "
              << fmt_double(ens.at("valid_report").at("accuracy").get<double>()) << "\n";
    if (ens.contains("test_report"))
        std::cout << "test accuracy:  "
                  << fmt_double(ens.at("test_report").at("accuracy").get<double>()) << "\n";
    std::cout << "artifacts -> " << cfg.out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dialogue breakdown detection lab"};
    app.require_subcommand(1);

    TokTrainArgs tok_train;
    TokEncodeArgs tok_encode;
    ExtractArgs extract;
    PretrainArgs pretrain;
    AugmentArgs augment;
    FinetuneArgs finetune;
    PredictArgs predict_args;
    EvalArgs eval_args;
    EnsembleArgs ensemble_args;
    PipelineArgs pipeline_args;

    auto* tok = app.add_subcommand("tok", "train or apply the WordPiece tokenizer");
    tok->require_subcommand(1);
    auto* tt = tok->add_subcommand("train", "learn a vocabulary from a text corpus");
    tt->add_option("--corpus", tok_train.corpus, "text file, one document per line")
        ->required();
    tt->add_option("--vocab-size", tok_train.vocab_size, "target vocabulary size")
        ->capture_default_str();
    tt->add_option("--min-freq", tok_train.min_freq, "minimum merge frequency")
        ->capture_default_str();
    tt->add_option("--out", tok_train.out, "vocabulary file to write")->required();

    auto* te = tok->add_subcommand("encode", "encode stdin lines to token ids");
    te->add_option("--vocab", tok_encode.vocab, "vocabulary file")->required();
    te->add_flag("--pair", tok_encode.pair,
                 "treat each line as context<TAB>utterance and emit the packed pair");
    te->add_option("--max-len", tok_encode.max_len, "pair sequence length")
        ->capture_default_str();

    auto* ex = app.add_subcommand("extract-reddit",
                                  "stream parent/child pairs out of a comment dump");
    ex->add_option("--dump", extract.dump, "newline-delimited comment JSON")->required();
    ex->add_option("--out", extract.out, "pairs JSONL to write")->required();
    ex->add_option("--limit", extract.limit, "stop after this many pairs (0 = all)")
        ->capture_default_str();
    ex->add_option("--capacity", extract.capacity, "parent table capacity")
        ->capture_default_str();

    auto* pt = app.add_subcommand("pretrain", "masked-language-model pre-training");
    pt->add_option("--pairs", pretrain.pairs, "pairs JSONL or raw comment dump")->required();
    pt->add_option("--vocab", pretrain.vocab, "vocabulary file")->required();
    pt->add_option("--config", pretrain.config, "key=value run configuration");
    pt->add_option("--epochs", pretrain.epochs, "override configured epochs");
    pt->add_option("--init", pretrain.init, "scratch | warm:<checkpoint>");
    pt->add_option("--max-steps", pretrain.max_steps, "override configured step cap");
    pt->add_option("--seed", pretrain.seed, "override configured seed");
    pt->add_option("--log", pretrain.log, "loss log CSV (default <out>.log.csv)");
    pt->add_option("--out", pretrain.out, "checkpoint to write")->required();

    auto* au = app.add_subcommand("augment", "SSMBA data augmentation");
    au->add_option("--train", augment.train, "original examples JSONL")->required();
    au->add_option("--teacher", augment.teacher, "teacher classifier checkpoint")->required();
    au->add_option("--recon", augment.recon, "reconstruction MLM checkpoint")->required();
    au->add_option("--vocab", augment.vocab, "vocabulary file")->required();
    au->add_option("--num-aug", augment.num_aug, "augments per example")
        ->capture_default_str();
    au->add_option("--select-prob", augment.select_prob, "corruption mask probability")
        ->capture_default_str();
    au->add_option("--strategy", augment.strategy, "greedy | sample | topk:K")
        ->capture_default_str();
    au->add_option("--temperature", augment.temperature, "sampling temperature")
        ->capture_default_str();
    au->add_option("--label", augment.label, "soft | hard pseudo-labels")
        ->capture_default_str();
    au->add_option("--seed", augment.seed, "augmentation seed")->capture_default_str();
    au->add_option("--threads", augment.threads, "worker threads (0 = env or 1)");
    au->add_option("--out", augment.out, "augmented JSONL to write")->required();

    auto* ft = app.add_subcommand("finetune", "KL fine-tuning against vote distributions");
    ft->add_option("--train", finetune.train, "original examples JSONL")->required();
    ft->add_option("--augmented", finetune.augmented,
                   "augmented JSONL whose augment rows join the training set");
    ft->add_option("--valid", finetune.valid, "validation examples JSONL")->required();
    ft->add_option("--init", finetune.init, "initial checkpoint")->required();
    ft->add_option("--vocab", finetune.vocab, "vocabulary file")->required();
    ft->add_option("--epochs", finetune.epochs, "override default epochs");
    ft->add_option("--batch-size", finetune.batch_size, "override default batch size");
    ft->add_option("--lr", finetune.lr, "override default learning rate");
    ft->add_option("--warmup-frac", finetune.warmup_frac, "override default warmup fraction");
    ft->add_option("--eval-every", finetune.eval_every,
                   "steps between validations (0 = each epoch)");
    ft->add_option("--metric", finetune.metric, "accuracy | f1_macro | js_div");
    ft->add_option("--seed", finetune.seed, "training seed");
    ft->add_option("--log", finetune.log, "training log CSV (default <out>.log.csv)");
    ft->add_option("--pred", finetune.pred, "also write validation predictions here");
    ft->add_option("--out", finetune.out, "best checkpoint to write")->required();

    auto* pr = app.add_subcommand("predict", "classifier predictions for a dataset");
    pr->add_option("--model", predict_args.model, "classifier checkpoint")->required();
    pr->add_option("--vocab", predict_args.vocab, "vocabulary file")->required();
    pr->add_option("--data", predict_args.data, "examples JSONL")->required();
    pr->add_option("--out", predict_args.out, "predictions JSONL to write")->required();

    auto* ev = app.add_subcommand("eval", "score predictions against gold labels");
    ev->add_option("--pred", eval_args.pred, "predictions JSONL")->required();
    ev->add_option("--gold", eval_args.gold, "gold examples JSONL")->required();
    ev->add_option("--base", eval_args.base, "JSD log base: 2 | e")->capture_default_str();
    ev->add_option("--out", eval_args.out, "also write the report JSON here");

    auto* en = app.add_subcommand("ensemble", "rank members and average the top k");
    en->add_option("--members", ensemble_args.members, "member prediction files")
        ->required()
        ->expected(-1);
    en->add_option("--valid", ensemble_args.valid, "gold examples JSONL for ranking")
        ->required();
    en->add_option("--top", ensemble_args.top, "members kept")->capture_default_str();
    en->add_option("--base", ensemble_args.base, "JSD log base: 2 | e")
        ->capture_default_str();
    en->add_option("--out", ensemble_args.out, "ensembled predictions JSONL")->required();

    auto* pl = app.add_subcommand("pipeline", "run the full recipe end to end");
    pl->add_option("--config", pipeline_args.config, "key=value run configuration")
        ->required();
    pl->add_option("--seed", pipeline_args.seed, "override the configured seed");
    pl->add_option("--out", pipeline_args.out, "override the configured output directory");
    pl->add_option("--threads", pipeline_args.threads, "worker threads (0 = env or 1)");
    pl->add_option("--set", pipeline_args.sets, "extra key=value overrides")
        ->take_all();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (tt->parsed()) run_tok_train(tok_train);
        else if (te->parsed()) run_tok_encode(tok_encode);
        else if (ex->parsed()) run_extract(extract);
        else if (pt->parsed()) run_pretrain_cmd(pretrain);
        else if (au->parsed()) run_augment(augment);
        else if (ft->parsed()) run_finetune_cmd(finetune);
        else if (pr->parsed()) run_predict(predict_args);
        else if (ev->parsed()) run_eval(eval_args);
        else if (en->parsed()) run_ensemble(ensemble_args);
        else if (pl->parsed()) run_pipeline_cmd(pipeline_args);
        return 0;
    } catch (const input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
