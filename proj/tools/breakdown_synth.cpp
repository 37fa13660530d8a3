// Generates the bundled synthetic corpus: topic-coherent dialogues whose
// breakdown labels follow a deterministic topic-mismatch rule, plus a raw
// parent/child comment dump seasoned with decoys the extractor must skip.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "breakdown/dialogue.hpp"
#include "breakdown/synthetic.hpp"

int main(int argc, char** argv) {
    using namespace breakdown;
    CLI::App app{"synthetic dialogue-breakdown corpus generator"};
    SynthConfig cfg;
    std::string out_dir = "synth_out";
    bool dialogue_json = false;
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--seed", cfg.seed, "corpus seed")->capture_default_str();
    app.add_option("--dialogues", cfg.num_dialogues, "number of dialogues")
        ->capture_default_str();
    app.add_option("--reddit-pairs", cfg.num_reddit_pairs,
                   "extractable parent/child pairs in the dump")
        ->capture_default_str();
    app.add_option("--annotators", cfg.num_annotators, "votes per annotated turn")
        ->capture_default_str();
    app.add_option("--p-breakdown", cfg.p_breakdown, "share of topic-switch turns (B)")
        ->capture_default_str();
    app.add_option("--p-some", cfg.p_some, "share of mixed-topic turns (SB)")
        ->capture_default_str();
    app.add_flag("--dialogue-json", dialogue_json,
                 "also write one dialogue JSON file per dialogue");
    CLI11_PARSE(app, argc, argv);

    try {
        std::filesystem::create_directories(out_dir);
        const SynthCorpus corpus = generate_corpus(cfg);
        const SynthPaths paths = write_corpus(corpus, out_dir);
        if (dialogue_json) {
            const std::string ddir = out_dir + "/dialogues";
            std::filesystem::create_directories(ddir);
            for (int i = 0; i < cfg.num_dialogues; ++i) {
                const Dialogue d = generate_dialogue(cfg, i);
                write_file(ddir + "/" + d.dialogue_id + ".json",
                           dialogue_to_json(d).dump(2) + "\n");
            }
        }
        const auto hist = label_histogram(corpus.train);
        std::cout << "train: " << corpus.train.size() << " examples -> " << paths.train
                  << "\n"
                  << "valid: " << corpus.valid.size() << " examples -> " << paths.valid
                  << "\n"
                  << "test:  " << corpus.test.size() << " examples -> " << paths.test
                  << "\n"
                  << "reddit dump (" << cfg.num_reddit_pairs << " extractable pairs) -> "
                  << paths.reddit << "\n"
                  << "train majority histogram B/SB/NB: " << fmt_double(hist[0]) << " "
                  << fmt_double(hist[1]) << " " << fmt_double(hist[2]) << "\n";
        return 0;
    } catch (const input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
