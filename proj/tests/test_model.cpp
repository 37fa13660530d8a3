#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "breakdown/checkpoint.hpp"
#include "breakdown/encoder.hpp"
#include "breakdown/losses.hpp"
#include "breakdown/model.hpp"

using namespace breakdown;

namespace {

ModelConfig tiny_config(bool tied) {
    ModelConfig cfg;
    cfg.vocab_size = 64;
    cfg.max_len = 16;
    cfg.hidden_dim = 16;
    cfg.num_layers = 2;
    cfg.num_heads = 2;
    cfg.ffn_dim = 32;
    cfg.dropout_rate = 0.0;
    cfg.tie_mlm = tied;
    cfg.seed = 11;
    return cfg;
}

EncodedPair random_pair(const ModelConfig& cfg, Rng& rng, int length) {
    EncodedPair p;
    p.length = length;
    p.token_ids.assign(static_cast<size_t>(cfg.max_len), 0);
    p.segment_ids.assign(static_cast<size_t>(cfg.max_len), 1);
    p.attention_mask.assign(static_cast<size_t>(cfg.max_len), 0);
    const int sep1 = length / 2;
    for (int t = 0; t < length; ++t) {
        int32_t id;
        if (t == 0) id = Vocab::kCls;
        else if (t == sep1 || t == length - 1) id = Vocab::kSep;
        else id = static_cast<int32_t>(Vocab::kNumSpecials +
                                       next_below(rng, static_cast<uint64_t>(
                                                           cfg.vocab_size -
                                                           Vocab::kNumSpecials)));
        p.token_ids[static_cast<size_t>(t)] = id;
        p.segment_ids[static_cast<size_t>(t)] = t <= sep1 ? 0 : 1;
        p.attention_mask[static_cast<size_t>(t)] = 1;
    }
    return p;
}

struct GradStats {
    double max_rel = 0.0;
    std::string worst;
};

// Central finite differences over every parameter scalar.
template <typename LossFn>
GradStats gradcheck(ModelParams<double>& params, ModelParams<double>& analytic,
                    const ModelConfig& cfg, LossFn loss_fn) {
    const double eps = 1e-4;
    GradStats stats;
    auto names_match = [&](const std::string& name, Mat<double>& w, Mat<double>& g) {
        for (size_t i = 0; i < w.a.size(); ++i) {
            const double keep = w.a[i];
            w.a[i] = keep + eps;
            const double up = loss_fn();
            w.a[i] = keep - eps;
            const double dn = loss_fn();
            w.a[i] = keep;
            const double numeric = (up - dn) / (2.0 * eps);
            const double a = g.a[i];
            const double denom = std::max(std::abs(numeric), std::abs(a));
            const double rel = std::abs(a - numeric) /
                               (denom > 0.0 ? denom : 1.0);
            if (std::abs(a - numeric) > 1e-7 && rel > stats.max_rel) {
                stats.max_rel = rel;
                stats.worst = name + "[" + std::to_string(i) + "]";
            }
        }
    };
    std::vector<std::pair<std::string, Mat<double>*>> w_tensors, g_tensors;
    params.for_each_tensor([&](const std::string& n, Mat<double>& m) {
        w_tensors.emplace_back(n, &m);
    });
    analytic.for_each_tensor([&](const std::string& n, Mat<double>& m) {
        g_tensors.emplace_back(n, &m);
    });
    REQUIRE(w_tensors.size() == g_tensors.size());
    for (size_t k = 0; k < w_tensors.size(); ++k)
        names_match(w_tensors[k].first, *w_tensors[k].second, *g_tensors[k].second);
    return stats;
}

}  // namespace

TEST_CASE("analytic gradients match finite differences", "[gradcheck]") {
    for (const bool tied : {true, false}) {
        const ModelConfig cfg = tiny_config(tied);
        auto params = init_params<double>(cfg);
        Rng rng(99);
        const EncodedPair pair = random_pair(cfg, rng, 10);
        RunContext rc;  // eval mode: dropout off

        SECTION(std::string("classifier KL, ") + (tied ? "tied" : "untied")) {
            const std::array<double, 3> target{0.6, 0.3, 0.1};
            auto grads = make_param_shapes<double>(cfg);
            classify_step(params, cfg, pair, target, rc, 1.0, &grads);
            const GradStats s = gradcheck(params, grads, cfg, [&] {
                return classify_step(params, cfg, pair, target, rc, 1.0,
                                     static_cast<ModelParams<double>*>(nullptr));
            });
            INFO("worst tensor entry: " << s.worst);
            CHECK(s.max_rel < 1e-4);
        }

        SECTION(std::string("masked LM, ") + (tied ? "tied" : "untied")) {
            const std::vector<int> positions{1, 4, 7};
            std::vector<int32_t> truth;
            for (size_t i = 0; i < positions.size(); ++i)
                truth.push_back(static_cast<int32_t>(
                    Vocab::kNumSpecials +
                    next_below(rng, static_cast<uint64_t>(cfg.vocab_size -
                                                          Vocab::kNumSpecials))));
            EncodedPair masked = pair;
            masked.token_ids[1] = Vocab::kMask;
            masked.token_ids[4] = Vocab::kMask;
            auto grads = make_param_shapes<double>(cfg);
            mlm_step(params, cfg, masked, positions, truth, rc, 1.0, &grads);
            const GradStats s = gradcheck(params, grads, cfg, [&] {
                return mlm_step(params, cfg, masked, positions, truth, rc, 1.0,
                                static_cast<ModelParams<double>*>(nullptr));
            });
            INFO("worst tensor entry: " << s.worst);
            CHECK(s.max_rel < 1e-4);
        }
    }
}

TEST_CASE("padding invariance of states and probabilities", "[model]") {
    const ModelConfig cfg = tiny_config(true);
    const auto params = init_params<float>(cfg);
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const int len = 4 + static_cast<int>(next_below(rng, 9));  // 4..12
        EncodedPair p = random_pair(cfg, rng, len);
        EncodedPair padded = p;  // PAD tail is already zeros; extend real length? no:
        // same ids, but the encoder must ignore everything past `length`, so
        // scribble garbage into the PAD region and compare.
        for (int t = len; t < cfg.max_len; ++t)
            padded.token_ids[static_cast<size_t>(t)] =
                static_cast<int32_t>(next_below(rng, 64));

        const Mat<float> h1 = forward_encoder(params, cfg, p);
        const Mat<float> h2 = forward_encoder(params, cfg, padded);
        REQUIRE(h1.rows == len);
        REQUIRE(h2.rows == len);
        for (size_t i = 0; i < h1.a.size(); ++i)
            REQUIRE(std::abs(static_cast<double>(h1.a[i]) -
                             static_cast<double>(h2.a[i])) < 1e-6);

        const ClassifierOutput c1 = forward_classify(params, cfg, p);
        const ClassifierOutput c2 = forward_classify(params, cfg, padded);
        for (int c = 0; c < 3; ++c)
            REQUIRE(std::abs(c1.probs[static_cast<size_t>(c)] -
                             c2.probs[static_cast<size_t>(c)]) < 1e-6);
    }
}

TEST_CASE("checkpoint round trip preserves every tensor", "[model]") {
    const ModelConfig cfg = tiny_config(false);
    const auto params = init_params<float>(cfg);
    const std::string path = "roundtrip.ckpt";
    save_checkpoint(path, cfg, params);

    ModelConfig loaded_cfg;
    const auto loaded = load_checkpoint(path, loaded_cfg);
    REQUIRE(loaded_cfg.same_shapes(cfg));
    REQUIRE(loaded_cfg.tie_mlm == cfg.tie_mlm);

    size_t tensors = 0;
    std::vector<const Mat<float>*> a, b;
    params.for_each_tensor(
        [&](const std::string&, const Mat<float>& m) { a.push_back(&m); });
    loaded.for_each_tensor(
        [&](const std::string&, const Mat<float>& m) { b.push_back(&m); });
    REQUIRE(a.size() == b.size());
    for (size_t k = 0; k < a.size(); ++k) {
        REQUIRE(a[k]->a.size() == b[k]->a.size());
        for (size_t i = 0; i < a[k]->a.size(); ++i) REQUIRE(a[k]->a[i] == b[k]->a[i]);
        ++tensors;
    }
    REQUIRE(tensors > 0);
    std::remove(path.c_str());
}

TEST_CASE("corrupted checkpoints are rejected", "[model]") {
    const ModelConfig cfg = tiny_config(true);
    const auto params = init_params<float>(cfg);
    const std::string path = "corrupt.ckpt";
    save_checkpoint(path, cfg, params);
    std::string bytes = read_file(path);

    SECTION("bad magic") {
        std::string bad = bytes;
        bad[0] = 'X';
        write_file(path, bad);
        REQUIRE_THROWS_AS(load_checkpoint(path), input_error);
    }
    SECTION("truncated") {
        write_file(path, bytes.substr(0, bytes.size() - 5));
        REQUIRE_THROWS_AS(load_checkpoint(path), input_error);
    }
    SECTION("trailing bytes") {
        write_file(path, bytes + "xx");
        REQUIRE_THROWS_AS(load_checkpoint(path), input_error);
    }
    std::remove(path.c_str());
}

TEST_CASE("per-example forward equals batch forward", "[model]") {
    const ModelConfig cfg = tiny_config(true);
    const auto params = init_params<float>(cfg);
    Rng rng(17);
    std::vector<EncodedPair> batch;
    for (int i = 0; i < 4; ++i)
        batch.push_back(random_pair(cfg, rng, 6 + static_cast<int>(next_below(rng, 6))));
    const auto hs = forward_encoder(params, cfg, batch);
    REQUIRE(hs.size() == batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        const Mat<float> one = forward_encoder(params, cfg, batch[i]);
        REQUIRE(one.a.size() == hs[i].a.size());
        for (size_t k = 0; k < one.a.size(); ++k) REQUIRE(one.a[k] == hs[i].a[k]);
    }
}
