#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oocrel/errors.hpp"
#include "oocrel/model.hpp"
#include "oocrel/rng.hpp"
#include "oocrel/vocab.hpp"

using namespace oocrel;
using namespace oocrel::lm;

namespace {

TransformerConfig tiny_config() {
    TransformerConfig config;
    config.layers = 2;
    config.heads = 2;
    config.d_model = 16;
    config.d_ff = 32;
    config.context = 32;
    config.init_seed = 11;
    return config;
}

LanguageModel tiny_model() {
    Vocabulary vocab = vocab_from_texts(
        {"be honest", "Is p0 less than p1 ?", "Is it wrong that p0 < p1 ?", "maybe so", "x y z"});
    return LanguageModel(tiny_config(), std::move(vocab));
}

// Plain-loop reference forward written independently of the library's linear
// algebra; double precision throughout.
std::vector<std::vector<double>> reference_forward(const ModelParams<double>& p,
                                                   const TransformerConfig& cfg,
                                                   const std::vector<int>& ids) {
    const int T = static_cast<int>(ids.size());
    const int D = cfg.d_model;
    auto layer_norm = [&](std::vector<double> row, const Vec<double>& g, const Vec<double>& b) {
        double mu = 0;
        for (double v : row) mu += v;
        mu /= D;
        double var = 0;
        for (double v : row) var += (v - mu) * (v - mu);
        var /= D;
        const double rstd = 1.0 / std::sqrt(var + 1e-5);
        for (int c = 0; c < D; ++c) {
            row[c] = (row[c] - mu) * rstd * g(c) + b(c);
        }
        return row;
    };
    std::vector<std::vector<double>> x(T, std::vector<double>(D));
    for (int t = 0; t < T; ++t) {
        for (int c = 0; c < D; ++c) {
            x[t][c] = p.wte(ids[t], c) + p.wpe(t, c);
        }
    }
    const int dh = cfg.head_dim();
    for (const auto& layer : p.layers) {
        // attention
        std::vector<std::vector<double>> h1(T), q(T), k(T), v(T);
        for (int t = 0; t < T; ++t) {
            h1[t] = layer_norm(x[t], layer.ln1_g, layer.ln1_b);
            q[t].assign(D, 0.0);
            k[t].assign(D, 0.0);
            v[t].assign(D, 0.0);
            for (int o = 0; o < D; ++o) {
                for (int i = 0; i < D; ++i) {
                    q[t][o] += h1[t][i] * layer.wq(i, o);
                    k[t][o] += h1[t][i] * layer.wk(i, o);
                    v[t][o] += h1[t][i] * layer.wv(i, o);
                }
                q[t][o] += layer.bq(o);
                k[t][o] += layer.bk(o);
                v[t][o] += layer.bv(o);
            }
        }
        for (int t = 0; t < T; ++t) {
            std::vector<double> ctx(D, 0.0);
            for (int h = 0; h < cfg.heads; ++h) {
                std::vector<double> scores(t + 1, 0.0);
                for (int u = 0; u <= t; ++u) {
                    for (int c = 0; c < dh; ++c) {
                        scores[u] += q[t][h * dh + c] * k[u][h * dh + c];
                    }
                    scores[u] /= std::sqrt(static_cast<double>(dh));
                }
                double mx = scores[0];
                for (double s : scores) mx = std::max(mx, s);
                double denom = 0;
                for (double& s : scores) {
                    s = std::exp(s - mx);
                    denom += s;
                }
                for (int u = 0; u <= t; ++u) {
                    for (int c = 0; c < dh; ++c) {
                        ctx[h * dh + c] += scores[u] / denom * v[u][h * dh + c];
                    }
                }
            }
            for (int o = 0; o < D; ++o) {
                double out = layer.bo(o);
                for (int i = 0; i < D; ++i) {
                    out += ctx[i] * layer.wo(i, o);
                }
                x[t][o] += out;
            }
        }
        // feed-forward
        for (int t = 0; t < T; ++t) {
            const std::vector<double> h2 = layer_norm(x[t], layer.ln2_g, layer.ln2_b);
            std::vector<double> u_act(cfg.d_ff, 0.0);
            for (int o = 0; o < cfg.d_ff; ++o) {
                for (int i = 0; i < D; ++i) {
                    u_act[o] += h2[i] * layer.w1(i, o);
                }
                u_act[o] += layer.b1(o);
                u_act[o] = 0.5 * u_act[o] * (1.0 + std::erf(u_act[o] / std::sqrt(2.0)));
            }
            for (int o = 0; o < D; ++o) {
                double out = layer.b2(o);
                for (int i = 0; i < cfg.d_ff; ++i) {
                    out += u_act[i] * layer.w2(i, o);
                }
                x[t][o] += out;
            }
        }
    }
    std::vector<std::vector<double>> logits(T, std::vector<double>(p.vocab_base(), 0.0));
    for (int t = 0; t < T; ++t) {
        const std::vector<double> xf = layer_norm(x[t], p.lnf_g, p.lnf_b);
        for (int o = 0; o < p.vocab_base(); ++o) {
            for (int i = 0; i < D; ++i) {
                logits[t][o] += xf[i] * p.w_out(i, o);
            }
        }
    }
    return logits;
}

} // namespace

TEST_CASE("tokenizer segments words and punctuation") {
    LanguageModel model = tiny_model();
    const auto ids = model.tokenize("Is p0 less than p1?");
    REQUIRE(ids.size() == 6);
    CHECK(model.vocab().token_of(ids[0]) == "Is");
    CHECK(model.vocab().token_of(ids[4]) == "p1");
    CHECK(model.vocab().token_of(ids[5]) == "?");
    CHECK_THROWS_AS(model.tokenize("Is p99 less than p1?"), TokenizeError);
}

TEST_CASE("detokenize round-trips modulo whitespace") {
    LanguageModel model = tiny_model();
    const std::string text = "Is it   wrong that p0 <  p1?";
    const auto ids = model.tokenize(text);
    const std::string rebuilt = model.vocab().detokenize(ids);
    CHECK(rebuilt == "Is it wrong that p0 < p1 ?");
    CHECK(model.tokenize(rebuilt) == ids);
}

TEST_CASE("marker tokens survive segmentation") {
    const auto words = segment_words("<|sys|> be honest <|user|> Is p0 < p1? <|ans|>");
    CHECK(words.front() == "<|sys|>");
    CHECK(words.back() == "<|ans|>");
    CHECK(std::count(words.begin(), words.end(), "<|user|>") == 1);
}

TEST_CASE("forward yields a normalized deterministic distribution") {
    LanguageModel model = tiny_model();
    const auto ids = model.tokenize("Is p0 less than p1?");
    const auto probs = model.forward(ids);
    CHECK(probs.size() == model.vocab().size());
    CHECK(probs.minCoeff() >= 0.0f);
    CHECK(std::abs(probs.sum() - 1.0f) < 1e-6f);

    LanguageModel again = tiny_model();
    const auto probs_again = again.forward(ids);
    CHECK((probs - probs_again).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("overlong sequences are rejected") {
    LanguageModel model = tiny_model();
    std::vector<int> ids(static_cast<size_t>(model.config().context) + 1, 5);
    CHECK_THROWS_AS(model.forward(ids), ContextOverflowError);
}

TEST_CASE("single layer forward matches the hand-computed oracle") {
    TransformerConfig cfg;
    cfg.layers = 1;
    cfg.heads = 1;
    cfg.d_model = 4;
    cfg.d_ff = 8;
    cfg.context = 8;
    cfg.init_seed = 3;
    ModelParams<double> params;
    params.resize(cfg, 3, 3);
    Rng rng(5);
    params.init_random(cfg, rng);
    // nudge the layer-norm affine away from identity so it is exercised
    params.layers[0].ln1_g.setConstant(1.25);
    params.layers[0].ln1_b.setConstant(-0.1);
    params.lnf_b.setConstant(0.05);

    const std::vector<int> ids = {0, 2};
    const Mat<double> got = forward_all_logits(params, cfg, ids);
    const auto expected = reference_forward(params, cfg, ids);
    for (int t = 0; t < 2; ++t) {
        for (int o = 0; o < 3; ++o) {
            CHECK(std::abs(got(t, o) - expected[static_cast<size_t>(t)][static_cast<size_t>(o)]) <
                  1e-6);
        }
    }
}

TEST_CASE("multi-layer multi-head forward matches the reference loops") {
    TransformerConfig cfg = tiny_config();
    ModelParams<double> params;
    params.resize(cfg, 12, 12);
    Rng rng(17);
    params.init_random(cfg, rng);
    const std::vector<int> ids = {3, 1, 4, 1, 5, 9, 2, 6};
    const Mat<double> got = forward_all_logits(params, cfg, ids);
    const auto expected = reference_forward(params, cfg, ids);
    double worst = 0;
    for (int t = 0; t < got.rows(); ++t) {
        for (int o = 0; o < got.cols(); ++o) {
            worst = std::max(worst,
                             std::abs(got(t, o) -
                                      expected[static_cast<size_t>(t)][static_cast<size_t>(o)]));
        }
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("causality: later tokens never affect earlier positions") {
    TransformerConfig cfg = tiny_config();
    ModelParams<float> params;
    params.resize(cfg, 12, 12);
    Rng rng(23);
    params.init_random(cfg, rng);
    std::vector<int> ids = {3, 1, 4, 1, 5, 9};
    const Mat<float> before = forward_all_logits(params, cfg, ids);
    ids[4] = 7;
    const Mat<float> after = forward_all_logits(params, cfg, ids);
    for (int t = 0; t < 4; ++t) {
        CHECK((before.row(t) - after.row(t)).cwiseAbs().maxCoeff() == 0.0f);
    }
    CHECK((before.row(4) - after.row(4)).cwiseAbs().maxCoeff() > 0.0f);
}

TEST_CASE("uniform-output model has loss ln V") {
    LanguageModel model = tiny_model();
    model.mutable_params().set_zero();
    model.freeze();
    const std::string prompt = flatten_prompt("be honest", "Is p0 less than p1?");
    std::vector<AnswerBatchItem> batch = {{prompt, model.vocab().yes_id()}};
    const double loss = mean_answer_loss(model, batch);
    CHECK(loss ==
          doctest::Approx(std::log(static_cast<double>(model.vocab().base_size()))).epsilon(1e-5));
}

TEST_CASE("answer_probs is deterministic and bounded") {
    LanguageModel model = tiny_model();
    model.freeze();
    const std::string prompt = flatten_prompt("be honest", "Is p0 less than p1?");
    const auto [yes1, no1] = model.answer_probs(prompt);
    const auto [yes2, no2] = model.answer_probs(prompt);
    CHECK(yes1 == yes2);
    CHECK(no1 == no2);
    CHECK(yes1 >= 0.0f);
    CHECK(no1 >= 0.0f);
    CHECK(yes1 + no1 <= 1.0f);
}

TEST_CASE("embedding gradients match central finite differences in double") {
    TransformerConfig cfg = tiny_config();
    const int vocab_total = 14;
    const int vocab_base = 12; // ids 12, 13 play the extension region
    ModelParams<double> params;
    params.resize(cfg, vocab_total, vocab_base);
    Rng rng(31);
    params.init_random(cfg, rng);

    Chunk<double> chunk;
    chunk.items.push_back({{0, 12, 3, 13, 4, 2}, nullptr, 5});
    chunk.items.push_back({{1, 13, 3, 12, 4, 2}, nullptr, 6});
    chunk.items.push_back({{0, 12, 6, 12, 4, 2}, nullptr, 5});

    const std::vector<int> trainable = {12, 13};
    Mat<double> grads = Mat<double>::Zero(2, cfg.d_model);
    ChunkRunner<double> runner;
    auto stats = runner.forward(params, cfg, chunk, LossMode::AnswerPosition);
    const double base_loss = stats.loss_sum / static_cast<double>(stats.loss_count);
    CHECK(base_loss > 0.0);
    runner.backward(params, cfg, chunk, 1.0 / static_cast<double>(stats.loss_count), nullptr,
                    &trainable, &grads);

    auto loss_at = [&](ModelParams<double>& p) {
        ChunkRunner<double> r;
        auto s = r.forward(p, cfg, chunk, LossMode::AnswerPosition);
        return s.loss_sum / static_cast<double>(s.loss_count);
    };

    Rng probe_rng(77);
    const double h = 1e-5;
    int probes = 0;
    double worst_rel = 0;
    while (probes < 120) {
        const int row = static_cast<int>(probe_rng.below(2));
        const int col = static_cast<int>(probe_rng.below(static_cast<uint64_t>(cfg.d_model)));
        const int token = trainable[static_cast<size_t>(row)];
        const double saved = params.wte(token, col);
        params.wte(token, col) = saved + h;
        const double up = loss_at(params);
        params.wte(token, col) = saved - h;
        const double down = loss_at(params);
        params.wte(token, col) = saved;
        const double fd = (up - down) / (2 * h);
        const double analytic = grads(row, col);
        const double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd),
                                                               1e-12});
        worst_rel = std::max(worst_rel, rel);
        ++probes;
    }
    CHECK(worst_rel < 1e-6);
}

TEST_CASE("full parameter gradients match finite differences in double") {
    TransformerConfig cfg;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.d_model = 8;
    cfg.d_ff = 16;
    cfg.context = 16;
    ModelParams<double> params;
    params.resize(cfg, 9, 9);
    Rng rng(41);
    params.init_random(cfg, rng);

    Chunk<double> chunk;
    chunk.items.push_back({{0, 3, 5, 2}, nullptr, 1});
    chunk.items.push_back({{4, 3, 7}, nullptr, 2});

    ModelParams<double> grads;
    grads.resize(cfg, 9, 9);
    grads.set_zero();
    // set_zero leaves layer-norm gains at zero as well, which is what a
    // gradient accumulator needs
    ChunkRunner<double> runner;
    auto stats = runner.forward(params, cfg, chunk, LossMode::NextToken);
    runner.backward(params, cfg, chunk, 1.0 / static_cast<double>(stats.loss_count), &grads,
                    nullptr, nullptr);

    auto loss_at = [&]() {
        ChunkRunner<double> r;
        auto s = r.forward(params, cfg, chunk, LossMode::NextToken);
        return s.loss_sum / static_cast<double>(s.loss_count);
    };

    // collect matching flat views of parameters and gradients
    std::vector<std::pair<double*, int64_t>> param_views;
    params.for_each_tensor([&](const char*, double* data, int64_t size) {
        param_views.push_back({data, size});
    });
    std::vector<std::pair<double*, int64_t>> grad_views;
    grads.for_each_tensor([&](const char*, double* data, int64_t size) {
        grad_views.push_back({data, size});
    });
    REQUIRE(param_views.size() == grad_views.size());

    Rng probe_rng(53);
    const double h = 1e-5;
    double worst_rel = 0;
    for (int probe = 0; probe < 120; ++probe) {
        const size_t tensor = static_cast<size_t>(probe_rng.below(param_views.size()));
        const int64_t at =
            static_cast<int64_t>(probe_rng.below(static_cast<uint64_t>(param_views[tensor].second)));
        double* slot = param_views[tensor].first + at;
        const double saved = *slot;
        *slot = saved + h;
        const double up = loss_at();
        *slot = saved - h;
        const double down = loss_at();
        *slot = saved;
        const double fd = (up - down) / (2 * h);
        const double analytic = grad_views[tensor].first[at];
        const double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd),
                                                               1e-12});
        // central differences bottom out near 1e-11 absolute; gradients that
        // small stay under the absolute track
        if (std::abs(analytic - fd) < 1e-9) {
            continue;
        }
        worst_rel = std::max(worst_rel, rel);
    }
    CHECK(worst_rel < 1e-6);
}

TEST_CASE("float embedding gradients pass the public finite-difference check") {
    LanguageModel model = tiny_model();
    model.freeze();
    const auto new_ids = model.extend_vocab({"q0", "q1"}, 99);
    REQUIRE(new_ids.size() == 2);

    std::vector<AnswerBatchItem> batch;
    batch.push_back({flatten_prompt("be honest", "Is q0 less than q1?"), model.vocab().yes_id()});
    batch.push_back({flatten_prompt("maybe so", "Is it wrong that q1 < q0?"),
                     model.vocab().no_id()});
    const auto [loss, grads] = loss_and_embedding_grads(model, batch, new_ids);
    CHECK(loss > 0.0);

    // the oracle runs central differences in double on the same parameters
    ModelParams<double> dparams = cast_params<double>(model.params());
    Chunk<double> chunk;
    for (const auto& item : batch) {
        chunk.items.push_back({model.tokenize(item.prompt), nullptr, item.target_id});
    }
    auto loss_at = [&]() {
        ChunkRunner<double> r;
        auto s = r.forward(dparams, model.config(), chunk, LossMode::AnswerPosition);
        return s.loss_sum / static_cast<double>(s.loss_count);
    };

    Rng probe_rng(7);
    const double h = 1e-5;
    int checked = 0;
    double worst_rel = 0;
    while (checked < 120) {
        const int slot = static_cast<int>(probe_rng.below(2));
        const int col = static_cast<int>(probe_rng.below(
            static_cast<uint64_t>(model.config().d_model)));
        const int token = new_ids[static_cast<size_t>(slot)];
        const double saved = dparams.wte(token, col);
        dparams.wte(token, col) = saved + h;
        const double up = loss_at();
        dparams.wte(token, col) = saved - h;
        const double down = loss_at();
        dparams.wte(token, col) = saved;
        const double fd = (up - down) / (2.0 * h);
        const double analytic = grads.rows(slot, col);
        const double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd),
                                                               1e-8});
        worst_rel = std::max(worst_rel, rel);
        ++checked;
    }
    CHECK(worst_rel < 1e-4);
}

TEST_CASE("tokens absent from a batch get zero gradient rows") {
    LanguageModel model = tiny_model();
    model.freeze();
    const auto new_ids = model.extend_vocab({"q0", "q1", "q2"}, 5);
    std::vector<AnswerBatchItem> batch = {
        {flatten_prompt("be honest", "Is q0 less than q1?"), model.vocab().yes_id()}};
    const auto [loss, grads] = loss_and_embedding_grads(model, batch, new_ids);
    (void)loss;
    CHECK(grads.rows.row(2).cwiseAbs().maxCoeff() == 0.0f);
    CHECK(grads.rows.row(0).cwiseAbs().maxCoeff() > 0.0f);
}

TEST_CASE("trainable ids outside the extension region are rejected") {
    LanguageModel model = tiny_model();
    model.freeze();
    model.extend_vocab({"q0"}, 5);
    std::vector<AnswerBatchItem> batch = {
        {flatten_prompt("be honest", "Is q0 less than q0?"), model.vocab().yes_id()}};
    CHECK_THROWS_AS(loss_and_embedding_grads(model, batch, {1}), FrozenViolationError);
}

TEST_CASE("extension rows are norm matched and seed dependent") {
    LanguageModel model = tiny_model();
    model.freeze();
    const float target = model.mean_base_embedding_norm();
    const auto ids_a = model.extend_vocab({"q0", "q1"}, 111);
    for (int id : ids_a) {
        CHECK(std::abs(model.embedding_row(id).norm() - target) < 1e-5f);
    }
    LanguageModel other = tiny_model();
    other.freeze();
    const auto ids_b = other.extend_vocab({"q0", "q1"}, 222);
    CHECK((model.embedding_row(ids_a[0]) - other.embedding_row(ids_b[0])).norm() > 1e-3f);
    CHECK(std::abs(model.embedding_row(ids_a[0]).norm() - other.embedding_row(ids_b[0]).norm()) <
          1e-5f);
}

TEST_CASE("frozen digest ignores extension rows but guards base parameters") {
    LanguageModel model = tiny_model();
    model.freeze();
    const std::string digest = model.frozen_digest();
    const auto ids = model.extend_vocab({"q0"}, 9);
    Vec<float> row = Vec<float>::Constant(model.config().d_model, 0.5f);
    model.set_extension_row(ids[0], row);
    CHECK(model.compute_base_digest() == digest);
    model.check_frozen_intact();
    CHECK_THROWS_AS(model.mutable_params(), FrozenViolationError);
    CHECK_THROWS_AS(model.set_extension_row(1, row), FrozenViolationError);
}

TEST_CASE("prefix cache reproduces the full forward pass") {
    TransformerConfig cfg = tiny_config();
    ModelParams<float> params;
    params.resize(cfg, 12, 12);
    Rng rng(61);
    params.init_random(cfg, rng);

    const std::vector<int> prefix_ids = {0, 3, 5, 7, 2};
    const std::vector<int> suffix_ids = {4, 6, 1};
    std::vector<int> full = prefix_ids;
    full.insert(full.end(), suffix_ids.begin(), suffix_ids.end());

    const PrefixCache<float> cache = build_prefix_cache(params, cfg, prefix_ids);
    Chunk<float> with_cache;
    with_cache.items.push_back({suffix_ids, &cache, -1});
    ChunkRunner<float> cached_runner;
    const auto cached = cached_runner.forward(params, cfg, with_cache, LossMode::None);

    Chunk<float> without;
    without.items.push_back({full, nullptr, -1});
    ChunkRunner<float> full_runner;
    const auto direct = full_runner.forward(params, cfg, without, LossMode::None);

    const float diff =
        (cached.final_logits.row(0) - direct.final_logits.row(0)).cwiseAbs().maxCoeff();
    CHECK(diff < 1e-5f);
}
