#include "oocrel/pretrain.hpp"

#include <cmath>
#include <sstream>

#include "oocrel/errors.hpp"
#include "oocrel/rng.hpp"
#include "oocrel/threadpool.hpp"

namespace oocrel::lm {

namespace {

constexpr int kChunkExamples = 8; // fixed so results are thread-count independent

struct AdamState {
    ModelParams<float> m;
    ModelParams<float> v;
    int64_t step = 0;
};

void adam_step(ModelParams<float>& params, const ModelParams<float>& grads, AdamState& state,
               const PretrainConfig& config) {
    state.step += 1;
    const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));

    std::vector<float*> param_views, m_views, v_views;
    std::vector<const float*> grad_views;
    std::vector<int64_t> sizes;
    params.for_each_tensor([&](const char*, float* data, int64_t size) {
        param_views.push_back(data);
        sizes.push_back(size);
    });
    grads.for_each_tensor([&](const char*, const float* data, int64_t) {
        grad_views.push_back(data);
    });
    state.m.for_each_tensor([&](const char*, float* data, int64_t) { m_views.push_back(data); });
    state.v.for_each_tensor([&](const char*, float* data, int64_t) { v_views.push_back(data); });

    const float lr = static_cast<float>(config.learning_rate);
    const float b1 = static_cast<float>(config.beta1);
    const float b2 = static_cast<float>(config.beta2);
    const float eps = static_cast<float>(config.adam_eps);
    for (size_t t = 0; t < param_views.size(); ++t) {
        float* p = param_views[t];
        const float* g = grad_views[t];
        float* m = m_views[t];
        float* v = v_views[t];
        for (int64_t i = 0; i < sizes[t]; ++i) {
            m[i] = b1 * m[i] + (1.0f - b1) * g[i];
            v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
            const float mhat = m[i] / static_cast<float>(bias1);
            const float vhat = v[i] / static_cast<float>(bias2);
            p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

double grad_norm(const ModelParams<float>& grads) {
    double total = 0.0;
    grads.for_each_tensor([&](const char*, const float* data, int64_t size) {
        for (int64_t i = 0; i < size; ++i) {
            total += static_cast<double>(data[i]) * static_cast<double>(data[i]);
        }
    });
    return std::sqrt(total);
}

void scale_grads(ModelParams<float>& grads, float factor) {
    grads.for_each_tensor([&](const char*, float* data, int64_t size) {
        for (int64_t i = 0; i < size; ++i) {
            data[i] *= factor;
        }
    });
}

void accumulate(ModelParams<float>& into, const ModelParams<float>& from) {
    std::vector<float*> dst;
    std::vector<int64_t> sizes;
    into.for_each_tensor([&](const char*, float* data, int64_t size) {
        dst.push_back(data);
        sizes.push_back(size);
    });
    size_t t = 0;
    from.for_each_tensor([&](const char*, const float* data, int64_t size) {
        for (int64_t i = 0; i < size; ++i) {
            dst[t][i] += data[i];
        }
        (void)size;
        ++t;
    });
}

} // namespace

double holdout_normalized_accuracy(const LanguageModel& model, const Corpus& corpus, int threads) {
    if (corpus.holdout_prompts.empty()) {
        throw InvalidArgumentError("corpus has no held-out prompts");
    }
    const int count = static_cast<int>(corpus.holdout_prompts.size());
    std::vector<double> scores(static_cast<size_t>(count), 0.0);
    const int n_chunks = (count + kChunkExamples - 1) / kChunkExamples;
    parallel_for(n_chunks, threads, [&](int chunk_idx, int) {
        const int begin = chunk_idx * kChunkExamples;
        const int end = std::min(count, begin + kChunkExamples);
        Chunk<float> chunk;
        for (int i = begin; i < end; ++i) {
            chunk.items.push_back(
                {model.tokenize(corpus.holdout_prompts[static_cast<size_t>(i)]), nullptr, -1});
        }
        ChunkRunner<float> runner;
        const auto stats = runner.forward(model.params(), model.config(), chunk, LossMode::None);
        for (int i = begin; i < end; ++i) {
            const auto logits = stats.final_logits.row(i - begin);
            const float max_logit = logits.maxCoeff();
            Eigen::Matrix<float, 1, Eigen::Dynamic> probs =
                (logits.array() - max_logit).exp();
            probs /= probs.sum();
            const double p_yes = probs(model.vocab().yes_id());
            const double p_no = probs(model.vocab().no_id());
            const bool gold_yes = corpus.holdout_answers[static_cast<size_t>(i)] == "Yes";
            const double p_gold = gold_yes ? p_yes : p_no;
            scores[static_cast<size_t>(i)] = p_yes + p_no > 0.0 ? p_gold / (p_yes + p_no) : 0.0;
        }
    });
    double total = 0.0;
    for (double s : scores) {
        total += s;
    }
    return total / static_cast<double>(count);
}

PretrainResult pretrain(LanguageModel& model, const Corpus& corpus,
                        const PretrainConfig& config) {
    if (model.frozen()) {
        throw FrozenViolationError("pretraining requires an unfrozen model");
    }
    if (corpus.train.empty()) {
        throw InvalidArgumentError("empty corpus");
    }

    // Tokenize once.
    std::vector<std::vector<int>> sequences;
    sequences.reserve(corpus.train.size());
    for (const auto& line : corpus.train) {
        sequences.push_back(model.tokenize(line));
    }

    const TransformerConfig& tf = model.config();
    PretrainResult result;
    AdamState adam;
    adam.m.resize(tf, model.vocab().size(), model.vocab().size());
    adam.m.set_zero();
    adam.v.resize(tf, model.vocab().size(), model.vocab().size());
    adam.v.set_zero();

    const int n_examples = static_cast<int>(sequences.size());
    std::vector<int> order(static_cast<size_t>(n_examples));
    for (int i = 0; i < n_examples; ++i) {
        order[static_cast<size_t>(i)] = i;
    }

    // Per-chunk gradient buffers, reduced in chunk order for determinism.
    const int chunks_per_batch = (config.batch_size + kChunkExamples - 1) / kChunkExamples;
    std::vector<ModelParams<float>> chunk_grads(static_cast<size_t>(chunks_per_batch));
    for (auto& buffer : chunk_grads) {
        buffer.resize(tf, model.vocab().size(), model.vocab().size());
    }
    ModelParams<float> grads;
    grads.resize(tf, model.vocab().size(), model.vocab().size());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng = derive_rng(config.shuffle_seed, static_cast<uint64_t>(epoch) + 1);
        shuffle_rng.shuffle(order);
        double epoch_loss_sum = 0.0;
        double epoch_loss_weight = 0.0;

        for (int batch_begin = 0; batch_begin < n_examples; batch_begin += config.batch_size) {
            const int batch_end = std::min(n_examples, batch_begin + config.batch_size);
            double batch_weight = 0.0;
            for (int i = batch_begin; i < batch_end; ++i) {
                const auto& seq = sequences[static_cast<size_t>(order[static_cast<size_t>(i)])];
                batch_weight += (static_cast<double>(seq.size()) - 2.0) * config.prompt_weight +
                                config.answer_weight;
            }
            const float loss_scale = 1.0f / static_cast<float>(batch_weight);

            const int n_chunks =
                (batch_end - batch_begin + kChunkExamples - 1) / kChunkExamples;
            std::vector<double> chunk_losses(static_cast<size_t>(n_chunks), 0.0);
            parallel_for(n_chunks, config.threads, [&](int chunk_idx, int) {
                const int begin = batch_begin + chunk_idx * kChunkExamples;
                const int end = std::min(batch_end, begin + kChunkExamples);
                Chunk<float> chunk;
                for (int i = begin; i < end; ++i) {
                    chunk.items.push_back(
                        {sequences[static_cast<size_t>(order[static_cast<size_t>(i)])], nullptr,
                         -1, static_cast<float>(config.answer_weight),
                         static_cast<float>(config.prompt_weight)});
                }
                ChunkRunner<float> runner;
                const auto stats =
                    runner.forward(model.params(), tf, chunk, LossMode::NextToken);
                chunk_grads[static_cast<size_t>(chunk_idx)].set_zero();
                runner.backward(model.params(), tf, chunk, loss_scale,
                                &chunk_grads[static_cast<size_t>(chunk_idx)], nullptr, nullptr);
                chunk_losses[static_cast<size_t>(chunk_idx)] = stats.loss_sum;
            });

            grads.set_zero();
            double batch_loss = 0.0;
            for (int c = 0; c < n_chunks; ++c) {
                accumulate(grads, chunk_grads[static_cast<size_t>(c)]);
                batch_loss += chunk_losses[static_cast<size_t>(c)];
            }
            batch_loss /= batch_weight;
            if (!std::isfinite(batch_loss)) {
                throw DivergenceError("non-finite pretraining loss at epoch " +
                                      std::to_string(epoch));
            }
            epoch_loss_sum += batch_loss * batch_weight;
            epoch_loss_weight += batch_weight;

            if (config.grad_clip > 0.0) {
                const double norm = grad_norm(grads);
                if (norm > config.grad_clip) {
                    scale_grads(grads, static_cast<float>(config.grad_clip / norm));
                }
            }
            adam_step(model.mutable_params(), grads, adam, config);
        }

        const double epoch_loss = epoch_loss_sum / epoch_loss_weight;
        result.epoch_losses.push_back(epoch_loss);
        std::ostringstream line;
        line << "epoch " << epoch + 1 << "/" << config.epochs << " loss " << epoch_loss;
        if (config.eval_each_epoch) {
            line << " holdout " << holdout_normalized_accuracy(model, corpus, config.threads);
        }
        result.log_lines.push_back(line.str());
    }

    result.holdout_accuracy = holdout_normalized_accuracy(model, corpus, config.threads);
    result.gate_passed = result.holdout_accuracy >= config.gate_accuracy;
    {
        std::ostringstream line;
        line << "holdout normalized accuracy " << result.holdout_accuracy << " (gate "
             << config.gate_accuracy << (result.gate_passed ? " passed)" : " missed)");
        result.log_lines.push_back(line.str());
    }
    model.freeze();
    return result;
}

} // namespace oocrel::lm
