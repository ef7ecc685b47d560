#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "oocrel/rng.hpp"
#include "oocrel/vocab.hpp"

namespace oocrel::lm {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

struct TransformerConfig {
    int layers = 4;
    int heads = 4;
    int d_model = 128;
    int d_ff = 512;
    int context = 128;
    uint64_t init_seed = 1;

    int head_dim() const { return d_model / heads; }
    void validate() const;
};

template <typename S>
struct LayerParams {
    Vec<S> ln1_g, ln1_b, ln2_g, ln2_b;
    Mat<S> wq, wk, wv, wo; // (d_model x d_model), applied as y = x * W + b
    Vec<S> bq, bk, bv, bo;
    Mat<S> w1; // (d_model x d_ff)
    Vec<S> b1;
    Mat<S> w2; // (d_ff x d_model)
    Vec<S> b2;
};

// All trainable tensors. The output head covers the base vocabulary only:
// extension tokens are input-only and carry zero next-token probability.
template <typename S>
struct ModelParams {
    Mat<S> wte; // (vocab_total x d_model)
    Mat<S> wpe; // (context x d_model)
    std::vector<LayerParams<S>> layers;
    Vec<S> lnf_g, lnf_b;
    Mat<S> w_out; // (d_model x vocab_base)

    void resize(const TransformerConfig& config, int vocab_total, int vocab_base);
    void init_random(const TransformerConfig& config, Rng& rng);
    void set_zero();

    int vocab_total() const { return static_cast<int>(wte.rows()); }
    int vocab_base() const { return static_cast<int>(w_out.cols()); }

    // Visits every tensor as a flat span, in a fixed order.
    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        const_cast<const ModelParams*>(this)->for_each_tensor(
            [&](const char* name, const S* data, int64_t size) {
                fn(name, const_cast<S*>(data), size);
            });
    }

    template <typename Fn>
    void for_each_tensor(Fn&& fn) const {
        fn("wte", wte.data(), wte.size());
        fn("wpe", wpe.data(), wpe.size());
        for (size_t l = 0; l < layers.size(); ++l) {
            const auto& layer = layers[l];
            fn("ln1_g", layer.ln1_g.data(), layer.ln1_g.size());
            fn("ln1_b", layer.ln1_b.data(), layer.ln1_b.size());
            fn("wq", layer.wq.data(), layer.wq.size());
            fn("bq", layer.bq.data(), layer.bq.size());
            fn("wk", layer.wk.data(), layer.wk.size());
            fn("bk", layer.bk.data(), layer.bk.size());
            fn("wv", layer.wv.data(), layer.wv.size());
            fn("bv", layer.bv.data(), layer.bv.size());
            fn("wo", layer.wo.data(), layer.wo.size());
            fn("bo", layer.bo.data(), layer.bo.size());
            fn("ln2_g", layer.ln2_g.data(), layer.ln2_g.size());
            fn("ln2_b", layer.ln2_b.data(), layer.ln2_b.size());
            fn("w1", layer.w1.data(), layer.w1.size());
            fn("b1", layer.b1.data(), layer.b1.size());
            fn("w2", layer.w2.data(), layer.w2.size());
            fn("b2", layer.b2.data(), layer.b2.size());
        }
        fn("lnf_g", lnf_g.data(), lnf_g.size());
        fn("lnf_b", lnf_b.data(), lnf_b.size());
        fn("w_out", w_out.data(), w_out.size());
    }
};

// Element-wise precision conversion; tensor shapes are preserved.
template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& src) {
    ModelParams<To> out;
    out.wte = src.wte.template cast<To>();
    out.wpe = src.wpe.template cast<To>();
    out.layers.resize(src.layers.size());
    for (size_t l = 0; l < src.layers.size(); ++l) {
        const auto& a = src.layers[l];
        auto& b = out.layers[l];
        b.ln1_g = a.ln1_g.template cast<To>();
        b.ln1_b = a.ln1_b.template cast<To>();
        b.ln2_g = a.ln2_g.template cast<To>();
        b.ln2_b = a.ln2_b.template cast<To>();
        b.wq = a.wq.template cast<To>();
        b.wk = a.wk.template cast<To>();
        b.wv = a.wv.template cast<To>();
        b.wo = a.wo.template cast<To>();
        b.bq = a.bq.template cast<To>();
        b.bk = a.bk.template cast<To>();
        b.bv = a.bv.template cast<To>();
        b.bo = a.bo.template cast<To>();
        b.w1 = a.w1.template cast<To>();
        b.b1 = a.b1.template cast<To>();
        b.w2 = a.w2.template cast<To>();
        b.b2 = a.b2.template cast<To>();
    }
    out.lnf_g = src.lnf_g.template cast<To>();
    out.lnf_b = src.lnf_b.template cast<To>();
    out.w_out = src.w_out.template cast<To>();
    return out;
}

// Frozen per-layer keys/values for a fixed prompt prefix; reusable across all
// sequences sharing that prefix while the base parameters do not change.
template <typename S>
struct PrefixCache {
    int length = 0;
    std::vector<Mat<S>> k, v; // per layer: (length x d_model)
};

template <typename S>
PrefixCache<S> build_prefix_cache(const ModelParams<S>& params, const TransformerConfig& config,
                                  const std::vector<int>& ids);

// A group of independent sequences evaluated together; linear layers run as
// one packed matrix product, attention runs per sequence.
template <typename S>
struct Chunk {
    struct Item {
        std::vector<int> ids;                   // suffix ids when prefix != nullptr
        const PrefixCache<S>* prefix = nullptr; // optional shared prompt prefix
        int target = -1;                        // answer-position target token
        S answer_weight = 1;                    // NextToken loss weight of the final transition
        S prompt_weight = 1;                    // NextToken loss weight of all other transitions
    };
    std::vector<Item> items;
};

enum class LossMode : uint8_t {
    None,           // forward only, keep final-position logits
    AnswerPosition, // cross-entropy of item.target at the last position
    NextToken,      // language-model loss over every next-token position
};

template <typename S>
struct ChunkCache; // internal activation storage, defined in model.cpp

template <typename S>
struct ChunkStats {
    double loss_sum = 0.0; // weighted cross-entropy summed over scored positions
    double loss_weight = 0.0;
    int64_t loss_count = 0;
    Mat<S> final_logits; // (items x vocab_base), last-position logits
};

template <typename S>
class ChunkRunner {
public:
    ChunkRunner();
    ~ChunkRunner();
    ChunkRunner(ChunkRunner&&) noexcept;
    ChunkRunner& operator=(ChunkRunner&&) noexcept;

    ChunkStats<S> forward(const ModelParams<S>& params, const TransformerConfig& config,
                          const Chunk<S>& chunk, LossMode mode);

    // Backward for the loss of the preceding forward call. loss_scale
    // multiplies every logit gradient (e.g. 1/batch for a mean loss).
    // param_grads, when given, receives all parameter gradients. embed_rows,
    // when given, receives input-embedding gradients for embed_token_ids only
    // (one row per id, same order).
    void backward(const ModelParams<S>& params, const TransformerConfig& config,
                  const Chunk<S>& chunk, S loss_scale, ModelParams<S>* param_grads,
                  const std::vector<int>* embed_token_ids, Mat<S>* embed_rows);

    // Logits at every packed position of the preceding forward call.
    Mat<S> all_position_logits(const ModelParams<S>& params) const;

private:
    ChunkCache<S>* cache_;
};

// Single-sequence helpers built on the chunk machinery.
template <typename S>
Vec<S> next_token_distribution(const ModelParams<S>& params, const TransformerConfig& config,
                               const std::vector<int>& ids);

template <typename S>
Mat<S> forward_all_logits(const ModelParams<S>& params, const TransformerConfig& config,
                          const std::vector<int>& ids);

// ---------------------------------------------------------------------------
// LanguageModel: vocabulary + parameters + the frozen contract.
// ---------------------------------------------------------------------------

std::string flatten_prompt(const std::string& system_text, const std::string& question);

template <typename S>
class BasicLanguageModel {
public:
    BasicLanguageModel() = default;
    BasicLanguageModel(const TransformerConfig& config, Vocabulary vocab);

    const TransformerConfig& config() const { return config_; }
    const Vocabulary& vocab() const { return vocab_; }
    const ModelParams<S>& params() const { return params_; }

    // Mutation of base parameters is only allowed before freezing.
    ModelParams<S>& mutable_params();

    void freeze();
    bool frozen() const { return frozen_; }
    const std::string& frozen_digest() const { return frozen_digest_; }

    // Digest of every parameter outside the embedding-extension region.
    std::string compute_base_digest() const;
    void check_frozen_intact() const;

    // Appends new tokens with norm-matched random embedding rows; returns ids.
    std::vector<int> extend_vocab(const std::vector<std::string>& names, uint64_t seed);
    std::vector<int> extend_vocab(const std::vector<std::string>& names, Rng& rng);

    void set_extension_row(int token_id, const Vec<S>& row);
    Vec<S> embedding_row(int token_id) const;
    S mean_base_embedding_norm() const;

    std::vector<int> tokenize(const std::string& text) const { return vocab_.tokenize(text); }

    // Distribution over the full current vocabulary (extension tokens get 0).
    Vec<S> forward(const std::vector<int>& ids) const;

    // (pYes, pNo) at the answer position of a flattened prompt.
    std::pair<S, S> answer_probs(const std::string& prompt_text) const;

    // Restores a deserialized state; used by the checkpoint reader.
    void restore(const TransformerConfig& config, Vocabulary vocab, ModelParams<S> params,
                 bool frozen, std::string frozen_digest, int frozen_base);
    int frozen_base() const { return frozen_base_; }

private:
    TransformerConfig config_;
    Vocabulary vocab_;
    ModelParams<S> params_;
    bool frozen_ = false;
    std::string frozen_digest_;
    int frozen_base_ = 0;
};

using LanguageModel = BasicLanguageModel<float>;

// Mean answer-position cross-entropy with gradients restricted to the given
// extension-region embedding rows.
struct EmbeddingGrads {
    std::vector<int> token_ids;
    Mat<float> rows;
};

struct AnswerBatchItem {
    std::string prompt; // flattened text ending with the answer marker
    int target_id = -1;
};

std::pair<double, EmbeddingGrads> loss_and_embedding_grads(const LanguageModel& model,
                                                           const std::vector<AnswerBatchItem>& batch,
                                                           const std::vector<int>& trainable_ids);

double mean_answer_loss(const LanguageModel& model, const std::vector<AnswerBatchItem>& batch);

} // namespace oocrel::lm
