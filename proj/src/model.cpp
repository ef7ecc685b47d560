#include "oocrel/model.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

#include "oocrel/digest.hpp"
#include "oocrel/errors.hpp"

namespace oocrel::lm {

void TransformerConfig::validate() const {
    if (layers < 1 || heads < 1 || d_model < 1 || d_ff < 1 || context < 2) {
        throw InvalidArgumentError("transformer config fields must be positive");
    }
    if (d_model % heads != 0) {
        throw InvalidArgumentError("embedding dimension must be divisible by the head count");
    }
}

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599344;

template <typename S>
S gelu(S x) {
    return static_cast<S>(0.5) * x * (static_cast<S>(1) + std::erf(x * static_cast<S>(kInvSqrt2)));
}

template <typename S>
S gelu_grad(S x) {
    const S phi_cdf =
        static_cast<S>(0.5) * (static_cast<S>(1) + std::erf(x * static_cast<S>(kInvSqrt2)));
    const S phi_pdf = std::exp(static_cast<S>(-0.5) * x * x) * static_cast<S>(kInvSqrt2Pi);
    return phi_cdf + x * phi_pdf;
}

// y = xhat * g + b per row; xhat and 1/std are cached for the backward pass.
template <typename S>
void layer_norm_forward(const Mat<S>& x, const Vec<S>& g, const Vec<S>& b, Mat<S>& xhat,
                        Vec<S>& rstd, Mat<S>& y) {
    const auto rows = x.rows();
    const auto cols = x.cols();
    xhat.resize(rows, cols);
    rstd.resize(rows);
    y.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const S mu = x.row(r).mean();
        const S var = (x.row(r).array() - mu).square().mean();
        const S rs = static_cast<S>(1) / std::sqrt(var + static_cast<S>(kLnEps));
        rstd(r) = rs;
        xhat.row(r) = (x.row(r).array() - mu) * rs;
        y.row(r) = xhat.row(r).cwiseProduct(g.transpose()) + b.transpose();
    }
}

// dx for y = ln(x); accumulates dg/db.
template <typename S>
void layer_norm_backward(const Mat<S>& dy, const Mat<S>& xhat, const Vec<S>& rstd, const Vec<S>& g,
                         Mat<S>& dx, Vec<S>* dg, Vec<S>* db) {
    const auto rows = dy.rows();
    const auto cols = dy.cols();
    dx.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        Eigen::Matrix<S, 1, Eigen::Dynamic> dxhat = dy.row(r).cwiseProduct(g.transpose());
        const S m1 = dxhat.mean();
        const S m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
        dx.row(r) = (dxhat.array() - m1 - xhat.row(r).array() * m2) * rstd(r);
    }
    if (dg != nullptr) {
        dg->noalias() += (dy.cwiseProduct(xhat)).colwise().sum().transpose();
    }
    if (db != nullptr) {
        db->noalias() += dy.colwise().sum().transpose();
    }
}

} // namespace

template <typename S>
void ModelParams<S>::resize(const TransformerConfig& config, int vocab_total, int vocab_base) {
    config.validate();
    wte.setZero(vocab_total, config.d_model);
    wpe.setZero(config.context, config.d_model);
    layers.resize(static_cast<size_t>(config.layers));
    for (auto& layer : layers) {
        layer.ln1_g.setOnes(config.d_model);
        layer.ln1_b.setZero(config.d_model);
        layer.ln2_g.setOnes(config.d_model);
        layer.ln2_b.setZero(config.d_model);
        layer.wq.setZero(config.d_model, config.d_model);
        layer.wk.setZero(config.d_model, config.d_model);
        layer.wv.setZero(config.d_model, config.d_model);
        layer.wo.setZero(config.d_model, config.d_model);
        layer.bq.setZero(config.d_model);
        layer.bk.setZero(config.d_model);
        layer.bv.setZero(config.d_model);
        layer.bo.setZero(config.d_model);
        layer.w1.setZero(config.d_model, config.d_ff);
        layer.b1.setZero(config.d_ff);
        layer.w2.setZero(config.d_ff, config.d_model);
        layer.b2.setZero(config.d_model);
    }
    lnf_g.setOnes(config.d_model);
    lnf_b.setZero(config.d_model);
    w_out.setZero(config.d_model, vocab_base);
}

template <typename S>
void ModelParams<S>::init_random(const TransformerConfig& config, Rng& rng) {
    (void)config;
    const S scale = static_cast<S>(0.02);
    auto fill_normal = [&](Mat<S>& m) {
        S* data = m.data();
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            data[i] = static_cast<S>(rng.normal()) * scale;
        }
    };
    fill_normal(wte);
    fill_normal(wpe);
    for (auto& layer : layers) {
        fill_normal(layer.wq);
        fill_normal(layer.wk);
        fill_normal(layer.wv);
        fill_normal(layer.wo);
        fill_normal(layer.w1);
        fill_normal(layer.w2);
    }
    fill_normal(w_out);
}

template <typename S>
void ModelParams<S>::set_zero() {
    for_each_tensor([](const char*, S* data, int64_t size) {
        std::fill(data, data + size, static_cast<S>(0));
    });
}

// ---------------------------------------------------------------------------
// Chunk forward/backward
// ---------------------------------------------------------------------------

template <typename S>
struct LayerCache {
    Mat<S> ln1_xhat, h1, q, k, v, ctx;
    Vec<S> ln1_rstd;
    Mat<S> ln2_xhat, h2;
    Vec<S> ln2_rstd;
    Mat<S> u, g_act;
    std::vector<Mat<S>> probs; // per item: (heads*T x P+T), zero above the diagonal
};

template <typename S>
struct ChunkCache {
    int n_rows = 0;
    std::vector<int> row_token;
    std::vector<int> row_pos;
    std::vector<int> item_offset;
    std::vector<int> item_len;
    std::vector<int> item_prefix;
    std::vector<LayerCache<S>> layers;
    Mat<S> x; // residual stream (reused across layers); final value kept
    Mat<S> lnf_xhat, xf;
    Vec<S> lnf_rstd;
    LossMode mode = LossMode::None;
    std::vector<int> loss_rows;
    std::vector<int> loss_targets;
    std::vector<S> loss_weights;
    Mat<S> probs_loss; // softmax at loss rows
};

namespace {

template <typename S>
void attention_forward(const TransformerConfig& config, const Chunk<S>& chunk,
                       ChunkCache<S>& cache, LayerCache<S>& lc, int layer) {
    const int dh = config.head_dim();
    const S inv_sqrt_dh = static_cast<S>(1) / std::sqrt(static_cast<S>(dh));
    lc.ctx.setZero(cache.n_rows, config.d_model);
    lc.probs.resize(chunk.items.size());
    for (size_t it = 0; it < chunk.items.size(); ++it) {
        const int o = cache.item_offset[it];
        const int t_len = cache.item_len[it];
        const int p_len = cache.item_prefix[it];
        const auto* prefix = chunk.items[it].prefix;
        Mat<S>& probs = lc.probs[it];
        probs.setZero(static_cast<Eigen::Index>(config.heads) * t_len, p_len + t_len);
        for (int h = 0; h < config.heads; ++h) {
            const auto qh = lc.q.block(o, h * dh, t_len, dh);
            const auto kh = lc.k.block(o, h * dh, t_len, dh);
            const auto vh = lc.v.block(o, h * dh, t_len, dh);
            Mat<S> scores_suffix = qh * kh.transpose() * inv_sqrt_dh; // (T x T)
            Mat<S> scores_prefix;
            if (p_len > 0) {
                scores_prefix =
                    qh * prefix->k[static_cast<size_t>(layer)].middleCols(h * dh, dh).transpose() *
                    inv_sqrt_dh; // (T x P)
            }
            for (int t = 0; t < t_len; ++t) {
                auto row = probs.row(static_cast<Eigen::Index>(h) * t_len + t);
                S max_score = -std::numeric_limits<S>::infinity();
                for (int u = 0; u < p_len; ++u) {
                    max_score = std::max(max_score, scores_prefix(t, u));
                }
                for (int u = 0; u <= t; ++u) {
                    max_score = std::max(max_score, scores_suffix(t, u));
                }
                S denom = 0;
                for (int u = 0; u < p_len; ++u) {
                    const S e = std::exp(scores_prefix(t, u) - max_score);
                    row(u) = e;
                    denom += e;
                }
                for (int u = 0; u <= t; ++u) {
                    const S e = std::exp(scores_suffix(t, u) - max_score);
                    row(p_len + u) = e;
                    denom += e;
                }
                row /= denom;
            }
            // ctx = probs_prefix * V_prefix + lower(probs_suffix) * V_suffix
            auto ctx_h = lc.ctx.block(o, h * dh, t_len, dh);
            if (p_len > 0) {
                ctx_h.noalias() +=
                    probs.block(static_cast<Eigen::Index>(h) * t_len, 0, t_len, p_len) *
                    prefix->v[static_cast<size_t>(layer)].middleCols(h * dh, dh);
            }
            ctx_h.noalias() +=
                probs.block(static_cast<Eigen::Index>(h) * t_len, p_len, t_len, t_len) * vh;
        }
    }
}

template <typename S>
void attention_backward(const TransformerConfig& config, const Chunk<S>& chunk,
                        const ChunkCache<S>& cache, const LayerCache<S>& lc, int layer,
                        const Mat<S>& dctx, Mat<S>& dq, Mat<S>& dk, Mat<S>& dv) {
    const int dh = config.head_dim();
    const S inv_sqrt_dh = static_cast<S>(1) / std::sqrt(static_cast<S>(dh));
    dq.setZero(cache.n_rows, config.d_model);
    dk.setZero(cache.n_rows, config.d_model);
    dv.setZero(cache.n_rows, config.d_model);
    for (size_t it = 0; it < chunk.items.size(); ++it) {
        const int o = cache.item_offset[it];
        const int t_len = cache.item_len[it];
        const int p_len = cache.item_prefix[it];
        const auto* prefix = chunk.items[it].prefix;
        const Mat<S>& probs = lc.probs[it];
        for (int h = 0; h < config.heads; ++h) {
            const auto dctx_h = dctx.block(o, h * dh, t_len, dh);
            const auto kh = lc.k.block(o, h * dh, t_len, dh);
            const auto vh = lc.v.block(o, h * dh, t_len, dh);
            const auto qh = lc.q.block(o, h * dh, t_len, dh);
            const auto probs_h = probs.block(static_cast<Eigen::Index>(h) * t_len, 0, t_len,
                                             p_len + t_len);
            Mat<S> dprobs(t_len, p_len + t_len);
            if (p_len > 0) {
                dprobs.leftCols(p_len).noalias() =
                    dctx_h * prefix->v[static_cast<size_t>(layer)].middleCols(h * dh, dh).transpose();
            }
            dprobs.rightCols(t_len).noalias() = dctx_h * vh.transpose();
            // dV over suffix rows (probs are zero above the causal diagonal).
            dv.block(o, h * dh, t_len, dh).noalias() +=
                probs_h.rightCols(t_len).transpose() * dctx_h;
            // softmax backward; invalid columns carry zero probability.
            Mat<S> dscores(t_len, p_len + t_len);
            for (int t = 0; t < t_len; ++t) {
                const S dot = probs_h.row(t).cwiseProduct(dprobs.row(t)).sum();
                dscores.row(t) =
                    (probs_h.row(t).array() * (dprobs.row(t).array() - dot)) * inv_sqrt_dh;
            }
            if (p_len > 0) {
                dq.block(o, h * dh, t_len, dh).noalias() +=
                    dscores.leftCols(p_len) * prefix->k[static_cast<size_t>(layer)].middleCols(h * dh, dh);
            }
            dq.block(o, h * dh, t_len, dh).noalias() += dscores.rightCols(t_len) * kh;
            dk.block(o, h * dh, t_len, dh).noalias() += dscores.rightCols(t_len).transpose() * qh;
        }
    }
}

template <typename S>
void add_bias_rows(Mat<S>& m, const Vec<S>& b) {
    m.rowwise() += b.transpose();
}

} // namespace

template <typename S>
ChunkRunner<S>::ChunkRunner() : cache_(new ChunkCache<S>()) {}

template <typename S>
ChunkRunner<S>::~ChunkRunner() {
    delete cache_;
}

template <typename S>
ChunkRunner<S>::ChunkRunner(ChunkRunner&& other) noexcept : cache_(other.cache_) {
    other.cache_ = nullptr;
}

template <typename S>
ChunkRunner<S>& ChunkRunner<S>::operator=(ChunkRunner&& other) noexcept {
    std::swap(cache_, other.cache_);
    return *this;
}

template <typename S>
Mat<S> ChunkRunner<S>::all_position_logits(const ModelParams<S>& params) const {
    const ChunkCache<S>& cache = *cache_;
    Mat<S> logits(cache.n_rows, params.vocab_base());
    logits.noalias() = cache.xf * params.w_out;
    return logits;
}

template <typename S>
ChunkStats<S> ChunkRunner<S>::forward(const ModelParams<S>& params, const TransformerConfig& config,
                                      const Chunk<S>& chunk, LossMode mode) {
    ChunkCache<S>& cache = *cache_;
    cache.mode = mode;
    cache.item_offset.clear();
    cache.item_len.clear();
    cache.item_prefix.clear();
    cache.row_token.clear();
    cache.row_pos.clear();

    int n_rows = 0;
    for (const auto& item : chunk.items) {
        const int p_len = item.prefix != nullptr ? item.prefix->length : 0;
        const int t_len = static_cast<int>(item.ids.size());
        if (t_len < 1) {
            throw InvalidArgumentError("empty token sequence");
        }
        if (p_len + t_len > config.context) {
            throw ContextOverflowError("sequence length " + std::to_string(p_len + t_len) +
                                       " exceeds context length " +
                                       std::to_string(config.context));
        }
        cache.item_offset.push_back(n_rows);
        cache.item_len.push_back(t_len);
        cache.item_prefix.push_back(p_len);
        for (int t = 0; t < t_len; ++t) {
            const int token = item.ids[static_cast<size_t>(t)];
            if (token < 0 || token >= params.vocab_total()) {
                throw InvalidArgumentError("token id out of range: " + std::to_string(token));
            }
            cache.row_token.push_back(token);
            cache.row_pos.push_back(p_len + t);
        }
        n_rows += t_len;
    }
    cache.n_rows = n_rows;

    Mat<S>& x = cache.x;
    x.resize(n_rows, config.d_model);
    for (int r = 0; r < n_rows; ++r) {
        x.row(r) = params.wte.row(cache.row_token[static_cast<size_t>(r)]) +
                   params.wpe.row(cache.row_pos[static_cast<size_t>(r)]);
    }

    cache.layers.resize(params.layers.size());
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const LayerParams<S>& lp = params.layers[l];
        LayerCache<S>& lc = cache.layers[l];
        layer_norm_forward(x, lp.ln1_g, lp.ln1_b, lc.ln1_xhat, lc.ln1_rstd, lc.h1);
        lc.q.noalias() = lc.h1 * lp.wq;
        add_bias_rows(lc.q, lp.bq);
        lc.k.noalias() = lc.h1 * lp.wk;
        add_bias_rows(lc.k, lp.bk);
        lc.v.noalias() = lc.h1 * lp.wv;
        add_bias_rows(lc.v, lp.bv);
        attention_forward(config, chunk, cache, lc, static_cast<int>(l));
        x.noalias() += lc.ctx * lp.wo;
        add_bias_rows(x, lp.bo);
        layer_norm_forward(x, lp.ln2_g, lp.ln2_b, lc.ln2_xhat, lc.ln2_rstd, lc.h2);
        lc.u.noalias() = lc.h2 * lp.w1;
        add_bias_rows(lc.u, lp.b1);
        lc.g_act = lc.u.unaryExpr([](S v) { return gelu(v); });
        x.noalias() += lc.g_act * lp.w2;
        add_bias_rows(x, lp.b2);
    }
    layer_norm_forward(x, params.lnf_g, params.lnf_b, cache.lnf_xhat, cache.lnf_rstd, cache.xf);

    // Loss rows and final-position logits.
    cache.loss_rows.clear();
    cache.loss_targets.clear();
    cache.loss_weights.clear();
    ChunkStats<S> stats;
    const int n_items = static_cast<int>(chunk.items.size());
    stats.final_logits.resize(n_items, params.vocab_base());
    for (int it = 0; it < n_items; ++it) {
        const int last = cache.item_offset[static_cast<size_t>(it)] +
                         cache.item_len[static_cast<size_t>(it)] - 1;
        stats.final_logits.row(it).noalias() = cache.xf.row(last) * params.w_out;
    }

    if (mode == LossMode::AnswerPosition) {
        for (int it = 0; it < n_items; ++it) {
            const int last = cache.item_offset[static_cast<size_t>(it)] +
                             cache.item_len[static_cast<size_t>(it)] - 1;
            const int target = chunk.items[static_cast<size_t>(it)].target;
            if (target < 0 || target >= params.vocab_base()) {
                throw InvalidArgumentError("answer target outside the output vocabulary");
            }
            cache.loss_rows.push_back(last);
            cache.loss_targets.push_back(target);
            cache.loss_weights.push_back(static_cast<S>(1));
        }
    } else if (mode == LossMode::NextToken) {
        for (int it = 0; it < n_items; ++it) {
            const int o = cache.item_offset[static_cast<size_t>(it)];
            const int t_len = cache.item_len[static_cast<size_t>(it)];
            for (int t = 0; t + 1 < t_len; ++t) {
                const int target = cache.row_token[static_cast<size_t>(o + t + 1)];
                if (target >= params.vocab_base()) {
                    continue; // extension tokens are never prediction targets
                }
                const S weight = t + 2 == t_len
                                     ? chunk.items[static_cast<size_t>(it)].answer_weight
                                     : chunk.items[static_cast<size_t>(it)].prompt_weight;
                if (weight == static_cast<S>(0)) {
                    continue;
                }
                cache.loss_rows.push_back(o + t);
                cache.loss_targets.push_back(target);
                cache.loss_weights.push_back(weight);
            }
        }
    }

    if (!cache.loss_rows.empty()) {
        const int n_loss = static_cast<int>(cache.loss_rows.size());
        cache.probs_loss.resize(n_loss, params.vocab_base());
        for (int k = 0; k < n_loss; ++k) {
            cache.probs_loss.row(k).noalias() =
                cache.xf.row(cache.loss_rows[static_cast<size_t>(k)]) * params.w_out;
        }
        for (int k = 0; k < n_loss; ++k) {
            auto row = cache.probs_loss.row(k);
            const S max_logit = row.maxCoeff();
            row = (row.array() - max_logit).exp();
            const S denom = row.sum();
            row /= denom;
            const S p_target = row(cache.loss_targets[static_cast<size_t>(k)]);
            const double weight = static_cast<double>(cache.loss_weights[static_cast<size_t>(k)]);
            stats.loss_sum += weight * -std::log(static_cast<double>(p_target) +
                                                 std::numeric_limits<double>::min());
            stats.loss_weight += weight;
        }
        stats.loss_count = n_loss;
    }
    return stats;
}

template <typename S>
void ChunkRunner<S>::backward(const ModelParams<S>& params, const TransformerConfig& config,
                              const Chunk<S>& chunk, S loss_scale, ModelParams<S>* param_grads,
                              const std::vector<int>* embed_token_ids, Mat<S>* embed_rows) {
    ChunkCache<S>& cache = *cache_;
    if (cache.mode == LossMode::None || cache.loss_rows.empty()) {
        throw InvalidArgumentError("backward requires a forward pass with a loss mode");
    }
    const int n_loss = static_cast<int>(cache.loss_rows.size());

    // dLogits = weight * (softmax - onehot) * scale at every loss row.
    Mat<S> dlogits = cache.probs_loss;
    for (int k = 0; k < n_loss; ++k) {
        dlogits(k, cache.loss_targets[static_cast<size_t>(k)]) -= static_cast<S>(1);
        dlogits.row(k) *= cache.loss_weights[static_cast<size_t>(k)];
    }
    dlogits *= loss_scale;

    Mat<S> xf_rows(n_loss, config.d_model);
    for (int k = 0; k < n_loss; ++k) {
        xf_rows.row(k) = cache.xf.row(cache.loss_rows[static_cast<size_t>(k)]);
    }
    if (param_grads != nullptr) {
        param_grads->w_out.noalias() += xf_rows.transpose() * dlogits;
    }
    Mat<S> dxf_rows = dlogits * params.w_out.transpose();
    Mat<S> dxf = Mat<S>::Zero(cache.n_rows, config.d_model);
    for (int k = 0; k < n_loss; ++k) {
        dxf.row(cache.loss_rows[static_cast<size_t>(k)]) += dxf_rows.row(k);
    }

    Mat<S> dx;
    layer_norm_backward(dxf, cache.lnf_xhat, cache.lnf_rstd, params.lnf_g, dx,
                        param_grads != nullptr ? &param_grads->lnf_g : nullptr,
                        param_grads != nullptr ? &param_grads->lnf_b : nullptr);

    Mat<S> dh2, du, dmid, dh1, dq, dk, dv, dctx, dln;
    for (int l = static_cast<int>(params.layers.size()) - 1; l >= 0; --l) {
        const LayerParams<S>& lp = params.layers[static_cast<size_t>(l)];
        LayerCache<S>& lc = cache.layers[static_cast<size_t>(l)];
        LayerParams<S>* lg =
            param_grads != nullptr ? &param_grads->layers[static_cast<size_t>(l)] : nullptr;

        // FFN branch: x_out = x_mid + gelu(ln2(x_mid) w1 + b1) w2 + b2
        if (lg != nullptr) {
            lg->w2.noalias() += lc.g_act.transpose() * dx;
            lg->b2.noalias() += dx.colwise().sum().transpose();
        }
        du.noalias() = dx * lp.w2.transpose();
        du.array() *= lc.u.unaryExpr([](S v) { return gelu_grad(v); }).array();
        if (lg != nullptr) {
            lg->w1.noalias() += lc.h2.transpose() * du;
            lg->b1.noalias() += du.colwise().sum().transpose();
        }
        dh2.noalias() = du * lp.w1.transpose();
        layer_norm_backward(dh2, lc.ln2_xhat, lc.ln2_rstd, lp.ln2_g, dln,
                            lg != nullptr ? &lg->ln2_g : nullptr,
                            lg != nullptr ? &lg->ln2_b : nullptr);
        dmid = dx + dln;

        // Attention branch: x_mid = x_in + attn(ln1(x_in)) wo + bo
        if (lg != nullptr) {
            lg->wo.noalias() += lc.ctx.transpose() * dmid;
            lg->bo.noalias() += dmid.colwise().sum().transpose();
        }
        dctx.noalias() = dmid * lp.wo.transpose();
        attention_backward(config, chunk, cache, lc, l, dctx, dq, dk, dv);
        if (lg != nullptr) {
            lg->wq.noalias() += lc.h1.transpose() * dq;
            lg->bq.noalias() += dq.colwise().sum().transpose();
            lg->wk.noalias() += lc.h1.transpose() * dk;
            lg->bk.noalias() += dk.colwise().sum().transpose();
            lg->wv.noalias() += lc.h1.transpose() * dv;
            lg->bv.noalias() += dv.colwise().sum().transpose();
        }
        dh1.noalias() = dq * lp.wq.transpose();
        dh1.noalias() += dk * lp.wk.transpose();
        dh1.noalias() += dv * lp.wv.transpose();
        layer_norm_backward(dh1, lc.ln1_xhat, lc.ln1_rstd, lp.ln1_g, dln,
                            lg != nullptr ? &lg->ln1_g : nullptr,
                            lg != nullptr ? &lg->ln1_b : nullptr);
        dx = dmid + dln;
    }

    // dx now holds the gradient with respect to wte[token] + wpe[pos] rows.
    if (param_grads != nullptr) {
        for (int r = 0; r < cache.n_rows; ++r) {
            param_grads->wte.row(cache.row_token[static_cast<size_t>(r)]) += dx.row(r);
            param_grads->wpe.row(cache.row_pos[static_cast<size_t>(r)]) += dx.row(r);
        }
    }
    if (embed_token_ids != nullptr && embed_rows != nullptr) {
        std::unordered_map<int, int> slot_of;
        slot_of.reserve(embed_token_ids->size());
        for (size_t i = 0; i < embed_token_ids->size(); ++i) {
            slot_of[(*embed_token_ids)[i]] = static_cast<int>(i);
        }
        for (int r = 0; r < cache.n_rows; ++r) {
            auto it = slot_of.find(cache.row_token[static_cast<size_t>(r)]);
            if (it != slot_of.end()) {
                embed_rows->row(it->second) += dx.row(r);
            }
        }
    }
}

template <typename S>
PrefixCache<S> build_prefix_cache(const ModelParams<S>& params, const TransformerConfig& config,
                                  const std::vector<int>& ids) {
    if (static_cast<int>(ids.size()) > config.context) {
        throw ContextOverflowError("prefix length " + std::to_string(ids.size()) +
                                   " exceeds context length " + std::to_string(config.context));
    }
    PrefixCache<S> cache;
    cache.length = static_cast<int>(ids.size());
    cache.k.resize(params.layers.size());
    cache.v.resize(params.layers.size());

    Mat<S> x(cache.length, config.d_model);
    for (int t = 0; t < cache.length; ++t) {
        x.row(t) = params.wte.row(ids[static_cast<size_t>(t)]) + params.wpe.row(t);
    }
    Mat<S> xhat, h1, h2, u, g_act, ctx;
    Vec<S> rstd;
    const int dh = config.head_dim();
    const S inv_sqrt_dh = static_cast<S>(1) / std::sqrt(static_cast<S>(dh));
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const LayerParams<S>& lp = params.layers[l];
        layer_norm_forward(x, lp.ln1_g, lp.ln1_b, xhat, rstd, h1);
        Mat<S> q = h1 * lp.wq;
        add_bias_rows(q, lp.bq);
        Mat<S> k = h1 * lp.wk;
        add_bias_rows(k, lp.bk);
        Mat<S> v = h1 * lp.wv;
        add_bias_rows(v, lp.bv);
        cache.k[l] = k;
        cache.v[l] = v;
        ctx.setZero(cache.length, config.d_model);
        for (int h = 0; h < config.heads; ++h) {
            const auto qh = q.middleCols(h * dh, dh);
            const auto kh = k.middleCols(h * dh, dh);
            const auto vh = v.middleCols(h * dh, dh);
            Mat<S> scores = qh * kh.transpose() * inv_sqrt_dh;
            for (int t = 0; t < cache.length; ++t) {
                S max_score = scores.row(t).head(t + 1).maxCoeff();
                Eigen::Matrix<S, 1, Eigen::Dynamic> e =
                    (scores.row(t).head(t + 1).array() - max_score).exp();
                e /= e.sum();
                ctx.row(t).segment(h * dh, dh).noalias() = e * vh.topRows(t + 1);
            }
        }
        x.noalias() += ctx * lp.wo;
        add_bias_rows(x, lp.bo);
        layer_norm_forward(x, lp.ln2_g, lp.ln2_b, xhat, rstd, h2);
        u.noalias() = h2 * lp.w1;
        add_bias_rows(u, lp.b1);
        g_act = u.unaryExpr([](S val) { return gelu(val); });
        x.noalias() += g_act * lp.w2;
        add_bias_rows(x, lp.b2);
    }
    return cache;
}

template <typename S>
Vec<S> next_token_distribution(const ModelParams<S>& params, const TransformerConfig& config,
                               const std::vector<int>& ids) {
    Chunk<S> chunk;
    chunk.items.push_back(typename Chunk<S>::Item{ids, nullptr, -1});
    ChunkRunner<S> runner;
    ChunkStats<S> stats = runner.forward(params, config, chunk, LossMode::None);
    Vec<S> logits = stats.final_logits.row(0).transpose();
    const S max_logit = logits.maxCoeff();
    Vec<S> probs = (logits.array() - max_logit).exp();
    probs /= probs.sum();
    return probs;
}

template <typename S>
Mat<S> forward_all_logits(const ModelParams<S>& params, const TransformerConfig& config,
                          const std::vector<int>& ids) {
    Chunk<S> chunk;
    chunk.items.push_back(typename Chunk<S>::Item{ids, nullptr, -1});
    ChunkRunner<S> runner;
    runner.forward(params, config, chunk, LossMode::None);
    return runner.all_position_logits(params);
}

// ---------------------------------------------------------------------------
// LanguageModel
// ---------------------------------------------------------------------------

std::string flatten_prompt(const std::string& system_text, const std::string& question) {
    return std::string(Vocabulary::kSysMarker) + " " + system_text + " " +
           Vocabulary::kUserMarker + " " + question + " " + Vocabulary::kAnswerMarker;
}

template <typename S>
BasicLanguageModel<S>::BasicLanguageModel(const TransformerConfig& config, Vocabulary vocab)
    : config_(config), vocab_(std::move(vocab)) {
    config_.validate();
    params_.resize(config_, vocab_.size(), vocab_.size());
    Rng rng(config_.init_seed);
    params_.init_random(config_, rng);
}

template <typename S>
ModelParams<S>& BasicLanguageModel<S>::mutable_params() {
    if (frozen_) {
        throw FrozenViolationError("model is frozen; only extension embedding rows may change");
    }
    return params_;
}

template <typename S>
void BasicLanguageModel<S>::freeze() {
    if (frozen_) {
        return;
    }
    frozen_ = true;
    frozen_base_ = vocab_.base_size();
    frozen_digest_ = compute_base_digest();
}

template <typename S>
std::string BasicLanguageModel<S>::compute_base_digest() const {
    const int base = frozen_ ? frozen_base_ : vocab_.base_size();
    Sha256 hasher;
    hasher.update("oocrel-model-v1");
    hasher.update_pod(config_.layers);
    hasher.update_pod(config_.heads);
    hasher.update_pod(config_.d_model);
    hasher.update_pod(config_.d_ff);
    hasher.update_pod(config_.context);
    hasher.update_pod(base);
    for (int i = 0; i < base; ++i) {
        const std::string& token = vocab_.token_of(i);
        hasher.update(token);
        hasher.update("\x1f", 1);
    }
    params_.for_each_tensor([&](const char* name, const S* data, int64_t size) {
        int64_t count = size;
        if (std::string(name) == "wte") {
            count = static_cast<int64_t>(base) * config_.d_model; // base rows only
        }
        hasher.update(name);
        hasher.update(data, static_cast<size_t>(count) * sizeof(S));
    });
    return hasher.hex_digest();
}

template <typename S>
void BasicLanguageModel<S>::check_frozen_intact() const {
    if (!frozen_) {
        throw FrozenViolationError("model has not been frozen");
    }
    if (compute_base_digest() != frozen_digest_) {
        throw FrozenViolationError("frozen parameter digest mismatch");
    }
}

template <typename S>
S BasicLanguageModel<S>::mean_base_embedding_norm() const {
    const int base = frozen_ ? frozen_base_ : vocab_.base_size();
    S total = 0;
    for (int i = 0; i < base; ++i) {
        total += params_.wte.row(i).norm();
    }
    return total / static_cast<S>(base);
}

template <typename S>
std::vector<int> BasicLanguageModel<S>::extend_vocab(const std::vector<std::string>& names,
                                                     uint64_t seed) {
    Rng rng(seed);
    return extend_vocab(names, rng);
}

template <typename S>
std::vector<int> BasicLanguageModel<S>::extend_vocab(const std::vector<std::string>& names,
                                                     Rng& rng) {
    if (!frozen_) {
        throw FrozenViolationError("vocabulary extension requires a frozen model");
    }
    const S target_norm = mean_base_embedding_norm();
    const int old_rows = params_.vocab_total();
    params_.wte.conservativeResize(old_rows + static_cast<int>(names.size()), config_.d_model);
    std::vector<int> ids;
    ids.reserve(names.size());
    for (size_t i = 0; i < names.size(); ++i) {
        const int id = vocab_.add(names[i]);
        Vec<S> direction(config_.d_model);
        for (int c = 0; c < config_.d_model; ++c) {
            direction(c) = static_cast<S>(rng.normal());
        }
        direction *= target_norm / direction.norm();
        params_.wte.row(id) = direction.transpose();
        ids.push_back(id);
    }
    return ids;
}

template <typename S>
void BasicLanguageModel<S>::set_extension_row(int token_id, const Vec<S>& row) {
    if (!frozen_) {
        throw FrozenViolationError("extension rows exist only on a frozen model");
    }
    if (token_id < frozen_base_ || token_id >= params_.vocab_total()) {
        throw FrozenViolationError("token id " + std::to_string(token_id) +
                                   " is outside the embedding extension region");
    }
    if (row.size() != config_.d_model) {
        throw InvalidArgumentError("embedding row has the wrong dimension");
    }
    params_.wte.row(token_id) = row.transpose();
}

template <typename S>
Vec<S> BasicLanguageModel<S>::embedding_row(int token_id) const {
    if (token_id < 0 || token_id >= params_.vocab_total()) {
        throw InvalidArgumentError("token id out of range");
    }
    return params_.wte.row(token_id).transpose();
}

template <typename S>
Vec<S> BasicLanguageModel<S>::forward(const std::vector<int>& ids) const {
    Vec<S> base_probs = next_token_distribution(params_, config_, ids);
    Vec<S> probs = Vec<S>::Zero(vocab_.size());
    probs.head(base_probs.size()) = base_probs;
    return probs;
}

template <typename S>
std::pair<S, S> BasicLanguageModel<S>::answer_probs(const std::string& prompt_text) const {
    const std::vector<int> ids = vocab_.tokenize(prompt_text);
    Vec<S> probs = next_token_distribution(params_, config_, ids);
    return {probs(vocab_.yes_id()), probs(vocab_.no_id())};
}

template <typename S>
void BasicLanguageModel<S>::restore(const TransformerConfig& config, Vocabulary vocab,
                                    ModelParams<S> params, bool frozen, std::string frozen_digest,
                                    int frozen_base) {
    config_ = config;
    vocab_ = std::move(vocab);
    params_ = std::move(params);
    frozen_ = frozen;
    frozen_digest_ = std::move(frozen_digest);
    frozen_base_ = frozen_base;
}

std::pair<double, EmbeddingGrads> loss_and_embedding_grads(const LanguageModel& model,
                                                           const std::vector<AnswerBatchItem>& batch,
                                                           const std::vector<int>& trainable_ids) {
    if (!model.frozen()) {
        throw FrozenViolationError("embedding-only training requires a frozen model");
    }
    for (int id : trainable_ids) {
        if (id < model.frozen_base() || id >= model.vocab().size()) {
            throw FrozenViolationError("trainable id " + std::to_string(id) +
                                       " lies outside the embedding extension region");
        }
    }
    Chunk<float> chunk;
    for (const auto& item : batch) {
        chunk.items.push_back(
            Chunk<float>::Item{model.tokenize(item.prompt), nullptr, item.target_id});
    }
    ChunkRunner<float> runner;
    ChunkStats<float> stats = runner.forward(model.params(), model.config(), chunk,
                                             LossMode::AnswerPosition);
    EmbeddingGrads grads;
    grads.token_ids = trainable_ids;
    grads.rows = Mat<float>::Zero(static_cast<Eigen::Index>(trainable_ids.size()),
                                  model.config().d_model);
    runner.backward(model.params(), model.config(), chunk,
                    1.0f / static_cast<float>(batch.size()), nullptr, &grads.token_ids,
                    &grads.rows);
    const double loss = stats.loss_sum / static_cast<double>(stats.loss_count);
    return {loss, std::move(grads)};
}

double mean_answer_loss(const LanguageModel& model, const std::vector<AnswerBatchItem>& batch) {
    Chunk<float> chunk;
    for (const auto& item : batch) {
        chunk.items.push_back(
            Chunk<float>::Item{model.tokenize(item.prompt), nullptr, item.target_id});
    }
    ChunkRunner<float> runner;
    ChunkStats<float> stats = runner.forward(model.params(), model.config(), chunk,
                                             LossMode::AnswerPosition);
    return stats.loss_sum / static_cast<double>(stats.loss_count);
}

// explicit instantiations
template struct ModelParams<float>;
template struct ModelParams<double>;
template class ChunkRunner<float>;
template class ChunkRunner<double>;
template class BasicLanguageModel<float>;
template class BasicLanguageModel<double>;
template PrefixCache<float> build_prefix_cache(const ModelParams<float>&, const TransformerConfig&,
                                               const std::vector<int>&);
template PrefixCache<double> build_prefix_cache(const ModelParams<double>&,
                                                const TransformerConfig&, const std::vector<int>&);
template Vec<float> next_token_distribution(const ModelParams<float>&, const TransformerConfig&,
                                            const std::vector<int>&);
template Vec<double> next_token_distribution(const ModelParams<double>&, const TransformerConfig&,
                                             const std::vector<int>&);
template Mat<float> forward_all_logits(const ModelParams<float>&, const TransformerConfig&,
                                       const std::vector<int>&);
template Mat<double> forward_all_logits(const ModelParams<double>&, const TransformerConfig&,
                                        const std::vector<int>&);

} // namespace oocrel::lm
