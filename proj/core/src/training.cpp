#include "medfinder/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "medfinder/common.hpp"
#include "medfinder/fusion.hpp"
#include "medfinder/rng.hpp"

namespace medfinder {

namespace {

struct ItemTrace {
    std::vector<std::uint32_t> tokens; // effective indices (padding if empty)
    std::vector<double> text_mean;     // mean embedding row
    EmbeddingVector text_emb;          // W
    TokenMatrix z1, z2;
    CrossAttentionTrace attn;
    EmbeddingVector pooled;
};

struct BatchTrace {
    std::vector<ItemTrace> items;
    Matrix scores; // scores.at(k, i) = cos(W_k, pooled_i)
    LossBreakdown loss;
};

BatchTrace forward_batch(const EncoderParams& params, const ModelConfig& model,
                         const PreparedBatch& batch, const LossConfig& cfg) {
    if (batch.items.size() < 2) throw DataError("batch needs at least two items");

    const TextEncoder text_enc(params, model);
    const VisionEncoder vision_enc(params, model);
    const std::size_t n = batch.items.size();
    const std::size_t dim = model.embed_dim;

    BatchTrace tr;
    tr.items.reserve(n);
    double mse_sum = 0.0;
    for (const PreparedItem& item : batch.items) {
        ItemTrace it;
        it.tokens = item.tokens.indices;
        if (it.tokens.empty()) it.tokens.push_back(Vocabulary::kPadding);

        // Text mean is re-derived here so the backward pass can reuse it.
        const Tensor& emb = params.group("text.embedding").tensor;
        it.text_mean.assign(dim, 0.0);
        for (std::uint32_t idx : it.tokens) {
            const double* row = emb.data.data() + static_cast<std::size_t>(idx) * dim;
            for (std::size_t d = 0; d < dim; ++d) it.text_mean[d] += row[d];
        }
        for (double& v : it.text_mean) v /= static_cast<double>(it.tokens.size());
        it.text_emb = text_enc.encode(item.tokens);

        it.z1 = vision_enc.encode(item.view1).tokens;
        it.z2 = vision_enc.encode(item.view2).tokens;
        if (cfg.enable_mse) mse_sum += mse_loss(it.z1, it.z2);

        it.attn = cross_attention_trace(it.z1, it.z2);
        it.pooled = pool_tokens(it.attn.fusion);
        tr.items.push_back(std::move(it));
    }

    tr.scores = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            tr.scores.at(k, i) = cosine_score(tr.items[k].text_emb, tr.items[i].pooled);

    tr.loss.alpha = cfg.alpha;
    tr.loss.l_mse = cfg.enable_mse ? mse_sum / static_cast<double>(n) : 0.0;
    tr.loss.l_sim = sim_loss(tr.scores, cfg.tau, cfg.symmetric_sim);
    tr.loss.l_total = total_loss(tr.loss);
    return tr;
}

// d(cos)/d(first argument) scaled by `coeff`, accumulated into grad.
void accumulate_cosine_grad(const EmbeddingVector& a, const EmbeddingVector& b,
                            double score, double coeff, std::vector<double>& grad) {
    if (a.norm() == 0.0 || b.norm() == 0.0) return; // score pinned to 0
    const double inv = 1.0 / (a.norm() * b.norm());
    const double self = score / (a.norm() * a.norm());
    for (std::size_t d = 0; d < grad.size(); ++d)
        grad[d] += coeff * (b[d] * inv - self * a[d]);
}

// Gradient of sim_loss wrt the score matrix, scaled by alpha.
Matrix score_gradients(const Matrix& scores, const LossConfig& cfg) {
    const std::size_t n = scores.rows();
    Matrix dscores(n, n);
    std::vector<double> probs(n);
    auto softmax_slice = [&](auto get_logit) {
        double max_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k) max_logit = std::max(max_logit, get_logit(k));
        double z = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            probs[k] = std::exp(get_logit(k) - max_logit);
            z += probs[k];
        }
        for (std::size_t k = 0; k < n; ++k) probs[k] /= z;
    };
    const double scale = cfg.alpha / cfg.tau;
    for (std::size_t i = 0; i < n; ++i) { // image columns
        softmax_slice([&](std::size_t k) { return scores.at(k, i) / cfg.tau; });
        for (std::size_t k = 0; k < n; ++k)
            dscores.at(k, i) += scale * (probs[k] - (k == i ? 1.0 : 0.0));
    }
    if (cfg.symmetric_sim) {
        for (std::size_t k = 0; k < n; ++k) { // text rows
            softmax_slice([&](std::size_t j) { return scores.at(k, j) / cfg.tau; });
            for (std::size_t j = 0; j < n; ++j)
                dscores.at(k, j) += scale * (probs[j] - (j == k ? 1.0 : 0.0));
        }
    }
    return dscores;
}

// Backprop through one encoded view: dZ -> patch weight/bias gradients.
void backprop_view(const Volume& view, const TokenMatrix& z, const Matrix& dz,
                   const ModelConfig& model, Tensor* d_patch_w, Tensor* d_patch_b) {
    const std::size_t p = model.patch_size;
    const std::size_t dim = model.embed_dim;
    const std::size_t patch_len = p * p * p;
    const std::size_t gw = view.width / p, gh = view.height / p, gd = view.depth / p;

    std::vector<double> patch(patch_len);
    std::vector<double> du(dim);
    for (std::size_t pd = 0; pd < gd; ++pd) {
        for (std::size_t ph = 0; ph < gh; ++ph) {
            for (std::size_t pw = 0; pw < gw; ++pw) {
                const std::size_t t = (pd * gh + ph) * gw + pw;
                bool any = false;
                for (std::size_t r = 0; r < dim; ++r) {
                    const double zv = z.at(t, r);
                    du[r] = dz.at(t, r) * (1.0 - zv * zv); // tanh'
                    any = any || du[r] != 0.0;
                }
                if (!any) continue;
                if (d_patch_b)
                    for (std::size_t r = 0; r < dim; ++r) d_patch_b->data[r] += du[r];
                if (d_patch_w) {
                    std::size_t j = 0;
                    for (std::size_t dz_ = 0; dz_ < p; ++dz_)
                        for (std::size_t dy = 0; dy < p; ++dy)
                            for (std::size_t dx = 0; dx < p; ++dx)
                                patch[j++] = static_cast<double>(
                                    view.at(pw * p + dx, ph * p + dy, pd * p + dz_));
                    for (std::size_t r = 0; r < dim; ++r) {
                        if (du[r] == 0.0) continue;
                        double* wrow = d_patch_w->data.data() + r * patch_len;
                        for (std::size_t k = 0; k < patch_len; ++k)
                            wrow[k] += du[r] * patch[k];
                    }
                }
            }
        }
    }
}

} // namespace

LossBreakdown batch_loss(const EncoderParams& params, const ModelConfig& model,
                         const PreparedBatch& batch, const LossConfig& cfg,
                         Matrix* scores_out) {
    BatchTrace tr = forward_batch(params, model, batch, cfg);
    if (scores_out) *scores_out = std::move(tr.scores);
    return tr.loss;
}

EncoderParams batch_gradients(const EncoderParams& params, const ModelConfig& model,
                              const PreparedBatch& batch, const LossConfig& cfg,
                              LossBreakdown* loss_out) {
    const BatchTrace tr = forward_batch(params, model, batch, cfg);
    if (loss_out) *loss_out = tr.loss;

    const std::size_t n = batch.items.size();
    const std::size_t dim = model.embed_dim;
    EncoderParams grads = zeros_like(params);

    const bool want_text = !params.group("text.embedding").frozen
                        || !params.group("text.proj_weight").frozen
                        || !params.group("text.proj_bias").frozen;
    const bool want_vision = !params.group("vision.patch_weight").frozen
                          || !params.group("vision.patch_bias").frozen;
    if (!want_text && !want_vision) return grads;

    const Matrix dscores = score_gradients(tr.scores, cfg);

    // Score matrix -> per-item gradients on W (text) and pooled (vision).
    std::vector<std::vector<double>> d_text(n, std::vector<double>(dim, 0.0));
    std::vector<std::vector<double>> d_pooled(n, std::vector<double>(dim, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            const double coeff = dscores.at(k, i);
            if (coeff == 0.0) continue;
            const double s = tr.scores.at(k, i);
            accumulate_cosine_grad(tr.items[k].text_emb, tr.items[i].pooled, s, coeff,
                                   d_text[k]);
            accumulate_cosine_grad(tr.items[i].pooled, tr.items[k].text_emb, s, coeff,
                                   d_pooled[i]);
        }
    }

    if (want_vision) {
        Tensor* d_patch_w = params.group("vision.patch_weight").frozen
                                ? nullptr
                                : &grads.group("vision.patch_weight").tensor;
        Tensor* d_patch_b = params.group("vision.patch_bias").frozen
                                ? nullptr
                                : &grads.group("vision.patch_bias").tensor;
        const double inv_sqrt_dim = 1.0 / std::sqrt(static_cast<double>(dim));
        const double mse_scale = cfg.enable_mse ? 1.0 / static_cast<double>(n) : 0.0;

        for (std::size_t i = 0; i < n; ++i) {
            const ItemTrace& it = tr.items[i];
            const std::size_t tn = it.z1.rows();
            Matrix dz1(tn, dim), dz2(tn, dim);

            // pooled = mean over fusion rows.
            std::vector<double> d_fusion_row(dim);
            for (std::size_t d = 0; d < dim; ++d)
                d_fusion_row[d] = d_pooled[i][d] / static_cast<double>(tn);

            if (tn == 1) {
                // Single-token fusion is exactly Z1.
                for (std::size_t d = 0; d < dim; ++d) dz1.at(0, d) += d_fusion_row[d];
            } else {
                // Row t of fusion: Z1_t * ctx_t (element-wise).
                Matrix d_ctx(tn, dim);
                for (std::size_t t = 0; t < tn; ++t) {
                    for (std::size_t d = 0; d < dim; ++d) {
                        dz1.at(t, d) += d_fusion_row[d] * it.attn.context.at(t, d);
                        d_ctx.at(t, d) = d_fusion_row[d] * it.z1.at(t, d);
                    }
                }
                // ctx_t = sum_j w_tj Z2_j.
                Matrix dw(tn, tn);
                for (std::size_t t = 0; t < tn; ++t) {
                    for (std::size_t j = 0; j < tn; ++j) {
                        dw.at(t, j) = dot(d_ctx.row(t), it.z2.row(j));
                        const double w_tj = it.attn.weights.at(t, j);
                        for (std::size_t d = 0; d < dim; ++d)
                            dz2.at(j, d) += w_tj * d_ctx.at(t, d);
                    }
                }
                // Softmax rows, then the normalized-dot logits.
                for (std::size_t t = 0; t < tn; ++t) {
                    double inner = 0.0;
                    for (std::size_t j = 0; j < tn; ++j)
                        inner += it.attn.weights.at(t, j) * dw.at(t, j);
                    const double n1 = it.attn.norm1[t];
                    for (std::size_t j = 0; j < tn; ++j) {
                        const double d_logit =
                            it.attn.weights.at(t, j) * (dw.at(t, j) - inner);
                        if (d_logit == 0.0) continue;
                        const double n2 = it.attn.norm2[j];
                        if (n1 == 0.0 || n2 == 0.0) continue; // logit pinned to 0
                        const double q = inv_sqrt_dim / (n1 * n2);
                        const double logit = dot(it.z1.row(t), it.z2.row(j)) * q;
                        for (std::size_t d = 0; d < dim; ++d) {
                            dz1.at(t, d) += d_logit
                                * (q * it.z2.at(j, d) - logit * it.z1.at(t, d) / (n1 * n1));
                            dz2.at(j, d) += d_logit
                                * (q * it.z1.at(t, d) - logit * it.z2.at(j, d) / (n2 * n2));
                        }
                    }
                }
            }

            if (mse_scale != 0.0) {
                for (std::size_t t = 0; t < tn; ++t) {
                    for (std::size_t d = 0; d < dim; ++d) {
                        const double diff = mse_scale * (it.z1.at(t, d) - it.z2.at(t, d));
                        dz1.at(t, d) += diff;
                        dz2.at(t, d) -= diff;
                    }
                }
            }

            backprop_view(batch.items[i].view1, it.z1, dz1, model, d_patch_w, d_patch_b);
            backprop_view(batch.items[i].view2, it.z2, dz2, model, d_patch_w, d_patch_b);
        }
    }

    if (want_text) {
        const Tensor& proj_w = params.group("text.proj_weight").tensor;
        Tensor* d_emb = params.group("text.embedding").frozen
                            ? nullptr
                            : &grads.group("text.embedding").tensor;
        Tensor* d_proj_w = params.group("text.proj_weight").frozen
                               ? nullptr
                               : &grads.group("text.proj_weight").tensor;
        Tensor* d_proj_b = params.group("text.proj_bias").frozen
                               ? nullptr
                               : &grads.group("text.proj_bias").tensor;

        std::vector<double> du(dim), d_mean(dim);
        for (std::size_t k = 0; k < n; ++k) {
            const ItemTrace& it = tr.items[k];
            for (std::size_t r = 0; r < dim; ++r) {
                const double w = it.text_emb[r];
                du[r] = d_text[k][r] * (1.0 - w * w);
            }
            if (d_proj_b)
                for (std::size_t r = 0; r < dim; ++r) d_proj_b->data[r] += du[r];
            if (d_proj_w)
                for (std::size_t r = 0; r < dim; ++r)
                    for (std::size_t c = 0; c < dim; ++c)
                        d_proj_w->data[r * dim + c] += du[r] * it.text_mean[c];
            if (d_emb) {
                std::fill(d_mean.begin(), d_mean.end(), 0.0);
                for (std::size_t r = 0; r < dim; ++r) {
                    if (du[r] == 0.0) continue;
                    const double* wrow = proj_w.data.data() + r * dim;
                    for (std::size_t c = 0; c < dim; ++c) d_mean[c] += du[r] * wrow[c];
                }
                const double inv_len = 1.0 / static_cast<double>(it.tokens.size());
                for (std::uint32_t idx : it.tokens) {
                    double* row = d_emb->data.data() + static_cast<std::size_t>(idx) * dim;
                    for (std::size_t c = 0; c < dim; ++c) row[c] += inv_len * d_mean[c];
                }
            }
        }
    }

    return grads;
}

TrainResult train(const std::vector<TrainItem>& items, EncoderParams params,
                  const ModelConfig& model, const TrainConfig& cfg) {
    if (items.size() < 2) throw DataError("training needs at least two items");
    if (cfg.batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
    for (const ParamGroup& g : params.groups())
        if (g.name.rfind("text.", 0) == 0 && !g.frozen)
            throw ConfigError("the text encoder must stay frozen during training");

    const std::size_t n = items.size();

    // The shuffle and all per-item seeds depend only on (seed, item index):
    // with a zero learning rate every epoch sees identical batches and views,
    // so the loss history is constant.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, hash_string("shuffle")));
    shuffle_rng.shuffle(order);

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
        const std::size_t end = std::min(n, start + cfg.batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (batches.size() > 1 && batches.back().size() < 2) {
        batches[batches.size() - 2].push_back(batches.back()[0]);
        batches.pop_back();
    }

    const std::uint64_t sampler_base = derive_seed(cfg.seed, hash_string("sampler"));
    const std::uint64_t aug1_base = derive_seed(cfg.seed, hash_string("aug1"));
    const std::uint64_t aug2_base = derive_seed(cfg.seed, hash_string("aug2"));

    // Views are fixed per item, so they are prepared once up front.
    std::vector<PreparedBatch> prepared;
    prepared.reserve(batches.size());
    for (const std::vector<std::size_t>& batch : batches) {
        PreparedBatch pb;
        pb.items.reserve(batch.size());
        for (std::size_t pos = 0; pos < batch.size(); ++pos) {
            const std::size_t idx = batch[pos];
            const TrainItem& item = items[idx];
            PreparedItem pi;
            pi.tokens = sample_text(item.tokens, cfg.sampler, derive_seed(sampler_base, idx));

            const Volume& partner = items[batch[(pos + 1) % batch.size()]].volume;
            AugmentationPolicy p1 = cfg.aug1;
            p1.seed = derive_seed(aug1_base, idx);
            AugmentationPolicy p2 = cfg.aug2;
            p2.seed = derive_seed(aug2_base, idx);
            pi.view1 = augment(item.volume, p1, &partner);
            pi.view2 = augment(item.volume, p2, &partner);
            pb.items.push_back(std::move(pi));
        }
        prepared.push_back(std::move(pb));
    }

    TrainResult result;
    result.history.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double mse_sum = 0.0, sim_sum = 0.0;
        for (const PreparedBatch& pb : prepared) {
            LossBreakdown loss;
            const EncoderParams grads = batch_gradients(params, model, pb, cfg.loss, &loss);
            if (!std::isfinite(loss.l_total))
                throw NumericError("training diverged: non-finite loss at epoch "
                                   + std::to_string(epoch));
            sgd_step(params, grads, cfg.learning_rate);
            mse_sum += loss.l_mse;
            sim_sum += loss.l_sim;
        }
        LossBreakdown epoch_loss;
        epoch_loss.alpha = cfg.loss.alpha;
        epoch_loss.l_mse = mse_sum / static_cast<double>(prepared.size());
        epoch_loss.l_sim = sim_sum / static_cast<double>(prepared.size());
        epoch_loss.l_total = total_loss(epoch_loss);
        result.history.push_back(epoch_loss);
    }
    result.params = std::move(params);
    return result;
}

} // namespace medfinder
