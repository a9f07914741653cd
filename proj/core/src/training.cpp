// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#include "histoselect/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "histoselect/baselines.hpp"
#include "histoselect/error.hpp"
#include "histoselect/io_util.hpp"
#include "histoselect/mathutil.hpp"
#include "histoselect/rng.hpp"

namespace histoselect {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

LinearLayer make_layer(std::size_t in, std::size_t out) {
    LinearLayer layer;
    layer.in_dim = in;
    layer.out_dim = out;
    layer.w.assign(in * out, 0.0);
    layer.b.assign(out, 0.0);
    return layer;
}

void xavier_fill(LinearLayer& layer, Rng& rng) {
    const double limit = std::sqrt(
        6.0 / static_cast<double>(layer.in_dim + layer.out_dim));
    for (double& w : layer.w) {
        w = rng.next_uniform(-limit, limit);
    }
}

// dKL(clamp(x) || b)/dx inside the clamp window, zero outside it.
double kl_grad(double x, double prior) {
    if (x <= kKlEps || x >= 1.0 - kKlEps) {
        return 0.0;
    }
    return std::log(x / prior) - std::log((1.0 - x) / (1.0 - prior));
}

std::uint64_t random_mask_seed(std::uint64_t base, std::uint64_t step) {
    return Rng::derive_seed(base ^ 0x52414e444d534bULL, step);
}

}  // namespace

std::optional<std::size_t> Cap::resolve(std::size_t n_patches) const {
    switch (kind) {
        case Kind::none:
            return std::nullopt;
        case Kind::absolute:
            return static_cast<std::size_t>(value);
        case Kind::fraction: {
            if (!(value > 0.0) || value > 1.0) {
                throw ValidationError("cap fraction must lie in (0, 1]");
            }
            const double raw = std::ceil(value * static_cast<double>(n_patches));
            return static_cast<std::size_t>(raw);
        }
    }
    throw ValidationError("invalid cap kind");
}

ParamGradients zeros_like(const SelectorParams& params) {
    ParamGradients g;
    g.group_net.hidden = make_layer(2 * params.dim, params.hidden_dim);
    g.group_net.out = make_layer(params.hidden_dim, 1);
    g.patch_net.hidden = make_layer(2 * params.dim, params.hidden_dim);
    g.patch_net.out = make_layer(params.hidden_dim, 1);
    g.proxy_head = make_layer(2 * params.dim, params.n_classes);
    return g;
}

std::vector<BlockView> param_blocks(SelectorParams& params) {
    return {
        {"group_net.w1", &params.group_net.hidden.w},
        {"group_net.b1", &params.group_net.hidden.b},
        {"group_net.w2", &params.group_net.out.w},
        {"group_net.b2", &params.group_net.out.b},
        {"patch_net.w1", &params.patch_net.hidden.w},
        {"patch_net.b1", &params.patch_net.hidden.b},
        {"patch_net.w2", &params.patch_net.out.w},
        {"patch_net.b2", &params.patch_net.out.b},
        {"proxy_head.w", &params.proxy_head.w},
        {"proxy_head.b", &params.proxy_head.b},
    };
}

std::vector<BlockView> grad_blocks(ParamGradients& grads) {
    return {
        {"group_net.w1", &grads.group_net.hidden.w},
        {"group_net.b1", &grads.group_net.hidden.b},
        {"group_net.w2", &grads.group_net.out.w},
        {"group_net.b2", &grads.group_net.out.b},
        {"patch_net.w1", &grads.patch_net.hidden.w},
        {"patch_net.b1", &grads.patch_net.hidden.b},
        {"patch_net.w2", &grads.patch_net.out.w},
        {"patch_net.b2", &grads.patch_net.out.b},
        {"proxy_head.w", &grads.proxy_head.w},
        {"proxy_head.b", &grads.proxy_head.b},
    };
}

SelectorParams init_params(std::size_t dim, std::size_t hidden_dim,
                           std::size_t n_classes, std::uint64_t seed) {
    if (dim == 0 || hidden_dim == 0 || n_classes == 0) {
        throw ValidationError("init_params: dims must be >= 1");
    }
    SelectorParams params;
    params.dim = dim;
    params.hidden_dim = hidden_dim;
    params.n_classes = n_classes;
    params.group_net.hidden = make_layer(2 * dim, hidden_dim);
    params.group_net.out = make_layer(hidden_dim, 1);
    params.patch_net.hidden = make_layer(2 * dim, hidden_dim);
    params.patch_net.out = make_layer(hidden_dim, 1);
    params.proxy_head = make_layer(2 * dim, n_classes);
    Rng rng(seed);
    xavier_fill(params.group_net.hidden, rng);
    xavier_fill(params.group_net.out, rng);
    xavier_fill(params.patch_net.hidden, rng);
    xavier_fill(params.patch_net.out, rng);
    xavier_fill(params.proxy_head, rng);
    return params;
}

DecodeResult proxy_decode(std::span<const double> pooled,
                          const QuestionRecord& question,
                          const SelectorParams& params) {
    if (pooled.size() != params.dim ||
        question.embedding.size() != params.dim) {
        throw ValidationError("proxy_decode: dimension mismatch");
    }
    if (question.answer_label >= params.n_classes) {
        throw ValidationError("proxy_decode: answer_label " +
                              std::to_string(question.answer_label) +
                              " out of range for " +
                              std::to_string(params.n_classes) + " classes");
    }
    const std::size_t d = params.dim;
    std::vector<double> input(2 * d);
    std::copy(pooled.begin(), pooled.end(), input.begin());
    std::copy(question.embedding.begin(), question.embedding.end(),
              input.begin() + static_cast<std::ptrdiff_t>(d));
    DecodeResult out;
    out.logits.resize(params.n_classes);
    for (std::size_t c = 0; c < params.n_classes; ++c) {
        out.logits[c] = params.proxy_head.b[c] +
                        dot(params.proxy_head.row(c), input);
    }
    std::vector<double> logp(params.n_classes);
    log_softmax(out.logits, logp);
    out.l_vqa = -logp[question.answer_label];
    if (!std::isfinite(out.l_vqa) || !all_finite(out.logits)) {
        throw NumericError("proxy_decode: non-finite logits");
    }
    return out;
}

namespace {

// Shared forward pass; fills gradient buffers when `grads` is non-null so the
// analytic backward differentiates exactly what forward evaluated.
ForwardResult run_step(const EmbeddingBundle& bundle, const PromptBank& prompts,
                       const QuestionRecord& question, const SelectorParams& params,
                       const TrainConfig& cfg, std::size_t iter,
                       ParamGradients* grads) {
    params.validate();
    const std::size_t n = bundle.n_patches;
    const std::size_t d = params.dim;
    const std::size_t h = params.hidden_dim;

    ForwardResult fwd;
    fwd.partition = segment(bundle, prompts);
    const TissuePartition& part = fwd.partition;
    const std::size_t m = part.m_groups;

    // Rates and scores, capturing hidden pre-activations for the backward pass.
    std::vector<double> input(2 * d);
    std::copy(question.embedding.begin(), question.embedding.end(),
              input.begin() + static_cast<std::ptrdiff_t>(d));
    std::vector<double> rates(m, 0.0);
    std::vector<double> group_preacts(m * h, 0.0);
    std::vector<double> group_inputs(grads ? m * 2 * d : 0, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        if (!part.group_valid(j)) {
            continue;
        }
        const auto proto = part.prototype(j);
        std::copy(proto.begin(), proto.end(), input.begin());
        rates[j] = two_layer_sigmoid(params.group_net, input,
                                     {group_preacts.data() + j * h, h});
        if (grads) {
            std::copy(input.begin(), input.end(),
                      group_inputs.begin() + static_cast<std::ptrdiff_t>(j * 2 * d));
        }
    }
    std::vector<double> scores(n);
    std::vector<double> patch_preacts(n * h);
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = bundle.patch(i);
        std::copy(x.begin(), x.end(), input.begin());
        scores[i] = two_layer_sigmoid(params.patch_net, input,
                                      {patch_preacts.data() + i * h, h});
    }

    const std::vector<std::size_t> budgets = group_budgets(rates, part.group_sizes);
    fwd.selection = select(part, scores, budgets, cfg.cap.resolve(n));
    fwd.selection.rates = rates;
    fwd.gated = gated_features(bundle, fwd.selection, part);

    const DecodeResult decode = proxy_decode(fwd.gated.ste_pooled, question, params);
    fwd.logits = decode.logits;

    const std::vector<double> priors_g = group_prior(part, question);
    const std::vector<double> priors_p = patch_prior(bundle, question);
    const double l_group = group_loss(rates, priors_g, part.group_sizes);
    const double l_patch = patch_loss(scores, priors_p);
    const auto betas = beta_at(iter, cfg.schedule);
    fwd.losses = total_loss(decode.l_vqa, l_group, l_patch, betas);

    if (!grads) {
        return fwd;
    }

    // ---- reverse pass ----
    const std::size_t classes = params.n_classes;
    std::vector<double> dlogits = softmax(decode.logits);
    dlogits[question.answer_label] -= 1.0;

    std::vector<double> head_input(2 * d);
    std::copy(fwd.gated.ste_pooled.begin(), fwd.gated.ste_pooled.end(),
              head_input.begin());
    std::copy(question.embedding.begin(), question.embedding.end(),
              head_input.begin() + static_cast<std::ptrdiff_t>(d));
    for (std::size_t c = 0; c < classes; ++c) {
        double* wrow = grads->proxy_head.w.data() + c * 2 * d;
        for (std::size_t k = 0; k < 2 * d; ++k) {
            wrow[k] += dlogits[c] * head_input[k];
        }
        grads->proxy_head.b[c] += dlogits[c];
    }
    std::vector<double> dpooled(d, 0.0);
    for (std::size_t c = 0; c < classes; ++c) {
        const double* wrow = params.proxy_head.w.data() + c * 2 * d;
        for (std::size_t k = 0; k < d; ++k) {
            dpooled[k] += dlogits[c] * wrow[k];
        }
    }

    // STE: the gate behaves as s_i * r_j with the mask and count frozen.
    std::vector<double> dscore(n, 0.0);
    std::vector<double> drate(m, 0.0);
    const double count = static_cast<double>(
        std::max<std::size_t>(1, fwd.gated.selected_count));
    for (std::size_t i : fwd.selection.selected) {
        const std::size_t j = part.labels[i];
        const double downstream = dot(dpooled, bundle.patch(i)) / count;
        dscore[i] += rates[j] * downstream;
        drate[j] += scores[i] * downstream;
    }

    // Compression terms; priors are constants.
    std::size_t nonempty = 0;
    for (std::size_t j = 0; j < m; ++j) {
        nonempty += part.group_valid(j) ? 1 : 0;
    }
    for (std::size_t i = 0; i < n; ++i) {
        dscore[i] += fwd.losses.beta_p / static_cast<double>(n) *
                     kl_grad(scores[i], priors_p[i]);
    }
    for (std::size_t j = 0; j < m; ++j) {
        if (part.group_valid(j)) {
            drate[j] += fwd.losses.beta_g / static_cast<double>(nonempty) *
                        kl_grad(rates[j], priors_g[j]);
        }
    }

    // Backprop through the group net.
    for (std::size_t j = 0; j < m; ++j) {
        if (!part.group_valid(j) || drate[j] == 0.0) {
            continue;
        }
        const double du = drate[j] * rates[j] * (1.0 - rates[j]);
        const double* preact = group_preacts.data() + j * h;
        const double* gin = group_inputs.data() + j * 2 * d;
        grads->group_net.out.b[0] += du;
        for (std::size_t k = 0; k < h; ++k) {
            const double act = preact[k] > 0.0 ? preact[k] : 0.0;
            grads->group_net.out.w[k] += du * act;
            if (preact[k] > 0.0) {
                const double da = du * params.group_net.out.w[k];
                double* wrow = grads->group_net.hidden.w.data() + k * 2 * d;
                for (std::size_t z = 0; z < 2 * d; ++z) {
                    wrow[z] += da * gin[z];
                }
                grads->group_net.hidden.b[k] += da;
            }
        }
    }

    // Backprop through the patch net.
    for (std::size_t i = 0; i < n; ++i) {
        if (dscore[i] == 0.0) {
            continue;
        }
        const double du = dscore[i] * scores[i] * (1.0 - scores[i]);
        const double* preact = patch_preacts.data() + i * h;
        const auto x = bundle.patch(i);
        grads->patch_net.out.b[0] += du;
        for (std::size_t k = 0; k < h; ++k) {
            const double act = preact[k] > 0.0 ? preact[k] : 0.0;
            grads->patch_net.out.w[k] += du * act;
            if (preact[k] > 0.0) {
                const double da = du * params.patch_net.out.w[k];
                double* wrow = grads->patch_net.hidden.w.data() + k * 2 * d;
                for (std::size_t z = 0; z < d; ++z) {
                    wrow[z] += da * x[z];
                }
                for (std::size_t z = 0; z < d; ++z) {
                    wrow[d + z] += da * question.embedding[z];
                }
                grads->patch_net.hidden.b[k] += da;
            }
        }
    }

    for (BlockView block : grad_blocks(*grads)) {
        if (!all_finite(*block.values)) {
            throw NumericError(std::string("backward: non-finite gradient in ") +
                               block.name);
        }
    }
    return fwd;
}

}  // namespace

ForwardResult forward(const EmbeddingBundle& bundle, const PromptBank& prompts,
                      const QuestionRecord& question, const SelectorParams& params,
                      const TrainConfig& cfg, std::size_t iter) {
    return run_step(bundle, prompts, question, params, cfg, iter, nullptr);
}

ParamGradients backward(const EmbeddingBundle& bundle, const PromptBank& prompts,
                        const QuestionRecord& question, const SelectorParams& params,
                        const TrainConfig& cfg, std::size_t iter) {
    ParamGradients grads = zeros_like(params);
    run_step(bundle, prompts, question, params, cfg, iter, &grads);
    return grads;
}

namespace {

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

void apply_update(SelectorParams& params, ParamGradients& grads,
                  const TrainConfig& cfg, AdamState& adam, std::size_t step) {
    auto pblocks = param_blocks(params);
    auto gblocks = grad_blocks(grads);
    if (cfg.optimizer == Optimizer::sgd) {
        for (std::size_t b = 0; b < pblocks.size(); ++b) {
            std::vector<double>& theta = *pblocks[b].values;
            const std::vector<double>& g = *gblocks[b].values;
            for (std::size_t i = 0; i < theta.size(); ++i) {
                theta[i] -= cfg.learning_rate * g[i];
            }
        }
        return;
    }
    if (adam.m.empty()) {
        for (const BlockView& block : pblocks) {
            adam.m.emplace_back(block.values->size(), 0.0);
            adam.v.emplace_back(block.values->size(), 0.0);
        }
    }
    const double t = static_cast<double>(step + 1);
    const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
    const double bc2 = 1.0 - std::pow(kAdamBeta2, t);
    for (std::size_t b = 0; b < pblocks.size(); ++b) {
        std::vector<double>& theta = *pblocks[b].values;
        const std::vector<double>& g = *gblocks[b].values;
        std::vector<double>& m = adam.m[b];
        std::vector<double>& v = adam.v[b];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
            v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + kAdamEps);
        }
    }
}

// Head-only training step for the random-selection baseline: a seeded
// uniform subset is mean-pooled and only the proxy head receives gradient.
LossBreakdown random_strategy_step(const SlideCase& slide, const PromptBank&,
                                   const SelectorParams& params,
                                   const TrainConfig& cfg, std::size_t iter,
                                   ParamGradients* grads) {
    const std::size_t n = slide.bundle.n_patches;
    const std::size_t d = params.dim;
    const auto cap = cfg.cap.resolve(n);
    const std::size_t k = std::min(cap.value_or(n), n);
    const auto picked = random_select(n, k, random_mask_seed(cfg.seed, iter));
    std::vector<double> pooled(d, 0.0);
    for (std::size_t i : picked) {
        const auto x = slide.bundle.patch(i);
        for (std::size_t z = 0; z < d; ++z) {
            pooled[z] += x[z];
        }
    }
    const double denom = static_cast<double>(std::max<std::size_t>(1, picked.size()));
    for (double& v : pooled) {
        v /= denom;
    }
    const DecodeResult decode = proxy_decode(pooled, slide.question, params);
    if (grads) {
        std::vector<double> dlogits = softmax(decode.logits);
        dlogits[slide.question.answer_label] -= 1.0;
        std::vector<double> head_input(2 * d);
        std::copy(pooled.begin(), pooled.end(), head_input.begin());
        std::copy(slide.question.embedding.begin(), slide.question.embedding.end(),
                  head_input.begin() + static_cast<std::ptrdiff_t>(d));
        for (std::size_t c = 0; c < params.n_classes; ++c) {
            double* wrow = grads->proxy_head.w.data() + c * 2 * d;
            for (std::size_t z = 0; z < 2 * d; ++z) {
                wrow[z] += dlogits[c] * head_input[z];
            }
            grads->proxy_head.b[c] += dlogits[c];
        }
    }
    return total_loss(decode.l_vqa, 0.0, 0.0, beta_at(iter, cfg.schedule));
}

}  // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& cfg) {
    if (dataset.slides.empty()) {
        throw ValidationError("train: empty dataset");
    }
    dataset.prompts.validate();
    const std::size_t d = dataset.prompts.dim;
    const std::size_t classes = dataset.slides.front().question.n_classes;
    for (const SlideCase& slide : dataset.slides) {
        slide.bundle.validate();
        slide.question.validate();
        if (slide.bundle.dim != d || slide.question.embedding.size() != d ||
            slide.question.n_classes != classes) {
            throw ValidationError("train: inconsistent dims across dataset");
        }
    }

    TrainResult result;
    result.params = init_params(d, cfg.hidden_dim, classes, cfg.seed);
    result.history.reserve(cfg.iters);

    AdamState adam;
    Rng shuffle_rng(Rng::derive_seed(cfg.seed, 0x534855464cULL));
    std::vector<std::size_t> order(dataset.slides.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t iter = 0; iter < cfg.iters; ++iter) {
        const std::size_t pos = iter % order.size();
        if (pos == 0) {
            for (std::size_t i = order.size(); i > 1; --i) {
                std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
            }
        }
        const SlideCase& slide = dataset.slides[order[pos]];
        ParamGradients grads = zeros_like(result.params);
        LossBreakdown losses;
        if (cfg.strategy == SelectionStrategy::random) {
            losses = random_strategy_step(slide, dataset.prompts, result.params,
                                          cfg, iter, &grads);
        } else {
            losses = run_step(slide.bundle, dataset.prompts, slide.question,
                              result.params, cfg, iter, &grads)
                         .losses;
        }
        apply_update(result.params, grads, cfg, adam, iter);
        result.history.emplace_back(iter, losses);
    }
    return result;
}

std::string history_csv(
    const std::vector<std::pair<std::size_t, LossBreakdown>>& history) {
    std::string out = history_csv_header();
    for (const auto& [iter, loss] : history) {
        out += history_csv_row(iter, loss);
    }
    return out;
}

std::size_t predict_answer(const EmbeddingBundle& bundle, const PromptBank& prompts,
                           const QuestionRecord& question, const SelectorParams& params,
                           const TrainConfig& cfg, std::uint64_t eval_seed,
                           std::size_t slide_index) {
    std::vector<double> logits;
    if (cfg.strategy == SelectionStrategy::random) {
        const std::size_t n = bundle.n_patches;
        const std::size_t k = std::min(cfg.cap.resolve(n).value_or(n), n);
        const auto picked =
            random_select(n, k, random_mask_seed(eval_seed, slide_index));
        std::vector<double> pooled(params.dim, 0.0);
        for (std::size_t i : picked) {
            const auto x = bundle.patch(i);
            for (std::size_t z = 0; z < params.dim; ++z) {
                pooled[z] += x[z];
            }
        }
        const double denom =
            static_cast<double>(std::max<std::size_t>(1, picked.size()));
        for (double& v : pooled) {
            v /= denom;
        }
        logits = proxy_decode(pooled, question, params).logits;
    } else {
        const TissuePartition part = segment(bundle, prompts);
        const SelectionResult sel =
            run_selection(part, bundle, question, params, cfg.cap.resolve(bundle.n_patches));
        const GatedFeatures gated = gated_features(bundle, sel, part);
        logits = proxy_decode(gated.ste_pooled, question, params).logits;
    }
    return static_cast<std::size_t>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
}

double evaluate_accuracy(const Dataset& dataset, const SelectorParams& params,
                         const TrainConfig& cfg, std::uint64_t eval_seed) {
    if (dataset.slides.empty()) {
        throw ValidationError("evaluate_accuracy: empty dataset");
    }
    std::size_t correct = 0;
    for (std::size_t s = 0; s < dataset.slides.size(); ++s) {
        const SlideCase& slide = dataset.slides[s];
        const std::size_t predicted =
            predict_answer(slide.bundle, dataset.prompts, slide.question, params,
                           cfg, eval_seed, s);
        correct += predicted == slide.question.answer_label ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.slides.size());
}

namespace {

nlohmann::json layer_to_json(const LinearLayer& layer) {
    return nlohmann::json{{"w", layer.w}, {"b", layer.b}};
}

void layer_from_json(const nlohmann::json& doc, LinearLayer& layer,
                     const char* name) {
    try {
        layer.w = doc.at("w").get<std::vector<double>>();
        layer.b = doc.at("b").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("params json: bad layer ") + name + ": " +
                          e.what());
    }
    if (layer.w.size() != layer.in_dim * layer.out_dim ||
        layer.b.size() != layer.out_dim) {
        throw ValidationError(std::string("params json: layer ") + name +
                              " has the wrong element count");
    }
}

}  // namespace

void save_params_json(const std::filesystem::path& path, const SelectorParams& params,
                      std::uint64_t seed) {
    params.validate();
    nlohmann::json doc{
        {"dim", params.dim},
        {"hidden_dim", params.hidden_dim},
        {"n_classes", params.n_classes},
        {"seed", seed},
        {"group_net",
         {{"w1", params.group_net.hidden.w},
          {"b1", params.group_net.hidden.b},
          {"w2", params.group_net.out.w},
          {"b2", params.group_net.out.b}}},
        {"patch_net",
         {{"w1", params.patch_net.hidden.w},
          {"b1", params.patch_net.hidden.b},
          {"w2", params.patch_net.out.w},
          {"b2", params.patch_net.out.b}}},
        {"proxy_head", layer_to_json(params.proxy_head)},
    };
    write_file_bytes(path, doc.dump(2) + "\n");
}

SelectorParams load_params_json(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file_bytes(path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("params json: invalid JSON in " + path.string() + ": " +
                          e.what());
    }
    SelectorParams params;
    try {
        params.dim = doc.at("dim").get<std::size_t>();
        params.hidden_dim = doc.at("hidden_dim").get<std::size_t>();
        params.n_classes = doc.at("n_classes").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("params json: missing dims: ") + e.what());
    }
    SelectorParams shaped = init_params(params.dim, params.hidden_dim,
                                        params.n_classes, 0);
    params.group_net = shaped.group_net;
    params.patch_net = shaped.patch_net;
    params.proxy_head = shaped.proxy_head;

    const nlohmann::json& g = doc.at("group_net");
    try {
        params.group_net.hidden.w = g.at("w1").get<std::vector<double>>();
        params.group_net.hidden.b = g.at("b1").get<std::vector<double>>();
        params.group_net.out.w = g.at("w2").get<std::vector<double>>();
        params.group_net.out.b = g.at("b2").get<std::vector<double>>();
        const nlohmann::json& p = doc.at("patch_net");
        params.patch_net.hidden.w = p.at("w1").get<std::vector<double>>();
        params.patch_net.hidden.b = p.at("b1").get<std::vector<double>>();
        params.patch_net.out.w = p.at("w2").get<std::vector<double>>();
        params.patch_net.out.b = p.at("b2").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("params json: bad selector nets: ") + e.what());
    }
    layer_from_json(doc.at("proxy_head"), params.proxy_head, "proxy_head");
    params.validate();
    return params;
}

}  // namespace histoselect
