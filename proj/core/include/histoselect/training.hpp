// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "histoselect/ib_objective.hpp"
#include "histoselect/selector.hpp"
#include "histoselect/wsi_data.hpp"

namespace histoselect {

enum class Optimizer { sgd, adam };

// "learned" trains the full selector stack; "random" replaces selection with
// a seeded uniform subset and trains only the proxy head (baseline mode).
enum class SelectionStrategy { learned, random };

// Token cap: absent, an absolute patch count, or a fraction of N resolved as
// ceil(fraction * N) per slide.
struct Cap {
    enum class Kind { none, absolute, fraction };
    Kind kind = Kind::none;
    double value = 0.0;

    static Cap none() { return {}; }
    static Cap absolute(std::size_t count) {
        return {Kind::absolute, static_cast<double>(count)};
    }
    static Cap fraction(double f) { return {Kind::fraction, f}; }

    std::optional<std::size_t> resolve(std::size_t n_patches) const;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t iters = 1000;
    Optimizer optimizer = Optimizer::adam;
    BetaSchedule schedule{};
    Cap cap{};
    std::uint64_t seed = 0;
    std::size_t hidden_dim = 256;
    SelectionStrategy strategy = SelectionStrategy::learned;
};

// Same block shapes as SelectorParams.
struct ParamGradients {
    TwoLayerNet group_net;
    TwoLayerNet patch_net;
    LinearLayer proxy_head;
};

ParamGradients zeros_like(const SelectorParams& params);

// Named views over the parameter blocks, in a fixed order shared by the
// optimizer, the serializer, and the finite-difference oracle.
struct BlockView {
    const char* name;
    std::vector<double>* values;
};
std::vector<BlockView> param_blocks(SelectorParams& params);
std::vector<BlockView> grad_blocks(ParamGradients& grads);

// Xavier-uniform weights from the seeded stream, zero biases.
SelectorParams init_params(std::size_t dim, std::size_t hidden_dim,
                           std::size_t n_classes, std::uint64_t seed);

struct DecodeResult {
    std::vector<double> logits;
    double l_vqa = 0.0;
};

// Single-token answer NLL: -log softmax(W [pooled; q] + b)[answer_label].
DecodeResult proxy_decode(std::span<const double> pooled,
                          const QuestionRecord& question,
                          const SelectorParams& params);

struct ForwardResult {
    TissuePartition partition;
    SelectionResult selection;
    GatedFeatures gated;
    std::vector<double> logits;  // over the STE-gated pooled features
    LossBreakdown losses;
};

// segment -> rates/scores -> budgets -> select -> gate -> decode -> losses,
// with beta from cfg.schedule at `iter`. losses.l_vqa (and so losses.total)
// is evaluated on the STE-gated pooling, the objective backward()
// differentiates; gated.pooled keeps the plain hard-mask mean.
ForwardResult forward(const EmbeddingBundle& bundle, const PromptBank& prompts,
                      const QuestionRecord& question, const SelectorParams& params,
                      const TrainConfig& cfg, std::size_t iter);

// Exact reverse-mode gradient of forward(...).losses.total. The hard mask,
// budgets, and pooled denominator are constants; each selected gate passes
// d/ds_i = r_j * downstream and d/dr_j = sum_i s_i * downstream, and the
// compression terms differentiate through sigma and the clamped KL (priors
// are constants).
ParamGradients backward(const EmbeddingBundle& bundle, const PromptBank& prompts,
                        const QuestionRecord& question, const SelectorParams& params,
                        const TrainConfig& cfg, std::size_t iter);

struct TrainResult {
    SelectorParams params;
    std::vector<std::pair<std::size_t, LossBreakdown>> history;
};

// One backward + optimizer step per slide, slides visited in seeded shuffled
// order, reshuffled each epoch. Deterministic in (dataset, cfg).
TrainResult train(const Dataset& dataset, const TrainConfig& cfg);

std::string history_csv(const std::vector<std::pair<std::size_t, LossBreakdown>>& history);

// Predicted answer for one slide under the given strategy and cap.
std::size_t predict_answer(const EmbeddingBundle& bundle, const PromptBank& prompts,
                           const QuestionRecord& question, const SelectorParams& params,
                           const TrainConfig& cfg, std::uint64_t eval_seed,
                           std::size_t slide_index);

// Fraction of slides answered correctly.
double evaluate_accuracy(const Dataset& dataset, const SelectorParams& params,
                         const TrainConfig& cfg, std::uint64_t eval_seed);

// JSON round trip for trained parameters (dims, seed, row-major blocks of
// full-precision decimals).
void save_params_json(const std::filesystem::path& path, const SelectorParams& params,
                      std::uint64_t seed);
SelectorParams load_params_json(const std::filesystem::path& path);

}  // namespace histoselect
