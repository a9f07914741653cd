// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "histoselect/segmentation.hpp"
#include "histoselect/wsi_data.hpp"

namespace histoselect {

// Dense layer, weights row-major (out_dim x in_dim).
struct LinearLayer {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::vector<double> w;
    std::vector<double> b;

    std::span<const double> row(std::size_t r) const {
        return {w.data() + r * in_dim, in_dim};
    }
};

// Two linear layers with a ReLU between them.
struct TwoLayerNet {
    LinearLayer hidden;
    LinearLayer out;
};

// Learnable state: the group sampler, the patch selector, and the proxy
// answer head standing in for the decoder. Both selector nets map the
// concatenation [feature; question] (2*dim) through hidden_dim to a scalar.
struct SelectorParams {
    std::size_t dim = 0;
    std::size_t hidden_dim = 0;
    std::size_t n_classes = 0;
    TwoLayerNet group_net;
    TwoLayerNet patch_net;
    LinearLayer proxy_head;  // n_classes x 2*dim

    void validate() const;
};

// Outcome of one hierarchical selection pass. Rates for empty groups hold
// 0.0 and are meaningful only where the partition's group is nonempty.
struct SelectionResult {
    std::vector<double> rates;          // per group, sigma output in (0,1)
    std::vector<double> scores;         // per patch, sigma output in (0,1)
    std::vector<std::size_t> budgets;   // per group, ceil(rate * size)
    std::vector<bool> hard_mask;        // per patch
    std::vector<std::size_t> selected;  // sorted ascending
};

// sigma(W2 relu(W1 z + b1) + b2). When `preacts` is non-empty (size
// hidden_dim) it receives the hidden pre-activations, which the analytic
// backward pass needs; the arithmetic is identical either way.
double two_layer_sigmoid(const TwoLayerNet& net, std::span<const double> input,
                         std::span<double> preacts = {});

// Sampling rate per tissue group: sigma(F_group([g_j; q])).
std::vector<double> group_rates(const TissuePartition& partition,
                                const QuestionRecord& question,
                                const SelectorParams& params);

// Per-patch selection probability: sigma(F_patch([x_i; q])).
std::vector<double> patch_scores(const EmbeddingBundle& bundle,
                                 const QuestionRecord& question,
                                 const SelectorParams& params);

// ceil(rate * group_size) per group, clamped into [1, group_size] for
// nonempty groups; 0 for empty ones.
std::vector<std::size_t> group_budgets(const std::vector<double>& rates,
                                       const std::vector<std::size_t>& group_sizes);

// Per-group top-budget selection by score (ties to the lower patch index),
// then an optional global cap by score rank across the union.
SelectionResult select(const TissuePartition& partition,
                       const std::vector<double>& scores,
                       const std::vector<std::size_t>& budgets,
                       std::optional<std::size_t> cap);

// Full pipeline for one slide: rates -> scores -> budgets -> select.
SelectionResult run_selection(const TissuePartition& partition,
                              const EmbeddingBundle& bundle,
                              const QuestionRecord& question,
                              const SelectorParams& params,
                              std::optional<std::size_t> cap);

// Hard-masked features plus the two pooled views. `pooled` is the plain mean
// of the selected rows. `ste_pooled` scales each selected row by its
// s_i * r_j(i) before averaging over the hard count; it is the value the
// training objective differentiates, so gate gradients flow to the soft
// probabilities while the mask and count stay fixed.
struct GatedFeatures {
    std::vector<double> gated;       // n x dim, m_i * x_i
    std::vector<double> pooled;      // dim
    std::vector<double> ste_pooled;  // dim
    std::size_t selected_count = 0;
};

GatedFeatures gated_features(const EmbeddingBundle& bundle,
                             const SelectionResult& result,
                             const TissuePartition& partition);

// JSON export: rates (null for empty groups), budgets, selected indices.
std::string selection_to_json(const SelectionResult& result,
                              const TissuePartition& partition,
                              const std::string& slide_id);

}  // namespace histoselect
