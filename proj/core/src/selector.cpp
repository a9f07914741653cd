// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#include "histoselect/selector.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "histoselect/error.hpp"
#include "histoselect/mathutil.hpp"

namespace histoselect {

namespace {

void check_layer(const LinearLayer& layer, std::size_t in, std::size_t out,
                 const char* name) {
    if (layer.in_dim != in || layer.out_dim != out ||
        layer.w.size() != in * out || layer.b.size() != out) {
        throw ValidationError(std::string("params: ") + name + " has shape " +
                              std::to_string(layer.out_dim) + "x" +
                              std::to_string(layer.in_dim) + ", want " +
                              std::to_string(out) + "x" + std::to_string(in));
    }
    if (!all_finite(layer.w) || !all_finite(layer.b)) {
        throw ValidationError(std::string("params: ") + name +
                              " contains a non-finite value");
    }
}

}  // namespace

double two_layer_sigmoid(const TwoLayerNet& net, std::span<const double> input,
                         std::span<double> preacts) {
    double out = net.out.b[0];
    for (std::size_t h = 0; h < net.hidden.out_dim; ++h) {
        double a = net.hidden.b[h];
        a += dot(net.hidden.row(h), input);
        if (!preacts.empty()) {
            preacts[h] = a;
        }
        if (a > 0.0) {
            out += net.out.w[h] * a;
        }
    }
    return sigmoid(out);
}

void SelectorParams::validate() const {
    if (dim == 0 || hidden_dim == 0 || n_classes == 0) {
        throw ValidationError("params: dim, hidden_dim, n_classes must be >= 1");
    }
    check_layer(group_net.hidden, 2 * dim, hidden_dim, "group_net.hidden");
    check_layer(group_net.out, hidden_dim, 1, "group_net.out");
    check_layer(patch_net.hidden, 2 * dim, hidden_dim, "patch_net.hidden");
    check_layer(patch_net.out, hidden_dim, 1, "patch_net.out");
    check_layer(proxy_head, 2 * dim, n_classes, "proxy_head");
}

std::vector<double> group_rates(const TissuePartition& partition,
                                const QuestionRecord& question,
                                const SelectorParams& params) {
    params.validate();
    if (partition.dim != params.dim || question.embedding.size() != params.dim) {
        throw ValidationError("group_rates: dimension mismatch");
    }
    std::vector<double> input(2 * params.dim);
    std::copy(question.embedding.begin(), question.embedding.end(),
              input.begin() + static_cast<std::ptrdiff_t>(params.dim));
    std::vector<double> rates(partition.m_groups, 0.0);
    for (std::size_t j = 0; j < partition.m_groups; ++j) {
        if (!partition.group_valid(j)) {
            continue;
        }
        const auto proto = partition.prototype(j);
        std::copy(proto.begin(), proto.end(), input.begin());
        rates[j] = two_layer_sigmoid(params.group_net, input);
    }
    return rates;
}

std::vector<double> patch_scores(const EmbeddingBundle& bundle,
                                 const QuestionRecord& question,
                                 const SelectorParams& params) {
    params.validate();
    if (bundle.dim != params.dim || question.embedding.size() != params.dim) {
        throw ValidationError("patch_scores: dimension mismatch");
    }
    std::vector<double> input(2 * params.dim);
    std::copy(question.embedding.begin(), question.embedding.end(),
              input.begin() + static_cast<std::ptrdiff_t>(params.dim));
    std::vector<double> scores(bundle.n_patches);
    for (std::size_t i = 0; i < bundle.n_patches; ++i) {
        const auto x = bundle.patch(i);
        std::copy(x.begin(), x.end(), input.begin());
        scores[i] = two_layer_sigmoid(params.patch_net, input);
    }
    return scores;
}

std::vector<std::size_t> group_budgets(const std::vector<double>& rates,
                                       const std::vector<std::size_t>& group_sizes) {
    if (rates.size() != group_sizes.size()) {
        throw ValidationError("group_budgets: rate/size count mismatch");
    }
    std::vector<std::size_t> budgets(rates.size(), 0);
    for (std::size_t j = 0; j < rates.size(); ++j) {
        const std::size_t nj = group_sizes[j];
        if (nj == 0) {
            continue;
        }
        if (!std::isfinite(rates[j])) {
            throw ValidationError("group_budgets: non-finite rate for group " +
                                  std::to_string(j));
        }
        const double raw = std::ceil(rates[j] * static_cast<double>(nj));
        auto k = static_cast<std::size_t>(std::max(raw, 0.0));
        budgets[j] = std::clamp<std::size_t>(k, 1, nj);
    }
    return budgets;
}

SelectionResult select(const TissuePartition& partition,
                       const std::vector<double>& scores,
                       const std::vector<std::size_t>& budgets,
                       std::optional<std::size_t> cap) {
    const std::size_t n = partition.labels.size();
    const std::size_t m = partition.m_groups;
    if (scores.size() != n || budgets.size() != m) {
        throw ValidationError("select: scores/budgets shape mismatch");
    }
    std::size_t demand = 0;
    for (std::size_t j = 0; j < m; ++j) {
        if (budgets[j] > partition.group_sizes[j]) {
            throw ValidationError("select: budget " + std::to_string(budgets[j]) +
                                  " exceeds group " + std::to_string(j) + " size " +
                                  std::to_string(partition.group_sizes[j]));
        }
        demand += budgets[j];
    }
    if (cap && *cap == 0 && demand > 0) {
        throw ValidationError("select: cap 0 with nonempty selection demand");
    }

    // Per-group top-k by score, ties to the lower patch index.
    std::vector<std::size_t> pool;
    pool.reserve(demand);
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < m; ++j) {
        if (budgets[j] == 0) {
            continue;
        }
        order = partition.group_indices[j];
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) {
                             if (scores[a] != scores[b]) {
                                 return scores[a] > scores[b];
                             }
                             return a < b;
                         });
        pool.insert(pool.end(), order.begin(),
                    order.begin() + static_cast<std::ptrdiff_t>(budgets[j]));
    }

    // Optional global cap: keep the cap highest-score patches in the union.
    if (cap && pool.size() > *cap) {
        std::stable_sort(pool.begin(), pool.end(),
                         [&](std::size_t a, std::size_t b) {
                             if (scores[a] != scores[b]) {
                                 return scores[a] > scores[b];
                             }
                             return a < b;
                         });
        pool.resize(*cap);
    }
    std::sort(pool.begin(), pool.end());

    SelectionResult result;
    result.scores = scores;
    result.budgets = budgets;
    result.hard_mask.assign(n, false);
    for (std::size_t i : pool) {
        result.hard_mask[i] = true;
    }
    result.selected = std::move(pool);
    return result;
}

SelectionResult run_selection(const TissuePartition& partition,
                              const EmbeddingBundle& bundle,
                              const QuestionRecord& question,
                              const SelectorParams& params,
                              std::optional<std::size_t> cap) {
    const std::vector<double> rates = group_rates(partition, question, params);
    const std::vector<double> scores = patch_scores(bundle, question, params);
    const std::vector<std::size_t> budgets =
        group_budgets(rates, partition.group_sizes);
    SelectionResult result = select(partition, scores, budgets, cap);
    result.rates = rates;
    return result;
}

GatedFeatures gated_features(const EmbeddingBundle& bundle,
                             const SelectionResult& result,
                             const TissuePartition& partition) {
    const std::size_t n = bundle.n_patches;
    const std::size_t d = bundle.dim;
    if (result.hard_mask.size() != n || partition.labels.size() != n) {
        throw ValidationError("gated_features: result/partition mismatch");
    }
    if (!result.selected.empty() &&
        (result.rates.size() != partition.m_groups || result.scores.size() != n)) {
        throw ValidationError("gated_features: result lacks rates or scores");
    }
    GatedFeatures out;
    out.gated.assign(n * d, 0.0);
    out.pooled.assign(d, 0.0);
    out.ste_pooled.assign(d, 0.0);
    for (std::size_t i : result.selected) {
        const auto x = bundle.patch(i);
        const double soft = result.scores[i] * result.rates[partition.labels[i]];
        double* row = out.gated.data() + i * d;
        for (std::size_t k = 0; k < d; ++k) {
            row[k] = x[k];
            out.pooled[k] += x[k];
            out.ste_pooled[k] += soft * x[k];
        }
    }
    out.selected_count = result.selected.size();
    const double denom = static_cast<double>(std::max<std::size_t>(1, out.selected_count));
    for (std::size_t k = 0; k < d; ++k) {
        out.pooled[k] /= denom;
        out.ste_pooled[k] /= denom;
    }
    return out;
}

std::string selection_to_json(const SelectionResult& result,
                              const TissuePartition& partition,
                              const std::string& slide_id) {
    nlohmann::json doc;
    doc["slide_id"] = slide_id;
    doc["n_patches"] = result.hard_mask.size();
    nlohmann::json rates = nlohmann::json::array();
    for (std::size_t j = 0; j < result.rates.size(); ++j) {
        if (partition.group_valid(j)) {
            rates.push_back(result.rates[j]);
        } else {
            rates.push_back(nullptr);
        }
    }
    doc["rates"] = std::move(rates);
    doc["budgets"] = result.budgets;
    doc["selected"] = result.selected;
    return doc.dump(2) + "\n";
}

}  // namespace histoselect
