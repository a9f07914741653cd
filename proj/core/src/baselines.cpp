// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#include "histoselect/baselines.hpp"

#include <algorithm>
#include <numeric>

#include "histoselect/error.hpp"
#include "histoselect/rng.hpp"
#include "histoselect/segmentation.hpp"

namespace histoselect {

StrategyId parse_strategy(const std::string& name) {
    if (name == "random") return StrategyId::random;
    if (name == "diversity") return StrategyId::diversity;
    if (name == "similarity") return StrategyId::similarity;
    if (name == "learned") return StrategyId::learned;
    throw ValidationError("unknown strategy '" + name +
                          "' (want random|diversity|similarity|learned)");
}

std::string strategy_name(StrategyId id) {
    switch (id) {
        case StrategyId::random: return "random";
        case StrategyId::diversity: return "diversity";
        case StrategyId::similarity: return "similarity";
        case StrategyId::learned: return "learned";
    }
    throw ValidationError("invalid strategy id");
}

std::vector<std::size_t> random_select(std::size_t n, std::size_t k,
                                       std::uint64_t seed) {
    if (k > n) {
        throw ValidationError("random_select: k " + std::to_string(k) +
                              " > n " + std::to_string(n));
    }
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.next_below(n - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::vector<std::size_t> diversity_select(const EmbeddingBundle& bundle,
                                          std::size_t k) {
    const std::size_t n = bundle.n_patches;
    if (n == 0) {
        throw ValidationError("diversity_select: empty bundle");
    }
    if (k > n) {
        throw ValidationError("diversity_select: k " + std::to_string(k) +
                              " > n " + std::to_string(n));
    }
    std::vector<std::size_t> chosen;
    if (k == 0) {
        return chosen;
    }
    chosen.reserve(k);
    chosen.push_back(0);
    // min cosine distance from each candidate to the chosen set
    std::vector<double> min_dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        min_dist[i] = 1.0 - cosine_similarity(bundle.patch(i), bundle.patch(0));
    }
    std::vector<bool> used(n, false);
    used[0] = true;
    while (chosen.size() < k) {
        std::size_t best = n;
        double best_dist = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!used[i] && min_dist[i] > best_dist) {
                best_dist = min_dist[i];
                best = i;
            }
        }
        used[best] = true;
        chosen.push_back(best);
        for (std::size_t i = 0; i < n; ++i) {
            if (!used[i]) {
                const double d =
                    1.0 - cosine_similarity(bundle.patch(i), bundle.patch(best));
                min_dist[i] = std::min(min_dist[i], d);
            }
        }
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

std::vector<std::size_t> similarity_select(const EmbeddingBundle& bundle,
                                           const QuestionRecord& question,
                                           std::size_t k) {
    const std::size_t n = bundle.n_patches;
    if (k > n) {
        throw ValidationError("similarity_select: k " + std::to_string(k) +
                              " > n " + std::to_string(n));
    }
    std::vector<double> sims = relevance_heatmap(bundle, question);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                         if (sims[a] != sims[b]) {
                             return sims[a] > sims[b];
                         }
                         return a < b;
                     });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

RetrievalScore retrieval_f1(std::span<const std::size_t> selected,
                            const std::vector<bool>& relevant_mask) {
    std::size_t relevant_total = 0;
    for (bool r : relevant_mask) {
        relevant_total += r ? 1 : 0;
    }
    std::size_t true_positive = 0;
    for (std::size_t i : selected) {
        if (i >= relevant_mask.size()) {
            throw ValidationError("retrieval_f1: index " + std::to_string(i) +
                                  " out of range");
        }
        true_positive += relevant_mask[i] ? 1 : 0;
    }
    RetrievalScore score;
    score.precision = selected.empty()
                          ? 0.0
                          : static_cast<double>(true_positive) /
                                static_cast<double>(selected.size());
    score.recall = relevant_total == 0
                       ? 0.0
                       : static_cast<double>(true_positive) /
                             static_cast<double>(relevant_total);
    const double pr = score.precision + score.recall;
    score.f1 = pr == 0.0 ? 0.0 : 2.0 * score.precision * score.recall / pr;
    return score;
}

}  // namespace histoselect
