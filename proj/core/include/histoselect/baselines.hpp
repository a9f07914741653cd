// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "histoselect/wsi_data.hpp"

namespace histoselect {

enum class StrategyId { random, diversity, similarity, learned };

StrategyId parse_strategy(const std::string& name);
std::string strategy_name(StrategyId id);

// Uniform k-subset without replacement (seeded Fisher-Yates prefix),
// returned sorted ascending.
std::vector<std::size_t> random_select(std::size_t n, std::size_t k,
                                       std::uint64_t seed);

// Greedy farthest-first in cosine distance, seeded at patch 0; ties go to
// the lower index. Question-agnostic diversity baseline.
std::vector<std::size_t> diversity_select(const EmbeddingBundle& bundle,
                                          std::size_t k);

// Top-k patches by cosine similarity to the question, ties to the lower
// index. The non-learnable pseudo-prior baseline.
std::vector<std::size_t> similarity_select(const EmbeddingBundle& bundle,
                                           const QuestionRecord& question,
                                           std::size_t k);

struct RetrievalScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Precision/recall/F1 of the selected set against the planted-relevant mask;
// empty selection scores zero precision, P + R == 0 scores zero F1.
RetrievalScore retrieval_f1(std::span<const std::size_t> selected,
                            const std::vector<bool>& relevant_mask);

}  // namespace histoselect
