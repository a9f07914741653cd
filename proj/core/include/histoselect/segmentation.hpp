// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "histoselect/wsi_data.hpp"

namespace histoselect {

// Patch-to-tissue assignment plus per-group mean prototypes. Empty groups
// (group_sizes[j] == 0) carry an all-zero prototype row and must be skipped
// by downstream consumers; group_valid() is the check.
struct TissuePartition {
    std::size_t m_groups = 0;
    std::size_t dim = 0;
    std::vector<std::size_t> labels;                      // per patch, in [0, m_groups)
    std::vector<std::vector<std::size_t>> group_indices;  // sorted ascending
    std::vector<std::size_t> group_sizes;
    std::vector<double> prototypes;                       // m_groups x dim

    bool group_valid(std::size_t j) const { return group_sizes[j] > 0; }
    std::span<const double> prototype(std::size_t j) const {
        return {prototypes.data() + j * dim, dim};
    }
};

// a.b / (|a||b|), clamped into [-1, 1]. Throws DegenerateInputError on a
// zero-norm argument.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Assigns each patch to the prompt with the highest cosine similarity; exact
// 64-bit ties go to the lower prompt index.
TissuePartition segment(const EmbeddingBundle& bundle, const PromptBank& prompts);

// Per-patch cosine similarity against the question embedding.
std::vector<double> relevance_heatmap(const EmbeddingBundle& bundle,
                                      const QuestionRecord& question);

// CSV export: header "patch_index,row,col,label", one row per patch.
std::string labels_csv(const EmbeddingBundle& bundle,
                       const std::vector<std::size_t>& labels);
void write_labels_csv(const std::filesystem::path& path,
                      const EmbeddingBundle& bundle,
                      const std::vector<std::size_t>& labels);

}  // namespace histoselect
