// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#include "histoselect/segmentation.hpp"

#include <algorithm>
#include <cmath>

#include "histoselect/error.hpp"
#include "histoselect/io_util.hpp"
#include "histoselect/mathutil.hpp"

namespace histoselect {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ValidationError("cosine_similarity: dimension mismatch (" +
                              std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + ")");
    }
    const double na = norm2(a);
    const double nb = norm2(b);
    if (na == 0.0 || nb == 0.0) {
        throw DegenerateInputError("cosine_similarity: zero-norm input vector");
    }
    const double c = dot(a, b) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

TissuePartition segment(const EmbeddingBundle& bundle, const PromptBank& prompts) {
    if (bundle.dim != prompts.dim) {
        throw ValidationError("segment: bundle dim " + std::to_string(bundle.dim) +
                              " != prompt dim " + std::to_string(prompts.dim));
    }
    const std::size_t n = bundle.n_patches;
    const std::size_t m = prompts.m_prompts;

    TissuePartition part;
    part.m_groups = m;
    part.dim = bundle.dim;
    part.labels.resize(n);
    part.group_indices.resize(m);
    part.group_sizes.assign(m, 0);
    part.prototypes.assign(m * bundle.dim, 0.0);

    for (std::size_t i = 0; i < n; ++i) {
        const auto x = bundle.patch(i);
        if (norm2(x) == 0.0) {
            throw DegenerateInputError("segment: patch " + std::to_string(i) +
                                       " has a zero-norm feature vector");
        }
        std::size_t best = 0;
        double best_sim = cosine_similarity(x, prompts.prompt(0));
        for (std::size_t j = 1; j < m; ++j) {
            const double sim = cosine_similarity(x, prompts.prompt(j));
            if (sim > best_sim) {  // exact tie keeps the lower prompt index
                best_sim = sim;
                best = j;
            }
        }
        part.labels[i] = best;
        part.group_indices[best].push_back(i);  // ascending: i is increasing
        ++part.group_sizes[best];
    }

    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t nj = part.group_sizes[j];
        if (nj == 0) {
            continue;  // empty group keeps its zero prototype row
        }
        double* proto = part.prototypes.data() + j * bundle.dim;
        for (std::size_t i : part.group_indices[j]) {
            const auto x = bundle.patch(i);
            for (std::size_t k = 0; k < bundle.dim; ++k) {
                proto[k] += x[k];
            }
        }
        for (std::size_t k = 0; k < bundle.dim; ++k) {
            proto[k] /= static_cast<double>(nj);
        }
    }
    return part;
}

std::vector<double> relevance_heatmap(const EmbeddingBundle& bundle,
                                      const QuestionRecord& question) {
    if (bundle.dim != question.embedding.size()) {
        throw ValidationError("relevance_heatmap: bundle dim " +
                              std::to_string(bundle.dim) + " != question dim " +
                              std::to_string(question.embedding.size()));
    }
    std::vector<double> heat(bundle.n_patches);
    for (std::size_t i = 0; i < bundle.n_patches; ++i) {
        heat[i] = cosine_similarity(bundle.patch(i), question.embedding);
    }
    return heat;
}

std::string labels_csv(const EmbeddingBundle& bundle,
                       const std::vector<std::size_t>& labels) {
    if (labels.size() != bundle.n_patches) {
        throw ValidationError("labels_csv: label count mismatch");
    }
    std::string out = "patch_index,row,col,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out += std::to_string(i);
        out += ',';
        out += std::to_string(bundle.coords[i].row);
        out += ',';
        out += std::to_string(bundle.coords[i].col);
        out += ',';
        out += std::to_string(labels[i]);
        out += '\n';
    }
    return out;
}

void write_labels_csv(const std::filesystem::path& path,
                      const EmbeddingBundle& bundle,
                      const std::vector<std::size_t>& labels) {
    write_file_bytes(path, labels_csv(bundle, labels));
}

}  // namespace histoselect
