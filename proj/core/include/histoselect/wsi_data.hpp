// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace histoselect {

struct GridCoord {
    std::int32_t row = 0;
    std::int32_t col = 0;

    friend bool operator==(const GridCoord&, const GridCoord&) = default;
};

// One slide reduced to its per-patch embedding matrix. Features are held as
// doubles in memory; the on-disk payload is float32 (see HSB1 below).
struct EmbeddingBundle {
    std::string slide_id;
    std::size_t n_patches = 0;
    std::size_t dim = 0;
    std::vector<double> features;   // n_patches x dim, row-major
    std::vector<GridCoord> coords;  // one per patch, pairwise distinct

    std::span<const double> patch(std::size_t i) const {
        return {features.data() + i * dim, dim};
    }

    void validate() const;  // throws ValidationError
};

// Text-derived tissue prompt embeddings; rows drive the segmentation argmax.
struct PromptBank {
    std::size_t m_prompts = 0;
    std::size_t dim = 0;
    std::vector<std::string> names;  // unique
    std::vector<double> embeddings;  // m_prompts x dim

    std::span<const double> prompt(std::size_t j) const {
        return {embeddings.data() + j * dim, dim};
    }

    void validate() const;
};

// A question embedded into the same space as the patches, with a one-token
// categorical answer.
struct QuestionRecord {
    std::vector<double> embedding;
    std::size_t answer_label = 0;
    std::size_t n_classes = 1;
    std::optional<std::string> text;

    void validate() const;
};

// Recipe for a planted-signal slide; replaces upstream encoders at desk scale.
struct SyntheticSpec {
    std::size_t grid_rows = 16;
    std::size_t grid_cols = 16;
    std::size_t m_tissues = 4;
    std::size_t dim = 512;
    std::size_t n_classes = 4;
    double noise_sigma = 0.3;
    std::size_t blob_count = 3;  // rectangles stamped per tissue
    double class_signal_scale = 1.0;
    std::uint64_t seed = 0;

    void validate() const;  // requires dim >= m_tissues + n_classes
};

struct GroundTruth {
    std::vector<std::size_t> true_labels;  // tissue index per patch
    std::vector<bool> relevant_mask;       // true_labels[i] == target_tissue
    std::size_t target_tissue = 0;
    std::size_t answer_label = 0;
};

struct SyntheticInstance {
    EmbeddingBundle bundle;
    PromptBank prompts;
    QuestionRecord question;
    GroundTruth truth;
};

struct SlideCase {
    EmbeddingBundle bundle;
    QuestionRecord question;
    GroundTruth truth;
};

// Slides generated from one spec share the prompt bank (one embedding basis).
struct Dataset {
    PromptBank prompts;
    std::vector<SlideCase> slides;
};

// ---------------------------------------------------------------------------
// HSB1 container, little-endian:
//   magic "HSB1" | u32 version=1 | u32 kind | u32 n | u32 dim | u32 m_or_c
// kind 0 (patch bundle):  slide_id [u32 len, bytes] | n x (i32 row, i32 col)
//                         | n x dim f32 row-major
// kind 1 (prompt bank):   m_or_c x ([u32 len, bytes] name) | m_or_c x dim f32
// kind 2 (question):      u32 answer_label | [u32 len, bytes] text
//                         | dim f32    (m_or_c carries the class count)
// ---------------------------------------------------------------------------

void save_bundle(const EmbeddingBundle& bundle, const std::filesystem::path& path);
EmbeddingBundle load_bundle(const std::filesystem::path& path);

void save_prompts(const PromptBank& prompts, const std::filesystem::path& path);
PromptBank load_prompts(const std::filesystem::path& path);

void save_question(const QuestionRecord& question, const std::filesystem::path& path);
QuestionRecord load_question(const std::filesystem::path& path);

// Deterministic in spec.seed; all emitted floats are float32-representable so
// a save/load round trip is the identity.
SyntheticInstance generate_synthetic(const SyntheticSpec& spec);

// `count` slides over a shared prompt basis; slide i is driven by a substream
// of spec.seed, so any prefix of a larger dataset is reproducible.
Dataset generate_dataset(const SyntheticSpec& spec, std::size_t count);

SyntheticSpec parse_synthetic_spec_json(const std::string& json_text);
std::string synthetic_spec_to_json(const SyntheticSpec& spec);

}  // namespace histoselect
