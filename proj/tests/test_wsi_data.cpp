// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "histoselect/io_util.hpp"
#include "histoselect/segmentation.hpp"
#include "histoselect/wsi_data.hpp"

using namespace histoselect;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "histoselect_wsi_test";
    fs::create_directories(dir);
    return dir;
}

EmbeddingBundle small_bundle() {
    EmbeddingBundle b;
    b.slide_id = "slide-a";
    b.n_patches = 3;
    b.dim = 2;
    b.features = {1.0, 0.0, 0.0, 1.0, 0.5, 0.5};
    b.coords = {{0, 0}, {0, 1}, {1, 0}};
    return b;
}

}  // namespace

TEST_CASE("empty bundle serializes to the 28-byte header") {
    EmbeddingBundle b;
    b.n_patches = 0;
    b.dim = 8;
    const fs::path path = temp_dir() / "empty.hsb";
    save_bundle(b, path);
    CHECK(fs::file_size(path) == 28);
    const EmbeddingBundle back = load_bundle(path);
    CHECK(back.n_patches == 0);
    CHECK(back.dim == 8);
    CHECK(back.slide_id.empty());
}

TEST_CASE("bundle round trip is the identity and byte-deterministic") {
    const EmbeddingBundle b = small_bundle();
    const fs::path p1 = temp_dir() / "a1.hsb";
    const fs::path p2 = temp_dir() / "a2.hsb";
    save_bundle(b, p1);
    save_bundle(b, p2);
    CHECK(read_file_bytes(p1) == read_file_bytes(p2));

    const EmbeddingBundle back = load_bundle(p1);
    CHECK(back.slide_id == b.slide_id);
    CHECK(back.n_patches == b.n_patches);
    CHECK(back.dim == b.dim);
    CHECK(back.features == b.features);
    CHECK(back.coords == b.coords);
}

TEST_CASE("loader rejects bad magic, truncation, and trailing bytes") {
    const fs::path good = temp_dir() / "good.hsb";
    save_bundle(small_bundle(), good);
    std::string bytes = read_file_bytes(good);

    std::string bad_magic = bytes;
    bad_magic.replace(0, 4, "XXXX");
    const fs::path bm = temp_dir() / "bad_magic.hsb";
    write_file_bytes(bm, bad_magic);
    CHECK_THROWS_AS(load_bundle(bm), FormatError);

    // declare one more patch than the payload carries
    std::string short_payload = bytes;
    short_payload[12] = 4;  // n_patches u32 at offset 12
    const fs::path sp = temp_dir() / "short.hsb";
    write_file_bytes(sp, short_payload);
    CHECK_THROWS_AS(load_bundle(sp), LengthError);

    std::string trailing = bytes + "zz";
    const fs::path tr = temp_dir() / "trailing.hsb";
    write_file_bytes(tr, trailing);
    CHECK_THROWS_AS(load_bundle(tr), LengthError);
}

TEST_CASE("loader rejects non-finite features") {
    EmbeddingBundle b = small_bundle();
    const fs::path path = temp_dir() / "inf.hsb";
    save_bundle(b, path);
    std::string bytes = read_file_bytes(path);
    // overwrite the first f32 feature (offset: 24 header + 4+7 slide_id + 24 coords)
    const std::size_t feature_offset = 24 + 4 + b.slide_id.size() + b.n_patches * 8;
    bytes[feature_offset + 0] = 0x00;
    bytes[feature_offset + 1] = 0x00;
    bytes[feature_offset + 2] = char(0x80);
    bytes[feature_offset + 3] = 0x7f;  // +inf
    write_file_bytes(path, bytes);
    CHECK_THROWS_AS(load_bundle(path), ValidationError);
}

TEST_CASE("bundle validation notices duplicate coords") {
    EmbeddingBundle b = small_bundle();
    b.coords[2] = b.coords[0];
    CHECK_THROWS_AS(b.validate(), ValidationError);
}

TEST_CASE("prompt bank and question round trips") {
    PromptBank bank;
    bank.m_prompts = 2;
    bank.dim = 3;
    bank.names = {"tumor", "stroma"};
    bank.embeddings = {1, 0, 0, 0, 1, 0};
    const fs::path bp = temp_dir() / "bank.hsb";
    save_prompts(bank, bp);
    const PromptBank bank_back = load_prompts(bp);
    CHECK(bank_back.names == bank.names);
    CHECK(bank_back.embeddings == bank.embeddings);

    QuestionRecord q;
    q.embedding = {0.25, -0.5, 1.0};
    q.answer_label = 2;
    q.n_classes = 4;
    q.text = "what tissue dominates?";
    const fs::path qp = temp_dir() / "q.hsb";
    save_question(q, qp);
    const QuestionRecord q_back = load_question(qp);
    CHECK(q_back.embedding == q.embedding);
    CHECK(q_back.answer_label == 2);
    CHECK(q_back.n_classes == 4);
    CHECK(q_back.text == q.text);
}

TEST_CASE("generate_synthetic is a pure function of the spec") {
    SyntheticSpec spec;
    spec.grid_rows = 6;
    spec.grid_cols = 6;
    spec.m_tissues = 3;
    spec.dim = 8;
    spec.n_classes = 2;
    spec.noise_sigma = 0.2;
    spec.blob_count = 2;
    spec.seed = 17;

    const SyntheticInstance a = generate_synthetic(spec);
    const SyntheticInstance b = generate_synthetic(spec);
    CHECK(a.bundle.features == b.bundle.features);
    CHECK(a.question.embedding == b.question.embedding);
    CHECK(a.truth.true_labels == b.truth.true_labels);
    CHECK(a.truth.target_tissue == b.truth.target_tissue);
    CHECK(a.truth.answer_label == b.truth.answer_label);

    // relevant_mask is exactly the target-tissue indicator
    for (std::size_t i = 0; i < a.bundle.n_patches; ++i) {
        CHECK(a.truth.relevant_mask[i] ==
              (a.truth.true_labels[i] == a.truth.target_tissue));
    }

    // saved output round-trips exactly (features are f32-quantized)
    const fs::path path = temp_dir() / "syn.hsb";
    save_bundle(a.bundle, path);
    const EmbeddingBundle back = load_bundle(path);
    CHECK(back.features == a.bundle.features);
}

TEST_CASE("noiseless synthetic segments to the true labels") {
    SyntheticSpec spec;
    spec.grid_rows = 8;
    spec.grid_cols = 8;
    spec.m_tissues = 4;
    spec.dim = 12;
    spec.n_classes = 3;
    spec.noise_sigma = 0.0;
    spec.blob_count = 2;
    spec.seed = 5;
    const SyntheticInstance inst = generate_synthetic(spec);
    const TissuePartition part = segment(inst.bundle, inst.prompts);
    CHECK(part.labels == inst.truth.true_labels);
}

TEST_CASE("noisy synthetic stays segmentable at sigma 0.3") {
    SyntheticSpec spec;
    spec.grid_rows = 16;
    spec.grid_cols = 16;
    spec.m_tissues = 4;
    spec.dim = 16;
    spec.n_classes = 4;
    spec.noise_sigma = 0.3;
    spec.blob_count = 2;

    double accuracy_sum = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        spec.seed = seed;
        const SyntheticInstance inst = generate_synthetic(spec);
        const TissuePartition part = segment(inst.bundle, inst.prompts);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < inst.bundle.n_patches; ++i) {
            hits += part.labels[i] == inst.truth.true_labels[i] ? 1 : 0;
        }
        accuracy_sum += static_cast<double>(hits) /
                        static_cast<double>(inst.bundle.n_patches);
    }
    CHECK(accuracy_sum / 100.0 >= 0.95);
}

TEST_CASE("generate_dataset shares the prompt bank across slides") {
    SyntheticSpec spec;
    spec.grid_rows = 4;
    spec.grid_cols = 4;
    spec.m_tissues = 2;
    spec.dim = 6;
    spec.n_classes = 2;
    spec.seed = 3;
    const Dataset ds = generate_dataset(spec, 3);
    CHECK(ds.slides.size() == 3);
    CHECK(ds.prompts.m_prompts == 2);
    // distinct slides get distinct noise draws
    CHECK(ds.slides[0].bundle.features != ds.slides[1].bundle.features);
    // prefix stability: regenerating fewer slides yields the same prefix
    const Dataset ds2 = generate_dataset(spec, 2);
    CHECK(ds2.slides[0].bundle.features == ds.slides[0].bundle.features);
    CHECK(ds2.slides[1].bundle.features == ds.slides[1].bundle.features);
}

TEST_CASE("spec json round trip and unknown-field rejection") {
    SyntheticSpec spec;
    spec.dim = 16;
    spec.m_tissues = 4;
    spec.n_classes = 4;
    spec.seed = 11;
    const SyntheticSpec back = parse_synthetic_spec_json(synthetic_spec_to_json(spec));
    CHECK(back.dim == spec.dim);
    CHECK(back.seed == spec.seed);
    CHECK_THROWS_AS(parse_synthetic_spec_json(R"({"grid_rowz": 4})"), ValidationError);
    CHECK_THROWS_AS(parse_synthetic_spec_json("not json"), FormatError);
    // d < M + C violates the orthogonality requirement
    CHECK_THROWS_AS(parse_synthetic_spec_json(
                        R"({"dim": 4, "m_tissues": 3, "n_classes": 3})"),
                    ValidationError);
}
