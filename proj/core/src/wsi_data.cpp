// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#include "histoselect/wsi_data.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "histoselect/error.hpp"
#include "histoselect/io_util.hpp"
#include "histoselect/mathutil.hpp"
#include "histoselect/rng.hpp"

namespace histoselect {

namespace {

constexpr char kMagic[4] = {'H', 'S', 'B', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kKindBundle = 0;
constexpr std::uint32_t kKindPrompts = 1;
constexpr std::uint32_t kKindQuestion = 2;

class ByteWriter {
public:
    void u32(std::uint32_t v) {
        char b[4] = {static_cast<char>(v & 0xff),
                     static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
        buf_.append(b, 4);
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }
    void raw(const char* data, std::size_t n) { buf_.append(data, n); }
    const std::string& bytes() const { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(const std::string& data, std::string origin)
        : data_(data), origin_(std::move(origin)) {}

    std::uint32_t u32() {
        need(4);
        const unsigned char* p =
            reinterpret_cast<const unsigned char*>(data_.data()) + pos_;
        pos_ += 4;
        return static_cast<std::uint32_t>(p[0]) |
               (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) |
               (static_cast<std::uint32_t>(p[3]) << 24);
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void expect_end() const {
        if (pos_ != data_.size()) {
            throw LengthError(origin_ + ": " +
                              std::to_string(data_.size() - pos_) +
                              " trailing bytes after payload");
        }
    }

private:
    void need(std::size_t n) {
        if (pos_ + n > data_.size()) {
            throw LengthError(origin_ + ": truncated payload (need " +
                              std::to_string(n) + " bytes at offset " +
                              std::to_string(pos_) + ")");
        }
    }

    const std::string& data_;
    std::string origin_;
    std::size_t pos_ = 0;
};

ByteReader open_kind(const std::string& data, const std::filesystem::path& path,
                     std::uint32_t expected_kind) {
    ByteReader r(data, path.string());
    if (data.size() < 4 || std::memcmp(data.data(), kMagic, 4) != 0) {
        throw FormatError(path.string() + ": bad magic, not an HSB1 file");
    }
    (void)r.u32();  // magic, validated above
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw FormatError(path.string() + ": unsupported version " +
                          std::to_string(version));
    }
    const std::uint32_t kind = r.u32();
    if (kind != expected_kind) {
        throw FormatError(path.string() + ": record kind " +
                          std::to_string(kind) + ", expected " +
                          std::to_string(expected_kind));
    }
    return r;
}

ByteWriter make_header(std::uint32_t kind, std::uint32_t n, std::uint32_t dim,
                       std::uint32_t m_or_c) {
    ByteWriter w;
    w.raw(kMagic, 4);
    w.u32(kVersion);
    w.u32(kind);
    w.u32(n);
    w.u32(dim);
    w.u32(m_or_c);
    return w;
}

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void check_u32_range(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) {
        throw ValidationError(std::string(what) + " exceeds u32 range");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Validation

void EmbeddingBundle::validate() const {
    if (features.size() != n_patches * dim) {
        throw ValidationError("bundle '" + slide_id + "': feature matrix is " +
                              std::to_string(features.size()) + " values, want " +
                              std::to_string(n_patches * dim));
    }
    if (coords.size() != n_patches) {
        throw ValidationError("bundle '" + slide_id + "': " +
                              std::to_string(coords.size()) + " coords for " +
                              std::to_string(n_patches) + " patches");
    }
    if (dim == 0) {
        throw ValidationError("bundle '" + slide_id + "': dim must be >= 1");
    }
    if (!all_finite(features)) {
        throw ValidationError("bundle '" + slide_id + "': non-finite feature value");
    }
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(coords.size());
    for (const GridCoord& c : coords) {
        if (c.row < 0 || c.col < 0) {
            throw ValidationError("bundle '" + slide_id + "': negative grid coordinate");
        }
        const std::uint64_t key =
            (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.row)) << 32) |
            static_cast<std::uint32_t>(c.col);
        if (!seen.insert(key).second) {
            throw ValidationError("bundle '" + slide_id + "': duplicate coord (" +
                                  std::to_string(c.row) + "," + std::to_string(c.col) + ")");
        }
    }
}

void PromptBank::validate() const {
    if (m_prompts == 0) {
        throw ValidationError("prompt bank must hold at least one prompt");
    }
    if (embeddings.size() != m_prompts * dim || names.size() != m_prompts) {
        throw ValidationError("prompt bank shape mismatch");
    }
    if (!all_finite(embeddings)) {
        throw ValidationError("prompt bank: non-finite embedding value");
    }
    std::unordered_set<std::string> seen;
    for (const std::string& name : names) {
        if (!seen.insert(name).second) {
            throw ValidationError("prompt bank: duplicate name '" + name + "'");
        }
    }
    for (std::size_t j = 0; j < m_prompts; ++j) {
        if (norm2(prompt(j)) == 0.0) {
            throw ValidationError("prompt bank: prompt " + std::to_string(j) +
                                  " is the zero vector");
        }
    }
}

void QuestionRecord::validate() const {
    if (embedding.empty()) {
        throw ValidationError("question embedding is empty");
    }
    if (!all_finite(embedding)) {
        throw ValidationError("question embedding has a non-finite value");
    }
    if (norm2(embedding) == 0.0) {
        throw ValidationError("question embedding is the zero vector");
    }
    if (answer_label >= n_classes) {
        throw ValidationError("answer_label " + std::to_string(answer_label) +
                              " out of range for " + std::to_string(n_classes) +
                              " classes");
    }
}

void SyntheticSpec::validate() const {
    if (grid_rows * grid_cols < 1) {
        throw ValidationError("synthetic grid must contain at least one cell");
    }
    if (m_tissues < 1 || n_classes < 1) {
        throw ValidationError("m_tissues and n_classes must be >= 1");
    }
    if (dim < m_tissues + n_classes) {
        throw ValidationError("dim must be >= m_tissues + n_classes to fit an "
                              "orthogonal basis (" + std::to_string(dim) + " < " +
                              std::to_string(m_tissues + n_classes) + ")");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw ValidationError("noise_sigma must be a non-negative real");
    }
    if (!(class_signal_scale > 0.0) || !std::isfinite(class_signal_scale)) {
        throw ValidationError("class_signal_scale must be a positive real");
    }
}

// ---------------------------------------------------------------------------
// HSB1 I/O

void save_bundle(const EmbeddingBundle& bundle, const std::filesystem::path& path) {
    bundle.validate();
    check_u32_range(bundle.n_patches, "n_patches");
    check_u32_range(bundle.dim, "dim");
    ByteWriter w = make_header(kKindBundle,
                               static_cast<std::uint32_t>(bundle.n_patches),
                               static_cast<std::uint32_t>(bundle.dim), 0);
    w.str(bundle.slide_id);
    for (const GridCoord& c : bundle.coords) {
        w.i32(c.row);
        w.i32(c.col);
    }
    for (double v : bundle.features) {
        w.f32(static_cast<float>(v));
    }
    write_file_bytes(path, w.bytes());
}

EmbeddingBundle load_bundle(const std::filesystem::path& path) {
    const std::string data = read_file_bytes(path);
    ByteReader r = open_kind(data, path, kKindBundle);
    EmbeddingBundle bundle;
    bundle.n_patches = r.u32();
    bundle.dim = r.u32();
    (void)r.u32();  // m_or_c, unused for bundles
    bundle.slide_id = r.str();
    bundle.coords.resize(bundle.n_patches);
    for (GridCoord& c : bundle.coords) {
        c.row = r.i32();
        c.col = r.i32();
    }
    bundle.features.resize(bundle.n_patches * bundle.dim);
    for (double& v : bundle.features) {
        v = static_cast<double>(r.f32());
    }
    r.expect_end();
    bundle.validate();
    return bundle;
}

void save_prompts(const PromptBank& prompts, const std::filesystem::path& path) {
    prompts.validate();
    check_u32_range(prompts.m_prompts, "m_prompts");
    check_u32_range(prompts.dim, "dim");
    ByteWriter w = make_header(kKindPrompts, 0,
                               static_cast<std::uint32_t>(prompts.dim),
                               static_cast<std::uint32_t>(prompts.m_prompts));
    for (const std::string& name : prompts.names) {
        w.str(name);
    }
    for (double v : prompts.embeddings) {
        w.f32(static_cast<float>(v));
    }
    write_file_bytes(path, w.bytes());
}

PromptBank load_prompts(const std::filesystem::path& path) {
    const std::string data = read_file_bytes(path);
    ByteReader r = open_kind(data, path, kKindPrompts);
    PromptBank prompts;
    (void)r.u32();  // n, unused for prompt banks
    prompts.dim = r.u32();
    prompts.m_prompts = r.u32();
    prompts.names.resize(prompts.m_prompts);
    for (std::string& name : prompts.names) {
        name = r.str();
    }
    prompts.embeddings.resize(prompts.m_prompts * prompts.dim);
    for (double& v : prompts.embeddings) {
        v = static_cast<double>(r.f32());
    }
    r.expect_end();
    prompts.validate();
    return prompts;
}

void save_question(const QuestionRecord& question, const std::filesystem::path& path) {
    question.validate();
    check_u32_range(question.embedding.size(), "dim");
    check_u32_range(question.n_classes, "n_classes");
    ByteWriter w = make_header(kKindQuestion, 0,
                               static_cast<std::uint32_t>(question.embedding.size()),
                               static_cast<std::uint32_t>(question.n_classes));
    w.u32(static_cast<std::uint32_t>(question.answer_label));
    w.str(question.text.value_or(""));
    for (double v : question.embedding) {
        w.f32(static_cast<float>(v));
    }
    write_file_bytes(path, w.bytes());
}

QuestionRecord load_question(const std::filesystem::path& path) {
    const std::string data = read_file_bytes(path);
    ByteReader r = open_kind(data, path, kKindQuestion);
    QuestionRecord q;
    (void)r.u32();  // n, unused for questions
    const std::uint32_t dim = r.u32();
    q.n_classes = r.u32();
    q.answer_label = r.u32();
    std::string text = r.str();
    if (!text.empty()) {
        q.text = std::move(text);
    }
    q.embedding.resize(dim);
    for (double& v : q.embedding) {
        v = static_cast<double>(r.f32());
    }
    r.expect_end();
    q.validate();
    return q;
}

// ---------------------------------------------------------------------------
// Synthetic generation

namespace {

// Gram-Schmidt over seeded gaussian draws; requires dim >= count.
std::vector<std::vector<double>> orthonormal_basis(std::size_t count,
                                                   std::size_t dim, Rng& rng) {
    std::vector<std::vector<double>> basis;
    basis.reserve(count);
    while (basis.size() < count) {
        std::vector<double> v(dim);
        for (double& x : v) {
            x = rng.next_normal();
        }
        for (const auto& u : basis) {
            const double proj = dot(v, u);
            for (std::size_t i = 0; i < dim; ++i) {
                v[i] -= proj * u[i];
            }
        }
        const double n = norm2(v);
        if (n < 1e-6) {
            continue;  // numerically dependent draw, retry
        }
        for (double& x : v) {
            x /= n;
        }
        basis.push_back(std::move(v));
    }
    return basis;
}

std::vector<std::size_t> stamp_layout(const SyntheticSpec& spec, Rng& rng) {
    const std::size_t rows = spec.grid_rows;
    const std::size_t cols = spec.grid_cols;
    std::vector<std::size_t> labels(rows * cols, 0);  // remainder is tissue 0
    for (std::size_t tissue = 0; tissue < spec.m_tissues; ++tissue) {
        for (std::size_t blob = 0; blob < spec.blob_count; ++blob) {
            const std::size_t r0 = rng.next_below(rows);
            const std::size_t c0 = rng.next_below(cols);
            const std::size_t h = 1 + rng.next_below(rows - r0);
            const std::size_t w = 1 + rng.next_below(cols - c0);
            for (std::size_t r = r0; r < r0 + h; ++r) {
                for (std::size_t c = c0; c < c0 + w; ++c) {
                    labels[r * cols + c] = tissue;  // later stamps overwrite
                }
            }
        }
    }
    return labels;
}

SlideCase make_slide(const SyntheticSpec& spec,
                     const std::vector<std::vector<double>>& basis,
                     Rng& rng, std::string slide_id) {
    const std::size_t d = spec.dim;
    const std::size_t n = spec.grid_rows * spec.grid_cols;

    SlideCase slide;
    GroundTruth& truth = slide.truth;
    truth.true_labels = stamp_layout(spec, rng);

    EmbeddingBundle& bundle = slide.bundle;
    bundle.slide_id = std::move(slide_id);
    bundle.n_patches = n;
    bundle.dim = d;
    bundle.features.resize(n * d);
    bundle.coords.resize(n);
    for (std::size_t r = 0; r < spec.grid_rows; ++r) {
        for (std::size_t c = 0; c < spec.grid_cols; ++c) {
            const std::size_t i = r * spec.grid_cols + c;
            bundle.coords[i] = {static_cast<std::int32_t>(r),
                                static_cast<std::int32_t>(c)};
            const auto& proto = basis[truth.true_labels[i]];
            double* row = bundle.features.data() + i * d;
            for (std::size_t k = 0; k < d; ++k) {
                row[k] = proto[k] + spec.noise_sigma * rng.next_normal();
            }
        }
    }

    // Plant the answer signal on one tissue; re-draw if the stamped layout
    // left the drawn tissue without patches.
    std::vector<std::size_t> tissue_counts(spec.m_tissues, 0);
    for (std::size_t label : truth.true_labels) {
        ++tissue_counts[label];
    }
    truth.answer_label = rng.next_below(spec.n_classes);
    truth.target_tissue = rng.next_below(spec.m_tissues);
    while (tissue_counts[truth.target_tissue] == 0) {
        truth.target_tissue = rng.next_below(spec.m_tissues);
    }
    const auto& class_dir = basis[spec.m_tissues + truth.answer_label];
    truth.relevant_mask.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        truth.relevant_mask[i] = truth.true_labels[i] == truth.target_tissue;
        if (truth.relevant_mask[i]) {
            double* row = bundle.features.data() + i * d;
            for (std::size_t k = 0; k < d; ++k) {
                row[k] += spec.class_signal_scale * class_dir[k];
            }
        }
    }
    for (double& v : bundle.features) {
        v = quantize_f32(v);
    }

    QuestionRecord& q = slide.question;
    q.n_classes = spec.n_classes;
    q.answer_label = truth.answer_label;
    q.embedding.resize(d);
    const auto& target_proto = basis[truth.target_tissue];
    for (std::size_t k = 0; k < d; ++k) {
        q.embedding[k] = quantize_f32(target_proto[k] +
                                      0.5 * spec.noise_sigma * rng.next_normal());
    }
    return slide;
}

PromptBank prompts_from_basis(const SyntheticSpec& spec,
                              const std::vector<std::vector<double>>& basis) {
    PromptBank prompts;
    prompts.m_prompts = spec.m_tissues;
    prompts.dim = spec.dim;
    prompts.names.reserve(spec.m_tissues);
    prompts.embeddings.reserve(spec.m_tissues * spec.dim);
    for (std::size_t j = 0; j < spec.m_tissues; ++j) {
        char name[32];
        std::snprintf(name, sizeof(name), "tissue_%02zu", j);
        prompts.names.emplace_back(name);
        for (std::size_t k = 0; k < spec.dim; ++k) {
            prompts.embeddings.push_back(quantize_f32(basis[j][k]));
        }
    }
    return prompts;
}

}  // namespace

SyntheticInstance generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const auto basis = orthonormal_basis(spec.m_tissues + spec.n_classes,
                                         spec.dim, rng);
    SyntheticInstance out;
    out.prompts = prompts_from_basis(spec, basis);
    SlideCase slide = make_slide(spec, basis, rng,
                                 "syn-" + std::to_string(spec.seed));
    out.bundle = std::move(slide.bundle);
    out.question = std::move(slide.question);
    out.truth = std::move(slide.truth);
    return out;
}

Dataset generate_dataset(const SyntheticSpec& spec, std::size_t count) {
    spec.validate();
    Rng basis_rng(Rng::derive_seed(spec.seed, 0));
    const auto basis = orthonormal_basis(spec.m_tissues + spec.n_classes,
                                         spec.dim, basis_rng);
    Dataset ds;
    ds.prompts = prompts_from_basis(spec, basis);
    ds.slides.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng slide_rng(Rng::derive_seed(spec.seed, 1 + i));
        char id[32];
        std::snprintf(id, sizeof(id), "syn-%04zu", i);
        ds.slides.push_back(make_slide(spec, basis, slide_rng, id));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Spec JSON

SyntheticSpec parse_synthetic_spec_json(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("synthetic spec: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw FormatError("synthetic spec: top-level JSON value must be an object");
    }
    SyntheticSpec spec;
    static const char* known[] = {"grid_rows", "grid_cols", "m_tissues",
                                  "dim",       "n_classes", "noise_sigma",
                                  "blob_count", "class_signal_scale", "seed"};
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        bool ok = false;
        for (const char* k : known) {
            ok = ok || key == k;
        }
        if (!ok) {
            throw ValidationError("synthetic spec: unknown field '" + key + "'");
        }
    }
    try {
        spec.grid_rows = doc.value("grid_rows", spec.grid_rows);
        spec.grid_cols = doc.value("grid_cols", spec.grid_cols);
        spec.m_tissues = doc.value("m_tissues", spec.m_tissues);
        spec.dim = doc.value("dim", spec.dim);
        spec.n_classes = doc.value("n_classes", spec.n_classes);
        spec.noise_sigma = doc.value("noise_sigma", spec.noise_sigma);
        spec.blob_count = doc.value("blob_count", spec.blob_count);
        spec.class_signal_scale = doc.value("class_signal_scale", spec.class_signal_scale);
        spec.seed = doc.value("seed", spec.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("synthetic spec: bad field type: ") + e.what());
    }
    spec.validate();
    return spec;
}

std::string synthetic_spec_to_json(const SyntheticSpec& spec) {
    nlohmann::json doc{
        {"grid_rows", spec.grid_rows},
        {"grid_cols", spec.grid_cols},
        {"m_tissues", spec.m_tissues},
        {"dim", spec.dim},
        {"n_classes", spec.n_classes},
        {"noise_sigma", spec.noise_sigma},
        {"blob_count", spec.blob_count},
        {"class_signal_scale", spec.class_signal_scale},
        {"seed", spec.seed},
    };
    return doc.dump(2) + "\n";
}

}  // namespace histoselect
