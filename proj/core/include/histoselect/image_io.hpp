// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "histoselect/wsi_data.hpp"

namespace histoselect {

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major
};

struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel
};

// Fixed tissue palette; label j renders as color j % 13. Grid cells with no
// patch render black.
constexpr std::size_t kPaletteSize = 13;
extern const std::array<std::array<std::uint8_t, 3>, kPaletteSize> kTissuePalette;

// Uncompressed binary netpbm encodings.
std::string encode_pgm(const GrayImage& image);
std::string encode_ppm(const RgbImage& image);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

// Tissue-label mask over the bundle's coordinate grid.
RgbImage render_label_mask(const EmbeddingBundle& bundle,
                           const std::vector<std::size_t>& labels);

// Cosine heatmap, value v in [-1, 1] mapped to round(255 * (v + 1) / 2).
GrayImage render_heatmap(const EmbeddingBundle& bundle,
                         const std::vector<double>& values);

// Selection mask: selected patches 255, unselected 0, empty cells 0.
GrayImage render_selection_mask(const EmbeddingBundle& bundle,
                                const std::vector<bool>& mask);

}  // namespace histoselect
