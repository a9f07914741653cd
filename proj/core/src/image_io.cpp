// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#include "histoselect/image_io.hpp"

#include <algorithm>
#include <cmath>

#include "histoselect/error.hpp"
#include "histoselect/io_util.hpp"

namespace histoselect {

const std::array<std::array<std::uint8_t, 3>, kPaletteSize> kTissuePalette = {{
    {230, 25, 75},    // red
    {60, 180, 75},    // green
    {255, 225, 25},   // yellow
    {0, 130, 200},    // blue
    {245, 130, 48},   // orange
    {145, 30, 180},   // purple
    {70, 240, 240},   // cyan
    {240, 50, 230},   // magenta
    {210, 245, 60},   // lime
    {250, 190, 212},  // pink
    {0, 128, 128},    // teal
    {220, 190, 255},  // lavender
    {170, 110, 40},   // brown
}};

namespace {

std::pair<std::size_t, std::size_t> grid_extent(const EmbeddingBundle& bundle) {
    std::int32_t max_row = -1;
    std::int32_t max_col = -1;
    for (const GridCoord& c : bundle.coords) {
        max_row = std::max(max_row, c.row);
        max_col = std::max(max_col, c.col);
    }
    return {static_cast<std::size_t>(max_col + 1),
            static_cast<std::size_t>(max_row + 1)};  // width, height
}

}  // namespace

std::string encode_pgm(const GrayImage& image) {
    if (image.pixels.size() != image.width * image.height) {
        throw ValidationError("encode_pgm: pixel buffer size mismatch");
    }
    std::string out = "P5\n" + std::to_string(image.width) + " " +
                      std::to_string(image.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(image.pixels.data()),
               image.pixels.size());
    return out;
}

std::string encode_ppm(const RgbImage& image) {
    if (image.pixels.size() != image.width * image.height * 3) {
        throw ValidationError("encode_ppm: pixel buffer size mismatch");
    }
    std::string out = "P6\n" + std::to_string(image.width) + " " +
                      std::to_string(image.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(image.pixels.data()),
               image.pixels.size());
    return out;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    write_file_bytes(path, encode_pgm(image));
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
    write_file_bytes(path, encode_ppm(image));
}

RgbImage render_label_mask(const EmbeddingBundle& bundle,
                           const std::vector<std::size_t>& labels) {
    if (labels.size() != bundle.n_patches) {
        throw ValidationError("render_label_mask: label count mismatch");
    }
    RgbImage image;
    if (bundle.n_patches == 0) {
        return image;
    }
    std::tie(image.width, image.height) = grid_extent(bundle);
    image.pixels.assign(image.width * image.height * 3, 0);
    for (std::size_t i = 0; i < bundle.n_patches; ++i) {
        const GridCoord& c = bundle.coords[i];
        const auto& color = kTissuePalette[labels[i] % kPaletteSize];
        std::uint8_t* px = image.pixels.data() +
                           3 * (static_cast<std::size_t>(c.row) * image.width +
                                static_cast<std::size_t>(c.col));
        px[0] = color[0];
        px[1] = color[1];
        px[2] = color[2];
    }
    return image;
}

GrayImage render_heatmap(const EmbeddingBundle& bundle,
                         const std::vector<double>& values) {
    if (values.size() != bundle.n_patches) {
        throw ValidationError("render_heatmap: value count mismatch");
    }
    GrayImage image;
    if (bundle.n_patches == 0) {
        return image;
    }
    std::tie(image.width, image.height) = grid_extent(bundle);
    image.pixels.assign(image.width * image.height, 0);
    for (std::size_t i = 0; i < bundle.n_patches; ++i) {
        const GridCoord& c = bundle.coords[i];
        const double v = std::clamp(values[i], -1.0, 1.0);
        const double mapped = std::round(255.0 * (v + 1.0) / 2.0);
        image.pixels[static_cast<std::size_t>(c.row) * image.width +
                     static_cast<std::size_t>(c.col)] =
            static_cast<std::uint8_t>(mapped);
    }
    return image;
}

GrayImage render_selection_mask(const EmbeddingBundle& bundle,
                                const std::vector<bool>& mask) {
    if (mask.size() != bundle.n_patches) {
        throw ValidationError("render_selection_mask: mask size mismatch");
    }
    GrayImage image;
    if (bundle.n_patches == 0) {
        return image;
    }
    std::tie(image.width, image.height) = grid_extent(bundle);
    image.pixels.assign(image.width * image.height, 0);
    for (std::size_t i = 0; i < bundle.n_patches; ++i) {
        const GridCoord& c = bundle.coords[i];
        image.pixels[static_cast<std::size_t>(c.row) * image.width +
                     static_cast<std::size_t>(c.col)] = mask[i] ? 255 : 0;
    }
    return image;
}

}  // namespace histoselect
