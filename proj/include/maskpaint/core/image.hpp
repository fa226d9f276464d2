// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace maskpaint {

// 8-bit interleaved raster, row-major HWC.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, fill) {}

    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width) * height; }
    bool empty() const noexcept { return pixels.empty(); }

    std::uint8_t& at(int x, int y, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool same_shape(const Image& other) const noexcept {
        return width == other.width && height == other.height && channels == other.channels;
    }

    friend bool operator==(const Image&, const Image&) = default;
};

// Binary raster, one byte per pixel holding 0 or 1.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    Mask() = default;
    Mask(int w, int h, bool fill = false)
        : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

    bool get(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }

    std::size_t count() const noexcept;
    double coverage() const noexcept;
    bool aligned_with(const Image& image) const noexcept {
        return width == image.width && height == image.height;
    }

    Mask complement() const;

    friend bool operator==(const Mask&, const Mask&) = default;
};

Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

// Masks are stored as single-channel PNG with values {0,255}; any non-zero reads as set.
Mask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

// Nearest-neighbour resampling; used where exact source values must survive.
Image resize_nearest(const Image& image, int width, int height);
Image resize_bilinear(const Image& image, int width, int height);
Image to_rgb(const Image& image);

std::array<double, 3> mean_color(const Image& image, const Mask* exclude = nullptr);

}  // namespace maskpaint
