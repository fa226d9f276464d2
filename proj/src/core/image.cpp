// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/core/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include <png.h>

#include "maskpaint/core/error.hpp"

namespace maskpaint {

std::size_t Mask::count() const noexcept {
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

double Mask::coverage() const noexcept {
    if (bits.empty()) return 0.0;
    return static_cast<double>(count()) / static_cast<double>(bits.size());
}

Mask Mask::complement() const {
    Mask out = *this;
    for (auto& b : out.bits) b = b ? 0 : 1;
    return out;
}

namespace {

Image read_png_format(const std::filesystem::path& path, png_uint_32 format, int channels) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str())) {
        raise(Errc::io_failure, "cannot decode PNG " + path.string() + ": " + png.message);
    }
    png.format = format;
    Image image(static_cast<int>(png.width), static_cast<int>(png.height), channels);
    if (!png_image_finish_read(&png, nullptr, image.pixels.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        raise(Errc::io_failure, "cannot decode PNG " + path.string() + ": " + msg);
    }
    return image;
}

void write_png_format(const std::filesystem::path& path, const std::uint8_t* data, int w, int h,
                      png_uint_32 format) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(w);
    png.height = static_cast<png_uint_32>(h);
    png.format = format;
    if (!png_image_write_to_file(&png, path.c_str(), 0, data, 0, nullptr)) {
        raise(Errc::io_failure, "cannot write PNG " + path.string() + ": " + png.message);
    }
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
    png_image probe;
    std::memset(&probe, 0, sizeof(probe));
    probe.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&probe, path.c_str())) {
        raise(Errc::io_failure, "cannot decode PNG " + path.string() + ": " + probe.message);
    }
    const bool colour = (probe.format & PNG_FORMAT_FLAG_COLOR) != 0;
    png_image_free(&probe);
    return colour ? read_png_format(path, PNG_FORMAT_RGB, 3) : read_png_format(path, PNG_FORMAT_GRAY, 1);
}

void write_png(const std::filesystem::path& path, const Image& image) {
    png_uint_32 format = 0;
    switch (image.channels) {
    case 1: format = PNG_FORMAT_GRAY; break;
    case 3: format = PNG_FORMAT_RGB; break;
    case 4: format = PNG_FORMAT_RGBA; break;
    default: raise(Errc::io_failure, "unsupported channel count for PNG");
    }
    write_png_format(path, image.pixels.data(), image.width, image.height, format);
}

Mask read_mask_png(const std::filesystem::path& path) {
    Image gray = read_png_format(path, PNG_FORMAT_GRAY, 1);
    Mask mask(gray.width, gray.height);
    for (std::size_t i = 0; i < gray.pixels.size(); ++i) mask.bits[i] = gray.pixels[i] != 0 ? 1 : 0;
    return mask;
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
    std::vector<std::uint8_t> gray(mask.bits.size());
    std::transform(mask.bits.begin(), mask.bits.end(), gray.begin(), [](auto b) { return b ? 255 : 0; });
    write_png_format(path, gray.data(), mask.width, mask.height, PNG_FORMAT_GRAY);
}

Image resize_nearest(const Image& image, int width, int height) {
    if (image.width == width && image.height == height) return image;
    Image out(width, height, image.channels);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(image.height - 1, static_cast<int>((y + 0.5) * image.height / height));
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(image.width - 1, static_cast<int>((x + 0.5) * image.width / width));
            for (int c = 0; c < image.channels; ++c) out.at(x, y, c) = image.at(sx, sy, c);
        }
    }
    return out;
}

Image resize_bilinear(const Image& image, int width, int height) {
    if (image.width == width && image.height == height) return image;
    Image out(width, height, image.channels);
    const double sx = static_cast<double>(image.width) / width;
    const double sy = static_cast<double>(image.height) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, image.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, image.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < image.channels; ++c) {
                const double v = (1 - wy) * ((1 - wx) * image.at(x0, y0, c) + wx * image.at(x1, y0, c)) +
                                 wy * ((1 - wx) * image.at(x0, y1, c) + wx * image.at(x1, y1, c));
                out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return out;
}

Image to_rgb(const Image& image) {
    if (image.channels == 3) return image;
    Image out(image.width, image.height, 3);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = image.at(x, y, std::min(c, image.channels - 1));
    return out;
}

std::array<double, 3> mean_color(const Image& image, const Mask* exclude) {
    std::array<double, 3> sum{0, 0, 0};
    std::size_t n = 0;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (exclude && exclude->get(x, y)) continue;
            for (int c = 0; c < 3; ++c) sum[c] += image.at(x, y, std::min(c, image.channels - 1));
            ++n;
        }
    }
    if (n == 0) return sum;
    for (auto& s : sum) s /= static_cast<double>(n);
    return sum;
}

}  // namespace maskpaint
