// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <vector>

#include "maskpaint/core/image.hpp"

namespace maskpaint::classifier {

// Planar CHW float tensor for one image.
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    Tensor() = default;
    Tensor(int c, int h, int w, float fill = 0.0f)
        : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

    float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    float at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    float* row(int c, int y) { return data.data() + (static_cast<std::size_t>(c) * height + y) * width; }
    const float* row(int c, int y) const { return data.data() + (static_cast<std::size_t>(c) * height + y) * width; }
};

struct Normalization {
    std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
    std::array<float, 3> std{0.229f, 0.224f, 0.225f};
};

// Bilinear resize to `size`x`size`, scale to [0,1], then normalise per channel.
Tensor to_tensor(const Image& image, int size, const Normalization& norm);

// Images with soft label vectors; single-label targets are one-hot.
struct Batch {
    std::vector<Tensor> images;
    std::vector<std::vector<float>> labels;

    std::size_t size() const noexcept { return images.size(); }
};

}  // namespace maskpaint::classifier
