// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/baselines/mixing.hpp"

#include <algorithm>
#include <cmath>

#include "maskpaint/core/error.hpp"

namespace maskpaint::baselines {

using classifier::Batch;
using classifier::Tensor;

double quantize_lambda(double lambda) {
    const double q = std::round(std::clamp(lambda, 0.0, 1.0) / kLambdaQuantum) * kLambdaQuantum;
    return std::clamp(q, 0.0, 1.0);
}

namespace {

void check_batch(const Batch& batch) {
    if (batch.size() < 2) raise(Errc::batch_too_small, "mixing needs at least two samples");
    if (batch.labels.size() != batch.size()) raise(Errc::shape_mismatch, "batch has mismatched image and label counts");
    for (const auto& t : batch.images)
        if (t.channels != batch.images[0].channels || t.height != batch.images[0].height ||
            t.width != batch.images[0].width)
            raise(Errc::shape_mismatch, "batch images differ in shape");
}

double draw_lambda(const MixParams& params, Rng& rng) {
    if (params.lambda) {
        if (!(*params.lambda >= 0 && *params.lambda <= 1)) raise(Errc::invalid_request, "lambda must lie in [0, 1]");
        return *params.lambda;
    }
    if (!(params.alpha > 0)) raise(Errc::config_invalid, "mixing alpha must be positive");
    return rng.beta(params.alpha, params.alpha);
}

void mix_labels(Batch& batch, const std::vector<std::vector<float>>& original, double lambda) {
    const float keep = static_cast<float>(lambda);
    const float take = static_cast<float>(1.0 - lambda);
    const std::size_t n = batch.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = original[i];
        const auto& b = original[(i + 1) % n];
        if (a.size() != b.size()) raise(Errc::shape_mismatch, "label vectors differ in length");
        for (std::size_t k = 0; k < a.size(); ++k) batch.labels[i][k] = keep * a[k] + take * b[k];
    }
}

}  // namespace

MixRecord apply_mixup(Batch& batch, Rng& rng, const MixParams& params) {
    check_batch(batch);
    const double lambda = quantize_lambda(draw_lambda(params, rng));
    const std::vector<Tensor> images = batch.images;
    const auto labels = batch.labels;
    const float keep = static_cast<float>(lambda);
    const float take = static_cast<float>(1.0 - lambda);
    const std::size_t n = batch.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = images[i].data;
        const auto& b = images[(i + 1) % n].data;
        auto& out = batch.images[i].data;
        for (std::size_t k = 0; k < a.size(); ++k) out[k] = keep * a[k] + take * b[k];
    }
    mix_labels(batch, labels, lambda);
    return {lambda, std::nullopt};
}

Box cutmix_box(int height, int width, double lambda, Rng& rng) {
    const double ratio = std::sqrt(std::clamp(1.0 - lambda, 0.0, 1.0));
    const int cut_w = static_cast<int>(width * ratio);
    const int cut_h = static_cast<int>(height * ratio);
    const int cx = static_cast<int>(rng.index(static_cast<std::uint64_t>(width)));
    const int cy = static_cast<int>(rng.index(static_cast<std::uint64_t>(height)));
    Box b;
    b.x0 = std::clamp(cx - cut_w / 2, 0, width);
    b.x1 = std::clamp(cx + cut_w / 2, 0, width);
    b.y0 = std::clamp(cy - cut_h / 2, 0, height);
    b.y1 = std::clamp(cy + cut_h / 2, 0, height);
    return b;
}

MixRecord apply_cutmix(Batch& batch, Rng& rng, const MixParams& params) {
    check_batch(batch);
    const int H = batch.images[0].height, W = batch.images[0].width;
    Box box;
    if (params.box) {
        box = *params.box;
        if (box.x0 < 0 || box.y0 < 0 || box.x1 > W || box.y1 > H || box.x0 > box.x1 || box.y0 > box.y1)
            raise(Errc::invalid_request, "cutmix box outside the image");
    } else {
        box = cutmix_box(H, W, draw_lambda(params, rng), rng);
    }
    const double lambda = quantize_lambda(1.0 - static_cast<double>(box.area()) / (static_cast<double>(H) * W));
    const std::vector<Tensor> images = batch.images;
    const auto labels = batch.labels;
    const std::size_t n = batch.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Tensor& donor = images[(i + 1) % n];
        Tensor& out = batch.images[i];
        for (int c = 0; c < out.channels; ++c)
            for (int y = box.y0; y < box.y1; ++y)
                std::copy(donor.row(c, y) + box.x0, donor.row(c, y) + box.x1, out.row(c, y) + box.x0);
    }
    mix_labels(batch, labels, lambda);
    return {lambda, box};
}

classifier::BatchTransform mixup_transform(double alpha) {
    return [alpha](Batch& batch, Rng& rng) {
        MixParams p;
        p.alpha = alpha;
        apply_mixup(batch, rng, p);
    };
}

classifier::BatchTransform cutmix_transform(double alpha) {
    return [alpha](Batch& batch, Rng& rng) {
        MixParams p;
        p.alpha = alpha;
        apply_cutmix(batch, rng, p);
    };
}

}  // namespace maskpaint::baselines
