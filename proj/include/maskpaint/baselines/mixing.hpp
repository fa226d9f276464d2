// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

#include "maskpaint/classifier/harness.hpp"
#include "maskpaint/classifier/tensor.hpp"
#include "maskpaint/core/rng.hpp"

namespace maskpaint::baselines {

inline constexpr double kMixupAlpha = 0.4;
inline constexpr double kCutmixAlpha = 1.0;

// Mixing coefficients are rounded to a multiple of 2^-16 so that both label
// weights and their sum are exact in single precision.
inline constexpr double kLambdaQuantum = 1.0 / 65536.0;
double quantize_lambda(double lambda);

// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Box {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    long area() const noexcept { return static_cast<long>(x1 - x0) * (y1 - y0); }
    friend bool operator==(const Box&, const Box&) = default;
};

struct MixParams {
    double alpha = 1.0;
    // Overrides the Beta(alpha, alpha) draw.
    std::optional<double> lambda;
    // CutMix only: overrides the sampled box.
    std::optional<Box> box;
};

inline MixParams mixup_defaults() {
    MixParams p;
    p.alpha = kMixupAlpha;
    return p;
}
inline MixParams cutmix_defaults() {
    MixParams p;
    p.alpha = kCutmixAlpha;
    return p;
}

// What was applied to a batch. Sample i is mixed with sample (i + 1) mod n.
struct MixRecord {
    double lambda = 1.0;
    std::optional<Box> box;
};

// x_i <- lambda x_i + (1 - lambda) x_j, same for labels.
// Throws Errc::batch_too_small below two samples.
MixRecord apply_mixup(classifier::Batch& batch, Rng& rng, const MixParams& params = mixup_defaults());

// Pastes the box of x_j into x_i; labels use the kept-area ratio.
MixRecord apply_cutmix(classifier::Batch& batch, Rng& rng, const MixParams& params = cutmix_defaults());

// Box with side ratio sqrt(1 - lambda) around a uniform centre, clipped.
Box cutmix_box(int height, int width, double lambda, Rng& rng);

classifier::BatchTransform mixup_transform(double alpha = kMixupAlpha);
classifier::BatchTransform cutmix_transform(double alpha = kCutmixAlpha);

}  // namespace maskpaint::baselines
