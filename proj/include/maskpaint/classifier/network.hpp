// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "maskpaint/classifier/tensor.hpp"
#include "maskpaint/core/rng.hpp"

namespace maskpaint::classifier {

// conv3x3 -> ReLU -> maxpool2 -> conv3x3 -> ReLU -> maxpool2 -> global
// average pool -> linear. All parameters live in one flat vector.
class TinyCnn {
public:
    TinyCnn(int in_channels, int num_outputs, std::array<int, 2> widths = {8, 16});

    struct Workspace {
        Tensor conv1, pool1, conv2, pool2;
        std::vector<int> arg1, arg2;
        std::vector<float> pooled;
        std::vector<float> logits;
    };

    // He-normal weights, zero biases.
    void init(Rng& rng);

    std::size_t num_params() const noexcept { return m_params.size(); }
    std::vector<float>& params() noexcept { return m_params; }
    const std::vector<float>& params() const noexcept { return m_params; }
    int num_outputs() const noexcept { return m_out; }

    const std::vector<float>& forward(const Tensor& input, Workspace& ws) const;
    // Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logits).
    void backward(const Tensor& input, const Workspace& ws, std::span<const float> dlogits,
                  std::vector<float>& grad) const;

    void save(const std::filesystem::path& path) const;
    void load(const std::filesystem::path& path);

private:
    int m_in, m_out, m_c1, m_c2;
    std::size_t m_w1, m_b1, m_w2, m_b2, m_fw, m_fb;
    std::vector<float> m_params;
};

class Adam {
public:
    Adam(std::size_t n, double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    // L2 weight decay folded into the gradient before the moment updates.
    void step(std::vector<float>& params, const std::vector<float>& grad);

private:
    double m_lr, m_wd, m_b1, m_b2, m_eps;
    long m_t = 0;
    std::vector<double> m_m, m_v;
};

}  // namespace maskpaint::classifier
