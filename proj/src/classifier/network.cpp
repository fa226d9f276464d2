// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/classifier/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "maskpaint/core/error.hpp"

namespace maskpaint::classifier {

Tensor to_tensor(const Image& image, int size, const Normalization& norm) {
    const Image rgb = to_rgb(image);
    const Image r = (rgb.width == size && rgb.height == size) ? rgb : resize_bilinear(rgb, size, size);
    Tensor t(3, size, size);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                t.at(c, y, x) = (static_cast<float>(r.at(x, y, c)) / 255.0f - norm.mean[c]) / norm.std[c];
    return t;
}

namespace {

void conv3x3_forward(const Tensor& in, const float* w, const float* b, int cout, Tensor& out) {
    const int H = in.height, W = in.width, cin = in.channels;
    out = Tensor(cout, H, W);
    for (int o = 0; o < cout; ++o) {
        std::fill_n(out.row(o, 0), static_cast<std::size_t>(H) * W, b[o]);
        for (int i = 0; i < cin; ++i)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const float wv = w[((o * cin + i) * 3 + ky) * 3 + kx];
                    const int dy = ky - 1, dx = kx - 1;
                    const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                    const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                    for (int y = y0; y < y1; ++y) {
                        const float* src = in.row(i, y + dy);
                        float* dst = out.row(o, y);
                        for (int x = x0; x < x1; ++x) dst[x] += wv * src[x + dx];
                    }
                }
        float* p = out.row(o, 0);
        for (std::size_t k = 0; k < static_cast<std::size_t>(H) * W; ++k) p[k] = std::max(p[k], 0.0f);
    }
}

// `dout` is already gated by the ReLU derivative.
void conv3x3_backward(const Tensor& in, const float* w, const Tensor& dout, float* dw, float* db, Tensor* din) {
    const int H = in.height, W = in.width, cin = in.channels, cout = dout.channels;
    if (din) *din = Tensor(cin, H, W);
    for (int o = 0; o < cout; ++o) {
        const float* g = dout.row(o, 0);
        float sum = 0;
        for (std::size_t k = 0; k < static_cast<std::size_t>(H) * W; ++k) sum += g[k];
        db[o] += sum;
        for (int i = 0; i < cin; ++i)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const std::size_t widx = static_cast<std::size_t>(((o * cin + i) * 3 + ky) * 3 + kx);
                    const float wv = w[widx];
                    const int dy = ky - 1, dx = kx - 1;
                    const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                    const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                    float acc = 0;
                    for (int y = y0; y < y1; ++y) {
                        const float* src = in.row(i, y + dy);
                        const float* gr = dout.row(o, y);
                        for (int x = x0; x < x1; ++x) acc += gr[x] * src[x + dx];
                        if (din) {
                            float* d = din->row(i, y + dy);
                            for (int x = x0; x < x1; ++x) d[x + dx] += wv * gr[x];
                        }
                    }
                    dw[widx] += acc;
                }
    }
}

void maxpool2_forward(const Tensor& in, Tensor& out, std::vector<int>& arg) {
    const int H = in.height / 2, W = in.width / 2;
    out = Tensor(in.channels, H, W);
    arg.assign(out.data.size(), 0);
    std::size_t k = 0;
    for (int c = 0; c < in.channels; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x, ++k) {
                int best = -1;
                float bv = 0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const int idx = (c * in.height + 2 * y + dy) * in.width + 2 * x + dx;
                        if (best < 0 || in.data[idx] > bv) {
                            best = idx;
                            bv = in.data[idx];
                        }
                    }
                out.data[k] = bv;
                arg[k] = best;
            }
}

}  // namespace

TinyCnn::TinyCnn(int in_channels, int num_outputs, std::array<int, 2> widths)
    : m_in(in_channels), m_out(num_outputs), m_c1(widths[0]), m_c2(widths[1]) {
    if (in_channels <= 0 || num_outputs <= 0 || m_c1 <= 0 || m_c2 <= 0)
        raise(Errc::config_invalid, "network dimensions must be positive");
    std::size_t off = 0;
    m_w1 = off;
    off += static_cast<std::size_t>(m_c1) * m_in * 9;
    m_b1 = off;
    off += m_c1;
    m_w2 = off;
    off += static_cast<std::size_t>(m_c2) * m_c1 * 9;
    m_b2 = off;
    off += m_c2;
    m_fw = off;
    off += static_cast<std::size_t>(m_out) * m_c2;
    m_fb = off;
    off += m_out;
    m_params.assign(off, 0.0f);
}

void TinyCnn::init(Rng& rng) {
    std::fill(m_params.begin(), m_params.end(), 0.0f);
    auto he = [&](std::size_t offset, std::size_t count, double fan_in) {
        const double s = std::sqrt(2.0 / fan_in);
        for (std::size_t k = 0; k < count; ++k) m_params[offset + k] = static_cast<float>(s * rng.normal());
    };
    he(m_w1, m_b1 - m_w1, m_in * 9.0);
    he(m_w2, m_b2 - m_w2, m_c1 * 9.0);
    he(m_fw, m_fb - m_fw, static_cast<double>(m_c2));
}

const std::vector<float>& TinyCnn::forward(const Tensor& input, Workspace& ws) const {
    if (input.channels != m_in) raise(Errc::shape_mismatch, "input channel count does not match the network");
    if (input.height < 4 || input.width < 4) raise(Errc::shape_mismatch, "input smaller than 4x4");
    const float* p = m_params.data();
    conv3x3_forward(input, p + m_w1, p + m_b1, m_c1, ws.conv1);
    maxpool2_forward(ws.conv1, ws.pool1, ws.arg1);
    conv3x3_forward(ws.pool1, p + m_w2, p + m_b2, m_c2, ws.conv2);
    maxpool2_forward(ws.conv2, ws.pool2, ws.arg2);
    const std::size_t area = static_cast<std::size_t>(ws.pool2.height) * ws.pool2.width;
    ws.pooled.assign(m_c2, 0.0f);
    for (int c = 0; c < m_c2; ++c) {
        const float* q = ws.pool2.row(c, 0);
        float s = 0;
        for (std::size_t k = 0; k < area; ++k) s += q[k];
        ws.pooled[c] = s / static_cast<float>(area);
    }
    ws.logits.assign(m_out, 0.0f);
    for (int k = 0; k < m_out; ++k) {
        float s = p[m_fb + k];
        for (int c = 0; c < m_c2; ++c) s += p[m_fw + static_cast<std::size_t>(k) * m_c2 + c] * ws.pooled[c];
        ws.logits[k] = s;
    }
    return ws.logits;
}

void TinyCnn::backward(const Tensor& input, const Workspace& ws, std::span<const float> dlogits,
                       std::vector<float>& grad) const {
    const float* p = m_params.data();
    float* g = grad.data();
    std::vector<float> dpooled(m_c2, 0.0f);
    for (int k = 0; k < m_out; ++k) {
        g[m_fb + k] += dlogits[k];
        for (int c = 0; c < m_c2; ++c) {
            const std::size_t idx = m_fw + static_cast<std::size_t>(k) * m_c2 + c;
            g[idx] += dlogits[k] * ws.pooled[c];
            dpooled[c] += p[idx] * dlogits[k];
        }
    }
    const std::size_t area = static_cast<std::size_t>(ws.pool2.height) * ws.pool2.width;
    Tensor dconv2(ws.conv2.channels, ws.conv2.height, ws.conv2.width);
    for (std::size_t k = 0; k < ws.pool2.data.size(); ++k) {
        const int c = static_cast<int>(k / area);
        const int src = ws.arg2[k];
        if (ws.conv2.data[src] > 0) dconv2.data[src] += dpooled[c] / static_cast<float>(area);
    }
    Tensor dpool1;
    conv3x3_backward(ws.pool1, p + m_w2, dconv2, g + m_w2, g + m_b2, &dpool1);
    Tensor dconv1(ws.conv1.channels, ws.conv1.height, ws.conv1.width);
    for (std::size_t k = 0; k < ws.pool1.data.size(); ++k) {
        const int src = ws.arg1[k];
        if (ws.conv1.data[src] > 0) dconv1.data[src] += dpool1.data[k];
    }
    conv3x3_backward(input, p + m_w1, dconv1, g + m_w1, g + m_b1, nullptr);
}

void TinyCnn::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(Errc::io_failure, "cannot write weights " + path.string());
    const std::uint64_t n = m_params.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(m_params.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!out) raise(Errc::io_failure, "short write on " + path.string());
}

void TinyCnn::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::io_failure, "cannot read weights " + path.string());
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (n != m_params.size()) raise(Errc::shape_mismatch, "weight file does not match the network layout");
    in.read(reinterpret_cast<char*>(m_params.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) raise(Errc::io_failure, "truncated weight file " + path.string());
}

Adam::Adam(std::size_t n, double lr, double weight_decay, double beta1, double beta2, double eps)
    : m_lr(lr), m_wd(weight_decay), m_b1(beta1), m_b2(beta2), m_eps(eps), m_m(n, 0.0), m_v(n, 0.0) {}

void Adam::step(std::vector<float>& params, const std::vector<float>& grad) {
    ++m_t;
    const double c1 = 1.0 - std::pow(m_b1, static_cast<double>(m_t));
    const double c2 = 1.0 - std::pow(m_b2, static_cast<double>(m_t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double gi = grad[i] + m_wd * params[i];
        m_m[i] = m_b1 * m_m[i] + (1 - m_b1) * gi;
        m_v[i] = m_b2 * m_v[i] + (1 - m_b2) * gi * gi;
        params[i] -= static_cast<float>(m_lr * (m_m[i] / c1) / (std::sqrt(m_v[i] / c2) + m_eps));
    }
}

}  // namespace maskpaint::classifier
