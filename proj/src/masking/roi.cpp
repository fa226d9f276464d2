// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/masking/roi.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <queue>

#include <spdlog/spdlog.h>

#include "maskpaint/core/error.hpp"

namespace maskpaint::masking {

namespace fs = std::filesystem;

MaskArtifact make_artifact(Mask mask, std::string source_backend, int dilation_px) {
    MaskArtifact a;
    a.coverage = mask.coverage();
    a.mask = std::move(mask);
    a.source_backend = std::move(source_backend);
    a.dilation_px = dilation_px;
    return a;
}

fs::path StoredMaskSegmenter::mask_path(const fs::path& dir, const std::string& sample_id) {
    return dir / (sample_id + ".mask.png");
}

Mask StoredMaskSegmenter::segment(const Image&, const SegmentContext& context) {
    const fs::path p = mask_path(m_dir, context.sample_id);
    if (!fs::exists(p)) raise(Errc::backend_failure, "no stored mask at " + p.string());
    return read_mask_png(p);
}

namespace {

double median(std::vector<double>& v) {
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

void drop_border_touching(Mask& mask) {
    const int w = mask.width, h = mask.height;
    std::vector<std::uint8_t> seen(mask.bits.size(), 0);
    std::queue<std::pair<int, int>> q;
    auto push = [&](int x, int y) {
        const auto i = static_cast<std::size_t>(y) * w + x;
        if (mask.bits[i] && !seen[i]) {
            seen[i] = 1;
            q.emplace(x, y);
        }
    };
    for (int x = 0; x < w; ++x) {
        push(x, 0);
        push(x, h - 1);
    }
    for (int y = 0; y < h; ++y) {
        push(0, y);
        push(w - 1, y);
    }
    while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop();
        mask.set(x, y, false);
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int nx = x + dx, ny = y + dy;
                if (nx >= 0 && ny >= 0 && nx < w && ny < h) push(nx, ny);
            }
    }
}

}  // namespace

Mask ThresholdSegmenter::segment(const Image& image, const SegmentContext&) {
    const int w = image.width, h = image.height;
    std::array<double, 3> bg{};
    for (int c = 0; c < 3; ++c) {
        std::vector<double> border;
        const int ch = std::min(c, image.channels - 1);
        for (int x = 0; x < w; ++x) {
            border.push_back(image.at(x, 0, ch));
            border.push_back(image.at(x, h - 1, ch));
        }
        for (int y = 1; y + 1 < h; ++y) {
            border.push_back(image.at(0, y, ch));
            border.push_back(image.at(w - 1, y, ch));
        }
        bg[c] = median(border);
    }
    Mask mask(w, h);
    const double t2 = m_threshold * m_threshold;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double d2 = 0;
            for (int c = 0; c < 3; ++c) {
                const double d = image.at(x, y, std::min(c, image.channels - 1)) - bg[c];
                d2 += d * d;
            }
            mask.set(x, y, d2 > t2);
        }
    if (m_drop_border) drop_border_touching(mask);
    return mask;
}

Mask ExternalSegmenter::segment(const Image& image, const SegmentContext& context) {
    const fs::path dir = m_command.work_dir.empty() ? fs::temp_directory_path() / "maskpaint-external" : m_command.work_dir;
    const fs::path in = dir / (context.sample_id + ".seg-in.png");
    const fs::path out = dir / (context.sample_id + ".seg-out.png");
    write_png(in, image);
    run_external(m_command, {json{{"op", "segment"}, {"id", context.sample_id}, {"image", in.string()}, {"output", out.string()}}});
    Mask m = read_mask_png(out);
    fs::remove(in);
    fs::remove(out);
    return m;
}

MaskArtifact segment_roi(const Image& image, SegmenterAdapter& backend, const SegmentContext& context,
                         double coverage_floor) {
    Mask mask;
    try {
        mask = backend.segment(image, context);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        raise(Errc::backend_failure, backend.id() + " segmenter failed: " + e.what());
    }
    if (!mask.aligned_with(image))
        raise(Errc::shape_mismatch, "mask for " + context.sample_id + " does not match image dimensions");
    MaskArtifact a = make_artifact(std::move(mask), backend.id());
    if (a.coverage < coverage_floor || a.mask.count() == 0)
        raise(Errc::empty_mask, "ROI coverage " + std::to_string(a.coverage) + " for " + context.sample_id +
                                    " is below the floor " + std::to_string(coverage_floor));
    return a;
}

MaskArtifact make_protection_mask(const MaskArtifact& roi, int dilation_px, StructuringElement element) {
    if (dilation_px < 0) raise(Errc::config_invalid, "dilation_px must be non-negative");
    MaskArtifact out = roi;
    out.dilation_px = roi.dilation_px + dilation_px;
    if (dilation_px == 0) return out;
    const int w = roi.mask.width, h = roi.mask.height, r = dilation_px;
    std::vector<std::pair<int, int>> offsets;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            if (element == StructuringElement::square || dx * dx + dy * dy <= r * r) offsets.emplace_back(dx, dy);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!roi.mask.get(x, y)) continue;
            for (auto [dx, dy] : offsets) {
                const int nx = x + dx, ny = y + dy;
                if (nx >= 0 && ny >= 0 && nx < w && ny < h) out.mask.set(nx, ny, true);
            }
        }
    out.coverage = out.mask.coverage();
    return out;
}

Image mask_out_background(const Image& image, const MaskArtifact& roi, Fill fill) {
    if (!roi.mask.aligned_with(image)) raise(Errc::shape_mismatch, "mask and image dimensions differ");
    Image out = image;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            if (roi.mask.get(x, y)) continue;
            for (int c = 0; c < image.channels; ++c) out.at(x, y, c) = fill[std::min(c, 2)];
        }
    return out;
}

Image MeanFillRemover::remove(const Image& image, const Mask& roi) {
    Image out = image;
    std::vector<double> sum(image.channels, 0.0);
    std::size_t n = 0;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            if (roi.get(x, y)) continue;
            for (int c = 0; c < image.channels; ++c) sum[c] += image.at(x, y, c);
            ++n;
        }
    std::vector<std::uint8_t> mean(image.channels, kDegenerateBackgroundFill[0]);
    if (n > 0)
        for (int c = 0; c < image.channels; ++c)
            mean[c] = static_cast<std::uint8_t>(std::lround(sum[c] / static_cast<double>(n)));
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            if (roi.get(x, y))
                for (int c = 0; c < image.channels; ++c) out.at(x, y, c) = mean[c];
    return out;
}

Image ExternalRemover::remove(const Image& image, const Mask& roi) {
    static std::atomic<unsigned long> counter{0};
    const fs::path dir = m_command.work_dir.empty() ? fs::temp_directory_path() / "maskpaint-external" : m_command.work_dir;
    const std::string id = "rm-" + std::to_string(counter.fetch_add(1));
    const fs::path in = dir / (id + ".in.png"), mask = dir / (id + ".mask.png"), out = dir / (id + ".out.png");
    write_png(in, image);
    write_mask_png(mask, roi);
    run_external(m_command, {json{{"op", "remove_background"},
                                  {"id", id},
                                  {"image", in.string()},
                                  {"mask", mask.string()},
                                  {"output", out.string()}}});
    Image result = read_png(out);
    fs::remove(in);
    fs::remove(mask);
    fs::remove(out);
    return result;
}

Image extract_background(const Image& image, const MaskArtifact& roi, BackgroundRemoverAdapter& remover) {
    if (!roi.mask.aligned_with(image)) raise(Errc::shape_mismatch, "mask and image dimensions differ");
    const std::size_t set = roi.mask.count();
    if (set == 0) return image;
    if (set == roi.mask.bits.size()) {
        spdlog::warn("ROI covers the whole image; using constant fallback background");
        Image out(image.width, image.height, image.channels);
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x)
                for (int c = 0; c < image.channels; ++c) out.at(x, y, c) = kDegenerateBackgroundFill[std::min(c, 2)];
        return out;
    }
    Image filled;
    try {
        filled = remover.remove(image, roi.mask);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        raise(Errc::backend_failure, remover.id() + " remover failed: " + e.what());
    }
    if (filled.width != image.width || filled.height != image.height)
        raise(Errc::backend_failure, remover.id() + " remover changed the image dimensions");
    filled = filled.channels == image.channels ? filled : to_rgb(filled);
    if (filled.channels != image.channels) raise(Errc::backend_failure, "remover returned wrong channel count");
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            if (!roi.mask.get(x, y))
                for (int c = 0; c < image.channels; ++c) filled.at(x, y, c) = image.at(x, y, c);
    return filled;
}

std::unique_ptr<SegmenterAdapter> make_segmenter(const std::string& id, const fs::path& mask_dir,
                                                 const ExternalCommand* command) {
    if (id == "stored") return std::make_unique<StoredMaskSegmenter>(mask_dir);
    if (id == "threshold") return std::make_unique<ThresholdSegmenter>();
    if (id == "external") {
        if (!command) raise(Errc::config_invalid, "external segmenter needs a command");
        return std::make_unique<ExternalSegmenter>(*command);
    }
    raise(Errc::config_invalid, "unknown segmenter '" + id + "'");
}

std::unique_ptr<BackgroundRemoverAdapter> make_remover(const std::string& id, const ExternalCommand* command) {
    if (id == "mean-fill") return std::make_unique<MeanFillRemover>();
    if (id == "external") {
        if (!command) raise(Errc::config_invalid, "external remover needs a command");
        return std::make_unique<ExternalRemover>(*command);
    }
    raise(Errc::config_invalid, "unknown remover '" + id + "'");
}

}  // namespace maskpaint::masking
