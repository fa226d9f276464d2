// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "maskpaint/core/external.hpp"
#include "maskpaint/core/image.hpp"

namespace maskpaint::masking {

// mask: 1 = region of interest.
struct MaskArtifact {
    Mask mask;
    double coverage = 0.0;
    std::string source_backend;
    int dilation_px = 0;
};

MaskArtifact make_artifact(Mask mask, std::string source_backend, int dilation_px = 0);

struct SegmentContext {
    std::string sample_id;
};

class SegmenterAdapter {
public:
    virtual ~SegmenterAdapter() = default;
    virtual std::string id() const = 0;
    virtual bool concurrent_safe() const { return true; }
    virtual Mask segment(const Image& image, const SegmentContext& context) = 0;
};

// Reads `<mask_dir>/<sample_id>.mask.png`.
class StoredMaskSegmenter final : public SegmenterAdapter {
public:
    explicit StoredMaskSegmenter(std::filesystem::path mask_dir) : m_dir(std::move(mask_dir)) {}
    std::string id() const override { return "stored"; }
    Mask segment(const Image& image, const SegmentContext& context) override;

    static std::filesystem::path mask_path(const std::filesystem::path& dir, const std::string& sample_id);

private:
    std::filesystem::path m_dir;
};

// Foreground = pixels whose colour distance from the border median exceeds
// `threshold`. Components touching the image border are dropped when
// `drop_border_components` is set, which removes edge-anchored artefacts such
// as rulers.
class ThresholdSegmenter final : public SegmenterAdapter {
public:
    explicit ThresholdSegmenter(double threshold = 60.0, bool drop_border_components = true)
        : m_threshold(threshold), m_drop_border(drop_border_components) {}
    std::string id() const override { return "threshold"; }
    Mask segment(const Image& image, const SegmentContext& context) override;

private:
    double m_threshold;
    bool m_drop_border;
};

// op "segment": {image, output} -> worker writes a {0,255} mask PNG to output.
class ExternalSegmenter final : public SegmenterAdapter {
public:
    explicit ExternalSegmenter(ExternalCommand command) : m_command(std::move(command)) {}
    std::string id() const override { return "external"; }
    bool concurrent_safe() const override { return false; }
    Mask segment(const Image& image, const SegmentContext& context) override;

private:
    ExternalCommand m_command;
};

inline constexpr double kDefaultCoverageFloor = 0.001;

// Throws Errc::empty_mask when coverage falls below `coverage_floor`,
// Errc::shape_mismatch when the backend returns a misaligned mask and
// Errc::backend_failure for any other adapter fault.
MaskArtifact segment_roi(const Image& image, SegmenterAdapter& backend, const SegmentContext& context,
                         double coverage_floor = kDefaultCoverageFloor);

enum class StructuringElement { square, disc };

// Output is a superset of the input; the inpaint region is its complement.
MaskArtifact make_protection_mask(const MaskArtifact& roi, int dilation_px,
                                  StructuringElement element = StructuringElement::square);

using Fill = std::array<std::uint8_t, 3>;
// The usual ImageNet normalisation mean in 8-bit units.
inline constexpr Fill kNormalizationMeanFill{124, 116, 104};
inline constexpr Fill kDegenerateBackgroundFill{128, 128, 128};

// ROI pixels untouched, everything else set to `fill`. Throws Errc::shape_mismatch.
Image mask_out_background(const Image& image, const MaskArtifact& roi, Fill fill = kNormalizationMeanFill);

class BackgroundRemoverAdapter {
public:
    virtual ~BackgroundRemoverAdapter() = default;
    virtual std::string id() const = 0;
    virtual bool concurrent_safe() const { return true; }
    // Returns an image of the same shape with the ROI region filled in.
    virtual Image remove(const Image& image, const Mask& roi) = 0;
};

// Fills the ROI with the per-channel mean of the remaining pixels.
class MeanFillRemover final : public BackgroundRemoverAdapter {
public:
    std::string id() const override { return "mean-fill"; }
    Image remove(const Image& image, const Mask& roi) override;
};

// op "remove_background": {image, mask, output}.
class ExternalRemover final : public BackgroundRemoverAdapter {
public:
    explicit ExternalRemover(ExternalCommand command) : m_command(std::move(command)) {}
    std::string id() const override { return "external"; }
    bool concurrent_safe() const override { return false; }
    Image remove(const Image& image, const Mask& roi) override;

private:
    ExternalCommand m_command;
};

// Replaces the ROI via `remover`. Pixels outside the ROI are always copied
// back from the input. Empty ROI returns the input; a full ROI returns a
// constant kDegenerateBackgroundFill image and logs a warning.
Image extract_background(const Image& image, const MaskArtifact& roi, BackgroundRemoverAdapter& remover);

std::unique_ptr<SegmenterAdapter> make_segmenter(const std::string& id, const std::filesystem::path& mask_dir,
                                                 const ExternalCommand* command = nullptr);
std::unique_ptr<BackgroundRemoverAdapter> make_remover(const std::string& id, const ExternalCommand* command = nullptr);

}  // namespace maskpaint::masking
