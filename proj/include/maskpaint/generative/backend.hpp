// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "maskpaint/core/external.hpp"
#include "maskpaint/core/image.hpp"
#include "maskpaint/core/io.hpp"
#include "maskpaint/masking/roi.hpp"

namespace maskpaint::generative {

enum class FinetuneMode { class_conditional, target_dreambooth };
enum class LrSchedule { constant, linear, cosine };

std::string_view to_string(FinetuneMode mode) noexcept;
std::string_view to_string(LrSchedule schedule) noexcept;
FinetuneMode parse_finetune_mode(std::string_view text);
LrSchedule parse_lr_schedule(std::string_view text);

struct FinetuneConfig {
    double learning_rate = 1e-5;
    LrSchedule lr_schedule = LrSchedule::constant;
    double snr_gamma = 5.0;
    int resolution = 512;
    int max_train_steps = 2500;
    int checkpoint_every = 500;
    FinetuneMode mode = FinetuneMode::class_conditional;

    static FinetuneConfig source_defaults();
    static FinetuneConfig target_defaults();

    // Missing keys keep the values of `defaults`.
    static FinetuneConfig from_json(const json& j, const FinetuneConfig& defaults);
    json to_json() const;
    void validate() const;
};

// A persisted model: a directory holding handle.json plus backend-specific files.
struct ModelHandle {
    std::filesystem::path dir;
    std::string backend_id;
    FinetuneMode mode = FinetuneMode::class_conditional;
    std::string dummy_token;
    json config;
    // Backend-private payload stored inside handle.json.
    json state;
    std::optional<std::filesystem::path> parent;
    std::string checksum;

    static constexpr std::string_view kFileName = "handle.json";

    // Computes the checksum and writes dir/handle.json.
    void save();
    static ModelHandle load(const std::filesystem::path& dir);
    std::string compute_checksum() const;
};

struct TrainingPair {
    std::string sample_id;
    std::filesystem::path image;
    std::optional<std::filesystem::path> roi_mask;
    std::string class_label;
    std::string class_token;
    std::string prompt;
};

struct InpaintRequest {
    Image image;
    masking::MaskArtifact protection_mask;
    std::string prompt;
    double strength = 1.0;
    double guidance_scale = 7.5;
    std::uint64_t seed = 0;
};

struct GridPoint {
    double strength = 1.0;
    double guidance_scale = 7.5;

    friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

struct InpaintGrid {
    std::vector<double> strengths{0.5, 0.7, 0.9, 1.0};
    std::vector<double> guidance_scales{7.5, 15.0, 20.0};

    // Strength-major order.
    std::vector<GridPoint> points() const;
    bool contains(const GridPoint& point) const;

    static InpaintGrid from_json(const json& j);
    json to_json() const;
};

// Throws Errc::invalid_request. When `grid` is given the request's
// (strength, guidance) must be one of its points.
void validate_request(const InpaintRequest& request, const InpaintGrid* grid = nullptr);

enum class ReviewStatus { pending, approved, rejected, automatic };
std::string_view to_string(ReviewStatus status) noexcept;
ReviewStatus parse_review_status(std::string_view text);

struct GenerationResult {
    Image image;
    InpaintRequest request;
    std::string source_sample_id;
    std::string backend_id;
    double wall_time = 0.0;
    ReviewStatus review_status = ReviewStatus::pending;
};

class GenerativeBackend {
public:
    virtual ~GenerativeBackend() = default;
    virtual std::string id() const = 0;
    virtual bool concurrent_safe() const { return true; }

    virtual ModelHandle finetune_source(const std::vector<TrainingPair>& pairs, const FinetuneConfig& cfg,
                                        const std::filesystem::path& out_dir) = 0;
    virtual ModelHandle finetune_target(const ModelHandle& source, const std::vector<std::filesystem::path>& backgrounds,
                                        const std::string& dummy_token, const FinetuneConfig& cfg,
                                        const std::filesystem::path& out_dir) = 0;

    // The raw backend output; callers needing the ROI guarantee go through
    // generative::inpaint, which re-stamps protected pixels.
    virtual Image inpaint(const ModelHandle& handle, const InpaintRequest& request) = 0;
    virtual std::vector<Image> inpaint_batch(const ModelHandle& handle, const std::vector<InpaintRequest>& requests);
    virtual Image text2img(const ModelHandle& handle, const std::string& prompt, std::uint64_t seed) = 0;
    virtual Image img2img(const ModelHandle& handle, const Image& image, const std::string& prompt, double strength,
                          std::uint64_t seed) = 0;
};

// Deterministic stand-in for a diffusion stack.
//
// Source fine-tuning records per-class mean/std of background (non-ROI)
// colour keyed by class token. Target fine-tuning stores the background
// exemplars. Inpainting picks an exemplar by seed and blends it over the
// unprotected region:
//   out = (1 - strength) * src + strength * (exemplar + N(0, sigma)),
//   sigma = 6 * 7.5 / guidance_scale.
// text2img fills with the statistics of the class whose token occurs in the
// prompt; img2img blends its input towards the text2img output by strength.
class MockBackend : public GenerativeBackend {
public:
    std::string id() const override { return "mock"; }

    ModelHandle finetune_source(const std::vector<TrainingPair>& pairs, const FinetuneConfig& cfg,
                                const std::filesystem::path& out_dir) override;
    ModelHandle finetune_target(const ModelHandle& source, const std::vector<std::filesystem::path>& backgrounds,
                                const std::string& dummy_token, const FinetuneConfig& cfg,
                                const std::filesystem::path& out_dir) override;
    Image inpaint(const ModelHandle& handle, const InpaintRequest& request) override;
    Image text2img(const ModelHandle& handle, const std::string& prompt, std::uint64_t seed) override;
    Image img2img(const ModelHandle& handle, const Image& image, const std::string& prompt, double strength,
                  std::uint64_t seed) override;

private:
    std::shared_ptr<const std::vector<Image>> exemplars(const ModelHandle& handle);

    std::mutex m_cache_mutex;
    std::filesystem::path m_cached_dir;
    std::shared_ptr<const std::vector<Image>> m_cached_exemplars;
};

// Delegates to a worker process speaking the line-delimited request protocol
// (see docs/external-protocol.md). The worker writes model files into the
// output directory it is given; the adapter owns handle.json.
class ExternalBackend : public GenerativeBackend {
public:
    explicit ExternalBackend(ExternalCommand command) : m_command(std::move(command)) {}
    std::string id() const override { return "external"; }
    bool concurrent_safe() const override { return false; }

    ModelHandle finetune_source(const std::vector<TrainingPair>& pairs, const FinetuneConfig& cfg,
                                const std::filesystem::path& out_dir) override;
    ModelHandle finetune_target(const ModelHandle& source, const std::vector<std::filesystem::path>& backgrounds,
                                const std::string& dummy_token, const FinetuneConfig& cfg,
                                const std::filesystem::path& out_dir) override;
    Image inpaint(const ModelHandle& handle, const InpaintRequest& request) override;
    std::vector<Image> inpaint_batch(const ModelHandle& handle, const std::vector<InpaintRequest>& requests) override;
    Image text2img(const ModelHandle& handle, const std::string& prompt, std::uint64_t seed) override;
    Image img2img(const ModelHandle& handle, const Image& image, const std::string& prompt, double strength,
                  std::uint64_t seed) override;

private:
    std::filesystem::path scratch() const;

    ExternalCommand m_command;
    unsigned long m_counter = 0;
};

std::unique_ptr<GenerativeBackend> make_backend(const std::string& id, const ExternalCommand* command = nullptr);

}  // namespace maskpaint::generative
