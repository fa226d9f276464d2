// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "maskpaint/datasets/manifest.hpp"
#include "maskpaint/generative/backend.hpp"
#include "maskpaint/prompts/prompt_engine.hpp"

namespace maskpaint::generative {

// Resolves `image_ref` against the manifest directory unless absolute.
std::filesystem::path resolve_ref(const std::filesystem::path& base, const std::string& ref);

// One pair per train record: image, optional stored ROI mask from `mask_dir`
// and the source-stage prompt for its class.
std::vector<TrainingPair> training_pairs(const datasets::DatasetManifest& manifest,
                                         const std::filesystem::path& manifest_dir,
                                         const prompts::PromptRegistry& registry, const std::string& prompt_dataset,
                                         const std::optional<std::filesystem::path>& mask_dir);

// Throws Errc::empty_train_set, Errc::config_invalid for a wrong mode.
// Writes the prompt/image pairs used to out_dir/training_pairs.jsonl.
ModelHandle finetune_source(GenerativeBackend& backend, const std::vector<TrainingPair>& pairs,
                            const FinetuneConfig& cfg, const std::filesystem::path& out_dir);

struct TargetImageGuard {
    std::size_t min_images = 100;
    bool allow_fewer = false;
};

// Throws Errc::too_few_target_images below the guard unless allow_fewer, in
// which case it only warns.
ModelHandle finetune_target(GenerativeBackend& backend, const ModelHandle& source,
                            const std::vector<std::filesystem::path>& backgrounds, const std::string& dummy_token,
                            const FinetuneConfig& cfg, const std::filesystem::path& out_dir,
                            const TargetImageGuard& guard = {});

// Copies every protected pixel of `source` over `output`.
void restamp_protected(Image& output, const Image& source, const Mask& protection);
bool protected_pixels_equal(const Image& output, const Image& source, const Mask& protection);

// Validates, calls the backend, checks dimensions and re-stamps the
// protected region so the ROI guarantee holds for any backend.
GenerationResult inpaint(GenerativeBackend& backend, const ModelHandle& handle, const InpaintRequest& request,
                         const std::string& source_sample_id, const InpaintGrid* grid = nullptr);
std::vector<GenerationResult> inpaint_batch(GenerativeBackend& backend, const ModelHandle& handle,
                                            const std::vector<InpaintRequest>& requests,
                                            const std::vector<std::string>& source_sample_ids,
                                            const InpaintGrid* grid = nullptr);

enum class GenerationMethod { inpaint, text2img, img2img };
std::string_view to_string(GenerationMethod method) noexcept;
GenerationMethod parse_generation_method(std::string_view text);

// Only the inpaint route carries the ROI guarantee.
Image generate(GenerationMethod method, GenerativeBackend& backend, const ModelHandle& handle,
               const InpaintRequest& request);

}  // namespace maskpaint::generative
