// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "maskpaint/classifier/harness.hpp"
#include "maskpaint/datasets/manifest.hpp"
#include "maskpaint/generative/operations.hpp"
#include "maskpaint/masking/roi.hpp"
#include "maskpaint/prompts/prompt_engine.hpp"
#include "maskpaint/review/queue.hpp"

namespace maskpaint::pipeline {

enum class GridSelection { validation, fixed };
enum class ReviewMode { automatic, queue };

struct PipelineConfig {
    // Prompt-table entry used for every stage.
    std::string dataset = "synthetic";
    std::string segmenter = "stored";
    std::string remover = "mean-fill";
    std::string backend = "mock";
    std::optional<ExternalCommand> segmenter_command;
    std::optional<ExternalCommand> remover_command;
    std::optional<ExternalCommand> backend_command;
    // Stored-mask directory; defaults to the manifest directory.
    std::optional<std::filesystem::path> mask_dir;
    double coverage_floor = masking::kDefaultCoverageFloor;
    int dilation_px = 0;
    masking::StructuringElement dilation_element = masking::StructuringElement::disc;

    generative::FinetuneConfig source_finetune = generative::FinetuneConfig::source_defaults();
    generative::FinetuneConfig target_finetune = generative::FinetuneConfig::target_defaults();
    generative::TargetImageGuard target_guard;

    generative::InpaintGrid grid;
    GridSelection selection = GridSelection::validation;
    generative::GridPoint fixed_point{1.0, 7.5};
    // Validation selection: images generated per grid point and the probe
    // classifier trained on train + probe images.
    int probe_generated = 64;
    classifier::TrainConfig probe_classifier;

    int n_generated = 2500;
    generative::GenerationMethod method = generative::GenerationMethod::inpaint;
    // The only policy: originals plus generated records.
    std::string merge_policy = "originals_plus_generated";
    ReviewMode review = ReviewMode::automatic;
    std::size_t backend_batch = 32;
    std::uint64_t seed = 0;

    static PipelineConfig from_json(const json& j);
    json to_json() const;
    void validate() const;
};

struct SkippedSample {
    std::string sample_id;
    std::string stage;
    std::string reason;
};

// One planned generation; ids and seeds depend only on the root seed and
// the draw index.
struct GenerationDraw {
    std::size_t index = 0;
    std::string id;
    std::string source_id;
    std::uint64_t seed = 0;
};

// Per-class quotas proportional to train class frequency (largest
// remainder). Sources are drawn without replacement while n does not exceed
// the train size, otherwise with replacement.
std::map<std::string, std::size_t> class_quotas(const datasets::DatasetManifest& manifest, std::size_t n);
std::vector<GenerationDraw> plan_generations(const datasets::DatasetManifest& manifest, std::size_t n,
                                             std::uint64_t seed);

struct PreparedModels {
    generative::ModelHandle source;
    generative::ModelHandle target;
    std::filesystem::path mask_dir;
    std::vector<SkippedSample> skipped;
};

struct PipelineHooks {
    // Called after each stored generation with the number stored so far.
    std::function<void(std::size_t)> after_generation;
};

struct PipelineOutcome {
    datasets::DatasetManifest manifest;
    std::vector<SkippedSample> skipped;
    bool partial_failure = false;
    generative::GridPoint grid_point;
    std::map<std::string, std::size_t> generated_per_class;
    std::vector<std::string> generation_ids;
    std::optional<std::string> queue_id;
};

struct MaskStage {
    std::filesystem::path mask_dir;
    std::vector<SkippedSample> skipped;
};

// Segments train, val and extra images into work_dir/masks/ (resumable). Images
// whose ROI falls below the coverage floor are recorded as skipped.
MaskStage compute_masks(const PipelineConfig& cfg, const datasets::DatasetManifest& manifest,
                        const std::filesystem::path& manifest_dir, const std::filesystem::path& work_dir);
generative::ModelHandle finetune_source_stage(const PipelineConfig& cfg, const datasets::DatasetManifest& manifest,
                                              const std::filesystem::path& manifest_dir,
                                              const std::filesystem::path& work_dir,
                                              const prompts::PromptRegistry& registry = prompts::PromptRegistry::defaults());
// Target backgrounds under work_dir/backgrounds/.
std::vector<std::filesystem::path> extract_backgrounds(const PipelineConfig& cfg,
                                                       const datasets::DatasetManifest& manifest,
                                                       const std::filesystem::path& manifest_dir,
                                                       const std::filesystem::path& work_dir);
generative::ModelHandle finetune_target_stage(const PipelineConfig& cfg, const generative::ModelHandle& source,
                                              const std::vector<std::filesystem::path>& backgrounds,
                                              const std::filesystem::path& work_dir,
                                              const prompts::PromptRegistry& registry = prompts::PromptRegistry::defaults());

// Steps 1-2: segment train and extra images, fine-tune on source pairs,
// extract target backgrounds and fine-tune on them. Reuses artefacts found in
// work_dir.
PreparedModels prepare_models(const PipelineConfig& cfg, const datasets::DatasetManifest& manifest,
                              const std::filesystem::path& manifest_dir, const std::filesystem::path& work_dir,
                              const prompts::PromptRegistry& registry = prompts::PromptRegistry::defaults());

// Step 3 for one (n, seed): writes generated/<id>.png and <id>.json under
// out_dir, skipping ids already stored. Returns generated records.
struct GenerationBatch {
    std::vector<datasets::SampleRecord> records;
    std::vector<SkippedSample> skipped;
};
GenerationBatch generate_augmentations(const PipelineConfig& cfg, const datasets::DatasetManifest& manifest,
                                       const std::filesystem::path& manifest_dir, const PreparedModels& models,
                                       const generative::GridPoint& point, std::size_t n, std::uint64_t seed,
                                       const std::filesystem::path& out_dir,
                                       const prompts::PromptRegistry& registry = prompts::PromptRegistry::defaults(),
                                       const PipelineHooks& hooks = {});

generative::GridPoint select_grid_point(const PipelineConfig& cfg, const datasets::DatasetManifest& manifest,
                                        const std::filesystem::path& manifest_dir, const PreparedModels& models,
                                        const std::filesystem::path& work_dir,
                                        const prompts::PromptRegistry& registry = prompts::PromptRegistry::defaults());

// Originals (refs rebased onto out_dir) followed by generated records.
datasets::DatasetManifest merge_records(const datasets::DatasetManifest& manifest,
                                        const std::filesystem::path& manifest_dir,
                                        const std::vector<datasets::SampleRecord>& generated,
                                        const std::filesystem::path& out_dir);

// Full run. Writes out_dir/manifest.jsonl, run_meta.json and results.jsonl;
// in queue review mode also exports the review queue under out_dir/review/.
// Throws Errc::empty_split when the manifest has no target extra images.
PipelineOutcome run_pipeline(const PipelineConfig& cfg, const datasets::DatasetManifest& manifest,
                             const std::filesystem::path& manifest_dir, const std::filesystem::path& out_dir,
                             const prompts::PromptRegistry& registry = prompts::PromptRegistry::defaults(),
                             const PipelineHooks& hooks = {});

// Stored generation results, in the form written by the pipeline.
struct StoredResult {
    std::string id;
    std::string source_sample_id;
    std::string source_image_ref;
    std::string image_ref;
    std::string protection_mask_ref;
    std::string class_label;
    std::string prompt;
    std::string method;
    double strength = 0.0;
    double guidance_scale = 0.0;
    std::uint64_t seed = 0;
    std::string backend_id;
    double wall_time = 0.0;
    std::string review_status;

    json to_json() const;
    static StoredResult from_json(const json& j);
};

// Results are stored beside their images; refs are relative to `run_dir`.
StoredResult load_result(const std::filesystem::path& run_dir, const std::string& result_ref);

// Enqueues every result as a pending item. Re-exporting the same results is
// a no-op. The queue id defaults to a digest of the result ids.
std::string export_review_queue(const std::vector<StoredResult>& results, const std::filesystem::path& run_dir,
                                const std::filesystem::path& queues_root,
                                std::optional<std::string> queue_id = std::nullopt);

// Keeps originals plus the generated records whose queue item is approved;
// auto mode keeps every generated record. Throws Errc::queue_not_finalized
// while items are pending unless auto mode is set.
datasets::DatasetManifest merge_approved(const datasets::DatasetManifest& manifest, const review::ReviewQueue& queue,
                                         bool auto_mode = false);

}  // namespace maskpaint::pipeline
