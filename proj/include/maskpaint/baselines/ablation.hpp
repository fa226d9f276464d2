// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "maskpaint/classifier/harness.hpp"
#include "maskpaint/classifier/metrics.hpp"
#include "maskpaint/generative/operations.hpp"
#include "maskpaint/pipeline/pipeline.hpp"

namespace maskpaint::baselines {

enum class AblationKind { real_vs_generated, generation_method };
std::string_view to_string(AblationKind kind) noexcept;
AblationKind parse_ablation_kind(std::string_view text);

struct AblationPlan {
    AblationKind kind = AblationKind::real_vs_generated;
    std::vector<std::size_t> real_counts{10, 20, 50, 100, 200};
    std::vector<std::size_t> generated_counts{1000, 2500, 5000};
    std::vector<generative::GenerationMethod> methods{generative::GenerationMethod::inpaint,
                                                      generative::GenerationMethod::text2img,
                                                      generative::GenerationMethod::img2img};
    int seeds = 5;
    // Images generated per seed in a generation_method ablation.
    std::size_t method_count = 2500;

    static AblationPlan from_json(const json& j);
    json to_json() const;
    // Counts must be positive and strictly ascending.
    void validate() const;
};

// One (condition, count or method, seed) run. `condition` is "real",
// "generated" or "method".
struct AblationCell {
    std::string id;
    std::string condition;
    std::size_t count = 0;
    std::optional<generative::GenerationMethod> method;
    int seed_index = 0;
    // Shared by every cell with the same seed index.
    std::uint64_t classifier_seed = 0;
    // Selection of real images or generation draws.
    std::uint64_t data_seed = 0;

    json to_json() const;
    static AblationCell from_json(const json& j);
};

std::vector<AblationCell> enumerate_cells(const AblationPlan& plan, std::uint64_t root_seed);

struct CellMetrics {
    double overall = 0.0;
    double source = 0.0;
    double target = 0.0;
};

using CellEvaluator = std::function<CellMetrics(const AblationCell&)>;

struct AblationRow {
    std::string condition;
    std::size_t count = 0;
    std::optional<generative::GenerationMethod> method;
    classifier::MetricSummary overall;
    classifier::MetricSummary source;
    classifier::MetricSummary target;
    std::vector<std::uint64_t> seeds;
};

struct AblationReport {
    AblationPlan plan;
    std::uint64_t root_seed = 0;
    std::vector<std::pair<AblationCell, CellMetrics>> cells;
    std::vector<AblationRow> rows;

    json to_json() const;
    // Plot-ready series: condition -> points ordered by count (or method).
    json series() const;
};

// Runs every cell not already logged in out_dir/cells.jsonl, appending one
// line per finished cell, then writes report.json and series.json. Throws
// Errc::insufficient_target_pool when the labeled target pool is smaller than
// the largest real count.
AblationReport run_ablation(const AblationPlan& plan, std::uint64_t root_seed, std::size_t target_pool_size,
                            const CellEvaluator& evaluator, const std::filesystem::path& out_dir);

// The usual evaluator: trains a classifier per cell and reports accuracy (or
// mean AUROC) on the full test split and on its source and target parts.
// Real cells move `count` seeded picks from the extra pool into train; the
// other cells add pipeline generations.
class StandardEvaluator {
public:
    StandardEvaluator(datasets::DatasetManifest manifest, std::filesystem::path manifest_dir,
                      pipeline::PipelineConfig pipeline_cfg, classifier::TrainConfig train_cfg,
                      std::filesystem::path work_dir,
                      const prompts::PromptRegistry& registry = prompts::PromptRegistry::defaults());

    CellMetrics operator()(const AblationCell& cell);
    std::size_t target_pool_size() const { return m_manifest.count(datasets::Split::extra); }

private:
    CellMetrics train_and_score(const datasets::DatasetManifest& manifest, const std::filesystem::path& dir,
                                const AblationCell& cell);
    const pipeline::PreparedModels& models();

    datasets::DatasetManifest m_manifest;
    std::filesystem::path m_manifest_dir;
    pipeline::PipelineConfig m_pipeline;
    classifier::TrainConfig m_train;
    std::filesystem::path m_work_dir;
    prompts::PromptRegistry m_registry;
    std::optional<pipeline::PreparedModels> m_models;
    std::optional<generative::GridPoint> m_point;
};

}  // namespace maskpaint::baselines
