// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "maskpaint/classifier/harness.hpp"
#include "maskpaint/pipeline/pipeline.hpp"
#include "maskpaint/prompts/prompt_engine.hpp"

namespace maskpaint::orchestrator {

struct StageInfo {
    std::string name;
    std::vector<std::string> deps;
};

// Topologically ordered: datasets, masks, finetune-source, finetune-target,
// generate, merge, train, eval, analyze.
const std::vector<StageInfo>& stage_graph();
const StageInfo& stage_info(const std::string& name);
// `name` and everything reachable from it, in graph order.
std::vector<std::string> downstream_of(const std::string& name);

// Training methods compared by the train/eval/analyze stages.
inline const std::vector<std::string> kMethods{"base", "cutmix", "mixup", "masked", "maskpaint"};
std::string method_title(const std::string& method);

struct RunConfig {
    std::string run_id = "run";
    std::uint64_t seed = 0;
    // Relative paths in the file resolve against this directory.
    std::filesystem::path base_dir;
    std::filesystem::path out_dir;
    // {"kind": "synthetic", "synthetic": {...}}, {"kind": "plan", "plan": file,
    // "metadata": file, "image_root": dir} or {"kind": "manifest", "manifest": file}.
    json dataset;
    std::optional<std::filesystem::path> prompts;
    pipeline::PipelineConfig pipeline;
    classifier::TrainConfig classifier;
    int train_seeds = 5;
    std::vector<std::string> methods = kMethods;
    // Optional spurious attribute for the flip analysis.
    std::optional<std::string> flip_attribute;
    classifier::TrainConfig attribute_classifier;
    json raw;

    // Comments are allowed. Throws Errc::config_invalid.
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig from_json(const json& j, const std::filesystem::path& base_dir);
    std::filesystem::path resolve(const std::filesystem::path& p) const;
    // Config slice each stage depends on.
    json stage_slice(const std::string& stage) const;
};

enum class StageStatus { pending, complete, stale, failed };
std::string_view to_string(StageStatus s) noexcept;

struct StageRecord {
    StageStatus status = StageStatus::pending;
    std::string hash;
    std::uint64_t seed = 0;
    std::string started_at;
    std::string finished_at;
    double seconds = 0.0;
    // Stage artefacts, relative to the run directory.
    json artifacts = json::object();
};

struct RunRecord {
    std::string run_id;
    std::string config_hash;
    std::uint64_t root_seed = 0;
    std::map<std::string, StageRecord> stages;

    static constexpr std::string_view kFileName = "run.json";
    json to_json() const;
    static RunRecord from_json(const json& j);
    void save(const std::filesystem::path& run_dir) const;
    // A fresh record when the file is absent.
    static RunRecord load(const std::filesystem::path& run_dir);
};

enum class PlanAction { run, skip };

struct PlannedStage {
    std::string name;
    PlanAction action = PlanAction::run;
    std::string hash;
    StageStatus recorded = StageStatus::pending;
};

class Orchestrator {
public:
    explicit Orchestrator(RunConfig cfg);

    const RunConfig& config() const { return m_cfg; }
    const RunRecord& record() const { return m_record; }
    const std::filesystem::path& run_dir() const { return m_cfg.out_dir; }

    // Hash of the stage's config slice chained with its dependencies' hashes.
    std::string stage_hash(const std::string& stage) const;
    // Per-stage seed derived from the root seed and the stage name.
    std::uint64_t stage_seed(const std::string& stage) const;

    // Stages whose recorded hash differs from the current config.
    std::vector<std::string> invalidated() const;

    // What run_all or run_through(target) would do, in order.
    std::vector<PlannedStage> plan(const std::optional<std::string>& target = std::nullopt) const;
    static std::string format_plan(const std::vector<PlannedStage>& plan);

    // Returns false when the stage is complete with the same hash and its
    // artefacts validate (a no-op). Throws Errc::stage_dependency_unmet when an
    // upstream stage is not complete under the current config.
    bool run_stage(const std::string& stage);
    // Runs every stage up to and including `target` (all when absent).
    void run_through(const std::optional<std::string>& target = std::nullopt);

    // Validates a stage's recorded artefacts. Throws on the first problem.
    void validate_stage(const std::string& stage) const;

private:
    void execute(const std::string& stage, StageRecord& rec);
    bool stage_current(const std::string& stage) const;
    const datasets::DatasetManifest& dataset_manifest();
    pipeline::PipelineConfig pipeline_config() const;
    const prompts::PromptRegistry& registry();

    RunConfig m_cfg;
    RunRecord m_record;
    std::optional<datasets::DatasetManifest> m_dataset;
    std::optional<prompts::PromptRegistry> m_registry;
};

}  // namespace maskpaint::orchestrator
