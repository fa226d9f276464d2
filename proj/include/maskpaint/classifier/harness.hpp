// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "maskpaint/classifier/tensor.hpp"
#include "maskpaint/core/external.hpp"
#include "maskpaint/core/rng.hpp"
#include "maskpaint/datasets/manifest.hpp"

namespace maskpaint::classifier {

enum class Init { pretrained, random };

struct TrainConfig {
    std::string backbone = "tiny-cnn";
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    int batch_size = 64;
    int epochs = 20;
    int input_size = 224;
    Normalization normalization;
    Init init = Init::random;
    std::uint64_t seed = 0;
    // Built-in network widths.
    std::array<int, 2> widths{8, 16};
    // Worker for any backbone other than the built-in one.
    std::optional<ExternalCommand> external;

    static TrainConfig from_json(const json& j);
    json to_json() const;
    void validate() const;
};

// Ordered samples with soft target vectors (one-hot for single-label,
// 0/1 flags for multi-label).
struct LabeledSet {
    std::vector<std::string> ids;
    std::vector<std::filesystem::path> images;
    std::vector<std::vector<float>> targets;

    std::size_t size() const noexcept { return ids.size(); }
    void append(const LabeledSet& other);
};

LabeledSet labeled_split(const datasets::DatasetManifest& manifest, const std::filesystem::path& manifest_dir,
                         datasets::Split split, std::optional<datasets::Domain> domain = std::nullopt);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_score = 0.0;
};

struct ClassifierHandle {
    std::filesystem::path dir;
    std::string backbone;
    std::vector<std::string> classes;
    bool multi_label = false;
    TrainConfig config;
    int best_epoch = 0;
    double best_val_score = 0.0;
    std::vector<EpochLog> curve;

    static constexpr std::string_view kFileName = "classifier.json";
    void save() const;
    static ClassifierHandle load(const std::filesystem::path& dir);
};

// Mutates a training batch in place (Mixup, CutMix, ...).
using BatchTransform = std::function<void(Batch&, Rng&)>;

struct TrainOptions {
    BatchTransform batch_transform;
};

class ClassifierBackbone {
public:
    virtual ~ClassifierBackbone() = default;
    virtual std::string id() const = 0;
    virtual ClassifierHandle train(const LabeledSet& train, const LabeledSet& val,
                                   const std::vector<std::string>& classes, bool multi_label, const TrainConfig& cfg,
                                   const TrainOptions& options, const std::filesystem::path& out_dir) = 0;
    // Softmax probabilities (single-label) or sigmoid scores (multi-label).
    virtual std::vector<std::vector<double>> predict(const ClassifierHandle& handle,
                                                     const std::vector<std::filesystem::path>& images) = 0;
};

// Returns the built-in network for "tiny-cnn", otherwise an adapter that
// forwards to cfg.external (e.g. a densenet121 worker).
std::unique_ptr<ClassifierBackbone> make_classifier_backbone(const TrainConfig& cfg);

// Throws Errc::empty_split when train or val is empty.
ClassifierHandle train_sets(const LabeledSet& train, const LabeledSet& val, const std::vector<std::string>& classes,
                            bool multi_label, const TrainConfig& cfg, const std::filesystem::path& out_dir,
                            const TrainOptions& options = {});

// Trains on the train split and selects the checkpoint by source-val score.
ClassifierHandle train(const datasets::DatasetManifest& manifest, const std::filesystem::path& manifest_dir,
                       const TrainConfig& cfg, const std::filesystem::path& out_dir, const TrainOptions& options = {});

std::vector<std::vector<double>> predict(const ClassifierHandle& handle,
                                         const std::vector<std::filesystem::path>& images);

struct DomainEval {
    std::string domain;
    // "accuracy" for single-label, "auroc" (mean over classes) for multi-label.
    std::string metric;
    double value = 0.0;
    std::vector<double> per_class;
    std::vector<std::string> ids;
    std::vector<std::vector<double>> scores;
};

// Scores the test split, optionally restricted to one domain. "all" is
// reported as the domain name when unrestricted.
DomainEval evaluate(const ClassifierHandle& handle, const datasets::DatasetManifest& manifest,
                    const std::filesystem::path& manifest_dir, std::optional<datasets::Domain> domain);

// Scores a labeled set with the metric matching the handle's label type.
DomainEval evaluate_set(const ClassifierHandle& handle, const LabeledSet& set, const std::string& domain_name);

}  // namespace maskpaint::classifier
