// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "maskpaint/classifier/harness.hpp"
#include "maskpaint/datasets/manifest.hpp"
#include "maskpaint/pipeline/pipeline.hpp"

namespace maskpaint::analysis {

struct AttributeModel {
    // Holds attribute.json and the classifier/ directory.
    std::filesystem::path dir;
    std::string attribute;
    // Attribute values in classifier output order.
    std::vector<std::string> values;
    classifier::ClassifierHandle handle;
    // Held-out (test split) accuracy.
    double accuracy = 0.0;

    void save() const;
    static AttributeModel load(const std::filesystem::path& dir);
};

// Relabels every annotated record by its `attribute` value and trains the
// usual classifier on train + extra, selecting on val and scoring on test.
// Throws Errc::missing_annotation when any original record lacks the
// attribute.
AttributeModel train_attribute_classifier(const datasets::DatasetManifest& manifest,
                                          const std::filesystem::path& manifest_dir, const std::string& attribute,
                                          const classifier::TrainConfig& cfg, const std::filesystem::path& out_dir);

struct AttributePrediction {
    std::string generation_id;
    std::string source_id;
    std::string class_label;
    std::string source_attribute;
    std::string predicted_attribute;

    bool flipped() const { return source_attribute != predicted_attribute; }
    json to_json() const;
    static AttributePrediction from_json(const json& j);
};

struct ClassFlips {
    std::size_t flipped = 0;
    std::size_t total = 0;
    double rate() const { return total == 0 ? 0.0 : static_cast<double>(flipped) / static_cast<double>(total); }
};

struct FlipReport {
    std::string attribute;
    std::map<std::string, ClassFlips> per_class;
    double attribute_classifier_accuracy = 0.0;

    json to_json() const;
};

// Predicts the attribute of each generated image. The source attribute comes
// from the manifest record named by the result. Throws
// Errc::provenance_missing when a result cannot be linked to an annotated
// source record.
std::vector<AttributePrediction> predict_attributes(const std::vector<pipeline::StoredResult>& results,
                                                    const std::filesystem::path& run_dir,
                                                    const datasets::DatasetManifest& source_manifest,
                                                    const AttributeModel& model);

// Per-class flip fractions; the denominator is the generated count per class.
FlipReport flip_report(const std::vector<AttributePrediction>& predictions, const std::string& attribute,
                       double attribute_accuracy);

// predict_attributes followed by flip_report. Stored predictions go to
// out_dir/predictions.jsonl and the report to out_dir/flips.json.
FlipReport flip_rates(const std::vector<pipeline::StoredResult>& results, const std::filesystem::path& run_dir,
                      const datasets::DatasetManifest& source_manifest, const AttributeModel& model,
                      const std::filesystem::path& out_dir);

std::vector<pipeline::StoredResult> load_results(const std::filesystem::path& run_dir);

}  // namespace maskpaint::analysis
