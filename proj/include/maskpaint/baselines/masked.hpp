// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "maskpaint/datasets/manifest.hpp"
#include "maskpaint/masking/roi.hpp"

namespace maskpaint::baselines {

struct MaskedBaseline {
    datasets::DatasetManifest manifest;
    // Train/val samples dropped because their ROI is empty.
    std::vector<std::string> excluded;
};

// Train and val images keep only their ROI (mask_dir/<id>.mask.png); the
// rest is filled. Writes out_dir/masked/<id>.png and out_dir/manifest.jsonl.
// Test and extra records are kept with refs rebased onto out_dir.
// Throws Errc::missing_mask when a train or val mask is absent.
MaskedBaseline masked_baseline(const datasets::DatasetManifest& manifest, const std::filesystem::path& manifest_dir,
                               const std::filesystem::path& mask_dir, const std::filesystem::path& out_dir,
                               masking::Fill fill = masking::kNormalizationMeanFill);

}  // namespace maskpaint::baselines
