// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "maskpaint/core/image.hpp"
#include "maskpaint/core/io.hpp"
#include "maskpaint/datasets/manifest.hpp"

namespace maskpaint::datasets {

struct Palette {
    std::string name;
    std::array<double, 3> mean{128, 128, 128};
    double jitter = 8.0;  // per-image shift of the mean, per channel
    double noise = 6.0;   // per-pixel noise
};

enum class SpuriousKind { background, ruler };

struct SyntheticSpec {
    std::string name = "synthetic";
    int n_per_cell = 50;
    int image_size = 32;
    // Shape drawn for each class; class names default to the shape names.
    std::vector<std::string> class_shapes{"hbar", "vbar"};
    std::vector<std::string> class_names;
    SpuriousKind spurious = SpuriousKind::background;
    // Background mode: one palette per class, class i correlated with palette i.
    // Ruler mode: the first palette is the shared background.
    std::vector<Palette> background_palettes{
        {"land", {120, 150, 60}, 10.0, 6.0},
        {"water", {50, 90, 170}, 10.0, 6.0},
    };
    std::array<double, 3> object_color{235, 235, 235};
    double object_noise = 6.0;
    double correlation = 1.0;
    std::uint64_t noise_seed = 0;

    std::optional<int> train_per_class;  // default 2 * n_per_cell
    std::optional<int> val_per_class;    // default n_per_cell / 2
    std::optional<int> extra_per_cell;   // default n_per_cell

    std::vector<std::string> resolved_class_names() const;
    std::vector<std::string> group_values() const;
};

SyntheticSpec synth_spec_from_json(const json& j);
json synth_spec_to_json(const SyntheticSpec& spec);

struct SynthSample {
    Image image;
    Mask roi;
};

// Deterministic in (spec.noise_seed, sample id).
SynthSample render_sample(const SyntheticSpec& spec, std::size_t class_index, const std::string& group,
                          const std::string& sample_id);

// Writes images under out_dir/images/, ROI masks as out_dir/<id>.mask.png and
// the manifest as out_dir/manifest.jsonl.
DatasetManifest synth_dataset(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace maskpaint::datasets
