// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "maskpaint/core/csv.hpp"
#include "maskpaint/core/io.hpp"
#include "maskpaint/datasets/manifest.hpp"

namespace maskpaint::datasets {

// One (class, group, split) cell. An absent class matches any class; each
// group key lists the accepted values of that metadata column.
struct CellSpec {
    std::optional<std::string> class_label;
    std::map<std::string, std::vector<std::string>> group;
    Split split = Split::train;
    std::size_t count = 0;
    std::optional<Domain> domain;

    std::string key() const;
};

struct SplitPlan {
    std::string name;
    std::vector<std::string> classes;
    std::optional<std::string> spurious_attr;
    bool multi_label = false;

    std::string id_column = "id";
    std::string image_column = "image_ref";
    // Single-label: the column holding the class name. Multi-label: unused;
    // one 0/1 column per entry of `classes`.
    std::string class_column = "class_label";
    // Metadata columns copied into SampleRecord::group_attrs.
    std::vector<std::string> attr_columns;

    std::vector<CellSpec> cells;
    std::uint64_t sampling_seed = 0;

    std::size_t split_total(Split split) const;
};

SplitPlan plan_from_json(const json& j);
json plan_to_json(const SplitPlan& plan);
SplitPlan load_plan(const std::filesystem::path& path);

struct BuildOptions {
    // When set, every selected image_ref must exist under this root and decode.
    std::optional<std::filesystem::path> image_root;
};

// Samples each cell uniformly without replacement under the plan's seed.
// Throws InsufficientCellError, Errc::duplicate_id, Errc::missing_column.
DatasetManifest build_manifest(const Table& metadata, const SplitPlan& plan, const BuildOptions& options = {});

// Metadata with `per_cell + surplus` rows matching each cell: classes
// round-robin for class-free cells, the first accepted value of each group
// attribute, and seeded random flags for multi-label plans.
Table synthetic_metadata(const SplitPlan& plan, std::size_t surplus = 0);

struct FilterLog {
    std::size_t input_rows = 0;
    std::size_t after_label_filter = 0;
    std::size_t after_patch_filter = 0;
};

struct IsicFilterOptions {
    std::string label_column = "label";
    std::string patch_column = "patches";
};

// Keeps benign/malignant rows without patch artifacts.
Table filter_isic(const Table& metadata, FilterLog* log = nullptr, const IsicFilterOptions& options = {});

}  // namespace maskpaint::datasets
