// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "maskpaint/core/io.hpp"

namespace maskpaint::datasets {

enum class Domain { source, target };
enum class Split { train, val, extra, test };

std::string_view to_string(Domain d) noexcept;
std::string_view to_string(Split s) noexcept;
Domain parse_domain(std::string_view text);
Split parse_split(std::string_view text);

inline constexpr Split kAllSplits[] = {Split::train, Split::val, Split::extra, Split::test};

// Links a generated record back to the sample it was derived from and to the
// stored generation result.
struct Provenance {
    std::string source_id;
    std::string generation_id;
    std::string result_ref;
    std::string method;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct SampleRecord {
    std::string id;
    std::string image_ref;
    std::string class_label;
    Domain domain = Domain::source;
    std::map<std::string, std::string> group_attrs;
    Split split = Split::train;
    std::optional<Provenance> provenance;

    bool generated() const noexcept { return provenance.has_value(); }

    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

inline constexpr int kSchemaVersion = 1;

struct DatasetManifest {
    std::string name;
    std::vector<std::string> classes;
    std::optional<std::string> spurious_attr;
    // Multi-label manifests store the class vector as a string of '0'/'1'
    // flags in `classes` order.
    bool multi_label = false;
    int schema_version = kSchemaVersion;
    std::vector<SampleRecord> records;

    std::vector<const SampleRecord*> in_split(Split split) const;
    std::size_t count(Split split) const;
    const SampleRecord* find(std::string_view id) const;
    std::optional<std::size_t> class_index(std::string_view label) const;

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

// Throws Errc::duplicate_id or Errc::manifest_invalid on the first violation.
void validate_manifest(const DatasetManifest& manifest);

json record_to_json(const SampleRecord& record);
SampleRecord record_from_json(const json& j);

// Line-delimited JSON: a header line followed by one record per line.
std::string serialize_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(std::string_view text);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

// Flag-vector helpers for multi-label manifests.
std::vector<std::string> decode_flags(const DatasetManifest& manifest, std::string_view class_label);

}  // namespace maskpaint::datasets
