// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/datasets/manifest.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>

#include "maskpaint/core/error.hpp"

namespace maskpaint::datasets {

std::string_view to_string(Domain d) noexcept {
    return d == Domain::source ? "source" : "target";
}

std::string_view to_string(Split s) noexcept {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::extra: return "extra";
    case Split::test: return "test";
    }
    return "train";
}

Domain parse_domain(std::string_view text) {
    if (text == "source") return Domain::source;
    if (text == "target") return Domain::target;
    raise(Errc::manifest_invalid, "unknown domain '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
    for (Split s : kAllSplits)
        if (to_string(s) == text) return s;
    raise(Errc::manifest_invalid, "unknown split '" + std::string(text) + "'");
}

std::vector<const SampleRecord*> DatasetManifest::in_split(Split split) const {
    std::vector<const SampleRecord*> out;
    for (const auto& r : records)
        if (r.split == split) out.push_back(&r);
    return out;
}

std::size_t DatasetManifest::count(Split split) const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [split](const auto& r) { return r.split == split; }));
}

const SampleRecord* DatasetManifest::find(std::string_view id) const {
    for (const auto& r : records)
        if (r.id == id) return &r;
    return nullptr;
}

std::optional<std::size_t> DatasetManifest::class_index(std::string_view label) const {
    for (std::size_t i = 0; i < classes.size(); ++i)
        if (classes[i] == label) return i;
    return std::nullopt;
}

std::vector<std::string> decode_flags(const DatasetManifest& manifest, std::string_view class_label) {
    if (class_label.size() != manifest.classes.size())
        raise(Errc::manifest_invalid, "flag vector '" + std::string(class_label) + "' does not match class count");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < class_label.size(); ++i) {
        if (class_label[i] == '1')
            out.push_back(manifest.classes[i]);
        else if (class_label[i] != '0')
            raise(Errc::manifest_invalid, "flag vector '" + std::string(class_label) + "' has non-binary entries");
    }
    return out;
}

void validate_manifest(const DatasetManifest& manifest) {
    if (manifest.schema_version != kSchemaVersion)
        raise(Errc::manifest_invalid, "unsupported schema_version " + std::to_string(manifest.schema_version));
    std::set<std::string> ids;
    std::unordered_map<std::string, Split> ref_split;
    const std::set<std::string> vocab(manifest.classes.begin(), manifest.classes.end());
    for (const auto& r : manifest.records) {
        if (r.id.empty()) raise(Errc::manifest_invalid, "record with empty id");
        if (!ids.insert(r.id).second) raise(Errc::duplicate_id, "duplicate record id '" + r.id + "'");
        if ((r.split == Split::train || r.split == Split::val) && r.domain != Domain::source)
            raise(Errc::manifest_invalid, "record '" + r.id + "' is in a source split but tagged target");
        if (r.split == Split::extra && r.domain != Domain::target)
            raise(Errc::manifest_invalid, "record '" + r.id + "' is in the extra split but tagged source");
        if (manifest.multi_label) {
            decode_flags(manifest, r.class_label);
        } else if (!vocab.contains(r.class_label)) {
            raise(Errc::manifest_invalid, "record '" + r.id + "' has class '" + r.class_label + "' outside vocabulary");
        }
        auto [it, inserted] = ref_split.emplace(r.image_ref, r.split);
        if (!inserted && it->second != r.split)
            raise(Errc::manifest_invalid, "image_ref '" + r.image_ref + "' appears in splits " +
                                              std::string(to_string(it->second)) + " and " +
                                              std::string(to_string(r.split)));
    }
}

namespace {

ordered_json record_to_ordered(const SampleRecord& r) {
    ordered_json j;
    j["id"] = r.id;
    j["image_ref"] = r.image_ref;
    j["class_label"] = r.class_label;
    j["domain"] = to_string(r.domain);
    j["group_attrs"] = r.group_attrs;
    j["split"] = to_string(r.split);
    if (r.provenance) {
        ordered_json p;
        p["source_id"] = r.provenance->source_id;
        p["generation_id"] = r.provenance->generation_id;
        p["result_ref"] = r.provenance->result_ref;
        p["method"] = r.provenance->method;
        j["provenance"] = p;
    }
    return j;
}

}  // namespace

json record_to_json(const SampleRecord& r) {
    return json::parse(record_to_ordered(r).dump());
}

SampleRecord record_from_json(const json& j) {
    try {
        SampleRecord r;
        r.id = j.at("id").get<std::string>();
        r.image_ref = j.at("image_ref").get<std::string>();
        r.class_label = j.at("class_label").get<std::string>();
        r.domain = parse_domain(j.at("domain").get<std::string>());
        r.group_attrs = j.value("group_attrs", std::map<std::string, std::string>{});
        r.split = parse_split(j.at("split").get<std::string>());
        if (j.contains("provenance")) {
            const auto& p = j.at("provenance");
            r.provenance = Provenance{p.at("source_id").get<std::string>(), p.at("generation_id").get<std::string>(),
                                      p.value("result_ref", ""), p.value("method", "inpaint")};
        }
        return r;
    } catch (const json::exception& e) {
        raise(Errc::manifest_invalid, std::string("malformed record: ") + e.what());
    }
}

std::string serialize_manifest(const DatasetManifest& m) {
    ordered_json header;
    header["kind"] = "header";
    header["name"] = m.name;
    header["classes"] = m.classes;
    header["spurious_attr"] = m.spurious_attr ? ordered_json(*m.spurious_attr) : ordered_json(nullptr);
    header["multi_label"] = m.multi_label;
    header["schema_version"] = m.schema_version;
    std::string out = header.dump() + "\n";
    for (const auto& r : m.records) out += record_to_ordered(r).dump() + "\n";
    return out;
}

DatasetManifest parse_manifest(std::string_view text) {
    DatasetManifest m;
    std::istringstream in{std::string(text)};
    std::string line;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            raise(Errc::manifest_invalid, "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!have_header) {
            if (j.value("kind", "") != "header")
                raise(Errc::manifest_invalid, "first line must be the manifest header");
            m.name = j.value("name", "");
            m.classes = j.value("classes", std::vector<std::string>{});
            if (j.contains("spurious_attr") && !j["spurious_attr"].is_null())
                m.spurious_attr = j["spurious_attr"].get<std::string>();
            m.multi_label = j.value("multi_label", false);
            m.schema_version = j.value("schema_version", 0);
            if (m.schema_version != kSchemaVersion)
                raise(Errc::manifest_invalid, "unsupported schema_version " + std::to_string(m.schema_version));
            have_header = true;
            continue;
        }
        m.records.push_back(record_from_json(j));
    }
    if (!have_header) raise(Errc::manifest_invalid, "manifest has no header line");
    return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    write_text_atomic(path, serialize_manifest(manifest));
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    return parse_manifest(read_text(path));
}

}  // namespace maskpaint::datasets
