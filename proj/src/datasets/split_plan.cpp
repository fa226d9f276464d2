// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/datasets/split_plan.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>

#include <spdlog/spdlog.h>

#include "maskpaint/core/error.hpp"
#include "maskpaint/core/image.hpp"
#include "maskpaint/core/rng.hpp"

namespace maskpaint::datasets {

namespace fs = std::filesystem;

std::string CellSpec::key() const {
    std::string k = "class=" + class_label.value_or("*");
    for (const auto& [attr, values] : group) {
        k += "," + attr + "=";
        for (std::size_t i = 0; i < values.size(); ++i) k += (i ? "|" : "") + values[i];
    }
    k += ",split=" + std::string(to_string(split));
    return k;
}

std::size_t SplitPlan::split_total(Split split) const {
    std::size_t n = 0;
    for (const auto& c : cells)
        if (c.split == split) n += c.count;
    return n;
}

SplitPlan plan_from_json(const json& j) {
    try {
        SplitPlan plan;
        plan.name = j.at("name").get<std::string>();
        plan.classes = j.at("classes").get<std::vector<std::string>>();
        if (j.contains("spurious_attr") && !j["spurious_attr"].is_null())
            plan.spurious_attr = j["spurious_attr"].get<std::string>();
        plan.multi_label = j.value("multi_label", false);
        if (j.contains("columns")) {
            const auto& c = j["columns"];
            plan.id_column = c.value("id", plan.id_column);
            plan.image_column = c.value("image", plan.image_column);
            plan.class_column = c.value("class", plan.class_column);
        }
        plan.attr_columns = j.value("attr_columns", std::vector<std::string>{});
        plan.sampling_seed = j.value("sampling_seed", std::uint64_t{0});
        for (const auto& cj : j.at("cells")) {
            CellSpec cell;
            if (cj.contains("class") && !cj["class"].is_null()) cell.class_label = cj["class"].get<std::string>();
            if (cj.contains("group")) {
                for (const auto& [attr, v] : cj["group"].items()) {
                    if (v.is_array())
                        cell.group[attr] = v.get<std::vector<std::string>>();
                    else
                        cell.group[attr] = {v.get<std::string>()};
                }
            }
            cell.split = parse_split(cj.at("split").get<std::string>());
            cell.count = cj.at("count").get<std::size_t>();
            if (cj.contains("domain")) cell.domain = parse_domain(cj["domain"].get<std::string>());
            plan.cells.push_back(std::move(cell));
        }
        if (plan.attr_columns.empty()) {
            std::set<std::string> keys;
            for (const auto& c : plan.cells)
                for (const auto& [attr, _] : c.group) keys.insert(attr);
            plan.attr_columns.assign(keys.begin(), keys.end());
        }
        return plan;
    } catch (const json::exception& e) {
        raise(Errc::config_invalid, std::string("malformed split plan: ") + e.what());
    }
}

json plan_to_json(const SplitPlan& plan) {
    json j;
    j["name"] = plan.name;
    j["classes"] = plan.classes;
    j["spurious_attr"] = plan.spurious_attr ? json(*plan.spurious_attr) : json(nullptr);
    j["multi_label"] = plan.multi_label;
    j["columns"] = {{"id", plan.id_column}, {"image", plan.image_column}, {"class", plan.class_column}};
    j["attr_columns"] = plan.attr_columns;
    j["sampling_seed"] = plan.sampling_seed;
    j["cells"] = json::array();
    for (const auto& c : plan.cells) {
        json cj;
        cj["class"] = c.class_label ? json(*c.class_label) : json(nullptr);
        json g = json::object();
        for (const auto& [attr, values] : c.group) g[attr] = values.size() == 1 ? json(values[0]) : json(values);
        cj["group"] = g;
        cj["split"] = to_string(c.split);
        cj["count"] = c.count;
        if (c.domain) cj["domain"] = to_string(*c.domain);
        j["cells"].push_back(cj);
    }
    return j;
}

SplitPlan load_plan(const fs::path& path) {
    return plan_from_json(read_json_file(path));
}

namespace {

bool truthy(std::string_view v) {
    std::string s(v);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s == "1" || s == "yes" || s == "true" || s == "y";
}

struct ResolvedColumns {
    std::size_t id;
    std::size_t image;
    std::optional<std::size_t> class_col;
    std::vector<std::size_t> label_cols;  // multi-label
    std::vector<std::pair<std::string, std::size_t>> attrs;
    std::vector<std::pair<std::string, std::size_t>> group_cols;
};

std::string row_class_label(const Table& t, std::size_t row, const ResolvedColumns& cols, const SplitPlan& plan) {
    if (!plan.multi_label) return t.cell(row, *cols.class_col);
    std::string flags;
    for (auto c : cols.label_cols) flags += truthy(t.cell(row, c)) ? '1' : '0';
    return flags;
}

bool row_matches(const Table& t, std::size_t row, const CellSpec& cell, const ResolvedColumns& cols,
                 const std::string& label) {
    if (cell.class_label && *cell.class_label != label) return false;
    for (const auto& [attr, values] : cell.group) {
        auto it = std::find_if(cols.group_cols.begin(), cols.group_cols.end(),
                               [&](const auto& p) { return p.first == attr; });
        const std::string& v = t.cell(row, it->second);
        if (std::find(values.begin(), values.end(), v) == values.end()) return false;
    }
    return true;
}

// Test cells without an explicit domain are source when their group also
// appears in a train cell of the same class.
Domain infer_domain(const CellSpec& cell, const SplitPlan& plan) {
    if (cell.domain) return *cell.domain;
    if (cell.split == Split::train || cell.split == Split::val) return Domain::source;
    if (cell.split == Split::extra) return Domain::target;
    for (const auto& other : plan.cells) {
        if (other.split != Split::train) continue;
        const bool same_class = !other.class_label || !cell.class_label || *other.class_label == *cell.class_label;
        if (same_class && other.group == cell.group) return Domain::source;
    }
    return Domain::target;
}

void check_image(const fs::path& root, const std::string& ref) {
    const fs::path p = root / ref;
    if (!fs::exists(p)) raise(Errc::io_failure, "image file missing: " + p.string());
    (void)read_png(p);
}

}  // namespace

DatasetManifest build_manifest(const Table& metadata, const SplitPlan& plan, const BuildOptions& options) {
    ResolvedColumns cols;
    cols.id = metadata.require_column(plan.id_column);
    cols.image = metadata.require_column(plan.image_column);
    if (plan.multi_label) {
        for (const auto& c : plan.classes) cols.label_cols.push_back(metadata.require_column(c));
    } else {
        cols.class_col = metadata.require_column(plan.class_column);
    }
    for (const auto& a : plan.attr_columns) cols.attrs.emplace_back(a, metadata.require_column(a));
    {
        std::set<std::string> keys;
        for (const auto& c : plan.cells)
            for (const auto& [attr, _] : c.group) keys.insert(attr);
        for (const auto& k : keys) cols.group_cols.emplace_back(k, metadata.require_column(k));
    }

    const std::set<std::string> vocab(plan.classes.begin(), plan.classes.end());
    std::vector<std::string> labels(metadata.rows());
    std::vector<bool> eligible(metadata.rows(), true);
    {
        std::set<std::string> seen;
        for (std::size_t r = 0; r < metadata.rows(); ++r) {
            if (!seen.insert(metadata.cell(r, cols.id)).second)
                raise(Errc::duplicate_id, "metadata id '" + metadata.cell(r, cols.id) + "' appears twice");
            labels[r] = row_class_label(metadata, r, cols, plan);
            if (!plan.multi_label && !vocab.contains(labels[r])) eligible[r] = false;
        }
    }

    DatasetManifest manifest;
    manifest.name = plan.name;
    manifest.classes = plan.classes;
    manifest.spurious_attr = plan.spurious_attr;
    manifest.multi_label = plan.multi_label;

    std::vector<bool> used(metadata.rows(), false);
    for (const auto& cell : plan.cells) {
        if ((cell.split == Split::train || cell.split == Split::val) && cell.domain == Domain::target)
            raise(Errc::config_invalid, "cell " + cell.key() + " puts target-domain rows in a source split");
        if (cell.split == Split::extra && cell.domain == Domain::source)
            raise(Errc::config_invalid, "cell " + cell.key() + " puts source-domain rows in the extra split");
        if (cell.class_label && !vocab.contains(*cell.class_label))
            raise(Errc::config_invalid, "cell " + cell.key() + " names a class outside the vocabulary");

        std::vector<std::size_t> candidates;
        for (std::size_t r = 0; r < metadata.rows(); ++r)
            if (eligible[r] && !used[r] && row_matches(metadata, r, cell, cols, labels[r])) candidates.push_back(r);
        if (candidates.size() < cell.count) throw InsufficientCellError(cell.key(), cell.count, candidates.size());

        const std::size_t available = candidates.size();
        Rng rng(derive_seed(plan.sampling_seed, cell.key()));
        rng.shuffle(candidates);
        candidates.resize(cell.count);
        std::sort(candidates.begin(), candidates.end());

        const Domain domain = infer_domain(cell, plan);
        for (auto r : candidates) {
            used[r] = true;
            SampleRecord rec;
            rec.id = metadata.cell(r, cols.id);
            rec.image_ref = metadata.cell(r, cols.image);
            rec.class_label = labels[r];
            rec.domain = domain;
            rec.split = cell.split;
            for (const auto& [attr, idx] : cols.attrs) rec.group_attrs[attr] = metadata.cell(r, idx);
            if (plan.multi_label) {
                for (std::size_t i = 0; i < plan.classes.size(); ++i)
                    rec.group_attrs[plan.classes[i]] = std::string(1, labels[r][i]);
            }
            if (options.image_root) check_image(*options.image_root, rec.image_ref);
            manifest.records.push_back(std::move(rec));
        }
        spdlog::debug("cell {}: sampled {} of {} candidates", cell.key(), cell.count, available);
    }
    validate_manifest(manifest);
    return manifest;
}

Table synthetic_metadata(const SplitPlan& plan, std::size_t surplus) {
    std::vector<std::string> columns{plan.id_column, plan.image_column};
    if (plan.multi_label)
        columns.insert(columns.end(), plan.classes.begin(), plan.classes.end());
    else
        columns.push_back(plan.class_column);
    std::set<std::string> keys;
    for (const auto& c : plan.cells)
        for (const auto& [attr, _] : c.group) keys.insert(attr);
    columns.insert(columns.end(), keys.begin(), keys.end());
    Table table(columns);
    Rng rng(derive_seed(plan.sampling_seed, "synthetic-metadata"));
    std::size_t serial = 0;
    for (std::size_t ci = 0; ci < plan.cells.size(); ++ci) {
        const auto& cell = plan.cells[ci];
        for (std::size_t k = 0; k < cell.count + surplus; ++k, ++serial) {
            char id[48];
            std::snprintf(id, sizeof id, "%s-%06zu", plan.name.c_str(), serial);
            std::vector<std::string> row{id, std::string("images/") + id + ".png"};
            if (plan.multi_label) {
                for (std::size_t i = 0; i < plan.classes.size(); ++i) row.push_back(rng.uniform() < 0.3 ? "1" : "0");
            } else {
                row.push_back(cell.class_label ? *cell.class_label : plan.classes[k % plan.classes.size()]);
            }
            for (const auto& key : keys) {
                auto it = cell.group.find(key);
                row.push_back(it != cell.group.end() && !it->second.empty() ? it->second.front() : "");
            }
            table.add_row(std::move(row));
        }
    }
    return table;
}

Table filter_isic(const Table& metadata, FilterLog* log, const IsicFilterOptions& options) {
    const auto label_col = metadata.require_column(options.label_column);
    const auto patch_col = metadata.require_column(options.patch_column);

    FilterLog local;
    local.input_rows = metadata.rows();
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < metadata.rows(); ++r) {
        std::string label = metadata.cell(r, label_col);
        std::transform(label.begin(), label.end(), label.begin(), [](unsigned char c) { return std::tolower(c); });
        if (label != "benign" && label != "malignant") continue;
        ++local.after_label_filter;
        if (truthy(metadata.cell(r, patch_col))) continue;
        keep.push_back(r);
    }
    local.after_patch_filter = keep.size();
    spdlog::info("isic filter: {} rows -> {} after label filter -> {} after patch filter", local.input_rows,
                 local.after_label_filter, local.after_patch_filter);
    if (keep.empty()) spdlog::warn("isic filter removed every row");
    if (log) *log = local;
    return metadata.select_rows(keep);
}

}  // namespace maskpaint::datasets
