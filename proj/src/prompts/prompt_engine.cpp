// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/prompts/prompt_engine.hpp"

#include <algorithm>

#include "maskpaint/core/error.hpp"

namespace maskpaint::prompts {

std::string_view to_string(Stage stage) noexcept {
    switch (stage) {
    case Stage::source_finetune: return "source_finetune";
    case Stage::target_finetune: return "target_finetune";
    case Stage::inference: return "inference";
    }
    return "inference";
}

Stage parse_stage(std::string_view text) {
    for (Stage s : {Stage::source_finetune, Stage::target_finetune, Stage::inference})
        if (to_string(s) == text) return s;
    raise(Errc::config_invalid, "unknown prompt stage '" + std::string(text) + "'");
}

namespace {

bool has_slot(std::string_view text, std::string_view slot) {
    return text.find(slot) != std::string_view::npos;
}

}  // namespace

void validate_template(const PromptTemplate& tmpl) {
    const bool cls = has_slot(tmpl.text, kClassSlot);
    const bool dummy = has_slot(tmpl.text, kDummySlot);
    bool ok = false;
    switch (tmpl.stage) {
    case Stage::source_finetune: ok = cls && !dummy; break;
    case Stage::target_finetune: ok = dummy && !cls; break;
    case Stage::inference: ok = cls && dummy; break;
    }
    if (!ok)
        raise(Errc::template_invalid,
              "template '" + tmpl.text + "' does not fit stage " + std::string(to_string(tmpl.stage)));
}

std::string render_prompt(const PromptTemplate& tmpl, const TokenBinding& binding) {
    // Substitute in a fixed slot order over the original text so a token that
    // happens to spell another slot is never expanded twice.
    struct Span {
        std::size_t pos;
        std::string_view slot;
        const std::optional<std::string>* value;
    };
    std::vector<Span> hits;
    for (auto [slot, value] : {std::pair{kClassSlot, &binding.class_token}, std::pair{kDummySlot, &binding.dummy_token},
                               std::pair{kSourceSlot, &binding.source_token}}) {
        for (auto p = tmpl.text.find(slot); p != std::string::npos; p = tmpl.text.find(slot, p + slot.size())) {
            if (!value->has_value() || (*value)->empty())
                raise(Errc::unbound_placeholder, std::string(slot) + " has no binding");
            hits.push_back({p, slot, value});
        }
    }
    std::sort(hits.begin(), hits.end(), [](const Span& a, const Span& b) { return a.pos < b.pos; });
    std::string out;
    std::size_t pos = 0;
    for (const auto& h : hits) {
        out.append(tmpl.text, pos, h.pos - pos);
        out += **h.value;
        pos = h.pos + h.slot.size();
    }
    out.append(tmpl.text, pos);
    return out;
}

PromptRegistry PromptRegistry::defaults() {
    PromptRegistry r;
    r.add({"waterbirds",
           {{Stage::source_finetune, "a photo of [CLASS]"},
            {Stage::target_finetune, "a photo of [DUMMY]"},
            {Stage::inference, "a photo of [CLASS] with [DUMMY]"}},
           {{"landbird", "landbird"}, {"waterbird", "waterbird"}},
           "target background",
           std::nullopt});
    r.add({"iwildcam",
           {{Stage::source_finetune, "a camera trap photo of [CLASS]"},
            {Stage::target_finetune, "a camera trap photo with [DUMMY]"},
            {Stage::inference, "a camera trap photo of [CLASS] with [DUMMY]"}},
           {{"cattle", "cattle"},
            {"elephant", "elephants"},
            {"impala", "impalas"},
            {"zebra", "zebras"},
            {"giraffe", "giraffes"},
            {"dik-dik", "dik-diks"}},
           "target-domain",
           std::nullopt});
    r.add({"isic",
           {{Stage::source_finetune, "a dermoscopic image of [CLASS] skin lesion"},
            {Stage::target_finetune, "a dermoscopic image of [DUMMY] skin lesion"},
            {Stage::inference, "a dermoscopic image of [CLASS]-[DUMMY] skin lesion"}},
           {{"benign", "benign"}, {"malignant", "malignant"}},
           "target",
           std::nullopt});
    DatasetPrompts cxr{"cxr",
                       {{Stage::source_finetune, "a radiograph from dataset [SOURCE] with conditions [CLASS]"},
                        {Stage::target_finetune, "a radiograph from dataset [DUMMY]"},
                        {Stage::inference, "a radiograph from dataset [DUMMY] with conditions [CLASS]"}},
                       {},
                       "target",
                       "source"};
    for (auto c : kCxrConditions) cxr.class_tokens.emplace(std::string(c), std::string(c));
    r.add(std::move(cxr));
    r.add({"synthetic",
           {{Stage::source_finetune, "a photo of [CLASS]"},
            {Stage::target_finetune, "a photo of [DUMMY]"},
            {Stage::inference, "a photo of [CLASS] with [DUMMY]"}},
           {},
           "target background",
           std::nullopt});
    return r;
}

void PromptRegistry::add(DatasetPrompts entry) {
    for (Stage s : {Stage::source_finetune, Stage::target_finetune, Stage::inference}) {
        auto it = entry.templates.find(s);
        if (it == entry.templates.end())
            raise(Errc::template_invalid, entry.dataset + " lacks a " + std::string(to_string(s)) + " template");
        validate_template({s, it->second, entry.dataset});
    }
    if (entry.dummy_token.empty()) raise(Errc::template_invalid, entry.dataset + " has an empty dummy token");
    std::string key = entry.dataset;
    m_entries.insert_or_assign(std::move(key), std::move(entry));
}

bool PromptRegistry::contains(std::string_view dataset) const {
    return m_entries.find(dataset) != m_entries.end();
}

const DatasetPrompts& PromptRegistry::dataset(std::string_view name) const {
    auto it = m_entries.find(name);
    if (it == m_entries.end()) raise(Errc::config_invalid, "no prompt templates for dataset '" + std::string(name) + "'");
    return it->second;
}

PromptTemplate PromptRegistry::get(std::string_view dataset_name, Stage stage) const {
    const auto& d = dataset(dataset_name);
    return {stage, d.templates.at(stage), d.dataset};
}

std::string PromptRegistry::class_token(std::string_view dataset_name, std::string_view class_label) const {
    const auto& d = dataset(dataset_name);
    if (d.class_tokens.empty()) {
        if (class_label.empty()) raise(Errc::unbound_placeholder, "[CLASS] bound to an empty label");
        return std::string(class_label);
    }
    auto it = d.class_tokens.find(std::string(class_label));
    if (it == d.class_tokens.end())
        raise(Errc::unbound_placeholder,
              "class '" + std::string(class_label) + "' has no token for dataset " + d.dataset);
    return it->second;
}

TokenBinding PromptRegistry::binding(std::string_view dataset_name, std::optional<std::string_view> class_label) const {
    const auto& d = dataset(dataset_name);
    TokenBinding b;
    b.dummy_token = d.dummy_token;
    b.source_token = d.source_token;
    if (class_label) b.class_token = class_token(dataset_name, *class_label);
    return b;
}

std::string PromptRegistry::render(std::string_view dataset_name, Stage stage,
                                   std::optional<std::string_view> class_label) const {
    return render_prompt(get(dataset_name, stage), binding(dataset_name, class_label));
}

PromptRegistry PromptRegistry::from_json(const json& j) {
    PromptRegistry r;
    try {
        for (const auto& [name, dj] : j.at("datasets").items()) {
            DatasetPrompts d;
            d.dataset = name;
            for (const auto& [stage, text] : dj.at("templates").items())
                d.templates[parse_stage(stage)] = text.get<std::string>();
            if (dj.contains("class_tokens") && !dj["class_tokens"].is_null())
                d.class_tokens = dj["class_tokens"].get<std::map<std::string, std::string>>();
            d.dummy_token = dj.at("dummy_token").get<std::string>();
            if (dj.contains("source_token") && !dj["source_token"].is_null())
                d.source_token = dj["source_token"].get<std::string>();
            r.add(std::move(d));
        }
    } catch (const json::exception& e) {
        raise(Errc::config_invalid, std::string("malformed prompt registry: ") + e.what());
    }
    return r;
}

PromptRegistry PromptRegistry::load(const std::filesystem::path& path) {
    return from_json(read_json_file(path));
}

json PromptRegistry::to_json() const {
    json j;
    j["datasets"] = json::object();
    for (const auto& [name, d] : m_entries) {
        json dj;
        for (const auto& [stage, text] : d.templates) dj["templates"][std::string(to_string(stage))] = text;
        dj["class_tokens"] = d.class_tokens.empty() ? json(nullptr) : json(d.class_tokens);
        dj["dummy_token"] = d.dummy_token;
        dj["source_token"] = d.source_token ? json(*d.source_token) : json(nullptr);
        j["datasets"][name] = dj;
    }
    return j;
}

std::string cxr_condition_prompt(std::span<const std::string> conditions, Stage stage, const TokenBinding& binding,
                                 const PromptRegistry& registry) {
    if (conditions.empty()) raise(Errc::unknown_condition, "no conditions given");
    for (const auto& c : conditions) {
        if (std::find(std::begin(kCxrConditions), std::end(kCxrConditions), c) == std::end(kCxrConditions))
            raise(Errc::unknown_condition, "unknown condition '" + c + "'");
    }
    std::string joined;
    for (auto canonical : kCxrConditions) {
        if (std::find(conditions.begin(), conditions.end(), canonical) == conditions.end()) continue;
        if (!joined.empty()) joined += kCxrJoiner;
        joined += canonical;
    }
    TokenBinding b = binding;
    b.class_token = joined;
    return render_prompt(registry.get("cxr", stage), b);
}

}  // namespace maskpaint::prompts
