// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maskpaint/core/io.hpp"

namespace maskpaint::prompts {

enum class Stage { source_finetune, target_finetune, inference };

std::string_view to_string(Stage stage) noexcept;
Stage parse_stage(std::string_view text);

inline constexpr std::string_view kClassSlot = "[CLASS]";
inline constexpr std::string_view kDummySlot = "[DUMMY]";
inline constexpr std::string_view kSourceSlot = "[SOURCE]";

struct PromptTemplate {
    Stage stage = Stage::inference;
    std::string text;
    std::string dataset;
};

struct TokenBinding {
    std::optional<std::string> class_token;
    std::optional<std::string> dummy_token;
    std::optional<std::string> source_token;
};

// Throws Errc::template_invalid when the slots do not fit the stage:
// source templates carry [CLASS] only, target templates [DUMMY] only,
// inference templates both.
void validate_template(const PromptTemplate& tmpl);

// Byte-exact slot substitution. Throws Errc::unbound_placeholder.
std::string render_prompt(const PromptTemplate& tmpl, const TokenBinding& binding);

struct DatasetPrompts {
    std::string dataset;
    std::map<Stage, std::string> templates;
    // class label -> prompt token; empty means any class label is its own token.
    std::map<std::string, std::string> class_tokens;
    std::string dummy_token;
    std::optional<std::string> source_token;
};

class PromptRegistry {
public:
    // The prompt table for waterbirds, iwildcam, isic, cxr plus a generic
    // "synthetic" entry with an open class vocabulary.
    static PromptRegistry defaults();
    static PromptRegistry from_json(const json& j);
    static PromptRegistry load(const std::filesystem::path& path);
    json to_json() const;

    void add(DatasetPrompts entry);
    bool contains(std::string_view dataset) const;
    const DatasetPrompts& dataset(std::string_view name) const;
    PromptTemplate get(std::string_view dataset, Stage stage) const;

    // Maps a class label to its declared token. Throws Errc::unbound_placeholder
    // if the label has no token in a closed vocabulary.
    std::string class_token(std::string_view dataset, std::string_view class_label) const;

    // Binds the dataset's default dummy/source tokens plus the class token.
    TokenBinding binding(std::string_view dataset, std::optional<std::string_view> class_label) const;
    std::string render(std::string_view dataset, Stage stage, std::optional<std::string_view> class_label) const;

private:
    std::map<std::string, DatasetPrompts, std::less<>> m_entries;
};

inline constexpr std::string_view kCxrConditions[] = {"Atelectasis", "Cardiomegaly", "Edema", "Pneumothorax",
                                                       "No Finding"};
inline constexpr std::string_view kCxrJoiner = ", ";

// Conditions are placed in canonical order and joined with ", " into the
// [CLASS] slot. Throws Errc::unknown_condition for unknown or empty input.
std::string cxr_condition_prompt(std::span<const std::string> conditions, Stage stage, const TokenBinding& binding,
                                 const PromptRegistry& registry = PromptRegistry::defaults());

}  // namespace maskpaint::prompts
