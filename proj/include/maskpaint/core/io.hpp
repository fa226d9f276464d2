// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace maskpaint {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string read_text(const std::filesystem::path& path);

// Writes to a sibling temp file and renames over the target.
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

// Config files are JSON with // and /* */ comments allowed.
json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& value);
void write_json_file(const std::filesystem::path& path, const ordered_json& value);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// Path of `target` expressed relative to directory `base`, using '/' separators.
std::string relative_ref(const std::filesystem::path& target, const std::filesystem::path& base);

std::string utc_timestamp();

}  // namespace maskpaint
