// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "maskpaint/core/io.hpp"

namespace maskpaint {

// An external worker invoked as `program args... <request-file> <response-file>`.
// The request file holds one JSON object per line, each with an "op" and a
// unique "id"; the worker answers with one JSON line per request carrying the
// same "id" and a "status" of "ok" or "error" (plus "message").
struct ExternalCommand {
    std::string program;
    std::vector<std::string> args;
    std::filesystem::path work_dir;

    static ExternalCommand from_json(const json& j);
    json to_json() const;
};

// Runs one batch. Throws Errc::backend_failure on spawn failure, non-zero
// exit, a missing response line or a response with status "error".
std::vector<json> run_external(const ExternalCommand& command, const std::vector<json>& requests);

}  // namespace maskpaint
