// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace maskpaint {

enum class Errc {
    io_failure,
    config_invalid,
    // datasets
    insufficient_cell,
    duplicate_id,
    missing_column,
    manifest_invalid,
    // prompts
    unbound_placeholder,
    unknown_condition,
    template_invalid,
    // masking
    empty_mask,
    shape_mismatch,
    // generative
    backend_failure,
    empty_train_set,
    too_few_target_images,
    invalid_request,
    // pipeline
    queue_not_finalized,
    // classifier
    empty_split,
    too_few_seeds,
    // baselines
    batch_too_small,
    missing_mask,
    insufficient_target_pool,
    // analysis
    missing_annotation,
    provenance_missing,
    inconsistent_metrics,
    // review
    unknown_queue,
    unknown_item,
    already_decided,
    // orchestrator
    stage_dependency_unmet,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message);

    Errc code() const noexcept { return m_code; }

private:
    Errc m_code;
};

class InsufficientCellError : public Error {
public:
    InsufficientCellError(std::string cell, std::size_t needed, std::size_t available);

    const std::string& cell() const noexcept { return m_cell; }
    std::size_t needed() const noexcept { return m_needed; }
    std::size_t available() const noexcept { return m_available; }

private:
    std::string m_cell;
    std::size_t m_needed;
    std::size_t m_available;
};

[[noreturn]] void raise(Errc code, const std::string& message);

}  // namespace maskpaint
