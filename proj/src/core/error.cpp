// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/core/error.hpp"

#include <fmt/format.h>

namespace maskpaint {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::io_failure: return "IOFailure";
    case Errc::config_invalid: return "ConfigInvalid";
    case Errc::insufficient_cell: return "InsufficientCell";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::missing_column: return "MissingColumn";
    case Errc::manifest_invalid: return "ManifestInvalid";
    case Errc::unbound_placeholder: return "UnboundPlaceholder";
    case Errc::unknown_condition: return "UnknownCondition";
    case Errc::template_invalid: return "TemplateInvalid";
    case Errc::empty_mask: return "EmptyMask";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::backend_failure: return "BackendFailure";
    case Errc::empty_train_set: return "EmptyTrainSet";
    case Errc::too_few_target_images: return "TooFewTargetImages";
    case Errc::invalid_request: return "InvalidRequest";
    case Errc::queue_not_finalized: return "QueueNotFinalized";
    case Errc::empty_split: return "EmptySplit";
    case Errc::too_few_seeds: return "TooFewSeeds";
    case Errc::batch_too_small: return "BatchTooSmall";
    case Errc::missing_mask: return "MissingMask";
    case Errc::insufficient_target_pool: return "InsufficientTargetPool";
    case Errc::missing_annotation: return "MissingAnnotation";
    case Errc::provenance_missing: return "ProvenanceMissing";
    case Errc::inconsistent_metrics: return "InconsistentMetrics";
    case Errc::unknown_queue: return "UnknownQueue";
    case Errc::unknown_item: return "UnknownItem";
    case Errc::already_decided: return "AlreadyDecided";
    case Errc::stage_dependency_unmet: return "StageDependencyUnmet";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(fmt::format("{}: {}", errc_name(code), message)), m_code(code) {}

InsufficientCellError::InsufficientCellError(std::string cell, std::size_t needed, std::size_t available)
    : Error(Errc::insufficient_cell,
            fmt::format("cell {} needs {} rows but only {} are available", cell, needed, available)),
      m_cell(std::move(cell)),
      m_needed(needed),
      m_available(available) {}

void raise(Errc code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace maskpaint
