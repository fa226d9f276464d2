// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "maskpaint/classifier/metrics.hpp"

namespace maskpaint::analysis {

enum class Mark { none, second, best };

// Closed-interval intersection.
bool intervals_overlap(const classifier::MetricSummary& a, const classifier::MetricSummary& b) noexcept;

struct TableColumn {
    std::string domain;
    std::string metric;
    std::string title;
};

struct ResultTable {
    std::vector<TableColumn> columns;
    // Row order as given.
    std::vector<std::string> methods;
    // [row][column]
    std::vector<std::vector<classifier::MetricSummary>> values;
    std::vector<std::vector<Mark>> marks;
    std::vector<std::string> footnotes;

    std::string text() const;
    std::string latex() const;
};

// Per column the highest mean is best; the runner-up is marked only when its
// interval overlaps the best one. Equal means are ordered by method name and
// noted in a footnote. Throws Errc::inconsistent_metrics when the reports do
// not share one set of (domain, metric) cells, and Errc::invalid_request for
// an empty input or duplicate method names.
ResultTable render_table(const std::vector<std::pair<std::string, classifier::EvalReport>>& reports);

}  // namespace maskpaint::analysis
