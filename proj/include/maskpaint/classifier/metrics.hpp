// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "maskpaint/core/io.hpp"

namespace maskpaint::classifier {

// Fraction of argmax(scores[i]) == labels[i]. Throws Errc::empty_split on no samples.
double accuracy(const std::vector<std::vector<double>>& scores, std::span<const int> labels);

// Rank-based AUROC; tied scores count one half. Returns NaN when either
// class is absent.
double auroc(std::span<const double> scores, std::span<const int> positives);

// Mean of per-class AUROCs over classes with both positives and negatives.
double mean_auroc(const std::vector<std::vector<double>>& scores, const std::vector<std::vector<int>>& flags,
                  std::vector<double>* per_class = nullptr);

struct Interval {
    double mean = 0.0;
    double lower_95 = 0.0;
    double upper_95 = 0.0;
};

inline constexpr double kZ95 = 1.96;

// mean +- 1.96 * s / sqrt(n) with the sample standard deviation s.
// Throws Errc::too_few_seeds for fewer than two values.
Interval aggregate_ci(std::span<const double> values);

struct MetricSummary {
    double mean = 0.0;
    double lower_95 = 0.0;
    double upper_95 = 0.0;
    int n_seeds = 0;

    friend bool operator==(const MetricSummary&, const MetricSummary&) = default;
};

// Per (domain, metric) summaries over training seeds.
struct EvalReport {
    std::string method;
    std::map<std::string, std::map<std::string, MetricSummary>> cells;
    std::vector<std::uint64_t> seeds;

    const MetricSummary& at(const std::string& domain, const std::string& metric) const;

    json to_json() const;
    static EvalReport from_json(const json& j);
    void validate() const;
};

// Per-seed values, keyed [domain][metric], aggregated into a report. With a
// single seed the interval collapses onto the value.
EvalReport build_report(const std::string& method, const std::vector<std::uint64_t>& seeds,
                        const std::map<std::string, std::map<std::string, std::vector<double>>>& values);

}  // namespace maskpaint::classifier
