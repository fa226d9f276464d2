// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/classifier/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "maskpaint/core/error.hpp"

namespace maskpaint::classifier {

double accuracy(const std::vector<std::vector<double>>& scores, std::span<const int> labels) {
    if (scores.empty()) raise(Errc::empty_split, "accuracy over zero samples");
    if (scores.size() != labels.size()) raise(Errc::shape_mismatch, "score and label counts differ");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto& s = scores[i];
        const auto best = static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
        if (best == labels[i]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(scores.size());
}

double auroc(std::span<const double> scores, std::span<const int> positives) {
    if (scores.size() != positives.size()) raise(Errc::shape_mismatch, "score and label counts differ");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Midranks (1-based) for runs of ties.
    double rank_sum = 0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            if (positives[order[k]]) {
                rank_sum += mid;
                ++n_pos;
            }
        i = j + 1;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::numeric_limits<double>::quiet_NaN();
    const double p = static_cast<double>(n_pos);
    return (rank_sum - p * (p + 1) / 2) / (p * static_cast<double>(n_neg));
}

double mean_auroc(const std::vector<std::vector<double>>& scores, const std::vector<std::vector<int>>& flags,
                  std::vector<double>* per_class) {
    if (scores.empty()) raise(Errc::empty_split, "AUROC over zero samples");
    if (scores.size() != flags.size()) raise(Errc::shape_mismatch, "score and label counts differ");
    const std::size_t k = scores.front().size();
    double sum = 0;
    int counted = 0;
    if (per_class) per_class->clear();
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> s(scores.size());
        std::vector<int> y(scores.size());
        for (std::size_t i = 0; i < scores.size(); ++i) {
            s[i] = scores[i][c];
            y[i] = flags[i][c];
        }
        const double a = auroc(s, y);
        if (per_class) per_class->push_back(a);
        if (!std::isnan(a)) {
            sum += a;
            ++counted;
        }
    }
    return counted ? sum / counted : std::numeric_limits<double>::quiet_NaN();
}

Interval aggregate_ci(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) raise(Errc::too_few_seeds, "confidence intervals need at least two seeds, got " + std::to_string(n));
    // Sorting first makes the result bit-identical under any permutation.
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double s = std::sqrt(ss / static_cast<double>(n - 1));
    const double half = kZ95 * s / std::sqrt(static_cast<double>(n));
    return {mean, mean - half, mean + half};
}

const MetricSummary& EvalReport::at(const std::string& domain, const std::string& metric) const {
    auto d = cells.find(domain);
    if (d == cells.end() || !d->second.contains(metric))
        raise(Errc::inconsistent_metrics, "report '" + method + "' has no " + domain + "/" + metric + " entry");
    return d->second.at(metric);
}

json EvalReport::to_json() const {
    json c = json::object();
    for (const auto& [domain, metrics] : cells)
        for (const auto& [metric, s] : metrics)
            c[domain][metric] = {
                {"mean", s.mean}, {"lower_95", s.lower_95}, {"upper_95", s.upper_95}, {"n_seeds", s.n_seeds}};
    return {{"method", method}, {"cells", c}, {"seeds", seeds}};
}

EvalReport EvalReport::from_json(const json& j) {
    EvalReport r;
    try {
        r.method = j.at("method").get<std::string>();
        for (auto d = j.at("cells").begin(); d != j.at("cells").end(); ++d)
            for (auto m = d.value().begin(); m != d.value().end(); ++m) {
                MetricSummary s;
                s.mean = m.value().at("mean").get<double>();
                s.lower_95 = m.value().at("lower_95").get<double>();
                s.upper_95 = m.value().at("upper_95").get<double>();
                s.n_seeds = m.value().at("n_seeds").get<int>();
                r.cells[d.key()][m.key()] = s;
            }
        r.seeds = j.value("seeds", std::vector<std::uint64_t>{});
    } catch (const json::exception& e) {
        raise(Errc::inconsistent_metrics, std::string("malformed evaluation report: ") + e.what());
    }
    r.validate();
    return r;
}

void EvalReport::validate() const {
    for (const auto& [domain, metrics] : cells)
        for (const auto& [metric, s] : metrics) {
            if (s.n_seeds < 1) raise(Errc::inconsistent_metrics, method + " " + domain + "/" + metric + " has no seeds");
            if (!(s.lower_95 <= s.mean && s.mean <= s.upper_95))
                raise(Errc::inconsistent_metrics, method + " " + domain + "/" + metric + " interval does not bracket the mean");
        }
}

EvalReport build_report(const std::string& method, const std::vector<std::uint64_t>& seeds,
                        const std::map<std::string, std::map<std::string, std::vector<double>>>& values) {
    EvalReport r;
    r.method = method;
    r.seeds = seeds;
    for (const auto& [domain, metrics] : values)
        for (const auto& [metric, v] : metrics) {
            if (v.empty()) raise(Errc::too_few_seeds, "no values for " + domain + "/" + metric);
            MetricSummary s;
            s.n_seeds = static_cast<int>(v.size());
            if (v.size() == 1) {
                s.mean = s.lower_95 = s.upper_95 = v.front();
            } else {
                const Interval ci = aggregate_ci(v);
                s.mean = ci.mean;
                s.lower_95 = ci.lower_95;
                s.upper_95 = ci.upper_95;
            }
            r.cells[domain][metric] = s;
        }
    return r;
}

}  // namespace maskpaint::classifier
