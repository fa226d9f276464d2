// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/analysis/table.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>

#include "maskpaint/core/error.hpp"

namespace maskpaint::analysis {

using classifier::EvalReport;
using classifier::MetricSummary;

bool intervals_overlap(const MetricSummary& a, const MetricSummary& b) noexcept {
    return std::max(a.lower_95, b.lower_95) <= std::min(a.upper_95, b.upper_95);
}

namespace {

int domain_rank(const std::string& d) {
    if (d == "source") return 0;
    if (d == "target") return 1;
    if (d == "all") return 2;
    return 3;
}

std::string title_for(const std::string& domain, const std::string& metric) {
    std::string d = domain == "all" ? "Overall" : domain;
    if (!d.empty()) d[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(d[0])));
    std::string m = metric == "auroc" ? "AUROC" : metric;
    if (metric == "accuracy") m = "Accuracy";
    return d + " Test " + m;
}

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string latex_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': case '%': case '$': case '#': case '_': case '{': case '}':
            out += '\\';
            out += c;
            break;
        case '~': out += "\\textasciitilde{}"; break;
        case '^': out += "\\textasciicircum{}"; break;
        case '\\': out += "\\textbackslash{}"; break;
        default: out += c;
        }
    }
    return out;
}

}  // namespace

ResultTable render_table(const std::vector<std::pair<std::string, EvalReport>>& reports) {
    if (reports.empty()) raise(Errc::invalid_request, "a table needs at least one method");
    ResultTable t;
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& [domain, metrics] : reports.front().second.cells)
        for (const auto& [metric, _] : metrics) keys.emplace(domain, metric);
    std::set<std::string> names;
    for (const auto& [name, report] : reports) {
        if (!names.insert(name).second) raise(Errc::invalid_request, "method '" + name + "' appears twice");
        report.validate();
        std::set<std::pair<std::string, std::string>> mine;
        for (const auto& [domain, metrics] : report.cells)
            for (const auto& [metric, _] : metrics) mine.emplace(domain, metric);
        if (mine != keys)
            raise(Errc::inconsistent_metrics, "method '" + name + "' reports a different set of metrics");
    }
    std::vector<std::pair<std::string, std::string>> ordered(keys.begin(), keys.end());
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto& a, const auto& b) { return domain_rank(a.first) < domain_rank(b.first); });
    for (const auto& [domain, metric] : ordered) t.columns.push_back({domain, metric, title_for(domain, metric)});

    const std::size_t n = reports.size();
    t.values.assign(n, {});
    t.marks.assign(n, std::vector<Mark>(t.columns.size(), Mark::none));
    for (std::size_t i = 0; i < n; ++i) {
        t.methods.push_back(reports[i].first);
        for (const auto& c : t.columns) t.values[i].push_back(reports[i].second.at(c.domain, c.metric));
    }
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (t.values[a][c].mean != t.values[b][c].mean) return t.values[a][c].mean > t.values[b][c].mean;
            return t.methods[a] < t.methods[b];
        });
        const std::size_t best = order[0];
        t.marks[best][c] = Mark::best;
        if (n > 1 && intervals_overlap(t.values[best][c], t.values[order[1]][c])) t.marks[order[1]][c] = Mark::second;
        // Ties that decide a mark are reported.
        for (std::size_t rank = 0; rank < std::min<std::size_t>(2, n); ++rank) {
            if (rank == 1 && t.values[order[1]][c].mean == t.values[order[0]][c].mean) break;
            const double mean = t.values[order[rank]][c].mean;
            std::vector<std::string> tied;
            for (auto k : order)
                if (t.values[k][c].mean == mean) tied.push_back(t.methods[k]);
            if (tied.size() < 2) continue;
            std::string note = "Equal means in " + t.columns[c].title + " (" + fmt3(mean) + "): ";
            for (std::size_t k = 0; k < tied.size(); ++k) note += (k ? ", " : "") + tied[k];
            note += "; ranked by method name.";
            t.footnotes.push_back(note);
        }
    }
    return t;
}

std::string ResultTable::text() const {
    std::string out = "| Method |";
    std::string rule = "|---|";
    for (const auto& c : columns) {
        out += " " + c.title + " Mean | Lower 95 CI | Upper 95 CI |";
        rule += "---:|---:|---:|";
    }
    out += "\n" + rule + "\n";
    for (std::size_t i = 0; i < methods.size(); ++i) {
        out += "| " + methods[i] + " |";
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const auto& v = values[i][c];
            for (double x : {v.mean, v.lower_95, v.upper_95}) {
                const std::string s = fmt3(x);
                switch (marks[i][c]) {
                case Mark::best: out += " __**" + s + "**__ |"; break;
                case Mark::second: out += " **" + s + "** |"; break;
                case Mark::none: out += " " + s + " |"; break;
                }
            }
        }
        out += "\n";
    }
    if (!footnotes.empty()) {
        out += "\n";
        for (const auto& f : footnotes) out += "Note: " + f + "\n";
    }
    return out;
}

std::string ResultTable::latex() const {
    std::string spec = "l";
    for (std::size_t c = 0; c < columns.size(); ++c) spec += "|rrr";
    std::string out = "\\begin{tabular}{" + spec + "}\n\\toprule\n\\textbf{Method}";
    for (const auto& c : columns) out += " & \\multicolumn{3}{c}{\\textbf{" + latex_escape(c.title) + "}}";
    out += " \\\\\n";
    for (std::size_t c = 0; c < columns.size(); ++c) out += " & Mean & Lower 95 CI & Upper 95 CI";
    out += " \\\\\n\\midrule\n";
    for (std::size_t i = 0; i < methods.size(); ++i) {
        out += latex_escape(methods[i]);
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const auto& v = values[i][c];
            for (double x : {v.mean, v.lower_95, v.upper_95}) {
                const std::string s = fmt3(x);
                switch (marks[i][c]) {
                case Mark::best: out += " & {\\ul \\textbf{" + s + "}}"; break;
                case Mark::second: out += " & \\textbf{" + s + "}"; break;
                case Mark::none: out += " & " + s; break;
                }
            }
        }
        out += " \\\\\n";
    }
    out += "\\bottomrule\n\\end{tabular}\n";
    for (const auto& f : footnotes) out += "\\par\\noindent{\\footnotesize Note: " + latex_escape(f) + "}\n";
    return out;
}

}  // namespace maskpaint::analysis
