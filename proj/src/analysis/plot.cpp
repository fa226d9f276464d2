// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/analysis/plot.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

#include "maskpaint/core/error.hpp"

namespace maskpaint::analysis {

namespace {

constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 150, kTop = 40, kBottom = 50;
constexpr std::array<const char*, 6> kColors{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string x_label(const json& x) {
    return x.is_string() ? x.get<std::string>() : std::to_string(x.get<long long>());
}

}  // namespace

std::string plot_series_svg(const json& series, const std::string& domain, const std::string& title) {
    if (!series.is_object() || series.empty()) raise(Errc::invalid_request, "series to plot must be a non-empty object");
    std::size_t slots = 0;
    double lo = 1.0, hi = 0.0;
    for (const auto& [name, points] : series.items()) {
        slots = std::max(slots, points.size());
        for (const auto& p : points) {
            if (!p.contains(domain)) raise(Errc::invalid_request, "series point lacks domain '" + domain + "'");
            lo = std::min(lo, p.at(domain).at("lower_95").get<double>());
            hi = std::max(hi, p.at(domain).at("upper_95").get<double>());
        }
    }
    lo = std::max(0.0, std::min(lo, 0.0));
    hi = std::max(hi, lo + 1e-9);
    const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
    auto px = [&](std::size_t i) { return kLeft + (slots < 2 ? plot_w / 2 : plot_w * i / (slots - 1)); };
    auto py = [&](double v) { return kTop + plot_h * (1.0 - (v - lo) / (hi - lo)); };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" +
                      fmt(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
           "</text>\n";
    svg += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(kTop + plot_h) + "\" x2=\"" + fmt(kLeft + plot_w) +
           "\" y2=\"" + fmt(kTop + plot_h) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(kTop) + "\" x2=\"" + fmt(kLeft) + "\" y2=\"" +
           fmt(kTop + plot_h) + "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        svg += "<text x=\"" + fmt(kLeft - 6) + "\" y=\"" + fmt(py(v) + 4) + "\" text-anchor=\"end\">" + fmt(v) +
               "</text>\n";
    }
    std::size_t color = 0;
    for (const auto& [name, points] : series.items()) {
        const char* stroke = kColors[color % kColors.size()];
        std::string line;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto& s = points[i].at(domain);
            const double x = px(i);
            line += fmt(x) + "," + fmt(py(s.at("mean").get<double>())) + " ";
            svg += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(py(s.at("lower_95").get<double>())) + "\" x2=\"" +
                   fmt(x) + "\" y2=\"" + fmt(py(s.at("upper_95").get<double>())) + "\" stroke=\"" + stroke +
                   "\"/>\n";
            svg += "<circle cx=\"" + fmt(x) + "\" cy=\"" + fmt(py(s.at("mean").get<double>())) +
                   "\" r=\"3\" fill=\"" + stroke + "\"/>\n";
            svg += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(kTop + plot_h + 16 + 14 * color) +
                   "\" text-anchor=\"middle\" fill=\"" + stroke + "\">" + escape(x_label(points[i].at("x"))) +
                   "</text>\n";
        }
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(stroke) + "\" points=\"" + line + "\"/>\n";
        svg += "<text x=\"" + fmt(kLeft + plot_w + 12) + "\" y=\"" + fmt(kTop + 14 + 18 * color) + "\" fill=\"" +
               stroke + "\">" + escape(name) + "</text>\n";
        ++color;
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace maskpaint::analysis
