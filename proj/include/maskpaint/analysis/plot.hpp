// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "maskpaint/core/io.hpp"

namespace maskpaint::analysis {

// SVG line chart of an ablation series file (condition -> points with x and
// per-domain {mean, lower_95, upper_95}). Points are spaced evenly in the
// order given; whiskers show the interval.
std::string plot_series_svg(const json& series, const std::string& domain, const std::string& title);

}  // namespace maskpaint::analysis
