// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "maskpaint/analysis/flips.hpp"
#include "maskpaint/analysis/plot.hpp"
#include "maskpaint/analysis/table.hpp"
#include "maskpaint/datasets/synth.hpp"
#include "maskpaint/pipeline/pipeline.hpp"

using namespace maskpaint;
using namespace maskpaint::analysis;
using classifier::EvalReport;
using classifier::MetricSummary;
using testing::error_of;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

EvalReport report(const std::string& method, MetricSummary src, MetricSummary tgt) {
    EvalReport r;
    r.method = method;
    r.seeds = {1, 2, 3, 4, 5};
    r.cells["source"]["accuracy"] = src;
    r.cells["target"]["accuracy"] = tgt;
    return r;
}

MetricSummary ms(double mean, double lo, double hi) { return {mean, lo, hi, 5}; }

std::size_t row_of(const ResultTable& t, const std::string& method) {
    return static_cast<std::size_t>(std::find(t.methods.begin(), t.methods.end(), method) - t.methods.begin());
}

}  // namespace

TEST_CASE("interval overlap is closed and symmetric") {
    CHECK(intervals_overlap(ms(0.5, 0.4, 0.6), ms(0.7, 0.6, 0.8)));
    CHECK(intervals_overlap(ms(0.7, 0.6, 0.8), ms(0.5, 0.4, 0.6)));
    CHECK_FALSE(intervals_overlap(ms(0.5, 0.4, 0.59), ms(0.7, 0.6, 0.8)));
    CHECK_FALSE(intervals_overlap(ms(0.7, 0.6, 0.8), ms(0.5, 0.4, 0.59)));
}

TEST_CASE("best and runner-up marks") {
    std::vector<std::pair<std::string, EvalReport>> in{
        {"A", report("A", ms(0.90, 0.85, 0.95), ms(0.30, 0.28, 0.32))},
        {"B", report("B", ms(0.80, 0.70, 0.86), ms(0.50, 0.45, 0.55))},
        {"C", report("C", ms(0.70, 0.60, 0.80), ms(0.40, 0.35, 0.44))},
    };
    const auto t = render_table(in);
    REQUIRE(t.columns.size() == 2);
    CHECK(t.columns[0].domain == "source");
    CHECK(t.marks[0][0] == Mark::best);
    CHECK(t.marks[1][0] == Mark::second);
    CHECK(t.marks[2][0] == Mark::none);
    CHECK(t.marks[1][1] == Mark::best);
    // Runner-up C does not overlap B on target.
    CHECK(t.marks[2][1] == Mark::none);
    CHECK(t.marks[0][1] == Mark::none);
    CHECK(t.footnotes.empty());

    auto shuffled = in;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto t2 = render_table(shuffled);
    for (const char* m : {"A", "B", "C"})
        for (std::size_t c = 0; c < 2; ++c) CHECK(t2.marks[row_of(t2, m)][c] == t.marks[row_of(t, m)][c]);
    CHECK(t2.methods.front() == "C");
}

TEST_CASE("ties are broken by name and noted") {
    std::vector<std::pair<std::string, EvalReport>> in{
        {"Zeta", report("Zeta", ms(0.8, 0.7, 0.9), ms(0.5, 0.4, 0.6))},
        {"Alpha", report("Alpha", ms(0.8, 0.7, 0.9), ms(0.4, 0.3, 0.45))},
    };
    const auto t = render_table(in);
    CHECK(t.marks[row_of(t, "Alpha")][0] == Mark::best);
    CHECK(t.marks[row_of(t, "Zeta")][0] == Mark::second);
    REQUIRE(t.footnotes.size() == 1);
    CHECK(t.text().find(t.footnotes[0]) != std::string::npos);
}

TEST_CASE("table inputs must agree") {
    auto a = report("A", ms(0.9, 0.8, 1.0), ms(0.3, 0.2, 0.4));
    auto b = report("B", ms(0.9, 0.8, 1.0), ms(0.3, 0.2, 0.4));
    b.cells.erase("target");
    CHECK(error_of([&] { render_table({{"A", a}, {"B", b}}); }) == Errc::inconsistent_metrics);
    CHECK(error_of([&] { render_table({}); }) == Errc::invalid_request);
    CHECK(error_of([&] { render_table({{"A", a}, {"A", a}}); }) == Errc::invalid_request);
}

TEST_CASE("text and latex rendering") {
    const auto t = render_table({{"Base", report("Base", ms(0.93, 0.889, 0.972), ms(0.146, 0.073, 0.218))},
                                 {"Masked", report("Masked", ms(0.671, 0.527, 0.815), ms(0.385, 0.286, 0.485))}});
    const auto text = t.text();
    CHECK(text.find("0.930") != std::string::npos);
    CHECK(text.find("Masked") != std::string::npos);
    const auto tex = t.latex();
    CHECK(tex.find("\\begin{tabular}") != std::string::npos);
    CHECK(tex.find("\\textbf") != std::string::npos);
    CHECK(t.latex() == tex);
}

TEST_CASE("flip reports count per class") {
    std::vector<AttributePrediction> preds;
    auto add = [&](const std::string& cls, const std::string& src, const std::string& pred) {
        AttributePrediction p;
        p.generation_id = "g" + std::to_string(preds.size());
        p.class_label = cls;
        p.source_attribute = src;
        p.predicted_attribute = pred;
        preds.push_back(p);
    };
    add("a", "land", "water");
    add("a", "land", "land");
    add("a", "land", "water");
    add("b", "water", "water");
    const auto rep = flip_report(preds, "background", 0.9);
    CHECK(rep.per_class.at("a").flipped == 2);
    CHECK(rep.per_class.at("a").total == 3);
    CHECK(rep.per_class.at("a").rate() == doctest::Approx(2.0 / 3.0));
    CHECK(rep.per_class.at("b").rate() == 0.0);
    const json j = rep.to_json();
    CHECK(j.at("attribute") == "background");
    CHECK(AttributePrediction::from_json(preds[0].to_json()).predicted_attribute == "water");
}

TEST_CASE("flip rates end to end") {
    TempDir dir("flips");
    const auto m = datasets::synth_dataset(testing::small_spec(6, 16), dir / "ds");
    classifier::TrainConfig tc;
    tc.input_size = 16;
    tc.epochs = 4;
    tc.batch_size = 16;
    const auto model = train_attribute_classifier(m, dir / "ds", "background", tc, dir / "attr");
    CHECK(model.values == std::vector<std::string>{"land", "water"});
    CHECK(model.accuracy >= 0.8);
    CHECK(AttributeModel::load(dir / "attr").accuracy == doctest::Approx(model.accuracy));

    pipeline::PipelineConfig pc;
    pc.selection = pipeline::GridSelection::fixed;
    pc.n_generated = 8;
    pc.target_guard.min_images = 4;
    pipeline::run_pipeline(pc, m, dir / "ds", dir / "run");
    const auto results = load_results(dir / "run");
    REQUIRE(results.size() == 8);
    const auto rep = flip_rates(results, dir / "run", m, model, dir / "flips");
    CHECK(fs::exists(dir / "flips" / "flips.json"));

    // Independent recount from the stored predictions.
    std::map<std::string, std::pair<int, int>> recount;
    std::istringstream in(read_text(dir / "flips" / "predictions.jsonl"));
    std::string line;
    while (std::getline(in, line)) {
        const json p = json::parse(line);
        auto& [flipped, total] = recount[p.at("class_label").get<std::string>()];
        ++total;
        if (p.at("source_attribute") != p.at("predicted_attribute")) ++flipped;
    }
    for (const auto& [cls, c] : rep.per_class) {
        CHECK(static_cast<int>(c.flipped) == recount[cls].first);
        CHECK(static_cast<int>(c.total) == recount[cls].second);
    }

    auto stripped = m;
    for (auto& r : stripped.records) r.group_attrs.clear();
    CHECK(error_of([&] { train_attribute_classifier(stripped, dir / "ds", "background", tc, dir / "x"); }) ==
          Errc::missing_annotation);
    CHECK(error_of([&] { predict_attributes(results, dir / "run", stripped, model); }) == Errc::provenance_missing);
    CHECK(error_of([&] { load_results(dir / "nowhere"); }) == Errc::provenance_missing);
}

TEST_CASE("series plots") {
    const json series = {{"real",
                          {{{"x", 10}, {"target", {{"mean", 0.4}, {"lower_95", 0.3}, {"upper_95", 0.5}}}},
                           {{"x", 20}, {"target", {{"mean", 0.6}, {"lower_95", 0.55}, {"upper_95", 0.65}}}}}}};
    const auto svg = plot_series_svg(series, "target", "real & generated");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(svg.find("real &amp; generated") != std::string::npos);
}
