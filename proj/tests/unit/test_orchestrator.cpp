// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "maskpaint/classifier/metrics.hpp"
#include "maskpaint/orchestrator/run.hpp"

using namespace maskpaint;
using namespace maskpaint::orchestrator;
using testing::error_of;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

json small_run(const fs::path& out) {
    return json{
        {"run_id", "small"},
        {"seed", 3},
        {"out_dir", out.string()},
        {"dataset",
         {{"kind", "synthetic"}, {"synthetic", {{"image_size", 16}, {"n_per_cell", 6}, {"correlation", 1.0}}}}},
        {"pipeline",
         {{"selection", "fixed"},
          {"n_generated", 8},
          {"target_guard", {{"min_images", 4}}},
          {"probe_classifier", {{"input_size", 16}, {"epochs", 1}, {"batch_size", 16}}}}},
        {"classifier", {{"input_size", 16}, {"epochs", 2}, {"batch_size", 16}}},
        {"train", {{"seeds", 2}, {"methods", {"base", "maskpaint"}}}},
        {"analysis",
         {{"flip_attribute", "background"},
          {"attribute_classifier", {{"input_size", 16}, {"epochs", 2}, {"batch_size", 16}}}}},
    };
}

std::vector<std::string> to_run(const Orchestrator& o) {
    std::vector<std::string> out;
    for (const auto& p : o.plan())
        if (p.action == PlanAction::run) out.push_back(p.name);
    return out;
}

}  // namespace

TEST_CASE("stage graph") {
    const auto& g = stage_graph();
    REQUIRE(g.size() == 9);
    CHECK(g.front().name == "datasets");
    CHECK(g.back().name == "analyze");
    CHECK(stage_info("finetune-target").deps == std::vector<std::string>{"finetune-source"});
    CHECK(downstream_of("train") == std::vector<std::string>{"train", "eval", "analyze"});
    CHECK(downstream_of("datasets").size() == 9);
    CHECK(method_title("maskpaint") == "MaskPaint");
    CHECK(method_title("cutmix") == "CutMix");
}

TEST_CASE("config errors") {
    TempDir dir;
    auto j = small_run(dir / "run");
    j["train"]["methods"] = {"base", "alia"};
    CHECK(error_of([&] { RunConfig::from_json(j, dir.path()); }) == Errc::config_invalid);
    j = small_run(dir / "run");
    j["dataset"]["kind"] = "webdataset";
    CHECK(error_of([&] { RunConfig::from_json(j, dir.path()); }) == Errc::config_invalid);
    j = small_run(dir / "run");
    j["train"]["seeds"] = 0;
    CHECK(error_of([&] { RunConfig::from_json(j, dir.path()); }) == Errc::config_invalid);
    CHECK(error_of([&] { RunConfig::load(dir / "absent.json"); }).has_value());

    write_text_atomic(dir / "rel.jsonc", "// c\n" + [&] {
        auto r = small_run("out");
        r["out_dir"] = "out";
        return r.dump();
    }());
    CHECK(RunConfig::load(dir / "rel.jsonc").out_dir == dir / "out");
}

TEST_CASE("seeds and hashes") {
    TempDir dir;
    const Orchestrator a(RunConfig::from_json(small_run(dir / "run"), dir.path()));
    const Orchestrator b(RunConfig::from_json(small_run(dir / "run"), dir.path()));
    CHECK(a.stage_seed("train") == b.stage_seed("train"));
    CHECK(a.stage_seed("train") == derive_seed(3, "stage/train"));
    CHECK(a.stage_seed("train") != a.stage_seed("generate"));
    for (const auto& s : stage_graph()) CHECK(a.stage_hash(s.name) == b.stage_hash(s.name));
    CHECK(to_run(a).size() == 9);
    CHECK(Orchestrator::format_plan(a.plan("masks")).find("masks") != std::string::npos);
    CHECK(a.plan("masks").size() == 2);
}

TEST_CASE("dependencies must be complete") {
    TempDir dir;
    Orchestrator o(RunConfig::from_json(small_run(dir / "run"), dir.path()));
    CHECK(error_of([&] { o.run_stage("masks"); }) == Errc::stage_dependency_unmet);
    CHECK(o.run_stage("datasets"));
    CHECK(o.run_stage("masks"));
    CHECK(o.run_stage("finetune-source"));
    CHECK(error_of([&] { o.run_stage("generate"); }) == Errc::stage_dependency_unmet);
    CHECK(o.record().stages.at("masks").status == StageStatus::complete);
}

TEST_CASE("a full small run, re-runs and invalidation") {
    TempDir dir("orch");
    const auto run_dir = dir / "run";
    {
        Orchestrator o(RunConfig::from_json(small_run(run_dir), dir.path()));
        o.run_through();
        for (const auto& s : stage_graph()) CHECK(o.record().stages.at(s.name).status == StageStatus::complete);
    }
    CHECK(fs::exists(run_dir / "run.json"));
    CHECK(fs::exists(run_dir / "merged" / "manifest.jsonl"));
    CHECK(fs::exists(run_dir / "reports" / "table.md"));
    CHECK(fs::exists(run_dir / "reports" / "table.tex"));
    CHECK(fs::exists(run_dir / "analysis" / "flips" / "flips.json"));
    for (const char* m : {"base", "maskpaint"}) {
        const auto rep = classifier::EvalReport::from_json(read_json_file(run_dir / "reports" / (std::string(m) + ".json")));
        CHECK(rep.seeds.size() == 2);
        CHECK(rep.at("target", "accuracy").n_seeds == 2);
        for (int k = 0; k < 2; ++k)
            CHECK(fs::exists(run_dir / "classifiers" / m / ("seed-" + std::to_string(k)) / "classifier.json"));
    }
    const auto table = read_text(run_dir / "reports" / "table.md");

    {
        Orchestrator again(RunConfig::from_json(small_run(run_dir), dir.path()));
        CHECK(to_run(again).empty());
        CHECK(again.invalidated().empty());
        for (const auto& s : stage_graph()) CHECK_FALSE(again.run_stage(s.name));
        CHECK(read_text(run_dir / "reports" / "table.md") == table);
    }

    auto cls = small_run(run_dir);
    cls["classifier"]["epochs"] = 3;
    {
        const Orchestrator o(RunConfig::from_json(cls, dir.path()));
        CHECK(to_run(o) == std::vector<std::string>{"train", "eval", "analyze"});
    }

    auto gen = small_run(run_dir);
    gen["pipeline"]["n_generated"] = 10;
    {
        Orchestrator o(RunConfig::from_json(gen, dir.path()));
        CHECK(to_run(o) == std::vector<std::string>{"generate", "merge", "train", "eval", "analyze"});
        CHECK(o.run_stage("generate"));
        CHECK(o.record().stages.at("merge").status == StageStatus::stale);
        CHECK(error_of([&] { o.run_stage("train"); }) == Errc::stage_dependency_unmet);
    }

    // A deleted artefact makes the stage rerun even with a matching hash.
    Orchestrator o(RunConfig::from_json(small_run(run_dir), dir.path()));
    fs::remove(run_dir / "dataset" / "manifest.jsonl");
    CHECK_THROWS(o.validate_stage("datasets"));
    CHECK(o.run_stage("datasets"));
}
