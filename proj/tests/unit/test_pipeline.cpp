// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "maskpaint/core/image.hpp"
#include "maskpaint/datasets/synth.hpp"
#include "maskpaint/pipeline/pipeline.hpp"
#include "maskpaint/review/queue.hpp"
#include "maskpaint/review/service.hpp"

using namespace maskpaint;
using namespace maskpaint::pipeline;
using datasets::Split;
using testing::error_of;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

datasets::DatasetManifest counted_manifest(const std::vector<std::pair<std::string, int>>& counts) {
    datasets::DatasetManifest m;
    m.name = "counts";
    for (const auto& [label, n] : counts) {
        m.classes.push_back(label);
        for (int i = 0; i < n; ++i) {
            datasets::SampleRecord r;
            r.id = label + "-" + std::to_string(i);
            r.image_ref = "images/" + r.id + ".png";
            r.class_label = label;
            m.records.push_back(r);
        }
    }
    return m;
}

PipelineConfig quick_config(int n_generated = 10) {
    PipelineConfig c;
    c.selection = GridSelection::fixed;
    c.fixed_point = {1.0, 7.5};
    c.n_generated = n_generated;
    c.target_guard.min_images = 4;
    c.seed = 21;
    return c;
}

struct Dataset {
    TempDir dir{"pipe"};
    datasets::DatasetManifest manifest = datasets::synth_dataset(testing::small_spec(6, 16), dir / "ds");
};

}  // namespace

TEST_CASE("largest remainder quotas") {
    const auto m = counted_manifest({{"a", 5}, {"b", 3}, {"c", 2}});
    const auto q = class_quotas(m, 7);
    CHECK(q.at("a") == 4);
    CHECK(q.at("b") == 2);
    CHECK(q.at("c") == 1);
    std::size_t total = 0;
    for (const auto& [k, v] : class_quotas(m, 23)) total += v;
    CHECK(total == 23);
}

TEST_CASE("generation plans") {
    const auto m = counted_manifest({{"a", 5}, {"b", 3}, {"c", 2}});
    const auto plan = plan_generations(m, 7, 3);
    REQUIRE(plan.size() == 7);
    std::set<std::string> sources, ids;
    for (const auto& d : plan) {
        sources.insert(d.source_id);
        ids.insert(d.id);
    }
    CHECK(sources.size() == 7);
    CHECK(ids.size() == 7);

    const auto big = plan_generations(m, 25, 3);
    REQUIRE(big.size() == 25);
    const auto again = plan_generations(m, 25, 3);
    for (std::size_t i = 0; i < big.size(); ++i) {
        CHECK(big[i].id == again[i].id);
        CHECK(big[i].source_id == again[i].source_id);
        CHECK(big[i].seed == again[i].seed);
    }
    CHECK(plan_generations(m, 25, 4)[0].seed != big[0].seed);
}

TEST_CASE("config parsing") {
    const auto c = PipelineConfig::from_json(json{{"n_generated", 7}, {"review", "queue"}, {"selection", "fixed"}});
    CHECK(c.n_generated == 7);
    CHECK(c.review == ReviewMode::queue);
    CHECK(PipelineConfig{}.n_generated == 2500);
    CHECK(PipelineConfig::from_json(c.to_json()).to_json() == c.to_json());
    CHECK(error_of([] { PipelineConfig::from_json(json{{"review", "maybe"}}); }) == Errc::config_invalid);
    CHECK(error_of([] { PipelineConfig::from_json(json{{"merge_policy", "generated_only"}}); }) ==
          Errc::config_invalid);
}

TEST_CASE("a run keeps the roi of every generated image") {
    Dataset d;
    const auto out = run_pipeline(quick_config(), d.manifest, d.dir / "ds", d.dir / "run");
    CHECK(out.generation_ids.size() == 10);
    CHECK(out.manifest.count(Split::train) == d.manifest.count(Split::train) + 10);
    CHECK(out.generated_per_class.at("hbar") == 5);
    CHECK_FALSE(out.partial_failure);
    CHECK(fs::exists(d.dir / "run" / "run_meta.json"));
    const auto reread = datasets::read_manifest(d.dir / "run" / "manifest.jsonl");
    CHECK(reread == out.manifest);

    int checked = 0;
    for (const auto& r : out.manifest.records) {
        if (!r.generated()) {
            CHECK(fs::exists(d.dir / "run" / r.image_ref));
            continue;
        }
        CHECK(r.split == Split::train);
        CHECK(r.domain == datasets::Domain::source);
        const auto res = load_result(d.dir / "run", r.provenance->result_ref);
        CHECK(res.source_sample_id == r.provenance->source_id);
        CHECK(res.review_status == "auto");
        const Image gen = read_png(d.dir / "run" / res.image_ref);
        const Image src = to_rgb(read_png(d.dir / "run" / res.source_image_ref));
        const Mask mask = read_mask_png(d.dir / "run" / res.protection_mask_ref);
        CHECK(mask.count() > 0);
        CHECK(generative::protected_pixels_equal(gen, src, mask));
        CHECK(gen != src);
        ++checked;
    }
    CHECK(checked == 10);
}

TEST_CASE("a run needs target images") {
    Dataset d;
    auto m = d.manifest;
    std::erase_if(m.records, [](const auto& r) { return r.split == Split::extra; });
    CHECK(error_of([&] { run_pipeline(quick_config(), m, d.dir / "ds", d.dir / "run"); }) == Errc::empty_split);
}

TEST_CASE("an interrupted run resumes to the same manifest") {
    Dataset d;
    const auto cfg = quick_config(12);
    PipelineHooks hooks;
    hooks.after_generation = [](std::size_t stored) {
        if (stored == 5) throw std::runtime_error("interrupted");
    };
    CHECK_THROWS_AS(run_pipeline(cfg, d.manifest, d.dir / "ds", d.dir / "a", prompts::PromptRegistry::defaults(), hooks),
                    std::runtime_error);
    CHECK_FALSE(fs::exists(d.dir / "a" / "manifest.jsonl"));
    const auto resumed = run_pipeline(cfg, d.manifest, d.dir / "ds", d.dir / "a");
    const auto fresh = run_pipeline(cfg, d.manifest, d.dir / "ds", d.dir / "b");
    CHECK(resumed.manifest == fresh.manifest);
    for (const auto& id : fresh.generation_ids) {
        const auto ref = "generated/" + id + ".png";
        CHECK(sha256_file(d.dir / "a" / ref) == sha256_file(d.dir / "b" / ref));
    }
}

TEST_CASE("queue review gates the merge") {
    Dataset d;
    auto cfg = quick_config(6);
    cfg.review = ReviewMode::queue;
    const auto out = run_pipeline(cfg, d.manifest, d.dir / "ds", d.dir / "run");
    REQUIRE(out.queue_id);
    const auto qdir = review::queue_dir(d.dir / "run" / "review", *out.queue_id);
    auto queue = review::load_queue(qdir);
    CHECK(queue.counts().pending == 6);
    CHECK(error_of([&] { merge_approved(out.manifest, queue); }) == Errc::queue_not_finalized);
    CHECK(merge_approved(out.manifest, queue, true).records.size() == out.manifest.records.size());

    review::ReviewService svc(d.dir / "run" / "review");
    for (std::size_t i = 0; i < out.generation_ids.size(); ++i)
        svc.decide(out.generation_ids[i], i % 3 == 0 ? review::ItemStatus::approved : review::ItemStatus::rejected,
                   "");
    queue = review::load_queue(qdir);
    const auto merged = merge_approved(out.manifest, queue);
    CHECK(merged.records.size() == d.manifest.records.size() + 2);
    std::set<std::string> kept;
    for (const auto& r : merged.records)
        if (r.generated()) kept.insert(r.id);
    CHECK(kept == std::set<std::string>{out.generation_ids[0], out.generation_ids[3]});

    const auto results = std::vector<StoredResult>{load_result(d.dir / "run", "generated/" + out.generation_ids[0] +
                                                                                  ".json")};
    CHECK(export_review_queue(results, d.dir / "run", d.dir / "run" / "review", *out.queue_id) == *out.queue_id);
    CHECK(review::load_queue(qdir).counts().approved == 2);
}

TEST_CASE("stages run separately") {
    Dataset d;
    const auto cfg = quick_config();
    const auto masks = compute_masks(cfg, d.manifest, d.dir / "ds", d.dir / "w");
    for (const auto* r : d.manifest.in_split(Split::train))
        CHECK(fs::exists(masking::StoredMaskSegmenter::mask_path(masks.mask_dir, r->id)));
    const auto src = finetune_source_stage(cfg, d.manifest, d.dir / "ds", d.dir / "w");
    const auto bgs = extract_backgrounds(cfg, d.manifest, d.dir / "ds", d.dir / "w");
    CHECK(bgs.size() == d.manifest.count(Split::extra));
    const auto tgt = finetune_target_stage(cfg, src, bgs, d.dir / "w");
    CHECK(tgt.parent == src.dir);
    const auto models = prepare_models(cfg, d.manifest, d.dir / "ds", d.dir / "w");
    CHECK(models.source.checksum == src.checksum);
    CHECK(models.target.checksum == tgt.checksum);
}
