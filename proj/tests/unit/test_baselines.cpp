// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "maskpaint/baselines/ablation.hpp"
#include "maskpaint/baselines/masked.hpp"
#include "maskpaint/baselines/mixing.hpp"
#include "maskpaint/core/image.hpp"
#include "maskpaint/datasets/synth.hpp"

using namespace maskpaint;
using namespace maskpaint::baselines;
using classifier::Batch;
using classifier::Tensor;
using testing::error_of;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

Batch random_batch(std::size_t n, int size, Rng& rng) {
    Batch b;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor t(3, size, size);
        for (auto& v : t.data) v = static_cast<float>(rng.uniform());
        b.images.push_back(t);
        std::vector<float> y(2, 0.0f);
        y[i % 2] = 1.0f;
        b.labels.push_back(y);
    }
    return b;
}

double batch_sum(const Batch& b) {
    double s = 0;
    for (const auto& t : b.images)
        for (float v : t.data) s += v;
    return s;
}

}  // namespace

TEST_CASE("mixup conserves pixel and label mass") {
    Rng data(1), rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        Batch b = random_batch(5, 6, data);
        const Batch orig = b;
        const auto rec = apply_mixup(b, rng);
        CHECK(rec.lambda == quantize_lambda(rec.lambda));
        CHECK(batch_sum(b) == doctest::Approx(batch_sum(orig)).epsilon(1e-5));
        for (std::size_t i = 0; i < b.size(); ++i) {
            const std::size_t j = (i + 1) % b.size();
            CHECK(b.labels[i][0] + b.labels[i][1] == 1.0f);
            CHECK(b.labels[i][0] ==
                  doctest::Approx(rec.lambda * orig.labels[i][0] + (1 - rec.lambda) * orig.labels[j][0]));
            CHECK(b.images[i].data[7] ==
                  doctest::Approx(rec.lambda * orig.images[i].data[7] + (1 - rec.lambda) * orig.images[j].data[7]));
        }
    }
    Batch b = random_batch(3, 4, data);
    const Batch orig = b;
    MixParams p = mixup_defaults();
    p.lambda = 1.0;
    apply_mixup(b, rng, p);
    CHECK(b.images[0].data == orig.images[0].data);
    CHECK(b.labels == orig.labels);
    Batch one = random_batch(1, 4, data);
    CHECK(error_of([&] { apply_mixup(one, rng); }) == Errc::batch_too_small);
    CHECK(error_of([&] { apply_cutmix(one, rng); }) == Errc::batch_too_small);
}

TEST_CASE("cutmix pastes a box and weights labels by area") {
    Rng data(3), rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        Batch b = random_batch(4, 8, data);
        const Batch orig = b;
        const auto rec = apply_cutmix(b, rng);
        REQUIRE(rec.box);
        const Box box = *rec.box;
        CHECK(batch_sum(b) == doctest::Approx(batch_sum(orig)).epsilon(1e-5));
        const double kept = quantize_lambda(1.0 - static_cast<double>(box.area()) / 64.0);
        for (std::size_t i = 0; i < b.size(); ++i) {
            const std::size_t j = (i + 1) % b.size();
            CHECK(b.labels[i][0] + b.labels[i][1] == 1.0f);
            CHECK(b.labels[i][0] == doctest::Approx(kept * orig.labels[i][0] + (1 - kept) * orig.labels[j][0]));
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) {
                    const bool inside = x >= box.x0 && x < box.x1 && y >= box.y0 && y < box.y1;
                    CHECK(b.images[i].at(1, y, x) == (inside ? orig.images[j] : orig.images[i]).at(1, y, x));
                }
        }
    }

    Batch b = random_batch(2, 8, data);
    MixParams p = cutmix_defaults();
    p.box = Box{0, 0, 4, 4};
    const Batch orig = b;
    apply_cutmix(b, rng, p);
    CHECK(b.labels[0][0] == doctest::Approx(0.75));
    CHECK(b.images[0].at(0, 0, 0) == orig.images[1].at(0, 0, 0));
    CHECK(b.images[0].at(0, 5, 5) == orig.images[0].at(0, 5, 5));

    Batch same = orig;
    p = cutmix_defaults();
    p.lambda = 1.0;
    apply_cutmix(same, rng, p);
    CHECK(same.images[0].data == orig.images[0].data);
}

TEST_CASE("cutmix boxes") {
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const double lam = rng.uniform();
        const Box b = cutmix_box(10, 12, lam, rng);
        CHECK_UNARY(b.x0 >= 0);
        CHECK_UNARY(b.y0 >= 0);
        CHECK_UNARY(b.x1 <= 12);
        CHECK_UNARY(b.y1 <= 10);
        CHECK_UNARY(b.x0 <= b.x1);
        CHECK_UNARY(b.y0 <= b.y1);
        CHECK(b.area() <= static_cast<long>(std::ceil((1 - lam) * 120)) + 12 + 10);
    }
    CHECK(cutmix_box(10, 10, 1.0, rng).area() == 0);
    CHECK(quantize_lambda(0.3) * 65536 == std::round(0.3 * 65536));
}

TEST_CASE("masked baseline") {
    TempDir dir;
    const auto m = datasets::synth_dataset(testing::small_spec(4, 16), dir / "ds");
    const auto mb = masked_baseline(m, dir / "ds", dir / "ds", dir / "masked");
    CHECK(mb.excluded.empty());
    CHECK(mb.manifest.records.size() == m.records.size());
    CHECK(fs::exists(dir / "masked" / "manifest.jsonl"));
    for (const auto& r : mb.manifest.records) {
        const auto* orig = m.find(r.id);
        REQUIRE(orig);
        const Image before = read_png(dir / "ds" / orig->image_ref);
        const Image after = read_png(dir / "masked" / r.image_ref);
        if (r.split == datasets::Split::test || r.split == datasets::Split::extra) {
            CHECK(after == before);
            continue;
        }
        const Mask roi = read_mask_png(dir / "ds" / (r.id + ".mask.png"));
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                if (roi.get(x, y)) CHECK(after.at(x, y, 0) == before.at(x, y, 0));
                else CHECK(after.at(x, y, 0) == masking::kNormalizationMeanFill[0]);
    }

    const auto victim = m.in_split(datasets::Split::val)[0]->id;
    fs::remove(dir / "ds" / (victim + ".mask.png"));
    CHECK(error_of([&] { masked_baseline(m, dir / "ds", dir / "ds", dir / "m2"); }) == Errc::missing_mask);
}

TEST_CASE("ablation plans and cells") {
    AblationPlan plan;
    CHECK(plan.method_count == 2500);
    CHECK_NOTHROW(plan.validate());
    const auto cells = enumerate_cells(plan, 9);
    CHECK(cells.size() == (5 + 3) * 5);
    for (const auto& c : cells)
        for (const auto& o : cells)
            if (c.seed_index == o.seed_index) CHECK(c.classifier_seed == o.classifier_seed);
    CHECK(cells.front().classifier_seed != cells.back().classifier_seed);

    AblationPlan methods;
    methods.kind = AblationKind::generation_method;
    CHECK(enumerate_cells(methods, 9).size() == 15);
    CHECK(AblationPlan::from_json(methods.to_json()).to_json() == methods.to_json());

    const fs::path shipped = fs::path(MASKPAINT_SOURCE_DIR) / "configs" / "ablations";
    CHECK(AblationPlan::from_json(read_json_file(shipped / "real-vs-generated.jsonc")).to_json() == plan.to_json());
    CHECK(AblationPlan::from_json(read_json_file(shipped / "generation-method.jsonc")).to_json() == methods.to_json());

    AblationPlan bad = plan;
    bad.real_counts = {10, 10};
    CHECK(error_of([&] { bad.validate(); }) == Errc::config_invalid);
    bad.real_counts = {0, 10};
    CHECK(error_of([&] { bad.validate(); }) == Errc::config_invalid);
    CHECK(error_of([] { parse_ablation_kind("other"); }) == Errc::config_invalid);
}

TEST_CASE("ablation runs, logs and resumes") {
    TempDir dir;
    AblationPlan plan;
    plan.real_counts = {2, 4};
    plan.generated_counts = {5};
    plan.seeds = 3;
    int calls = 0;
    CellEvaluator eval = [&](const AblationCell& c) {
        ++calls;
        const double v = 0.1 * static_cast<double>(c.count) + 0.01 * c.seed_index;
        return CellMetrics{v, v + 0.5, v};
    };
    CHECK(error_of([&] { run_ablation(plan, 1, 3, eval, dir / "a"); }) == Errc::insufficient_target_pool);
    const auto rep = run_ablation(plan, 1, 10, eval, dir / "a");
    CHECK(calls == 9);
    CHECK(rep.cells.size() == 9);
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.rows[0].condition == "real");
    CHECK(rep.rows[0].target.n_seeds == 3);
    CHECK(rep.rows[0].target.mean == doctest::Approx(0.21));
    CHECK(fs::exists(dir / "a" / "report.json"));
    CHECK(fs::exists(dir / "a" / "series.json"));
    const json s = rep.series();
    CHECK(s.contains("real"));
    CHECK(s.contains("generated"));

    const auto again = run_ablation(plan, 1, 10, eval, dir / "a");
    CHECK(calls == 9);
    CHECK(again.to_json() == rep.to_json());
}

TEST_CASE("the standard evaluator trains per cell") {
    TempDir dir;
    const auto m = datasets::synth_dataset(testing::small_spec(4, 16), dir / "ds");
    pipeline::PipelineConfig pc;
    pc.selection = pipeline::GridSelection::fixed;
    pc.target_guard.min_images = 2;
    classifier::TrainConfig tc;
    tc.input_size = 16;
    tc.epochs = 2;
    tc.batch_size = 16;
    StandardEvaluator ev(m, dir / "ds", pc, tc, dir / "work");
    CHECK(ev.target_pool_size() == m.count(datasets::Split::extra));
    AblationPlan plan;
    plan.real_counts = {2};
    plan.generated_counts = {4};
    plan.seeds = 1;
    for (const auto& cell : enumerate_cells(plan, 3)) {
        const auto r = ev(cell);
        CHECK_UNARY(r.overall >= 0.0);
        CHECK_UNARY(r.overall <= 1.0);
        CHECK_UNARY(r.target <= 1.0);
    }
}
