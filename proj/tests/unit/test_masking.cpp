// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "helpers.hpp"
#include "maskpaint/core/image.hpp"
#include "maskpaint/masking/roi.hpp"

using namespace maskpaint;
using namespace maskpaint::masking;
using testing::error_of;
using testing::TempDir;

namespace {

// Dark background, bright centre square, bright strip along the left edge.
Image lesion_with_ruler(int size = 20) {
    Image img(size, size, 3, 40);
    for (int y = 6; y < 14; ++y)
        for (int x = 6; x < 14; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = 230;
    for (int y = 0; y < size; ++y)
        for (int c = 0; c < 3; ++c) img.at(0, y, c) = 230;
    return img;
}

}  // namespace

TEST_CASE("stored masks: coverage floor, shape and missing files") {
    TempDir dir;
    Mask m(8, 8);
    m.set(3, 3, true);
    write_mask_png(StoredMaskSegmenter::mask_path(dir.path(), "s1"), m);
    write_mask_png(StoredMaskSegmenter::mask_path(dir.path(), "empty"), Mask(8, 8));
    write_mask_png(StoredMaskSegmenter::mask_path(dir.path(), "small"), Mask(4, 4, true));
    StoredMaskSegmenter seg(dir.path());
    const Image img(8, 8, 3);
    const auto art = segment_roi(img, seg, {"s1"});
    CHECK(art.mask == m);
    CHECK(art.coverage == doctest::Approx(1.0 / 64));
    CHECK(art.source_backend == "stored");
    CHECK(error_of([&] { segment_roi(img, seg, {"s1"}, 0.05); }) == Errc::empty_mask);
    CHECK(error_of([&] { segment_roi(img, seg, {"empty"}); }) == Errc::empty_mask);
    CHECK(error_of([&] { segment_roi(img, seg, {"small"}); }) == Errc::shape_mismatch);
    CHECK(error_of([&] { segment_roi(img, seg, {"absent"}); }) == Errc::backend_failure);
}

TEST_CASE("threshold segmenter drops edge-anchored components") {
    const Image img = lesion_with_ruler();
    ThresholdSegmenter keep_all(60.0, false), drop(60.0, true);
    const Mask all = keep_all.segment(img, {"x"});
    const Mask lesion = drop.segment(img, {"x"});
    CHECK(lesion.count() == 64);
    CHECK(all.count() == 64 + 20);
    CHECK(lesion.get(10, 10));
    CHECK_FALSE(lesion.get(0, 5));
}

TEST_CASE("protection mask dilation") {
    Mask m(9, 9);
    m.set(4, 4, true);
    const auto roi = make_artifact(m, "test");
    CHECK(make_protection_mask(roi, 0).mask == m);
    CHECK(make_protection_mask(roi, 1, StructuringElement::square).mask.count() == 9);
    CHECK(make_protection_mask(roi, 1, StructuringElement::disc).mask.count() == 5);
    const auto d2 = make_protection_mask(roi, 2, StructuringElement::disc);
    CHECK(d2.mask.count() == 13);
    CHECK(d2.dilation_px == 2);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x)
            if (m.get(x, y)) CHECK(d2.mask.get(x, y));
    CHECK(error_of([&] { make_protection_mask(roi, -1); }) == Errc::config_invalid);
}

TEST_CASE("mask_out_background keeps only the roi") {
    const Image img = lesion_with_ruler();
    ThresholdSegmenter seg;
    const auto roi = make_artifact(seg.segment(img, {"x"}), "threshold");
    const Image out = mask_out_background(img, roi, {1, 2, 3});
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (roi.mask.get(x, y)) {
                CHECK(out.at(x, y, 0) == img.at(x, y, 0));
            } else {
                CHECK(out.at(x, y, 0) == 1);
                CHECK(out.at(x, y, 2) == 3);
            }
        }
    CHECK(error_of([&] { mask_out_background(Image(3, 3, 3), roi); }) == Errc::shape_mismatch);
}

TEST_CASE("background extraction never touches pixels outside the roi") {
    const Image img = lesion_with_ruler();
    ThresholdSegmenter seg;
    const auto roi = make_artifact(seg.segment(img, {"x"}), "threshold");
    MeanFillRemover remover;
    const Image bg = extract_background(img, roi, remover);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (!roi.mask.get(x, y))
                for (int c = 0; c < 3; ++c) CHECK(bg.at(x, y, c) == img.at(x, y, c));
    CHECK(bg.at(10, 10, 0) != 230);

    const auto empty = make_artifact(Mask(img.width, img.height), "x");
    CHECK(extract_background(img, empty, remover) == img);
    const auto full = make_artifact(Mask(img.width, img.height, true), "x");
    const Image degenerate = extract_background(img, full, remover);
    for (auto p : degenerate.pixels) CHECK(p == kDegenerateBackgroundFill[0]);
}

TEST_CASE("external segmenter and remover") {
    TempDir dir;
    auto cmd = testing::fake_worker();
    cmd.work_dir = dir.path();
    const Image img = lesion_with_ruler();
    auto seg = make_segmenter("external", dir.path(), &cmd);
    const auto art = segment_roi(img, *seg, {"ext"});
    CHECK(art.mask.count() == 84);
    auto remover = make_remover("external", &cmd);
    const Image bg = extract_background(img, art, *remover);
    CHECK(bg.at(10, 10, 0) == 90);
    CHECK(bg.at(3, 3, 0) == 40);

    auto failing = testing::fake_worker({"--fail-op", "segment"});
    failing.work_dir = dir.path();
    auto bad = make_segmenter("external", dir.path(), &failing);
    CHECK(error_of([&] { segment_roi(img, *bad, {"ext"}); }) == Errc::backend_failure);
    CHECK(error_of([&] { make_segmenter("sam", dir.path()); }) == Errc::config_invalid);
}
