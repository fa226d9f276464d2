// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "maskpaint/core/csv.hpp"
#include "maskpaint/core/image.hpp"
#include "maskpaint/datasets/manifest.hpp"
#include "maskpaint/datasets/split_plan.hpp"
#include "maskpaint/datasets/synth.hpp"

using namespace maskpaint;
using namespace maskpaint::datasets;
using testing::error_of;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

SampleRecord rec(std::string id, Split split, Domain domain, std::string label = "a") {
    SampleRecord r;
    r.id = std::move(id);
    r.image_ref = "images/" + r.id + ".png";
    r.class_label = std::move(label);
    r.split = split;
    r.domain = domain;
    return r;
}

DatasetManifest tiny_manifest() {
    DatasetManifest m;
    m.name = "tiny";
    m.classes = {"a", "b"};
    m.spurious_attr = "bg";
    m.records = {rec("t1", Split::train, Domain::source), rec("v1", Split::val, Domain::source, "b"),
                 rec("e1", Split::extra, Domain::target), rec("x1", Split::test, Domain::target, "b")};
    m.records[0].group_attrs["bg"] = "land";
    return m;
}

SplitPlan two_cell_plan(std::size_t n_first, std::size_t n_second) {
    SplitPlan p;
    p.name = "demo";
    p.classes = {"a", "b"};
    p.spurious_attr = "bg";
    p.attr_columns = {"bg"};
    CellSpec c1;
    c1.class_label = "a";
    c1.group["bg"] = {"land"};
    c1.split = Split::train;
    c1.count = n_first;
    CellSpec c2;
    c2.class_label = "b";
    c2.group["bg"] = {"water"};
    c2.split = Split::extra;
    c2.count = n_second;
    p.cells = {c1, c2};
    return p;
}

Table demo_metadata(std::size_t per_group) {
    Table t({"id", "image_ref", "class_label", "bg"});
    for (std::size_t i = 0; i < per_group; ++i) {
        t.add_row({"a" + std::to_string(i), "img/a" + std::to_string(i) + ".png", "a", "land"});
        t.add_row({"b" + std::to_string(i), "img/b" + std::to_string(i) + ".png", "b", "water"});
    }
    return t;
}

}  // namespace

TEST_CASE("manifest serialization round trip") {
    auto m = tiny_manifest();
    m.records[1].provenance = Provenance{"t1", "g1", "generated/g1.json", "inpaint"};
    const auto back = parse_manifest(serialize_manifest(m));
    CHECK(back == m);
    TempDir dir;
    write_manifest(dir / "m.jsonl", m);
    CHECK(read_manifest(dir / "m.jsonl") == m);
    CHECK(m.count(Split::train) == 1);
    CHECK(m.find("e1")->domain == Domain::target);
    CHECK(m.find("zz") == nullptr);
    CHECK(m.class_index("b") == 1u);
}

TEST_CASE("manifest invariants") {
    auto m = tiny_manifest();
    CHECK_NOTHROW(validate_manifest(m));

    auto dup = m;
    dup.records.push_back(dup.records[0]);
    CHECK(error_of([&] { validate_manifest(dup); }) == Errc::duplicate_id);

    auto wrong_domain = m;
    wrong_domain.records[0].domain = Domain::target;
    CHECK(error_of([&] { validate_manifest(wrong_domain); }) == Errc::manifest_invalid);

    auto extra_source = m;
    extra_source.records[2].domain = Domain::source;
    CHECK(error_of([&] { validate_manifest(extra_source); }) == Errc::manifest_invalid);

    auto bad_class = m;
    bad_class.records[0].class_label = "c";
    CHECK(error_of([&] { validate_manifest(bad_class); }) == Errc::manifest_invalid);

    CHECK(error_of([&] { parse_manifest("not json\n"); }).has_value());
}

TEST_CASE("multi-label flags decode in class order") {
    DatasetManifest m;
    m.classes = {"x", "y", "z"};
    m.multi_label = true;
    CHECK(decode_flags(m, "101") == std::vector<std::string>{"x", "z"});
    CHECK(decode_flags(m, "000").empty());
    CHECK(error_of([&] { decode_flags(m, "10"); }).has_value());
}

TEST_CASE("build_manifest samples exact cell counts") {
    const auto plan = two_cell_plan(5, 3);
    const auto m = build_manifest(demo_metadata(8), plan);
    CHECK(m.count(Split::train) == 5);
    CHECK(m.count(Split::extra) == 3);
    for (const auto* r : m.in_split(Split::train)) {
        CHECK(r->class_label == "a");
        CHECK(r->group_attrs.at("bg") == "land");
        CHECK(r->domain == Domain::source);
    }
    for (const auto* r : m.in_split(Split::extra)) CHECK(r->domain == Domain::target);
    CHECK_NOTHROW(validate_manifest(m));
}

TEST_CASE("build_manifest is seeded") {
    auto plan = two_cell_plan(4, 2);
    const auto meta = demo_metadata(20);
    const auto a = build_manifest(meta, plan);
    const auto b = build_manifest(meta, plan);
    CHECK(a == b);
    plan.sampling_seed = 99;
    const auto c = build_manifest(meta, plan);
    std::set<std::string> ia, ic;
    for (const auto& r : a.records) ia.insert(r.id);
    for (const auto& r : c.records) ic.insert(r.id);
    CHECK(ia != ic);
}

TEST_CASE("insufficient rows name the cell") {
    const auto plan = two_cell_plan(5, 3);
    try {
        build_manifest(demo_metadata(4), plan);
        FAIL("expected InsufficientCellError");
    } catch (const InsufficientCellError& e) {
        CHECK(e.code() == Errc::insufficient_cell);
        CHECK(e.needed() == 5);
        CHECK(e.available() == 4);
        CHECK(e.cell().find("a") != std::string::npos);
    }
}

TEST_CASE("duplicate metadata ids and missing columns") {
    auto meta = demo_metadata(6);
    meta.add_row({"a0", "img/dup.png", "a", "land"});
    CHECK(error_of([&] { build_manifest(meta, two_cell_plan(2, 2)); }) == Errc::duplicate_id);

    Table no_bg({"id", "image_ref", "class_label"});
    no_bg.add_row({"a0", "x.png", "a"});
    CHECK(error_of([&] { build_manifest(no_bg, two_cell_plan(1, 0)); }) == Errc::missing_column);
}

TEST_CASE("image check rejects unreadable references") {
    TempDir dir;
    const auto plan = two_cell_plan(1, 1);
    Table meta({"id", "image_ref", "class_label", "bg"});
    fs::create_directories(dir / "img");
    write_png(dir / "img/a.png", Image(2, 2, 3));
    meta.add_row({"a", "img/a.png", "a", "land"});
    meta.add_row({"b", "img/missing.png", "b", "water"});
    BuildOptions opts;
    opts.image_root = dir.path();
    CHECK(error_of([&] { build_manifest(meta, plan, opts); }).has_value());
    write_png(dir / "img/missing.png", Image(2, 2, 3));
    CHECK(build_manifest(meta, plan, opts).records.size() == 2);
}

TEST_CASE("plan json round trip") {
    auto plan = two_cell_plan(3, 2);
    plan.cells[1].group["bg"] = {"water", "lake"};
    const auto back = plan_from_json(plan_to_json(plan));
    CHECK(back.cells.size() == 2);
    CHECK(back.cells[1].group.at("bg") == std::vector<std::string>{"water", "lake"});
    CHECK(back.split_total(Split::train) == 3);
    CHECK(error_of([&] { plan_from_json(json{{"name", "x"}}); }) == Errc::config_invalid);
}

TEST_CASE("synthetic metadata satisfies its plan") {
    const auto plan = two_cell_plan(7, 4);
    const auto meta = synthetic_metadata(plan, 3);
    CHECK(meta.rows() == 7 + 3 + 4 + 3);
    const auto m = build_manifest(meta, plan);
    CHECK(m.count(Split::train) == 7);
    CHECK(m.count(Split::extra) == 4);
}

TEST_CASE("isic filter drops other labels and patched images") {
    Table t({"id", "label", "patches"});
    t.add_row({"1", "benign", "0"});
    t.add_row({"2", "Malignant", "false"});
    t.add_row({"3", "nevus", "0"});
    t.add_row({"4", "benign", "1"});
    t.add_row({"5", "malignant", "yes"});
    FilterLog log;
    const auto out = filter_isic(t, &log);
    CHECK(log.input_rows == 5);
    CHECK(log.after_label_filter == 4);
    CHECK(log.after_patch_filter == 2);
    REQUIRE(out.rows() == 2);
    CHECK(out.cell(0, 0) == "1");
    CHECK(out.cell(1, 0) == "2");
}

TEST_CASE("synthetic dataset layout and correlation") {
    TempDir dir;
    auto spec = testing::small_spec(6, 16);
    spec.correlation = 1.0;
    const auto m = synth_dataset(spec, dir.path());
    CHECK_NOTHROW(validate_manifest(m));
    CHECK(m.count(Split::train) == 24);
    CHECK(m.count(Split::val) == 6);
    CHECK(m.count(Split::extra) == 12);
    CHECK(m.count(Split::test) == 24);
    CHECK(fs::exists(dir / "manifest.jsonl"));
    const auto groups = spec.group_values();
    const auto names = spec.resolved_class_names();
    for (const auto* r : m.in_split(Split::train)) {
        const auto ci = *m.class_index(r->class_label);
        CHECK(r->group_attrs.at("background") == groups[ci]);
        CHECK(fs::exists(dir / (r->id + ".mask.png")));
    }
    for (const auto* r : m.in_split(Split::extra)) {
        const auto ci = *m.class_index(r->class_label);
        CHECK(r->group_attrs.at("background") != groups[ci]);
    }
    const auto a = render_sample(spec, 0, groups[0], "s1");
    const auto b = render_sample(spec, 0, groups[0], "s1");
    CHECK(a.image == b.image);
    CHECK(a.roi == b.roi);
    CHECK(a.roi.count() > 0);
    CHECK(names.size() == 2);
}
