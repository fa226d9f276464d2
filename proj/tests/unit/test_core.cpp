// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "maskpaint/core/csv.hpp"
#include "maskpaint/core/error.hpp"
#include "maskpaint/core/external.hpp"
#include "maskpaint/core/image.hpp"
#include "maskpaint/core/io.hpp"
#include "maskpaint/core/rng.hpp"

using namespace maskpaint;
using testing::error_of;
using testing::TempDir;
namespace fs = std::filesystem;

TEST_CASE("sha256 matches the FIPS 180-2 vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("atomic text write round-trips and replaces") {
    TempDir dir;
    const auto p = dir / "sub/file.txt";
    write_text_atomic(p, "one");
    write_text_atomic(p, "two\nlines");
    CHECK(read_text(p) == "two\nlines");
    CHECK(sha256_file(p) == sha256_hex("two\nlines"));
    CHECK(error_of([&] { read_text(dir / "missing"); }) == Errc::io_failure);
}

TEST_CASE("json config files accept comments") {
    TempDir dir;
    write_text_atomic(dir / "c.jsonc", "// header\n{\n  \"a\": 1, /* inline */\n  \"b\": \"x//y\"\n}\n");
    const json j = read_json_file(dir / "c.jsonc");
    CHECK(j.at("a") == 1);
    CHECK(j.at("b") == "x//y");
}

TEST_CASE("relative refs use forward slashes") {
    CHECK(relative_ref("/a/b/c/d.png", "/a/b") == "c/d.png");
    CHECK(relative_ref("/a/x.png", "/a/b") == "../x.png");
}

TEST_CASE("seed derivation is deterministic and label sensitive") {
    CHECK(derive_seed(7, "generate") == derive_seed(7, "generate"));
    CHECK(derive_seed(7, "generate") != derive_seed(7, "train"));
    CHECK(derive_seed(7, "generate") != derive_seed(8, "generate"));
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(3, i));
    CHECK(seen.size() == 1000);
}

TEST_CASE("rng streams and distribution moments") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

    Rng r(1);
    double sum = 0, beta_sum = 0, norm_sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        CHECK_UNARY(u >= 0.0);
        CHECK_UNARY(u < 1.0);
        sum += u;
        const double be = r.beta(0.4, 0.4);
        CHECK_UNARY(be >= 0.0);
        CHECK_UNARY(be <= 1.0);
        beta_sum += be;
        const double z = r.normal();
        norm_sq += z * z;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
    CHECK(beta_sum / n == doctest::Approx(0.5).epsilon(0.03));
    CHECK(norm_sq / n == doctest::Approx(1.0).epsilon(0.05));
    for (int i = 0; i < 1000; ++i) CHECK(r.index(7) < 7u);
}

TEST_CASE("png round trip for colour images and masks") {
    TempDir dir;
    Image img(5, 3, 3);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 13);
    write_png(dir / "a.png", img);
    CHECK(read_png(dir / "a.png") == img);

    Mask m(4, 4);
    m.set(1, 2, true);
    m.set(3, 3, true);
    write_mask_png(dir / "m.png", m);
    const Mask back = read_mask_png(dir / "m.png");
    CHECK(back == m);
    CHECK(back.count() == 2);
    CHECK(back.coverage() == doctest::Approx(2.0 / 16.0));
    CHECK(back.complement().count() == 14);
    CHECK(error_of([&] { read_png(dir / "nope.png"); }) == Errc::io_failure);
}

TEST_CASE("nearest resize keeps source values") {
    Image img(2, 2, 1);
    img.pixels = {10, 20, 30, 40};
    const Image up = resize_nearest(img, 4, 4);
    CHECK(up.width == 4);
    std::set<int> values(up.pixels.begin(), up.pixels.end());
    CHECK(values == std::set<int>{10, 20, 30, 40});
    CHECK(up.at(3, 3, 0) == 40);
    CHECK(to_rgb(img).channels == 3);
}

TEST_CASE("csv parsing with quotes and embedded newlines") {
    const Table t = Table::parse("id,note\n1,\"a, b\"\n2,\"say \"\"hi\"\"\"\n3,\"two\nlines\"\n");
    REQUIRE(t.rows() == 3);
    CHECK(t.cell(0, 1) == "a, b");
    CHECK(t.cell(1, 1) == "say \"hi\"");
    CHECK(t.cell(2, 1) == "two\nlines");
    CHECK(Table::parse(t.to_csv()).cell(2, 1) == "two\nlines");
    CHECK(t.require_column("note") == 1);
    CHECK(error_of([&] { t.require_column("label"); }) == Errc::missing_column);
}

TEST_CASE("external worker failures surface as backend failures") {
    TempDir dir;
    json req = {{"op", "nonsense"}, {"id", "r1"}};
    auto cmd = testing::fake_worker();
    cmd.work_dir = dir.path();
    CHECK(error_of([&] { run_external(cmd, {req}); }) == Errc::backend_failure);

    cmd = testing::fake_worker({"--exit", "9"});
    cmd.work_dir = dir.path();
    CHECK(error_of([&] { run_external(cmd, {req}); }) == Errc::backend_failure);

    cmd = testing::fake_worker({"--no-response"});
    cmd.work_dir = dir.path();
    CHECK(error_of([&] { run_external(cmd, {req}); }) == Errc::backend_failure);

    ExternalCommand missing;
    missing.program = (dir / "does-not-exist").string();
    CHECK(error_of([&] { run_external(missing, {req}); }) == Errc::backend_failure);
}

TEST_CASE("error names") {
    CHECK(std::string(errc_name(Errc::already_decided)) == "AlreadyDecided");
    CHECK(std::string(errc_name(Errc::stage_dependency_unmet)) == "StageDependencyUnmet");
}
