// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "helpers.hpp"
#include "maskpaint/classifier/metrics.hpp"
#include "maskpaint/core/io.hpp"
#include "maskpaint/datasets/manifest.hpp"

using namespace maskpaint;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
};

CliResult cli(const TempDir& dir, const std::string& args) {
    const auto log = dir / "cli.log";
    const std::string cmd = std::string(MASKPAINT_CLI) + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = fs::exists(log) ? read_text(log) : "";
    return r;
}

const fs::path kSource = MASKPAINT_SOURCE_DIR;

json small_run(const fs::path& out) {
    return json{
        {"run_id", "cli"},
        {"seed", 1},
        {"out_dir", out.string()},
        {"dataset", {{"kind", "synthetic"}, {"synthetic", {{"image_size", 16}, {"n_per_cell", 6}}}}},
        {"pipeline", {{"selection", "fixed"}, {"n_generated", 6}, {"target_guard", {{"min_images", 4}}}}},
        {"classifier", {{"input_size", 16}, {"epochs", 1}, {"batch_size", 16}}},
        {"train", {{"seeds", 2}, {"methods", {"base", "maskpaint"}}}},
    };
}

}  // namespace

TEST_CASE("argument and config errors exit with 2") {
    TempDir dir;
    CHECK(cli(dir, "").code == 2);
    CHECK(cli(dir, "frobnicate").code == 2);
    CHECK(cli(dir, "datasets synth").code == 2);
    write_text_atomic(dir / "bad.json", R"({"n_per_cell": "many"})");
    CHECK(cli(dir, "datasets synth --spec " + (dir / "bad.json").string() + " --out " + (dir / "o").string()).code ==
          2);
    auto cfg = small_run(dir / "run");
    cfg["train"]["methods"] = {"lads"};
    write_text_atomic(dir / "run.json", cfg.dump());
    const auto r = cli(dir, "run-all --config " + (dir / "run.json").string());
    CHECK(r.code == 2);
    CHECK(r.out.find("ConfigInvalid") != std::string::npos);
    CHECK(cli(dir, "--help").code == 0);
}

TEST_CASE("datasets verbs") {
    TempDir dir;
    write_text_atomic(dir / "spec.json", R"({"n_per_cell": 4, "image_size": 16})");
    CHECK(cli(dir, "datasets synth --spec " + (dir / "spec.json").string() + " --out " + (dir / "syn").string()).code ==
          0);
    CHECK(cli(dir, "datasets validate --manifest " + (dir / "syn" / "manifest.jsonl").string()).code == 0);

    const auto plan = (kSource / "configs" / "plans" / "waterbirds.jsonc").string();
    CHECK(cli(dir, "datasets metadata --plan " + plan + " --out " + (dir / "wb" / "metadata.csv").string()).code == 0);
    const auto r = cli(dir, "datasets build --no-check-images --plan " + plan + " --metadata " +
                                (dir / "wb" / "metadata.csv").string() + " --out " + (dir / "wb").string());
    CHECK(r.code == 0);
    const auto m = datasets::read_manifest(dir / "wb" / "manifest.jsonl");
    CHECK(m.count(datasets::Split::train) > 0);

    write_text_atomic(dir / "broken.jsonl", "{\"schema_version\": 1}\nnot json\n");
    CHECK(cli(dir, "datasets validate --manifest " + (dir / "broken.jsonl").string()).code == 3);
}

TEST_CASE("run verbs: dry run, stage failures and a full run") {
    TempDir dir("cli");
    write_text_atomic(dir / "run.json", small_run(dir / "run").dump());
    const auto cfg = (dir / "run.json").string();

    auto r = cli(dir, "run-all --dry-run --config " + cfg);
    CHECK(r.code == 0);
    CHECK(r.out.find("datasets") != std::string::npos);
    CHECK(r.out.find("analyze") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "run" / "run.json"));

    CHECK(cli(dir, "masks --config " + cfg).code == 3);
    CHECK(cli(dir, "run-all --through masks --config " + cfg).code == 0);
    r = cli(dir, "generate --config " + cfg);
    CHECK(r.code == 3);
    CHECK(r.out.find("StageDependencyUnmet") != std::string::npos);
    CHECK(cli(dir, "finetune source --config " + cfg).code == 0);
    CHECK(cli(dir, "finetune target --config " + cfg).code == 0);
    CHECK(cli(dir, "generate --config " + cfg).code == 0);
    CHECK(cli(dir, "merge --config " + cfg).code == 0);
    CHECK(cli(dir, "run-all --config " + cfg).code == 0);
    CHECK(fs::exists(dir / "run" / "reports" / "table.md"));
    r = cli(dir, "status --config " + cfg);
    CHECK(r.code == 0);
    CHECK(r.out.find("skip") != std::string::npos);

    r = cli(dir, "analyze table --reports " + (dir / "run" / "reports").string() + " --format both --out " +
                      (dir / "t.md").string());
    CHECK(r.code == 0);
    CHECK(read_text(dir / "t.md") == read_text(dir / "run" / "reports" / "table.md"));
    CHECK(fs::exists(dir / "t.tex"));
}

TEST_CASE("classifier and pipeline verbs") {
    TempDir dir("cli2");
    write_text_atomic(dir / "spec.json", R"({"n_per_cell": 6, "image_size": 16})");
    cli(dir, "datasets synth --spec " + (dir / "spec.json").string() + " --out " + (dir / "ds").string());
    const auto manifest = (dir / "ds" / "manifest.jsonl").string();
    write_text_atomic(dir / "clf.json", R"({"input_size": 16, "epochs": 1, "batch_size": 16})");

    CHECK(cli(dir, "clf train --manifest " + manifest + " --config " + (dir / "clf.json").string() +
                       " --seeds 2 --method mixup --out " + (dir / "clf").string())
              .code == 0);
    CHECK(cli(dir, "clf train --manifest " + manifest + " --config " + (dir / "clf.json").string() +
                       " --method lads --out " + (dir / "clf").string())
              .code == 2);
    CHECK(cli(dir, "clf eval --manifest " + manifest + " --handle " + (dir / "clf" / "seed-0").string() + " --handle " +
                       (dir / "clf" / "seed-1").string() + " --domain target --method Mixup --out " +
                       (dir / "rep.json").string())
              .code == 0);
    const auto rep = classifier::EvalReport::from_json(read_json_file(dir / "rep.json"));
    CHECK(rep.at("target", "accuracy").n_seeds == 2);

    write_text_atomic(dir / "pipe.json",
                      R"({"selection": "fixed", "n_generated": 4, "review": "queue", "target_guard": {"min_images": 4}})");
    CHECK(cli(dir, "pipeline run --config " + (dir / "pipe.json").string() + " --manifest " + manifest + " --out " +
                       (dir / "gen").string())
              .code == 0);
    CHECK(cli(dir, "pipeline merge --manifest " + (dir / "gen" / "manifest.jsonl").string()).code == 3);
    CHECK(cli(dir, "pipeline merge --auto --manifest " + (dir / "gen" / "manifest.jsonl").string()).code == 0);
    const auto r = cli(dir, "review list --root " + (dir / "gen" / "review").string());
    CHECK(r.code == 0);
    CHECK(r.out.find("pending") != std::string::npos);

    write_text_atomic(dir / "badpipe.json", R"({"backend": "dalle"})");
    CHECK(cli(dir, "pipeline run --config " + (dir / "badpipe.json").string() + " --manifest " + manifest + " --out " +
                       (dir / "gen2").string())
              .code == 2);
}
