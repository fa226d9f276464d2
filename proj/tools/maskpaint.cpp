// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "maskpaint/analysis/flips.hpp"
#include "maskpaint/analysis/plot.hpp"
#include "maskpaint/analysis/table.hpp"
#include "maskpaint/baselines/ablation.hpp"
#include "maskpaint/baselines/mixing.hpp"
#include "maskpaint/classifier/harness.hpp"
#include "maskpaint/classifier/metrics.hpp"
#include "maskpaint/core/csv.hpp"
#include "maskpaint/core/error.hpp"
#include "maskpaint/core/rng.hpp"
#include "maskpaint/datasets/split_plan.hpp"
#include "maskpaint/datasets/synth.hpp"
#include "maskpaint/orchestrator/run.hpp"
#include "maskpaint/pipeline/pipeline.hpp"
#include "maskpaint/review/service.hpp"

namespace fs = std::filesystem;
using namespace maskpaint;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

bool is_config_error(Errc c) {
    switch (c) {
    case Errc::config_invalid:
    case Errc::template_invalid:
    case Errc::unknown_condition:
    case Errc::unbound_placeholder:
    case Errc::invalid_request:
        return true;
    default:
        return false;
    }
}

json load_json_arg(const std::string& path) {
    if (!fs::exists(path)) raise(Errc::config_invalid, "no such file: " + path);
    try {
        return read_json_file(path);
    } catch (const Error& e) {
        raise(Errc::config_invalid, e.what());
    }
}

pipeline::PipelineConfig load_pipeline_config(const std::string& path) {
    json j = load_json_arg(path);
    // A full run config is accepted too.
    if (j.contains("pipeline") && j.contains("dataset")) j = j.at("pipeline");
    auto cfg = pipeline::PipelineConfig::from_json(j);
    if (cfg.mask_dir && cfg.mask_dir->is_relative())
        cfg.mask_dir = (fs::absolute(path).parent_path() / *cfg.mask_dir).lexically_normal();
    cfg.validate();
    return cfg;
}

classifier::TrainConfig load_train_config(const std::string& path) {
    json j = load_json_arg(path);
    if (j.contains("classifier") && j.contains("dataset")) j = j.at("classifier");
    auto cfg = classifier::TrainConfig::from_json(j);
    cfg.validate();
    return cfg;
}

prompts::PromptRegistry load_registry(const std::string& path) {
    return path.empty() ? prompts::PromptRegistry::defaults() : prompts::PromptRegistry::load(path);
}

void rebase_refs(datasets::DatasetManifest& m, const fs::path& from, const fs::path& to) {
    for (auto& r : m.records) r.image_ref = relative_ref(generative::resolve_ref(from, r.image_ref), to);
}

std::optional<datasets::Domain> parse_domain_arg(const std::string& d) {
    if (d == "all") return std::nullopt;
    return datasets::parse_domain(d);
}

classifier::TrainOptions method_options(const std::string& method) {
    classifier::TrainOptions opts;
    if (method == "mixup") opts.batch_transform = baselines::mixup_transform();
    else if (method == "cutmix") opts.batch_transform = baselines::cutmix_transform();
    else if (method != "base") raise(Errc::config_invalid, "clf train supports base, mixup and cutmix");
    return opts;
}

review::ReviewHttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

void print_json(const json& j) {
    std::cout << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"maskpaint: ROI-preserving inpainting augmentation for spurious-correlation mitigation"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    // ------------------------------------------------------------ datasets
    auto* ds = app.add_subcommand("datasets", "Build, synthesize and validate dataset manifests");
    ds->require_subcommand(1);
    std::string ds_plan, ds_metadata, ds_out, ds_image_root, ds_spec, ds_manifest;
    std::size_t ds_surplus = 0;
    bool ds_no_check = false;
    auto* ds_build = ds->add_subcommand("build", "Sample a manifest from a metadata table and a split plan");
    ds_build->add_option("--plan", ds_plan, "Split plan file")->required();
    ds_build->add_option("--metadata", ds_metadata, "Metadata CSV")->required();
    ds_build->add_option("--out", ds_out, "Output directory")->required();
    ds_build->add_option("--image-root", ds_image_root, "Image root (default: metadata directory)");
    ds_build->add_flag("--no-check-images", ds_no_check, "Skip decoding selected images");
    auto* ds_synth = ds->add_subcommand("synth", "Render the synthetic shapes dataset");
    ds_synth->add_option("--spec", ds_spec, "Synthetic spec file")->required();
    ds_synth->add_option("--out", ds_out, "Output directory")->required();
    auto* ds_meta = ds->add_subcommand("metadata", "Write a synthetic metadata table that satisfies a plan");
    ds_meta->add_option("--plan", ds_plan, "Split plan file")->required();
    ds_meta->add_option("--out", ds_out, "Output CSV")->required();
    ds_meta->add_option("--surplus", ds_surplus, "Extra rows per cell");
    auto* ds_validate = ds->add_subcommand("validate", "Check a manifest's invariants");
    ds_validate->add_option("--manifest", ds_manifest, "Manifest file")->required();

    // ------------------------------------------------------------ pipeline
    auto* pl = app.add_subcommand("pipeline", "Run the augmentation pipeline outside a run directory");
    pl->require_subcommand(1);
    std::string pl_config, pl_manifest, pl_out, pl_prompts, pl_queue, pl_queues;
    bool pl_auto = false;
    auto* pl_run = pl->add_subcommand("run", "Masks, fine-tuning, grid selection and generation");
    pl_run->add_option("--config", pl_config, "Pipeline config (or a run config)")->required();
    pl_run->add_option("--manifest", pl_manifest, "Dataset manifest")->required();
    pl_run->add_option("--out", pl_out, "Work directory")->required();
    pl_run->add_option("--prompts", pl_prompts, "Prompt registry file");
    auto* pl_merge = pl->add_subcommand("merge", "Keep originals plus approved generations");
    pl_merge->add_option("--manifest", pl_manifest, "Augmented manifest written by pipeline run")->required();
    pl_merge->add_option("--queue", pl_queue, "Review queue id");
    pl_merge->add_option("--queues", pl_queues, "Queue root (default: <manifest dir>/review)");
    pl_merge->add_flag("--auto", pl_auto, "Keep every generation without review");
    pl_merge->add_option("--out", pl_out, "Output manifest (default: <manifest dir>/merged.jsonl)");

    // ------------------------------------------------------------ run stages
    std::string run_config;
    auto stage_cmd = [&](const std::string& name, const std::string& help) {
        auto* c = app.add_subcommand(name, help);
        c->add_option("--config", run_config, "Run config")->required();
        return c;
    };
    auto* st_masks = stage_cmd("masks", "Run the masks stage of a run");
    auto* st_finetune = app.add_subcommand("finetune", "Run a fine-tuning stage of a run");
    st_finetune->require_subcommand(1);
    auto* st_ft_source = st_finetune->add_subcommand("source", "Fine-tune on source image/mask pairs");
    st_ft_source->add_option("--config", run_config, "Run config")->required();
    auto* st_ft_target = st_finetune->add_subcommand("target", "Fine-tune on target backgrounds");
    st_ft_target->add_option("--config", run_config, "Run config")->required();
    auto* st_generate = stage_cmd("generate", "Run the generate stage of a run");
    auto* st_merge = stage_cmd("merge", "Run the merge stage of a run");
    std::string through;
    bool dry_run = false;
    auto* run_all = stage_cmd("run-all", "Run every stage that is not current");
    run_all->add_option("--through", through, "Stop after this stage");
    run_all->add_flag("--dry-run", dry_run, "Print the execution plan only");
    auto* status = stage_cmd("status", "Show recorded stage status");

    // ------------------------------------------------------------ review
    auto* rv = app.add_subcommand("review", "Human review queues");
    rv->require_subcommand(1);
    std::string rv_root = "review", rv_queue, rv_host = "127.0.0.1", rv_token;
    int rv_port = 8080;
    bool rv_no_cors = false;
    auto* rv_serve = rv->add_subcommand("serve", "Serve review queues over HTTP");
    rv_serve->add_option("--root", rv_root, "Directory holding queue directories");
    rv_serve->add_option("--queue", rv_queue, "Require this queue to exist");
    rv_serve->add_option("--port", rv_port, "Port (0 picks a free one)");
    rv_serve->add_option("--host", rv_host, "Bind address");
    rv_serve->add_option("--token", rv_token, "Bearer token required on every request");
    rv_serve->add_flag("--no-cors", rv_no_cors, "Do not send CORS headers");
    auto* rv_list = rv->add_subcommand("list", "List queues and their counts");
    rv_list->add_option("--root", rv_root, "Directory holding queue directories");

    // ------------------------------------------------------------ clf
    auto* clf = app.add_subcommand("clf", "Train and evaluate classifiers");
    clf->require_subcommand(1);
    std::string clf_manifest, clf_config, clf_out, clf_method = "base", clf_domain = "all";
    int clf_seeds = 5;
    std::uint64_t clf_root_seed = 0;
    std::vector<std::string> clf_handles;
    auto* clf_train = clf->add_subcommand("train", "Train one classifier per seed");
    clf_train->add_option("--manifest", clf_manifest, "Training manifest")->required();
    clf_train->add_option("--config", clf_config, "Classifier config (or a run config)")->required();
    clf_train->add_option("--seeds", clf_seeds, "Number of seeds");
    clf_train->add_option("--seed", clf_root_seed, "Root seed");
    clf_train->add_option("--method", clf_method, "base, mixup or cutmix");
    clf_train->add_option("--out", clf_out, "Output directory")->required();
    auto* clf_eval = clf->add_subcommand("eval", "Evaluate handles on the test split");
    clf_eval->add_option("--handle", clf_handles, "Classifier directory (repeatable)")->required();
    clf_eval->add_option("--manifest", clf_manifest, "Manifest with the test split")->required();
    clf_eval->add_option("--domain", clf_domain, "source, target or all");
    clf_eval->add_option("--method", clf_method, "Method name recorded in the report");
    clf_eval->add_option("--out", clf_out, "Report file (default: stdout)");

    // ------------------------------------------------------------ ablate
    auto* ab = app.add_subcommand("ablate", "Data-scaling and generation-method ablations");
    ab->require_subcommand(1);
    std::string ab_plan, ab_out, ab_manifest;
    auto* ab_run = ab->add_subcommand("run", "Run (or resume) an ablation plan");
    ab_run->add_option("--plan", ab_plan, "Ablation plan file")->required();
    ab_run->add_option("--out", ab_out, "Output directory")->required();
    ab_run->add_option("--config", run_config, "Run config supplying pipeline, classifier and dataset")->required();
    ab_run->add_option("--manifest", ab_manifest, "Dataset manifest (default: the run's datasets stage)");

    // ------------------------------------------------------------ analyze
    auto* an = app.add_subcommand("analyze", "Flip rates and result tables");
    an->require_subcommand(1);
    std::string an_generated, an_attr_model, an_manifest, an_out, an_reports, an_format = "both", an_attribute,
                                                                      an_config;
    auto* an_flips = an->add_subcommand("flips", "Spurious-attribute flip rates of generated images");
    an_flips->add_option("--generated", an_generated, "Pipeline work directory")->required();
    an_flips->add_option("--attr-model", an_attr_model, "Attribute model directory")->required();
    an_flips->add_option("--manifest", an_manifest, "Source manifest (default: <generated>/manifest.jsonl)");
    an_flips->add_option("--out", an_out, "Output directory (default: <generated>/flips)");
    auto* an_attr = an->add_subcommand("attr-train", "Train the attribute classifier");
    an_attr->add_option("--manifest", an_manifest, "Annotated manifest")->required();
    an_attr->add_option("--attribute", an_attribute, "Group attribute key")->required();
    an_attr->add_option("--config", an_config, "Classifier config")->required();
    an_attr->add_option("--out", an_out, "Output directory")->required();
    auto* an_table = an->add_subcommand("table", "Render the comparison table from report files");
    an_table->add_option("--reports", an_reports, "Directory of <method>.json reports")->required();
    an_table->add_option("--out", an_out, "Output file; .md and .tex are written for --format both")->required();
    an_table->add_option("--format", an_format, "text, latex or both")
        ->check(CLI::IsMember({"text", "latex", "both"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (ds_build->parsed()) {
            const auto plan = datasets::load_plan(ds_plan);
            const fs::path image_root = ds_image_root.empty() ? fs::absolute(ds_metadata).parent_path()
                                                              : fs::absolute(ds_image_root);
            datasets::BuildOptions opts;
            if (!ds_no_check) opts.image_root = image_root;
            auto m = datasets::build_manifest(Table::read(ds_metadata), plan, opts);
            rebase_refs(m, image_root, fs::absolute(ds_out));
            datasets::write_manifest(fs::path(ds_out) / "manifest.jsonl", m);
            std::cout << "wrote " << m.records.size() << " records to " << (fs::path(ds_out) / "manifest.jsonl").string()
                      << "\n";
        } else if (ds_synth->parsed()) {
            const auto m = datasets::synth_dataset(datasets::synth_spec_from_json(load_json_arg(ds_spec)), ds_out);
            std::cout << "wrote " << m.records.size() << " synthetic records to " << ds_out << "\n";
        } else if (ds_meta->parsed()) {
            const auto table = datasets::synthetic_metadata(datasets::load_plan(ds_plan), ds_surplus);
            table.write(ds_out);
            std::cout << "wrote " << table.rows() << " metadata rows to " << ds_out << "\n";
        } else if (ds_validate->parsed()) {
            const auto m = datasets::read_manifest(ds_manifest);
            datasets::validate_manifest(m);
            json counts = json::object();
            for (auto s : datasets::kAllSplits) counts[std::string(datasets::to_string(s))] = m.count(s);
            print_json({{"name", m.name}, {"records", m.records.size()}, {"splits", counts}});
        } else if (pl_run->parsed()) {
            const auto cfg = load_pipeline_config(pl_config);
            const auto m = datasets::read_manifest(pl_manifest);
            const auto out = pipeline::run_pipeline(cfg, m, fs::absolute(pl_manifest).parent_path(), pl_out,
                                                    load_registry(pl_prompts));
            json summary = {{"generated", out.generation_ids.size()},
                            {"skipped", out.skipped.size()},
                            {"partial_failure", out.partial_failure},
                            {"grid_point", {{"strength", out.grid_point.strength},
                                            {"guidance_scale", out.grid_point.guidance_scale}}}};
            if (out.queue_id) summary["queue_id"] = *out.queue_id;
            print_json(summary);
        } else if (pl_merge->parsed()) {
            const fs::path manifest_dir = fs::absolute(pl_manifest).parent_path();
            const auto m = datasets::read_manifest(pl_manifest);
            datasets::DatasetManifest merged;
            if (pl_auto) {
                merged = pipeline::merge_approved(m, review::ReviewQueue{}, true);
            } else {
                if (pl_queue.empty() && fs::exists(manifest_dir / "run_meta.json"))
                    pl_queue = read_json_file(manifest_dir / "run_meta.json").value("queue_id", std::string{});
                if (pl_queue.empty()) raise(Errc::config_invalid, "pipeline merge needs --queue or --auto");
                const fs::path root = pl_queues.empty() ? manifest_dir / "review" : fs::path(pl_queues);
                merged = pipeline::merge_approved(m, review::load_queue(review::queue_dir(root, pl_queue)));
            }
            const fs::path out = pl_out.empty() ? manifest_dir / "merged.jsonl" : fs::absolute(pl_out);
            rebase_refs(merged, manifest_dir, out.parent_path());
            datasets::write_manifest(out, merged);
            std::cout << "wrote " << merged.records.size() << " records to " << out.string() << "\n";
        } else if (st_masks->parsed() || st_ft_source->parsed() || st_ft_target->parsed() || st_generate->parsed() ||
                   st_merge->parsed()) {
            orchestrator::Orchestrator orch(orchestrator::RunConfig::load(run_config));
            const std::string stage = st_masks->parsed()       ? "masks"
                                      : st_ft_source->parsed() ? "finetune-source"
                                      : st_ft_target->parsed() ? "finetune-target"
                                      : st_generate->parsed()  ? "generate"
                                                               : "merge";
            try {
                const bool ran = orch.run_stage(stage);
                std::cout << stage << (ran ? ": complete\n" : ": already complete, skipped\n");
            } catch (const Error& e) {
                if (e.code() == Errc::config_invalid) throw;
                std::cerr << "stage " << stage << " failed: " << errc_name(e.code()) << ": " << e.what() << "\n";
                return kExitStage;
            }
        } else if (run_all->parsed()) {
            orchestrator::Orchestrator orch(orchestrator::RunConfig::load(run_config));
            const std::optional<std::string> target = through.empty() ? std::nullopt : std::optional(through);
            if (dry_run) {
                std::cout << orchestrator::Orchestrator::format_plan(orch.plan(target));
                return 0;
            }
            try {
                orch.run_through(target);
            } catch (const Error& e) {
                if (e.code() == Errc::config_invalid) throw;
                std::cerr << "run failed: " << errc_name(e.code()) << ": " << e.what() << "\n";
                return kExitStage;
            }
            std::cout << "run " << orch.config().run_id << " complete under " << orch.run_dir().string() << "\n";
        } else if (status->parsed()) {
            orchestrator::Orchestrator orch(orchestrator::RunConfig::load(run_config));
            std::cout << orchestrator::Orchestrator::format_plan(orch.plan());
        } else if (rv_serve->parsed()) {
            review::ReviewService service(rv_root);
            if (!rv_queue.empty()) service.list_items(rv_queue, std::nullopt, 0, 1);
            review::ServerOptions opts;
            if (!rv_token.empty()) opts.token = rv_token;
            opts.allow_cors = !rv_no_cors;
            review::ReviewHttpServer server(service, opts);
            const int port = server.bind(rv_host, rv_port);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cout << "serving " << rv_root << " on http://" << rv_host << ":" << port << std::endl;
            server.serve();
            g_server = nullptr;
        } else if (rv_list->parsed()) {
            review::ReviewService service(rv_root);
            json out = json::array();
            for (const auto& [id, c] : service.queues()) {
                out.push_back({{"id", id}, {"pending", c.pending}, {"approved", c.approved}, {"rejected", c.rejected}});
            }
            print_json(out);
        } else if (clf_train->parsed()) {
            if (clf_seeds < 1) raise(Errc::config_invalid, "--seeds must be positive");
            const auto cfg = load_train_config(clf_config);
            const auto m = datasets::read_manifest(clf_manifest);
            const auto opts = method_options(clf_method);
            for (int k = 0; k < clf_seeds; ++k) {
                auto tc = cfg;
                tc.seed = derive_seed(clf_root_seed, static_cast<std::uint64_t>(k));
                const fs::path out = fs::path(clf_out) / ("seed-" + std::to_string(k));
                const auto h = classifier::train(m, fs::absolute(clf_manifest).parent_path(), tc, out, opts);
                std::cout << out.string() << " seed=" << tc.seed << " best_val=" << h.best_val_score << "\n";
            }
        } else if (clf_eval->parsed()) {
            const auto m = datasets::read_manifest(clf_manifest);
            const auto domain = parse_domain_arg(clf_domain);
            std::vector<std::uint64_t> seeds;
            std::map<std::string, std::map<std::string, std::vector<double>>> values;
            for (const auto& h : clf_handles) {
                const auto handle = classifier::ClassifierHandle::load(h);
                const auto e = classifier::evaluate(handle, m, fs::absolute(clf_manifest).parent_path(), domain);
                seeds.push_back(handle.config.seed);
                values[e.domain][e.metric].push_back(e.value);
            }
            json report;
            if (clf_handles.size() >= 2) {
                report = classifier::build_report(clf_method, seeds, values).to_json();
            } else {
                const auto& [d, metrics] = *values.begin();
                report = {{"method", clf_method},
                          {"seeds", seeds},
                          {"domain", d},
                          {"metric", metrics.begin()->first},
                          {"value", metrics.begin()->second.front()}};
            }
            if (clf_out.empty()) print_json(report);
            else write_json_file(clf_out, report);
        } else if (ab_run->parsed()) {
            const auto rc = orchestrator::RunConfig::load(run_config);
            auto plan = baselines::AblationPlan::from_json(load_json_arg(ab_plan));
            fs::path manifest_path = ab_manifest;
            if (manifest_path.empty()) {
                orchestrator::Orchestrator orch(rc);
                orch.run_stage("datasets");
                manifest_path = orch.run_dir() / "dataset" / "manifest.jsonl";
            }
            const auto m = datasets::read_manifest(manifest_path);
            auto pcfg = rc.pipeline;
            pcfg.seed = derive_seed(rc.seed, "stage/generate");
            const auto reg = rc.prompts ? prompts::PromptRegistry::load(*rc.prompts) : prompts::PromptRegistry::defaults();
            baselines::StandardEvaluator evaluator(m, fs::absolute(manifest_path).parent_path(), pcfg, rc.classifier,
                                                   fs::path(ab_out) / "work", reg);
            const auto report = baselines::run_ablation(
                plan, derive_seed(rc.seed, "ablation"), evaluator.target_pool_size(),
                [&](const baselines::AblationCell& c) { return evaluator(c); }, ab_out);
            const json series = report.series();
            for (const char* d : {"target", "source", "overall"})
                write_text_atomic(fs::path(ab_out) / ("series_" + std::string(d) + ".svg"),
                                  analysis::plot_series_svg(series, d, std::string("Ablation, ") + d + " test"));
            std::cout << "ablation with " << report.cells.size() << " cells written to " << ab_out << "\n";
        } else if (an_flips->parsed()) {
            const fs::path run_dir = an_generated;
            const fs::path manifest = an_manifest.empty() ? run_dir / "manifest.jsonl" : fs::path(an_manifest);
            const auto model = analysis::AttributeModel::load(an_attr_model);
            const auto report = analysis::flip_rates(analysis::load_results(run_dir), run_dir,
                                                     datasets::read_manifest(manifest), model,
                                                     an_out.empty() ? run_dir / "flips" : fs::path(an_out));
            print_json(report.to_json());
        } else if (an_attr->parsed()) {
            const auto m = datasets::read_manifest(an_manifest);
            const auto model = analysis::train_attribute_classifier(m, fs::absolute(an_manifest).parent_path(),
                                                                    an_attribute, load_train_config(an_config), an_out);
            std::cout << "attribute " << an_attribute << " test accuracy " << model.accuracy << "\n";
        } else if (an_table->parsed()) {
            std::vector<std::pair<std::string, classifier::EvalReport>> rows;
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(an_reports))
                if (e.path().extension() == ".json") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) {
                const json j = read_json_file(f);
                if (!j.contains("cells")) continue;
                auto r = classifier::EvalReport::from_json(j);
                rows.emplace_back(r.method, std::move(r));
            }
            const auto table = analysis::render_table(rows);
            fs::path out = an_out;
            if (an_format == "text") {
                write_text_atomic(out, table.text());
            } else if (an_format == "latex") {
                write_text_atomic(out, table.latex());
            } else {
                write_text_atomic(fs::path(out).replace_extension(".md"), table.text());
                write_text_atomic(fs::path(out).replace_extension(".tex"), table.latex());
            }
            std::cout << table.text();
        }
    } catch (const Error& e) {
        std::cerr << "error: " << errc_name(e.code()) << ": " << e.what() << "\n";
        return is_config_error(e.code()) ? kExitConfig : kExitStage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStage;
    }
    return 0;
}
