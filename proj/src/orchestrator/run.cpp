// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/orchestrator/run.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <set>

#include <spdlog/spdlog.h>

#include "maskpaint/analysis/flips.hpp"
#include "maskpaint/analysis/table.hpp"
#include "maskpaint/baselines/masked.hpp"
#include "maskpaint/baselines/mixing.hpp"
#include "maskpaint/classifier/metrics.hpp"
#include "maskpaint/core/csv.hpp"
#include "maskpaint/core/error.hpp"
#include "maskpaint/core/rng.hpp"
#include "maskpaint/datasets/split_plan.hpp"
#include "maskpaint/datasets/synth.hpp"

namespace maskpaint::orchestrator {

namespace fs = std::filesystem;
using datasets::DatasetManifest;

const std::vector<StageInfo>& stage_graph() {
    static const std::vector<StageInfo> graph{
        {"datasets", {}},
        {"masks", {"datasets"}},
        {"finetune-source", {"masks"}},
        {"finetune-target", {"finetune-source"}},
        {"generate", {"finetune-target"}},
        {"merge", {"generate"}},
        {"train", {"merge"}},
        {"eval", {"train"}},
        {"analyze", {"eval"}},
    };
    return graph;
}

const StageInfo& stage_info(const std::string& name) {
    for (const auto& s : stage_graph())
        if (s.name == name) return s;
    raise(Errc::config_invalid, "unknown stage '" + name + "'");
}

std::vector<std::string> downstream_of(const std::string& name) {
    stage_info(name);
    std::set<std::string> reached{name};
    std::vector<std::string> out{name};
    for (const auto& s : stage_graph()) {
        if (s.name == name) continue;
        for (const auto& d : s.deps)
            if (reached.contains(d)) {
                reached.insert(s.name);
                out.push_back(s.name);
                break;
            }
    }
    return out;
}

std::string method_title(const std::string& method) {
    if (method == "base") return "Base";
    if (method == "cutmix") return "CutMix";
    if (method == "mixup") return "Mixup";
    if (method == "masked") return "Masked";
    if (method == "maskpaint") return "MaskPaint";
    return method;
}

// ---------------------------------------------------------------- config

RunConfig RunConfig::load(const fs::path& path) {
    if (!fs::exists(path)) raise(Errc::config_invalid, "config file " + path.string() + " does not exist");
    json j;
    try {
        j = read_json_file(path);
    } catch (const Error& e) {
        raise(Errc::config_invalid, e.what());
    }
    return from_json(j, fs::absolute(path).parent_path());
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) raise(Errc::config_invalid, "run config must be an object");
    RunConfig c;
    c.raw = j;
    c.base_dir = base_dir;
    try {
        c.run_id = j.value("run_id", c.run_id);
        c.seed = j.value("seed", c.seed);
        c.out_dir = c.resolve(j.value("out_dir", std::string("runs/") + c.run_id));
        if (!j.contains("dataset")) raise(Errc::config_invalid, "run config needs a dataset section");
        c.dataset = j.at("dataset");
        const std::string kind = c.dataset.value("kind", std::string{});
        if (kind != "synthetic" && kind != "plan" && kind != "manifest")
            raise(Errc::config_invalid, "dataset.kind must be synthetic, plan or manifest");
        if (j.contains("prompts") && !j.at("prompts").is_null()) c.prompts = c.resolve(j.at("prompts").get<std::string>());
        if (j.contains("pipeline")) c.pipeline = pipeline::PipelineConfig::from_json(j.at("pipeline"));
        if (c.pipeline.mask_dir) c.pipeline.mask_dir = c.resolve(*c.pipeline.mask_dir);
        if (j.contains("classifier")) c.classifier = classifier::TrainConfig::from_json(j.at("classifier"));
        c.classifier.validate();
        if (j.contains("train")) {
            c.train_seeds = j.at("train").value("seeds", c.train_seeds);
            c.methods = j.at("train").value("methods", c.methods);
        }
        if (c.train_seeds < 1) raise(Errc::config_invalid, "train.seeds must be positive");
        for (const auto& m : c.methods)
            if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end())
                raise(Errc::config_invalid, "unknown training method '" + m + "'");
        if (c.methods.empty()) raise(Errc::config_invalid, "train.methods must not be empty");
        if (j.contains("analysis")) {
            const auto& a = j.at("analysis");
            if (a.contains("flip_attribute") && !a.at("flip_attribute").is_null())
                c.flip_attribute = a.at("flip_attribute").get<std::string>();
            if (a.contains("attribute_classifier"))
                c.attribute_classifier = classifier::TrainConfig::from_json(a.at("attribute_classifier"));
        } else {
            c.attribute_classifier = c.classifier;
        }
    } catch (const json::exception& e) {
        raise(Errc::config_invalid, std::string("malformed run config: ") + e.what());
    }
    return c;
}

fs::path RunConfig::resolve(const fs::path& p) const {
    return p.is_absolute() ? p : (base_dir / p).lexically_normal();
}

json RunConfig::stage_slice(const std::string& stage) const {
    const json p = pipeline.to_json();
    auto pick = [&](std::initializer_list<const char*> keys) {
        json out = json::object();
        for (const char* k : keys)
            if (p.contains(k)) out[k] = p.at(k);
        return out;
    };
    const json prompts_j = prompts ? read_json_file(*prompts) : json(nullptr);
    if (stage == "datasets") {
        json d = dataset;
        for (const char* k : {"plan", "metadata", "image_root", "manifest"})
            if (d.contains(k)) d[k] = resolve(d.at(k).get<std::string>()).string();
        return d;
    }
    if (stage == "masks") return pick({"segmenter", "segmenter_command", "mask_dir", "coverage_floor"});
    if (stage == "finetune-source") {
        json s = pick({"dataset", "backend", "backend_command", "source_finetune"});
        s["prompts"] = prompts_j;
        return s;
    }
    if (stage == "finetune-target") {
        json s = pick({"remover", "remover_command", "target_finetune", "target_guard"});
        s["prompts"] = prompts_j;
        return s;
    }
    if (stage == "generate") return json{{"pipeline", p}, {"prompts", prompts_j}};
    if (stage == "merge") return pick({"review"});
    if (stage == "train")
        return json{{"classifier", classifier.to_json()}, {"seeds", train_seeds}, {"methods", methods}};
    if (stage == "eval") return json{{"seeds", train_seeds}, {"methods", methods}};
    if (stage == "analyze") {
        json s = {{"methods", methods}};
        s["flip_attribute"] = flip_attribute ? json(*flip_attribute) : json(nullptr);
        if (flip_attribute) s["attribute_classifier"] = attribute_classifier.to_json();
        return s;
    }
    raise(Errc::config_invalid, "unknown stage '" + stage + "'");
}

// ---------------------------------------------------------------- record

std::string_view to_string(StageStatus s) noexcept {
    switch (s) {
    case StageStatus::pending: return "pending";
    case StageStatus::complete: return "complete";
    case StageStatus::stale: return "stale";
    case StageStatus::failed: return "failed";
    }
    return "pending";
}

namespace {

StageStatus parse_stage_status(const std::string& s) {
    for (auto v : {StageStatus::pending, StageStatus::complete, StageStatus::stale, StageStatus::failed})
        if (to_string(v) == s) return v;
    raise(Errc::io_failure, "unknown stage status '" + s + "'");
}

}  // namespace

json RunRecord::to_json() const {
    json stages_j = json::object();
    for (const auto& [name, s] : stages)
        stages_j[name] = {{"status", to_string(s.status)},
                          {"hash", s.hash},
                          {"seed", s.seed},
                          {"started_at", s.started_at},
                          {"finished_at", s.finished_at},
                          {"seconds", s.seconds},
                          {"artifacts", s.artifacts}};
    return {{"run_id", run_id}, {"config_hash", config_hash}, {"root_seed", root_seed}, {"stages", stages_j}};
}

RunRecord RunRecord::from_json(const json& j) {
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.config_hash = j.value("config_hash", std::string{});
    r.root_seed = j.value("root_seed", std::uint64_t{0});
    for (const auto& [name, sj] : j.at("stages").items()) {
        StageRecord s;
        s.status = parse_stage_status(sj.at("status").get<std::string>());
        s.hash = sj.value("hash", std::string{});
        s.seed = sj.value("seed", std::uint64_t{0});
        s.started_at = sj.value("started_at", std::string{});
        s.finished_at = sj.value("finished_at", std::string{});
        s.seconds = sj.value("seconds", 0.0);
        s.artifacts = sj.value("artifacts", json::object());
        r.stages[name] = std::move(s);
    }
    return r;
}

void RunRecord::save(const fs::path& run_dir) const {
    fs::create_directories(run_dir);
    write_json_file(run_dir / kFileName, to_json());
}

RunRecord RunRecord::load(const fs::path& run_dir) {
    const fs::path p = run_dir / kFileName;
    if (!fs::exists(p)) return {};
    return from_json(read_json_file(p));
}

// ---------------------------------------------------------------- orchestrator

Orchestrator::Orchestrator(RunConfig cfg) : m_cfg(std::move(cfg)) {
    m_record = RunRecord::load(m_cfg.out_dir);
    if (!m_record.run_id.empty() && m_record.run_id != m_cfg.run_id)
        raise(Errc::config_invalid, "run directory " + m_cfg.out_dir.string() + " belongs to run '" +
                                        m_record.run_id + "'");
    m_record.run_id = m_cfg.run_id;
    m_record.root_seed = m_cfg.seed;
    m_record.config_hash = sha256_hex(m_cfg.raw.dump());
    for (const auto& s : stage_graph()) m_record.stages.try_emplace(s.name);
}

std::string Orchestrator::stage_hash(const std::string& stage) const {
    std::string text = stage + "\n" + m_cfg.stage_slice(stage).dump() + "\n" + std::to_string(stage_seed(stage));
    for (const auto& d : stage_info(stage).deps) text += "\n" + stage_hash(d);
    return sha256_hex(text);
}

std::uint64_t Orchestrator::stage_seed(const std::string& stage) const {
    return derive_seed(m_cfg.seed, "stage/" + stage);
}

bool Orchestrator::stage_current(const std::string& stage) const {
    const auto& rec = m_record.stages.at(stage);
    return rec.status == StageStatus::complete && rec.hash == stage_hash(stage);
}

std::vector<std::string> Orchestrator::invalidated() const {
    std::vector<std::string> out;
    for (const auto& s : stage_graph()) {
        const auto& rec = m_record.stages.at(s.name);
        if (rec.status == StageStatus::stale ||
            (rec.status == StageStatus::complete && rec.hash != stage_hash(s.name)))
            out.push_back(s.name);
    }
    return out;
}

std::vector<PlannedStage> Orchestrator::plan(const std::optional<std::string>& target) const {
    std::vector<PlannedStage> out;
    std::set<std::string> rerun;
    for (const auto& s : stage_graph()) {
        PlannedStage p;
        p.name = s.name;
        p.hash = stage_hash(s.name);
        p.recorded = m_record.stages.at(s.name).status;
        bool dep_rerun = false;
        for (const auto& d : s.deps) dep_rerun = dep_rerun || rerun.contains(d);
        p.action = (stage_current(s.name) && !dep_rerun) ? PlanAction::skip : PlanAction::run;
        if (p.action == PlanAction::run) rerun.insert(s.name);
        out.push_back(std::move(p));
        if (target && s.name == *target) break;
    }
    if (target) stage_info(*target);
    return out;
}

std::string Orchestrator::format_plan(const std::vector<PlannedStage>& plan) {
    std::string out;
    for (const auto& p : plan) {
        char line[160];
        std::snprintf(line, sizeof line, "%-16s %-4s recorded=%-8s hash=%s\n", p.name.c_str(),
                      p.action == PlanAction::run ? "run" : "skip", std::string(to_string(p.recorded)).c_str(),
                      p.hash.substr(0, 12).c_str());
        out += line;
    }
    return out;
}

const prompts::PromptRegistry& Orchestrator::registry() {
    if (!m_registry) m_registry = m_cfg.prompts ? prompts::PromptRegistry::load(*m_cfg.prompts) : prompts::PromptRegistry::defaults();
    return *m_registry;
}

pipeline::PipelineConfig Orchestrator::pipeline_config() const {
    pipeline::PipelineConfig p = m_cfg.pipeline;
    p.seed = stage_seed("generate");
    return p;
}

const DatasetManifest& Orchestrator::dataset_manifest() {
    if (!m_dataset) m_dataset = datasets::read_manifest(run_dir() / "dataset" / "manifest.jsonl");
    return *m_dataset;
}

bool Orchestrator::run_stage(const std::string& stage) {
    const StageInfo& info = stage_info(stage);
    for (const auto& d : info.deps)
        if (!stage_current(d))
            raise(Errc::stage_dependency_unmet, "stage " + stage + " needs " + d + " to be complete (it is " +
                                                    std::string(to_string(m_record.stages.at(d).status)) +
                                                    (m_record.stages.at(d).status == StageStatus::complete
                                                         ? " under another config)"
                                                         : ")"));
    StageRecord& rec = m_record.stages.at(stage);
    const std::string hash = stage_hash(stage);
    if (rec.status == StageStatus::complete && rec.hash == hash) {
        try {
            validate_stage(stage);
            spdlog::info("stage {} is complete with hash {}; skipping", stage, hash.substr(0, 12));
            return false;
        } catch (const Error& e) {
            spdlog::warn("stage {} artefacts failed validation ({}); re-running", stage, e.what());
        }
    }
    rec.status = StageStatus::pending;
    rec.hash = hash;
    rec.seed = stage_seed(stage);
    rec.started_at = utc_timestamp();
    rec.artifacts = json::object();
    const auto t0 = std::chrono::steady_clock::now();
    try {
        spdlog::info("stage {}: running", stage);
        execute(stage, rec);
        validate_stage(stage);
    } catch (...) {
        rec.status = StageStatus::failed;
        rec.finished_at = utc_timestamp();
        m_record.save(run_dir());
        throw;
    }
    rec.status = StageStatus::complete;
    rec.finished_at = utc_timestamp();
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& d : downstream_of(stage)) {
        if (d == stage) continue;
        auto& r = m_record.stages.at(d);
        if (r.status == StageStatus::complete && r.hash != stage_hash(d)) {
            r.status = StageStatus::stale;
            spdlog::info("stage {} invalidated by {}", d, stage);
        }
    }
    m_record.save(run_dir());
    spdlog::info("stage {}: complete in {:.1f}s", stage, rec.seconds);
    return true;
}

void Orchestrator::run_through(const std::optional<std::string>& target) {
    if (target) stage_info(*target);
    for (const auto& s : stage_graph()) {
        run_stage(s.name);
        if (target && s.name == *target) break;
    }
}

// ---------------------------------------------------------------- stages

namespace {

// Rewrites every non-generated ref so it resolves from `to_dir`.
DatasetManifest rebase(DatasetManifest m, const fs::path& from_dir, const fs::path& to_dir) {
    for (auto& r : m.records) r.image_ref = relative_ref(generative::resolve_ref(from_dir, r.image_ref), to_dir);
    return m;
}

fs::path seed_dir(const fs::path& run_dir, const std::string& method, int k) {
    return run_dir / "classifiers" / method / ("seed-" + std::to_string(k));
}

}  // namespace

void Orchestrator::execute(const std::string& stage, StageRecord& rec) {
    const fs::path run = run_dir();
    const fs::path dataset_dir = run / "dataset";
    const fs::path pipeline_dir = run / "pipeline";
    const pipeline::PipelineConfig pcfg = pipeline_config();

    if (stage == "datasets") {
        m_dataset.reset();
        const std::string kind = m_cfg.dataset.at("kind").get<std::string>();
        DatasetManifest m;
        if (kind == "synthetic") {
            auto spec = datasets::synth_spec_from_json(m_cfg.dataset.value("synthetic", json::object()));
            spec.noise_seed = stage_seed("datasets");
            m = datasets::synth_dataset(spec, dataset_dir);
        } else if (kind == "plan") {
            const auto plan = datasets::load_plan(m_cfg.resolve(m_cfg.dataset.at("plan").get<std::string>()));
            const fs::path metadata = m_cfg.resolve(m_cfg.dataset.at("metadata").get<std::string>());
            const fs::path image_root = m_cfg.dataset.contains("image_root")
                                            ? m_cfg.resolve(m_cfg.dataset.at("image_root").get<std::string>())
                                            : metadata.parent_path();
            datasets::BuildOptions opts;
            if (m_cfg.dataset.value("check_images", true)) opts.image_root = image_root;
            m = rebase(datasets::build_manifest(Table::read(metadata), plan, opts), image_root, dataset_dir);
            datasets::write_manifest(dataset_dir / "manifest.jsonl", m);
        } else {
            const fs::path src = m_cfg.resolve(m_cfg.dataset.at("manifest").get<std::string>());
            m = rebase(datasets::read_manifest(src), src.parent_path(), dataset_dir);
            datasets::write_manifest(dataset_dir / "manifest.jsonl", m);
        }
        json counts = json::object();
        for (auto s : datasets::kAllSplits) counts[std::string(datasets::to_string(s))] = m.count(s);
        rec.artifacts = {{"manifest", "dataset/manifest.jsonl"}, {"split_counts", counts}};
        return;
    }
    if (stage == "masks") {
        const auto out = pipeline::compute_masks(pcfg, dataset_manifest(), dataset_dir, pipeline_dir);
        rec.artifacts = {{"index", "pipeline/masks/index.json"}, {"empty_masks", out.skipped.size()}};
        return;
    }
    if (stage == "finetune-source") {
        const auto h = pipeline::finetune_source_stage(pcfg, dataset_manifest(), dataset_dir, pipeline_dir, registry());
        rec.artifacts = {{"handle", "pipeline/models/source"}, {"checksum", h.checksum}};
        return;
    }
    if (stage == "finetune-target") {
        const auto source = generative::ModelHandle::load(pipeline_dir / "models" / "source");
        const auto bgs = pipeline::extract_backgrounds(pcfg, dataset_manifest(), dataset_dir, pipeline_dir);
        const auto h = pipeline::finetune_target_stage(pcfg, source, bgs, pipeline_dir, registry());
        rec.artifacts = {{"handle", "pipeline/models/target"}, {"backgrounds", bgs.size()}, {"checksum", h.checksum}};
        return;
    }
    if (stage == "generate") {
        const auto out = pipeline::run_pipeline(pcfg, dataset_manifest(), dataset_dir, pipeline_dir, registry());
        rec.artifacts = {{"manifest", "pipeline/manifest.jsonl"},
                         {"results", "pipeline/results.jsonl"},
                         {"run_meta", "pipeline/run_meta.json"},
                         {"generated", out.generation_ids.size()},
                         {"skipped", out.skipped.size()}};
        if (out.queue_id) rec.artifacts["queue"] = "pipeline/review/" + *out.queue_id;
        return;
    }
    if (stage == "merge") {
        const DatasetManifest augmented = datasets::read_manifest(pipeline_dir / "manifest.jsonl");
        DatasetManifest merged;
        if (pcfg.review == pipeline::ReviewMode::automatic) {
            merged = pipeline::merge_approved(augmented, review::ReviewQueue{}, true);
        } else {
            const json meta = read_json_file(pipeline_dir / "run_meta.json");
            const std::string qid = meta.at("queue_id").get<std::string>();
            merged = pipeline::merge_approved(augmented, review::load_queue(pipeline_dir / "review" / qid));
        }
        merged = rebase(std::move(merged), pipeline_dir, run / "merged");
        datasets::write_manifest(run / "merged" / "manifest.jsonl", merged);
        std::size_t generated = 0;
        for (const auto& r : merged.records) generated += r.generated() ? 1 : 0;
        rec.artifacts = {{"manifest", "merged/manifest.jsonl"}, {"generated", generated}};
        return;
    }
    if (stage == "train") {
        const std::uint64_t train_seed = stage_seed("train");
        json handles = json::object();
        for (const auto& method : m_cfg.methods) {
            DatasetManifest m = dataset_manifest();
            fs::path dir = dataset_dir;
            classifier::TrainOptions opts;
            if (method == "maskpaint") {
                dir = run / "merged";
                m = datasets::read_manifest(dir / "manifest.jsonl");
            } else if (method == "masked") {
                dir = run / "baselines" / "masked";
                m = baselines::masked_baseline(dataset_manifest(), dataset_dir, pipeline_dir / "masks", dir).manifest;
            } else if (method == "mixup") {
                opts.batch_transform = baselines::mixup_transform();
            } else if (method == "cutmix") {
                opts.batch_transform = baselines::cutmix_transform();
            }
            for (int k = 0; k < m_cfg.train_seeds; ++k) {
                classifier::TrainConfig tc = m_cfg.classifier;
                tc.seed = derive_seed(train_seed, static_cast<std::uint64_t>(k));
                const fs::path out = seed_dir(run, method, k);
                classifier::train(m, dir, tc, out, opts);
                handles[method].push_back(relative_ref(out, run));
            }
        }
        rec.artifacts = {{"handles", handles}};
        return;
    }
    if (stage == "eval") {
        json reports = json::object();
        fs::create_directories(run / "reports");
        for (const auto& method : m_cfg.methods) {
            std::vector<std::uint64_t> seeds;
            std::map<std::string, std::map<std::string, std::vector<double>>> values;
            json per_seed = json::array();
            for (int k = 0; k < m_cfg.train_seeds; ++k) {
                const auto handle = classifier::ClassifierHandle::load(seed_dir(run, method, k));
                seeds.push_back(handle.config.seed);
                json row = {{"seed", handle.config.seed}};
                for (std::optional<datasets::Domain> d :
                     {std::optional<datasets::Domain>(datasets::Domain::source),
                      std::optional<datasets::Domain>(datasets::Domain::target), std::optional<datasets::Domain>()}) {
                    const auto e = classifier::evaluate(handle, dataset_manifest(), dataset_dir, d);
                    values[e.domain][e.metric].push_back(e.value);
                    row[e.domain] = {{e.metric, e.value}};
                }
                per_seed.push_back(row);
            }
            const auto report = classifier::build_report(method_title(method), seeds, values);
            json j = report.to_json();
            j["per_seed"] = per_seed;
            write_json_file(run / "reports" / (method + ".json"), j);
            reports[method] = "reports/" + method + ".json";
        }
        rec.artifacts = {{"reports", reports}};
        return;
    }
    if (stage == "analyze") {
        std::vector<std::pair<std::string, classifier::EvalReport>> rows;
        for (const auto& method : m_cfg.methods)
            rows.emplace_back(method_title(method),
                              classifier::EvalReport::from_json(read_json_file(run / "reports" / (method + ".json"))));
        const auto table = analysis::render_table(rows);
        write_text_atomic(run / "reports" / "table.md", table.text());
        write_text_atomic(run / "reports" / "table.tex", table.latex());
        rec.artifacts = {{"table_text", "reports/table.md"}, {"table_latex", "reports/table.tex"}};
        if (m_cfg.flip_attribute) {
            classifier::TrainConfig tc = m_cfg.attribute_classifier;
            tc.seed = derive_seed(stage_seed("analyze"), "attribute");
            const auto model = analysis::train_attribute_classifier(dataset_manifest(), dataset_dir,
                                                                    *m_cfg.flip_attribute, tc, run / "analysis" / "attribute");
            analysis::flip_rates(analysis::load_results(pipeline_dir), pipeline_dir, dataset_manifest(), model,
                                 run / "analysis" / "flips");
            rec.artifacts["attribute_model"] = "analysis/attribute";
            rec.artifacts["flips"] = "analysis/flips/flips.json";
        }
        return;
    }
    raise(Errc::config_invalid, "unknown stage '" + stage + "'");
}

void Orchestrator::validate_stage(const std::string& stage) const {
    const fs::path run = run_dir();
    auto need = [](const fs::path& p) {
        if (!fs::exists(p)) raise(Errc::io_failure, "missing artefact " + p.string());
    };
    if (stage == "datasets") {
        datasets::validate_manifest(datasets::read_manifest(run / "dataset" / "manifest.jsonl"));
    } else if (stage == "masks") {
        const fs::path dir = run / "pipeline" / "masks";
        const json index = read_json_file(dir / "index.json");
        for (auto it = index.begin(); it != index.end(); ++it)
            if (it.value().value("status", "") == "ok") need(masking::StoredMaskSegmenter::mask_path(dir, it.key()));
    } else if (stage == "finetune-source") {
        generative::ModelHandle::load(run / "pipeline" / "models" / "source");
    } else if (stage == "finetune-target") {
        generative::ModelHandle::load(run / "pipeline" / "models" / "target");
    } else if (stage == "generate") {
        const auto m = datasets::read_manifest(run / "pipeline" / "manifest.jsonl");
        datasets::validate_manifest(m);
        for (const auto& r : m.records)
            if (r.generated()) pipeline::load_result(run / "pipeline", r.provenance->result_ref);
        read_json_file(run / "pipeline" / "run_meta.json");
    } else if (stage == "merge") {
        datasets::validate_manifest(datasets::read_manifest(run / "merged" / "manifest.jsonl"));
    } else if (stage == "train") {
        for (const auto& method : m_cfg.methods)
            for (int k = 0; k < m_cfg.train_seeds; ++k) classifier::ClassifierHandle::load(seed_dir(run, method, k));
    } else if (stage == "eval") {
        for (const auto& method : m_cfg.methods)
            classifier::EvalReport::from_json(read_json_file(run / "reports" / (method + ".json"))).validate();
    } else if (stage == "analyze") {
        need(run / "reports" / "table.md");
        need(run / "reports" / "table.tex");
        if (m_cfg.flip_attribute) read_json_file(run / "analysis" / "flips" / "flips.json");
    } else {
        raise(Errc::config_invalid, "unknown stage '" + stage + "'");
    }
}

}  // namespace maskpaint::orchestrator
